"""On-policy training loops for A2C/SA2C and PPO/SPPO on numpy networks."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from symrl import nn
from symrl.advantages import GaeConfig, compute_gae, normalize_advantages
from symrl.distributions import Discretizer, sample_batch, softmax
from symrl.envs import Env, NoiseChannel, make_env
from symrl.errors import ContractViolation, NumericError
from symrl.losses import SymmetricLossConfig, policy_terms

# rng stream ids derived from the run seed
_STREAM_INIT, _STREAM_ACT, _STREAM_NOISE, _STREAM_SHUFFLE, _STREAM_EVAL, _STREAM_PROBE = range(6)
_STREAM_ENV0 = 16


def stream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for stream ``index`` of run ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


@dataclass(frozen=True)
class TrainerConfig:
    algorithm: str = "PPO"
    loss: SymmetricLossConfig = SymmetricLossConfig()
    gae: GaeConfig = GaeConfig(normalize=True)
    n_envs: int = 8
    n_steps: int = 64
    epochs_per_update: int = 4
    minibatch_size: int = 128
    learning_rate: float = 3e-4
    total_updates: int = 100
    entropy_coef: float = 0.0
    value_coef: float = 0.5
    max_grad_norm: float | None = 0.5
    seed: int = 0
    reverse_term: bool = True
    bins: int = 11
    hidden: tuple[int, ...] = (64, 64)
    eval_every: int = 10
    eval_episodes: int = 10
    eval_greedy: bool = False
    debug_gradient_probe: bool = False
    record_timing: bool = False

    def __post_init__(self):
        if self.algorithm not in ("A2C", "PPO"):
            raise ContractViolation(f"unknown algorithm {self.algorithm!r}")
        if self.loss.algorithm != self.algorithm:
            object.__setattr__(self, "loss", replace(self.loss, algorithm=self.algorithm))
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.algorithm == "A2C":
            object.__setattr__(self, "epochs_per_update", 1)
            object.__setattr__(self, "minibatch_size", self.batch_size)
        for name in ("n_envs", "n_steps", "epochs_per_update", "minibatch_size", "total_updates", "eval_episodes"):
            if getattr(self, name) < 1:
                raise ContractViolation(f"{name} must be >= 1")

    @property
    def batch_size(self) -> int:
        return self.n_envs * self.n_steps

    @classmethod
    def a2c(cls, alpha=1.0, beta=0.0, **kw) -> "TrainerConfig":
        kw.setdefault("learning_rate", 7e-4)
        return cls(
            algorithm="A2C",
            loss=SymmetricLossConfig(alpha=alpha, beta=beta, algorithm="A2C"),
            gae=kw.pop("gae", GaeConfig(gamma=0.99, lam=1.0, normalize=False)),
            n_envs=kw.pop("n_envs", 4),
            n_steps=kw.pop("n_steps", 8),
            reverse_term=kw.pop("reverse_term", beta > 0),
            **kw,
        )

    @classmethod
    def ppo(cls, alpha=1.0, beta=0.0, **kw) -> "TrainerConfig":
        return cls(
            algorithm="PPO",
            loss=SymmetricLossConfig(alpha=alpha, beta=beta, clip_epsilon=kw.pop("clip_epsilon", 0.2), algorithm="PPO"),
            reverse_term=kw.pop("reverse_term", beta > 0),
            **kw,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainerConfig":
        d = dict(d)
        algorithm = d.get("algorithm", "PPO")
        loss = dict(d.pop("loss", {}) or {})
        loss.setdefault("algorithm", algorithm)
        gae = d.pop("gae", None)
        if gae is None:
            gae = {"normalize": algorithm == "PPO"}
        return cls(loss=SymmetricLossConfig(**loss), gae=GaeConfig(**gae), **d)


class Policy:
    """Separate tanh MLPs for the categorical policy heads and the value."""

    def __init__(self, obs_dim: int, action_dims, hidden=(64, 64), discretizer: Discretizer | None = None):
        self.action_dims = tuple(int(k) for k in action_dims)
        self.discretizer = discretizer
        trunk = tuple((h, "tanh") for h in hidden)
        self.heads = tuple(f"pi{d}" for d in range(len(self.action_dims)))
        self.policy_spec = nn.NetworkSpec(obs_dim, tuple(zip(self.heads, self.action_dims)), trunk)
        self.value_spec = nn.NetworkSpec(obs_dim, (("v", 1),), trunk)
        self.n_policy = self.policy_spec.num_params
        self.num_params = self.n_policy + self.value_spec.num_params

    @classmethod
    def for_env(cls, env: Env, hidden=(64, 64), bins: int = 11) -> "Policy":
        if env.n_actions is not None:
            return cls(env.obs_dim, (env.n_actions,), hidden)
        disc = Discretizer(env.action_low, env.action_high, bins)
        return cls(env.obs_dim, tuple(int(b) for b in disc.bins), hidden, disc)

    def init(self, rng: np.random.Generator) -> np.ndarray:
        pi = nn.init_params(self.policy_spec, rng, 1.0, {h: 0.01 for h in self.heads})
        vf = nn.init_params(self.value_spec, rng, 1.0, {"v": 1.0})
        return np.concatenate([pi.values, vf.values])

    def split(self, theta: np.ndarray) -> tuple[nn.ParameterVector, nn.ParameterVector]:
        return (
            nn.ParameterVector(theta[: self.n_policy], self.policy_spec.layout()),
            nn.ParameterVector(theta[self.n_policy :], self.value_spec.layout()),
        )

    def probs(self, theta, obs) -> list[np.ndarray]:
        pi, _ = self.split(theta)
        out = nn.forward(self.policy_spec, pi, obs)
        return [softmax(out[h]) for h in self.heads]

    def value(self, theta, obs) -> np.ndarray:
        _, vf = self.split(theta)
        return nn.forward(self.value_spec, vf, obs)["v"][..., 0]

    def to_env_action(self, action_row: np.ndarray):
        if self.discretizer is None:
            return int(action_row[0])
        return self.discretizer.decode(action_row)

    def to_env_actions(self, actions: np.ndarray) -> list:
        if self.discretizer is None:
            return [int(a) for a in actions[:, 0]]
        return list(self.discretizer.decode(actions))

    def greedy(self, theta, obs) -> np.ndarray:
        return np.stack([p.argmax(axis=-1) for p in self.probs(theta, obs)], axis=-1)

    def sample(self, theta, obs, rng) -> tuple[np.ndarray, np.ndarray]:
        """Sampled action indices ``(B, D)`` and the probability of each taken index."""
        probs = self.probs(theta, obs)
        actions = np.stack([sample_batch(p, rng) for p in probs], axis=-1)
        rows = np.arange(actions.shape[0])
        taken = np.stack([p[rows, actions[:, d]] for d, p in enumerate(probs)], axis=-1)
        return actions, taken


@dataclass
class TransitionBatch:
    """Rollout arrays indexed ``[step, env, ...]``."""

    observations: np.ndarray
    action_indices: np.ndarray
    old_probs: np.ndarray
    clean_rewards: np.ndarray
    noisy_rewards: np.ndarray
    value_predictions: np.ndarray
    dones: np.ndarray
    bootstrap_values: np.ndarray
    truncation_bonus: np.ndarray
    episode_returns: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return self.dones.size


@dataclass
class UpdateMetrics:
    update: int
    env_steps: int
    mean_return_clean: float | None
    loss_forward: float
    loss_reverse: float
    loss_value: float
    entropy: float
    adv_sign_flip_rate: float | None
    clipped_fraction: float
    grad_norm: float
    seconds: float | None = None
    eval_return_mean: float | None = None
    eval_return_se: float | None = None
    eval_returns: list[float] | None = None
    grad_probe_rel_error: float | None = None

    def to_record(self) -> dict:
        return asdict(self)


def mean_and_se(returns) -> tuple[float, float]:
    r = np.asarray(returns, dtype=np.float64)
    if r.size < 1:
        raise ContractViolation("need at least one return")
    se = float(r.std(ddof=1) / np.sqrt(r.size)) if r.size > 1 else 0.0
    return float(r.mean()), se


def evaluate(policy: Policy, theta, env_name: str, episodes: int, seed: int, greedy: bool = False):
    """Clean-reward returns of ``episodes`` episodes run side by side.

    Returns ``(mean, standard_error, returns)``.
    """
    if episodes < 1:
        raise ContractViolation("episodes must be >= 1")
    rng = stream(seed, _STREAM_EVAL)
    envs = [make_env(env_name) for _ in range(episodes)]
    obs = np.stack([e.reset(stream(seed, _STREAM_ENV0 + 1000 + i)) for i, e in enumerate(envs)])
    returns = np.zeros(episodes)
    live = np.ones(episodes, dtype=bool)
    while live.any():
        idx = np.flatnonzero(live)
        if greedy:
            actions = policy.greedy(theta, obs[idx])
        else:
            actions, _ = policy.sample(theta, obs[idx], rng)
        env_actions = policy.to_env_actions(actions)
        for row, i in enumerate(idx):
            res = envs[i].step(env_actions[row])
            returns[i] += res.reward
            obs[i] = res.next_observation
            if res.done:
                live[i] = False
    mean, se = mean_and_se(returns)
    return mean, se, returns.tolist()


class Trainer:
    """Owns parameters, optimizer state, environments and random streams for one run."""

    def __init__(self, env_name: str, cfg: TrainerConfig, noise: NoiseChannel | None = None):
        self.cfg = cfg
        self.env_name = env_name
        self.envs = [make_env(env_name) for _ in range(cfg.n_envs)]
        noise = noise or NoiseChannel("none")
        if noise.kind == "bsc" and not self.envs[0].binary_rewards:
            raise ContractViolation(f"bsc noise needs {{0,1}} rewards; {env_name} does not have them")
        self.noise = noise.reseed(stream(cfg.seed, _STREAM_NOISE))
        self.policy = Policy.for_env(self.envs[0], cfg.hidden, cfg.bins)
        self.theta = self.policy.init(stream(cfg.seed, _STREAM_INIT))
        self.optimizer = nn.Adam(self.policy.num_params, cfg.learning_rate)
        self.act_rng = stream(cfg.seed, _STREAM_ACT)
        self.shuffle_rng = stream(cfg.seed, _STREAM_SHUFFLE)
        self.probe_rng = stream(cfg.seed, _STREAM_PROBE)
        self.obs = np.stack([e.reset(stream(cfg.seed, _STREAM_ENV0 + i)) for i, e in enumerate(self.envs)])
        self.running_returns = np.zeros(cfg.n_envs)
        self.recent_returns: list[float] = []
        self.updates_done = 0
        self.env_steps = 0

    # rollout ---------------------------------------------------------------

    def collect_rollout(self) -> TransitionBatch:
        cfg, policy = self.cfg, self.policy
        T, N, D = cfg.n_steps, cfg.n_envs, len(policy.action_dims)
        obs_buf = np.zeros((T, N, self.obs.shape[1]))
        act_buf = np.zeros((T, N, D), dtype=np.int64)
        prob_buf = np.zeros((T, N, D))
        clean = np.zeros((T, N))
        values = np.zeros((T, N))
        dones = np.zeros((T, N))
        bonus = np.zeros((T, N))
        finished = []
        for t in range(T):
            actions, taken = policy.sample(self.theta, self.obs, self.act_rng)
            obs_buf[t] = self.obs
            act_buf[t] = actions
            prob_buf[t] = taken
            values[t] = policy.value(self.theta, self.obs)
            truncated_obs = {}
            env_actions = policy.to_env_actions(actions)
            for i, env in enumerate(self.envs):
                res = env.step(env_actions[i])
                clean[t, i] = res.reward
                self.running_returns[i] += res.reward
                dones[t, i] = res.done
                if res.done:
                    if res.truncated:
                        truncated_obs[i] = res.next_observation
                    finished.append(float(self.running_returns[i]))
                    self.running_returns[i] = 0.0
                    self.obs[i] = env.reset()
                else:
                    self.obs[i] = res.next_observation
            if truncated_obs:
                idx = sorted(truncated_obs)
                v_final = policy.value(self.theta, np.stack([truncated_obs[i] for i in idx]))
                bonus[t, idx] = cfg.gae.gamma * v_final
        noisy = np.asarray(self.noise(clean), dtype=np.float64)
        self.env_steps += T * N
        return TransitionBatch(
            observations=obs_buf,
            action_indices=act_buf,
            old_probs=prob_buf,
            clean_rewards=clean,
            noisy_rewards=noisy,
            value_predictions=values,
            dones=dones,
            bootstrap_values=policy.value(self.theta, self.obs),
            truncation_bonus=bonus,
            episode_returns=finished,
        )

    def advantages(self, batch: TransitionBatch):
        gae = replace(self.cfg.gae, normalize=False)
        est = compute_gae(
            batch.noisy_rewards + batch.truncation_bonus,
            batch.value_predictions,
            batch.bootstrap_values,
            batch.dones,
            gae,
        )
        return est.raw.reshape(-1), est.returns.reshape(-1)

    # loss and gradient -----------------------------------------------------

    def minibatch_loss(self, theta, obs, actions, old_probs, adv, returns):
        """Scalar minibatch objective, its gradient, and diagnostics."""
        cfg, policy = self.cfg, self.policy
        pi, vf = policy.split(theta)
        pi_out, pi_cache = nn.forward_cached(policy.policy_spec, pi, obs)
        v_out, v_cache = nn.forward_cached(policy.value_spec, vf, obs)
        probs = [softmax(pi_out[h]) for h in policy.heads]
        terms = policy_terms(
            probs, actions, adv, cfg.loss,
            old_probs=old_probs if cfg.algorithm == "PPO" else None,
            with_reverse=cfg.reverse_term,
        )
        B = adv.size
        n_active = max(int(terms.active.sum()), 1)
        loss_forward = float(terms.forward.sum() / n_active)
        loss_reverse = float(terms.reverse.sum() / n_active)
        policy_loss = cfg.loss.alpha * loss_forward + cfg.loss.beta * loss_reverse
        v = v_out["v"][:, 0]
        loss_value = float(np.mean((v - returns) ** 2))
        ent_rows = np.zeros(B)
        head_grads = {}
        for h, p, g in zip(policy.heads, probs, terms.logit_grads):
            logp = np.log(np.maximum(p, 1e-300))
            H = -(p * logp).sum(axis=1)
            ent_rows += H
            grad = g / n_active
            if cfg.entropy_coef:
                # d(-c * mean H)/dz = c * p * (log p + H) / B
                grad = grad + cfg.entropy_coef * p * (logp + H[:, None]) / B
            head_grads[h] = grad
        entropy = float(ent_rows.mean())
        total = policy_loss + cfg.value_coef * loss_value - cfg.entropy_coef * entropy
        if not np.isfinite(total):
            raise NumericError("non-finite training loss")
        g_pi = nn.backward_cached(policy.policy_spec, pi, pi_cache, head_grads)
        g_v = nn.backward_cached(
            policy.value_spec, vf, v_cache, {"v": (cfg.value_coef * 2.0 * (v - returns) / B)[:, None]}
        )
        grad = np.concatenate([g_pi.values, g_v.values])
        stats = {
            "loss_forward": loss_forward,
            "loss_reverse": loss_reverse,
            "loss_value": loss_value,
            "entropy": entropy,
            "clipped_fraction": float(terms.clipped.mean()),
        }
        return total, grad, stats

    def _probe(self, theta, grad, args) -> float:
        idx = self.probe_rng.choice(theta.size, size=3, replace=False)
        worst = 0.0
        h = 1e-5
        for i in idx:
            probe = theta.copy()
            probe[i] += h
            f_plus = self.minibatch_loss(probe, *args)[0]
            probe[i] -= 2 * h
            f_minus = self.minibatch_loss(probe, *args)[0]
            fd = (f_plus - f_minus) / (2 * h)
            rel = abs(fd - grad[i]) / max(abs(fd), abs(grad[i]), 1e-6)
            worst = max(worst, rel)
        if worst > 1e-3:
            raise NumericError(f"gradient probe mismatch: relative error {worst:.3g}")
        return worst

    def _apply(self, grad) -> float:
        clipped, norm = nn.clip_by_global_norm(grad, self.cfg.max_grad_norm)
        self.theta = self.optimizer.step(self.theta, clipped)
        return norm

    # updates ---------------------------------------------------------------

    def a2c_update(self, batch: TransitionBatch) -> UpdateMetrics:
        if self.cfg.algorithm != "A2C":
            raise ContractViolation("a2c_update needs algorithm A2C")
        return self._update(batch)

    def ppo_update(self, batch: TransitionBatch) -> UpdateMetrics:
        if self.cfg.algorithm != "PPO":
            raise ContractViolation("ppo_update needs algorithm PPO")
        return self._update(batch)

    def _update(self, batch: TransitionBatch) -> UpdateMetrics:
        cfg = self.cfg
        started = time.perf_counter()
        adv_all, ret_all = self.advantages(batch)
        obs = batch.observations.reshape(len(batch), -1)
        actions = batch.action_indices.reshape(len(batch), -1)
        old = batch.old_probs.reshape(len(batch), -1)
        n = adv_all.size
        sums: dict[str, float] = {}
        flips, norms, probes, count = [], [], [], 0
        for _ in range(cfg.epochs_per_update):
            order = self.shuffle_rng.permutation(n) if cfg.algorithm == "PPO" else np.arange(n)
            for start in range(0, n, cfg.minibatch_size):
                idx = order[start : start + cfg.minibatch_size]
                adv = adv_all[idx]
                if cfg.gae.normalize and idx.size > 1:
                    adv, rate = normalize_advantages(adv, cfg.gae.norm_epsilon)
                    flips.append(rate)
                args = (obs[idx], actions[idx], old[idx], adv, ret_all[idx])
                _, grad, stats = self.minibatch_loss(self.theta, *args)
                if cfg.debug_gradient_probe:
                    probes.append(self._probe(self.theta, grad, args))
                norms.append(self._apply(grad))
                for k, v in stats.items():
                    sums[k] = sums.get(k, 0.0) + v
                count += 1
        self.updates_done += 1
        self.recent_returns = (self.recent_returns + batch.episode_returns)[-10:]
        metrics = UpdateMetrics(
            update=self.updates_done,
            env_steps=self.env_steps,
            mean_return_clean=float(np.mean(self.recent_returns)) if self.recent_returns else None,
            loss_forward=sums["loss_forward"] / count,
            loss_reverse=sums["loss_reverse"] / count,
            loss_value=sums["loss_value"] / count,
            entropy=sums["entropy"] / count,
            adv_sign_flip_rate=float(np.mean(flips)) if flips else None,
            clipped_fraction=sums["clipped_fraction"] / count,
            grad_norm=float(np.mean(norms)),
            grad_probe_rel_error=max(probes) if probes else None,
        )
        if cfg.record_timing:
            metrics.seconds = time.perf_counter() - started
        return metrics

    def evaluate(self, episodes: int | None = None, seed: int | None = None):
        return evaluate(
            self.policy, self.theta, self.env_name,
            episodes or self.cfg.eval_episodes,
            self.cfg.seed if seed is None else seed,
            self.cfg.eval_greedy,
        )

    def step(self) -> UpdateMetrics:
        """Collect one rollout, update, and evaluate when the cadence says so."""
        started = time.perf_counter()
        batch = self.collect_rollout()
        metrics = self._update(batch)
        last = self.updates_done == self.cfg.total_updates
        if last or (self.cfg.eval_every and self.updates_done % self.cfg.eval_every == 0):
            mean, se, returns = self.evaluate(seed=self.cfg.seed * 1_000_003 + self.updates_done)
            metrics.eval_return_mean, metrics.eval_return_se, metrics.eval_returns = mean, se, returns
        if self.cfg.record_timing:
            metrics.seconds = time.perf_counter() - started
        return metrics

    def train(self):
        while self.updates_done < self.cfg.total_updates:
            yield self.step()


def train(env_name: str, cfg: TrainerConfig, noise: NoiseChannel | None = None) -> tuple[Trainer, list[UpdateMetrics]]:
    trainer = Trainer(env_name, cfg, noise)
    return trainer, list(trainer.train())
