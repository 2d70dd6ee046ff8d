"""Built-in property suites backing ``symrl verify <suite>``.

Every check compares library output against an oracle that does not share
its code path: central finite differences, case-by-case closed forms written
out by hand, brute-force return sums, or binomial bounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from symrl import nn
from symrl.advantages import GaeConfig, compute_gae, normalize_advantages, predicted_flips
from symrl.distributions import ActionDistribution
from symrl.envs import NoiseChannel
from symrl.losses import (
    LossSample,
    SymmetricLossConfig,
    analytic_logit_gradient,
    forward_logit_gradient,
    ra2c_loss,
    reverse_logit_gradient,
    symmetric_loss,
)

SUITES = ("gradients", "losses", "advantage", "noise")


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


# random loss cases -------------------------------------------------------


@dataclass(frozen=True)
class LossCase:
    logits: np.ndarray
    action: int
    advantage: float
    old_prob: float

    def sample(self, logits=None) -> LossSample:
        z = self.logits if logits is None else logits
        return LossSample(ActionDistribution.from_logits(z), self.action, self.advantage, self.old_prob)


def _unclipped(prob: float, old: float, A: float, eps: float) -> bool:
    ratio = prob / old
    return ratio <= 1 + eps if A > 0 else ratio >= 1 - eps


def random_cases(n: int, rng: np.random.Generator, unclipped_eps: float | None = 0.2) -> list[LossCase]:
    """k in [2, 8], A in [-3, 3] minus zero, pi_old in [0.05, 1].

    With ``unclipped_eps`` set, cases whose PPO term would be clipped are
    redrawn so that every case exercises the live branch.
    """
    cases = []
    while len(cases) < n:
        k = int(rng.integers(2, 9))
        z = rng.normal(0.0, 1.5, size=k)
        y = int(rng.integers(k))
        A = float(rng.uniform(-3.0, 3.0))
        old = float(rng.uniform(0.05, 1.0))
        if A == 0:
            continue
        if unclipped_eps is not None:
            p = np.exp(z - z.max())
            p /= p.sum()
            if not _unclipped(p[y], old, A, unclipped_eps):
                continue
        cases.append(LossCase(z, y, A, old))
    return cases


def fd_logit_gradient(case: LossCase, cfg: SymmetricLossConfig, part: str = "total", h: float = 1e-5) -> np.ndarray:
    """Central differences of one field of :func:`symmetric_loss` in the logits."""
    grad = np.zeros_like(case.logits)
    for j in range(case.logits.size):
        zp, zm = case.logits.copy(), case.logits.copy()
        zp[j] += h
        zm[j] -= h
        f_plus = getattr(symmetric_loss(case.sample(zp), cfg), part)
        f_minus = getattr(symmetric_loss(case.sample(zm), cfg), part)
        grad[j] = (f_plus - f_minus) / (2 * h)
    return grad


def relative_error(a, b, floor: float = 1e-6) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float((np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)).max())


# name -> (algorithm, alpha, beta, differentiated part)
LOSS_VARIANTS = {
    "a2c": ("A2C", 1.0, 0.0, "forward_part"),
    "ra2c": ("A2C", 1.0, 1.0, "reverse_part"),
    "sa2c": ("A2C", 0.5, 1.0, "total"),
    "ppo": ("PPO", 1.0, 0.0, "forward_part"),
    "rppo": ("PPO", 1.0, 1.0, "reverse_part"),
    "sppo": ("PPO", 0.5, 10.0, "total"),
}


def _part_gradient(s: LossSample, cfg: SymmetricLossConfig, part: str) -> np.ndarray:
    if part == "forward_part":
        return forward_logit_gradient(s, cfg)
    if part == "reverse_part":
        return reverse_logit_gradient(s, cfg)
    return analytic_logit_gradient(s, cfg)


def gradient_sweep(n: int = 1000, seed: int = 0, tol: float = 1e-4) -> list[Check]:
    rng = np.random.default_rng(seed)
    cases = random_cases(n, rng)
    checks = []
    for name, (algo, alpha, beta, part) in LOSS_VARIANTS.items():
        cfg = SymmetricLossConfig(alpha=alpha, beta=beta, Z=-1.0, clip_epsilon=0.2, algorithm=algo)
        worst = max(
            relative_error(_part_gradient(c.sample(), cfg, part), fd_logit_gradient(c, cfg, part)) for c in cases
        )
        checks.append(Check(f"logit gradient {name} vs finite differences ({n} cases)", worst <= tol, f"max rel error {worst:.2e}"))
    return checks


def network_gradient_check(seed: int = 0, tol: float = 1e-6) -> Check:
    rng = np.random.default_rng(seed)
    spec = nn.NetworkSpec(3, (("a", 4), ("b", 1)), ((5, "tanh"), (4, "tanh")))
    params = nn.init_params(spec, rng)
    x = rng.normal(size=(6, 3))
    ga, gb = rng.normal(size=(6, 4)), rng.normal(size=(6, 1))

    def loss(p):
        out = nn.forward(spec, p, x)
        return float((out["a"] * ga).sum() + (out["b"] * gb).sum())

    analytic = nn.backward(spec, params, x, {"a": ga, "b": gb})
    numeric = nn.finite_difference_gradient(loss, params, step=1e-6)
    report = nn.compare_gradients(analytic, numeric, floor=1e-6)
    return Check("network backprop vs finite differences", report.max_rel_diff <= tol, f"max rel error {report.max_rel_diff:.2e}")


def suite_gradients() -> list[Check]:
    return gradient_sweep() + [network_gradient_check()]


# closed forms ------------------------------------------------------------


def closed_form_forward(pi: np.ndarray, i: int, A: float, old: float | None) -> np.ndarray:
    """Forward-loss logit gradient written out per component."""
    g = np.empty_like(pi)
    for y in range(pi.size):
        if old is None:
            g[y] = A * (pi[i] - 1) if y == i else A * pi[y]
        else:
            g[y] = A * pi[i] * (pi[i] - 1) / old if y == i else A * pi[i] * pi[y] / old
    return g


def closed_form_reverse(pi: np.ndarray, i: int, A: float, Z: float, old: float | None) -> np.ndarray:
    """Reverse-loss logit gradient with the direction following the advantage sign."""
    scale = 1.0 if old is None else 1.0 / old
    g = np.empty_like(pi)
    for y in range(pi.size):
        g[y] = -A * Z * pi[y] * (pi[y] - 1) if y == i else -A * Z * pi[y] * pi[i]
    return g * scale


def closed_form_checks(n: int = 1000, seed: int = 0, tol: float = 1e-12) -> list[Check]:
    rng = np.random.default_rng(seed)
    cases = random_cases(n, rng)
    worst = {"a2c": 0.0, "ra2c": 0.0, "ppo": 0.0, "rppo": 0.0}
    for c in cases:
        s = c.sample()
        pi = s.dist.probs
        for algo, old in (("A2C", None), ("PPO", c.old_prob)):
            cfg = SymmetricLossConfig(alpha=1.0, beta=1.0, Z=-1.0, algorithm=algo)
            fwd = forward_logit_gradient(s, cfg)
            rev = reverse_logit_gradient(s, cfg)
            key = algo.lower()
            worst[key] = max(worst[key], float(np.abs(fwd - closed_form_forward(pi, c.action, c.advantage, old)).max()))
            worst["r" + key] = max(
                worst["r" + key], float(np.abs(rev - closed_form_reverse(pi, c.action, c.advantage, -1.0, old)).max())
            )
    return [
        Check(f"{k} gradient equals closed form ({n} cases)", v <= tol, f"max abs diff {v:.2e}")
        for k, v in worst.items()
    ]


def ra2c_summation_check(n: int = 10_000, seed: int = 1, tol: float = 1e-12) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for c in random_cases(n, rng, unclipped_eps=None):
        s = c.sample()
        expected = abs(c.advantage) * 1.0 * (1.0 - s.prob)
        worst = max(worst, abs(ra2c_loss(s, Z=-1.0) - expected))
    return Check(f"reverse A2C summation equals |A||Z|(1-pi_i) ({n} cases)", worst <= tol, f"max abs diff {worst:.2e}")


def alignment_check(n: int = 10_000, seed: int = 2) -> Check:
    rng = np.random.default_rng(seed)
    violations = compared = 0
    for c in random_cases(n, rng, unclipped_eps=None):
        s = c.sample()
        for algo in ("A2C", "PPO"):
            cfg = SymmetricLossConfig(alpha=1.0, beta=1.0, algorithm=algo)
            f, r = forward_logit_gradient(s, cfg), reverse_logit_gradient(s, cfg)
            both = (f != 0) & (r != 0)
            compared += int(both.sum())
            violations += int((np.sign(f[both]) != np.sign(r[both])).sum())
    return Check(
        f"forward and reverse gradients share signs ({n} cases)", violations == 0,
        f"{violations} violations over {compared} component pairs",
    )


def accelerator_peak() -> tuple[float, np.ndarray, np.ndarray]:
    """Scan |d reverse A2C / dz_i| at the taken action over pi_i in 0.01..0.99."""
    grid = np.round(np.arange(1, 100) / 100, 2)
    cfg = SymmetricLossConfig(alpha=1.0, beta=1.0, Z=-1.0, algorithm="A2C")
    mags = np.empty(grid.size)
    for j, p in enumerate(grid):
        s = LossSample(ActionDistribution.from_probs([p, 1 - p]), 0, 1.0)
        mags[j] = abs(reverse_logit_gradient(s, cfg)[0])
    return float(grid[int(np.argmax(mags))]), grid, mags


def accelerator_check() -> Check:
    peak, _, _ = accelerator_peak()
    return Check("reverse gradient magnitude peaks at pi=0.5", abs(peak - 0.5) <= 0.01 + 1e-12, f"peak at {peak:.2f}")


def suite_losses() -> list[Check]:
    return [ra2c_summation_check()] + closed_form_checks() + [alignment_check(), accelerator_check()]


# advantages --------------------------------------------------------------


def flip_predictor_check(n: int = 10_000, seed: int = 3) -> Check:
    rng = np.random.default_rng(seed)
    mismatches = 0
    for _ in range(n):
        size = int(rng.integers(2, 65))
        raw = rng.normal(rng.normal(), rng.uniform(0.1, 3.0), size=size)
        normalized, _ = normalize_advantages(raw)
        direct = (np.sign(raw) != np.sign(normalized)) & (raw != 0)
        mismatches += int((direct != predicted_flips(raw)).sum())
    return Check(f"sign-flip predictor matches normalization ({n} batches)", mismatches == 0, f"{mismatches} mismatches")


def monte_carlo_advantages(rewards, values) -> np.ndarray:
    """Undiscounted return-to-go minus value, one terminal episode."""
    return np.array([sum(rewards[t:]) for t in range(len(rewards))]) - np.asarray(values)


def gae_check(n: int = 100, steps: int = 6, seed: int = 4, tol: float = 1e-10) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    cfg = GaeConfig(gamma=1.0, lam=1.0)
    for _ in range(n):
        r = rng.normal(size=steps)
        v = rng.normal(size=steps)
        dones = np.zeros(steps)
        dones[-1] = 1.0
        est = compute_gae(r, v, rng.normal(), dones, cfg)
        worst = max(worst, float(np.abs(est.raw - monte_carlo_advantages(r, v)).max()))
    return Check(f"GAE(1, 1) equals Monte-Carlo advantages ({n} episodes)", worst <= tol, f"max abs diff {worst:.2e}")


def suite_advantage() -> list[Check]:
    return [flip_predictor_check(), gae_check()]


# noise -------------------------------------------------------------------


def bsc_rate(trials: int = 100_000, p: float = 0.1, seed: int = 5) -> float:
    ch = NoiseChannel("bsc", p=p, rng=np.random.default_rng(seed))
    clean = np.random.default_rng(seed + 1).integers(0, 2, size=trials).astype(float)
    return float(np.mean(ch(clean) != clean))


def gaussian_std(trials: int = 100_000, sigma: float = 0.05, seed: int = 6) -> float:
    ch = NoiseChannel("gaussian", sigma=sigma, rng=np.random.default_rng(seed))
    clean = np.linspace(-1.0, 1.0, trials)
    return float(np.std(ch(clean) - clean, ddof=1))


def suite_noise() -> list[Check]:
    trials = 100_000
    rate = bsc_rate(trials)
    three_sigma = 3 * np.sqrt(0.1 * 0.9 / trials)
    std = gaussian_std(trials)
    return [
        Check("bsc(0.1) empirical flip rate within 3 sigma", bool(abs(rate - 0.1) <= three_sigma), f"rate {rate:.5f} (bound {three_sigma:.5f})"),
        Check("gaussian(0.05) sample std within 0.001", abs(std - 0.05) <= 0.001, f"std {std:.5f}"),
    ]


def run_suite(name: str) -> list[Check]:
    suites = {
        "gradients": suite_gradients,
        "losses": suite_losses,
        "advantage": suite_advantage,
        "noise": suite_noise,
    }
    if name not in suites:
        raise KeyError(name)
    return suites[name]()
