"""Sample-wise A2C/PPO losses, their reverse counterparts, and logit gradients.

Sign convention for the reverse term
------------------------------------
``ra2c_loss`` and ``rppo_loss`` report the reverse loss value as written for
both advantage signs, which is ``|A| |Z| (1 - pi_i)`` (divided by ``pi_old`` for
PPO). The term that is actually *optimized* inside :func:`symmetric_loss` is
the positive-advantage branch extended to every advantage,
``-A Z (1 - pi_i)``. Its gradient is the reverse gradient whose direction
flips with the advantage sign and agrees componentwise with the forward
A2C/PPO gradient. The two coincide whenever ``A > 0``.

A sample with ``A == 0`` contributes no loss and no gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from symrl.distributions import ActionDistribution
from symrl.errors import ContractViolation, NumericError

ALGORITHMS = ("A2C", "PPO")


@dataclass(frozen=True)
class SymmetricLossConfig:
    alpha: float = 0.5
    beta: float = 1.0
    Z: float = -1.0
    clip_epsilon: float = 0.2
    algorithm: str = "PPO"

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ContractViolation(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if not self.alpha > 0:
            raise ContractViolation("alpha must be positive")
        if not self.beta >= 0:
            raise ContractViolation("beta must be non-negative")
        if not self.Z < 0:
            raise ContractViolation("Z stands in for log 0 and must be negative")
        if not 0 < self.clip_epsilon < 1:
            raise ContractViolation("clip_epsilon must lie in (0, 1)")


@dataclass(frozen=True)
class LossSample:
    dist: ActionDistribution
    action_index: int
    advantage: float
    old_prob: float = 1.0

    def __post_init__(self):
        if not 0 <= self.action_index < self.dist.k:
            raise ContractViolation(f"action index {self.action_index} outside [0, {self.dist.k})")
        if not np.isfinite(self.advantage):
            raise NumericError("advantage must be finite")

    @property
    def prob(self) -> float:
        return float(self.dist.probs[self.action_index])


@dataclass(frozen=True)
class LossValue:
    total: float
    forward_part: float
    reverse_part: float
    clipped: bool = False


def _check_old_prob(old_prob: float) -> None:
    if not 0 < old_prob <= 1:
        raise ContractViolation(f"old_prob must lie in (0, 1], got {old_prob}")


def a2c_loss(s: LossSample) -> float:
    p = s.prob
    if p <= 0:
        raise NumericError("log of a zero action probability")
    return -s.advantage * float(np.log(p))


def _residual_mass(s: LossSample) -> float:
    return float(np.delete(s.dist.probs, s.action_index).sum())


def ra2c_loss(s: LossSample, Z: float = -1.0) -> float:
    A = s.advantage
    if A == 0:
        return 0.0
    rest = _residual_mass(s)
    return -rest * A * Z if A > 0 else rest * A * Z


def _ppo_clip(ratio: float, A: float, eps: float) -> tuple[float, bool]:
    unclipped = ratio * A
    clipped = float(np.clip(ratio, 1.0 - eps, 1.0 + eps)) * A
    return min(unclipped, clipped), clipped < unclipped


def ppo_loss(s: LossSample, eps: float = 0.2) -> tuple[float, bool]:
    """Negated clipped surrogate; the flag is set when the clipped branch wins strictly."""
    _check_old_prob(s.old_prob)
    surrogate, clipped = _ppo_clip(s.prob / s.old_prob, s.advantage, eps)
    return -surrogate, clipped


def rppo_loss(s: LossSample, Z: float = -1.0, eps: float = 0.2) -> float:
    """Reverse PPO value; zero for samples whose PPO term is clipped."""
    _check_old_prob(s.old_prob)
    _, clipped = _ppo_clip(s.prob / s.old_prob, s.advantage, eps)
    if clipped:
        return 0.0
    return ra2c_loss(s, Z) / s.old_prob


def symmetric_loss(s: LossSample, cfg: SymmetricLossConfig) -> LossValue:
    A = s.advantage
    if A == 0:
        return LossValue(0.0, 0.0, 0.0, False)
    rest = _residual_mass(s)
    if cfg.algorithm == "A2C":
        forward, clipped = a2c_loss(s), False
        reverse = -A * cfg.Z * rest
    else:
        forward, clipped = ppo_loss(s, cfg.clip_epsilon)
        reverse = 0.0 if clipped else -A * cfg.Z * rest / s.old_prob
    return LossValue(cfg.alpha * forward + cfg.beta * reverse, forward, reverse, clipped)


def forward_logit_gradient(s: LossSample, cfg: SymmetricLossConfig) -> np.ndarray:
    p = s.dist.probs
    onehot = np.zeros_like(p)
    onehot[s.action_index] = 1.0
    A = s.advantage
    if A == 0:
        return np.zeros_like(p)
    if cfg.algorithm == "A2C":
        return A * (p - onehot)
    _, clipped = ppo_loss(s, cfg.clip_epsilon)
    if clipped:
        return np.zeros_like(p)
    return -(A / s.old_prob) * s.prob * (onehot - p)


def reverse_logit_gradient(s: LossSample, cfg: SymmetricLossConfig) -> np.ndarray:
    p = s.dist.probs
    onehot = np.zeros_like(p)
    onehot[s.action_index] = 1.0
    A = s.advantage
    if A == 0:
        return np.zeros_like(p)
    grad = A * cfg.Z * s.prob * (onehot - p)
    if cfg.algorithm == "A2C":
        return grad
    _, clipped = ppo_loss(s, cfg.clip_epsilon)
    if clipped:
        return np.zeros_like(p)
    return grad / s.old_prob


def analytic_logit_gradient(s: LossSample, cfg: SymmetricLossConfig) -> np.ndarray:
    """d(symmetric_loss(s).total)/d(logits)."""
    return cfg.alpha * forward_logit_gradient(s, cfg) + cfg.beta * reverse_logit_gradient(s, cfg)


@dataclass
class PolicyTerms:
    """Per-sample policy loss pieces for a batch, possibly over several action dims."""

    forward: np.ndarray
    reverse: np.ndarray
    clipped: np.ndarray
    active: np.ndarray
    logit_grads: list[np.ndarray]


def policy_terms(
    probs: list[np.ndarray],
    actions: np.ndarray,
    advantages: np.ndarray,
    cfg: SymmetricLossConfig,
    old_probs: np.ndarray | None = None,
    with_reverse: bool = True,
) -> PolicyTerms:
    """Batched symmetric loss with per-sample logit gradients.

    ``probs`` holds one ``(B, k_d)`` array per action dimension, ``actions``
    and ``old_probs`` are ``(B, D)``. For PPO the ratio is the product over
    dimensions and one clip decision gates the whole sample; the reverse term
    is summed over dimensions, each scaled by its own ``pi_old``.
    Gradients are those of the per-sample totals (not yet averaged).
    ``with_reverse=False`` is the plain algorithm: the reverse term is neither
    evaluated nor differentiated.
    """
    A = np.asarray(advantages, dtype=np.float64)
    actions = np.asarray(actions).reshape(A.size, -1)
    rows = np.arange(A.size)
    active = A != 0
    taken = np.stack([p[rows, actions[:, d]] for d, p in enumerate(probs)], axis=1)
    if np.any(taken[active] <= 0):
        raise NumericError("zero probability for a sampled action")
    rest = 1.0 - taken

    if cfg.algorithm == "A2C":
        forward = -A * np.log(np.where(active[:, None], taken, 1.0)).sum(axis=1)
        clipped = np.zeros(A.size, dtype=bool)
        fwd_scale = np.broadcast_to(A[:, None], taken.shape)
        rev_scale = np.ones_like(taken)
        reverse = -A * cfg.Z * rest.sum(axis=1)
    else:
        if old_probs is None:
            raise ContractViolation("PPO losses need old_probs")
        old = np.asarray(old_probs, dtype=np.float64).reshape(taken.shape)
        if np.any(old <= 0) or np.any(old > 1):
            raise ContractViolation("old_probs must lie in (0, 1]")
        ratio = np.prod(taken / old, axis=1)
        eps = cfg.clip_epsilon
        unclipped = ratio * A
        clip_val = np.clip(ratio, 1.0 - eps, 1.0 + eps) * A
        clipped = clip_val < unclipped
        forward = -np.minimum(unclipped, clip_val)
        live = (~clipped).astype(np.float64)
        # d(-r A)/dz_d = -A r (onehot - p_d)
        fwd_scale = np.broadcast_to((A * ratio * live)[:, None], taken.shape)
        rev_scale = live[:, None] / old
        reverse = np.where(clipped, 0.0, -A * cfg.Z * (rest / old).sum(axis=1))

    forward = np.where(active, forward, 0.0)
    reverse = np.where(active, reverse, 0.0) if with_reverse else np.zeros(A.size)
    grads = []
    for d, p in enumerate(probs):
        onehot = np.zeros_like(p)
        onehot[rows, actions[:, d]] = 1.0
        if cfg.algorithm == "A2C":
            g = cfg.alpha * fwd_scale[:, d, None] * (p - onehot)
        else:
            g = -cfg.alpha * fwd_scale[:, d, None] * (onehot - p)
        if with_reverse:
            # reverse: -A Z (1 - pi) per dim -> A Z pi (onehot - p)
            g = g + cfg.beta * (A * cfg.Z * taken[:, d] * rev_scale[:, d])[:, None] * (onehot - p)
        grads.append(np.where(active[:, None], g, 0.0))
    return PolicyTerms(forward, reverse, clipped & active, active, grads)


def cross_entropy(q, p) -> float:
    q = np.asarray(q, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    nz = q > 0
    return float(-(q[nz] * np.log(p[nz])).sum())


def reverse_cross_entropy(q, p, Z: float = -1.0) -> float:
    """Cross entropy with the roles swapped, using ``log 0 = Z``."""
    q = np.asarray(q, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    with np.errstate(divide="ignore"):
        log_q = np.where(q > 0, np.log(np.where(q > 0, q, 1.0)), Z)
    return float(-(p * log_q).sum())


def symmetric_cross_entropy(q, p, alpha: float, beta: float, Z: float = -1.0) -> float:
    return alpha * cross_entropy(q, p) + beta * reverse_cross_entropy(q, p, Z)
