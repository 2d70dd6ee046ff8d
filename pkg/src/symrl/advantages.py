"""Generalized advantage estimation, advantage normalization and sign-flip telemetry."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from symrl.errors import ContractViolation


@dataclass(frozen=True)
class GaeConfig:
    gamma: float = 0.99
    lam: float = 0.95
    normalize: bool = False
    norm_epsilon: float = 1e-8

    def __post_init__(self):
        if not (0 <= self.gamma <= 1 and 0 <= self.lam <= 1):
            raise ContractViolation("gamma and lam must lie in [0, 1]")
        if not self.norm_epsilon > 0:
            raise ContractViolation("norm_epsilon must be positive")


@dataclass
class AdvantageEstimate:
    raw: np.ndarray
    returns: np.ndarray
    normalized: np.ndarray | None = None
    sign_flip_rate: float | None = None


def compute_gae(rewards, values, bootstrap_value, dones, cfg: GaeConfig = GaeConfig()) -> AdvantageEstimate:
    """Backward GAE recursion.

    Arrays are indexed by time along axis 0 and may carry a trailing
    environment axis. ``dones[t]`` cuts both the bootstrap from ``t + 1`` and
    the recursion.
    """
    r = np.asarray(rewards, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    d = np.asarray(dones, dtype=np.float64)
    if r.shape != v.shape or r.shape != d.shape:
        raise ContractViolation(f"shape mismatch: rewards {r.shape}, values {v.shape}, dones {d.shape}")
    if r.shape[0] < 1:
        raise ContractViolation("need at least one step")
    T = r.shape[0]
    adv = np.zeros_like(r)
    next_value = np.broadcast_to(np.asarray(bootstrap_value, dtype=np.float64), r.shape[1:])
    next_adv = np.zeros(r.shape[1:])
    for t in reversed(range(T)):
        live = 1.0 - d[t]
        delta = r[t] + cfg.gamma * next_value * live - v[t]
        next_adv = delta + cfg.gamma * cfg.lam * live * next_adv
        adv[t] = next_adv
        next_value = v[t]
    est = AdvantageEstimate(raw=adv, returns=adv + v)
    if cfg.normalize:
        est.normalized, est.sign_flip_rate = normalize_advantages(adv.ravel(), cfg.norm_epsilon)
        est.normalized = est.normalized.reshape(adv.shape)
    return est


def normalize_advantages(raw, norm_epsilon: float = 1e-8) -> tuple[np.ndarray, float]:
    """Standardize with the population std and report the share of sign flips.

    The flip rate is taken over nonzero raw entries; a nonzero entry mapped to
    exactly zero counts as flipped.
    """
    a = np.asarray(raw, dtype=np.float64)
    if a.size < 2:
        raise ContractViolation("normalization needs at least two advantages")
    normalized = (a - a.mean()) / (a.std() + norm_epsilon)
    return normalized, sign_flip_rate(a, normalized)


def sign_flip_rate(raw, normalized) -> float:
    raw = np.asarray(raw)
    nonzero = raw != 0
    n = int(nonzero.sum())
    if n == 0:
        return 0.0
    flips = np.sign(raw[nonzero]) != np.sign(np.asarray(normalized)[nonzero])
    return float(flips.sum()) / n


def predicted_flips(raw) -> np.ndarray:
    """Entries expected to change sign under mean-centering: strictly between 0 and the mean."""
    a = np.asarray(raw, dtype=np.float64)
    m = a.mean()
    return ((a > 0) & (a < m)) | ((a < 0) & (a > m))
