"""Categorical action distributions and the uniform action discretizer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from symrl.errors import ContractViolation, NumericError


def softmax(logits) -> np.ndarray:
    """Softmax along the last axis with max subtraction."""
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise NumericError("softmax received non-finite logits")
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise NumericError("log_softmax received non-finite logits")
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


@dataclass(frozen=True)
class ActionDistribution:
    logits: np.ndarray
    probs: np.ndarray

    @classmethod
    def from_logits(cls, logits) -> "ActionDistribution":
        z = np.asarray(logits, dtype=np.float64)
        if z.ndim != 1 or z.size < 2:
            raise ContractViolation("a categorical distribution needs a vector of k >= 2 logits")
        return cls(z, softmax(z))

    @classmethod
    def from_probs(cls, probs) -> "ActionDistribution":
        """Build from explicit probabilities; logits are their logarithms."""
        p = np.asarray(probs, dtype=np.float64)
        if p.ndim != 1 or p.size < 2:
            raise ContractViolation("a categorical distribution needs k >= 2 probabilities")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ContractViolation("probabilities must be non-negative and sum to 1")
        with np.errstate(divide="ignore"):
            z = np.log(p)
        return cls(z, p)

    @property
    def k(self) -> int:
        return self.probs.size

    def log_prob(self, index: int) -> float:
        return float(np.log(self.probs[index]))

    def sample(self, rng: np.random.Generator) -> int:
        return sample(self, rng)

    def entropy(self) -> float:
        return entropy(self)


def sample(dist: ActionDistribution, rng: np.random.Generator) -> int:
    """Inverse-CDF draw using one uniform variate from ``rng``."""
    cdf = np.cumsum(dist.probs)
    u = rng.random() * cdf[-1]
    return int(min(np.searchsorted(cdf, u, side="right"), dist.k - 1))


def sample_batch(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Vectorized inverse-CDF sampling, one row per distribution."""
    cdf = np.cumsum(probs, axis=-1)
    u = rng.random(probs.shape[:-1])[..., None] * cdf[..., -1:]
    idx = (cdf <= u).sum(axis=-1)
    return np.minimum(idx, probs.shape[-1] - 1)


def entropy(dist: ActionDistribution) -> float:
    p = dist.probs
    nz = p > 0
    return float(-(p[nz] * np.log(p[nz])).sum())


@dataclass(frozen=True)
class FactorizedDistribution:
    """Independent categorical per action dimension."""

    dims: tuple[ActionDistribution, ...]

    def log_prob(self, indices) -> float:
        if len(indices) != len(self.dims):
            raise ContractViolation("one index per action dimension is required")
        return float(sum(d.log_prob(int(i)) for d, i in zip(self.dims, indices)))

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return np.array([sample(d, rng) for d in self.dims], dtype=np.int64)

    def entropy(self) -> float:
        return float(sum(entropy(d) for d in self.dims))


@dataclass(frozen=True)
class Discretizer:
    low: np.ndarray
    high: np.ndarray
    bins: np.ndarray

    def __init__(self, low, high, bins=11):
        low = np.atleast_1d(np.asarray(low, dtype=np.float64))
        high = np.atleast_1d(np.asarray(high, dtype=np.float64))
        bins = np.broadcast_to(np.asarray(bins, dtype=np.int64), low.shape).copy()
        if low.shape != high.shape or np.any(low >= high):
            raise ContractViolation("discretizer needs low < high elementwise")
        if np.any(bins < 2):
            raise ContractViolation("each dimension needs at least 2 bins")
        object.__setattr__(self, "low", low)
        object.__setattr__(self, "high", high)
        object.__setattr__(self, "bins", bins)

    @property
    def ndim(self) -> int:
        return self.low.size

    def decode(self, indices) -> np.ndarray:
        return decode_action(self, indices)


def decode_action(d: Discretizer, indices) -> np.ndarray:
    """Map per-dimension bin indices to evenly spaced values in [low, high]."""
    idx = np.asarray(indices)
    if idx.shape[-1:] != (d.ndim,):
        raise ContractViolation(f"expected {d.ndim} indices per action, got shape {idx.shape}")
    if np.any(idx < 0) or np.any(idx >= d.bins):
        raise ContractViolation(f"bin index out of range: {indices}")
    frac = idx / (d.bins - 1)
    return d.low + frac * (d.high - d.low)
