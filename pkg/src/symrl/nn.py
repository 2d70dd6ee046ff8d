"""Dense tanh networks with manual backpropagation.

A network is a shared tanh trunk followed by one or more affine heads that all
read the last trunk activation. Parameters live in a single flat float64
vector whose layout is fixed by the :class:`NetworkSpec`.

Inputs may be a single vector of shape ``(input_dim,)`` or a batch of shape
``(batch, input_dim)``. For a batch, :func:`backward` returns the gradient of
the *sum* of the per-row losses described by ``head_gradients``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from symrl.errors import ContractViolation, NumericError

ACTIVATIONS = ("tanh",)


@dataclass(frozen=True)
class NetworkSpec:
    input_dim: int
    heads: tuple[tuple[str, int], ...]
    hidden: tuple[tuple[int, str], ...] = ((64, "tanh"), (64, "tanh"))

    def __post_init__(self):
        object.__setattr__(self, "heads", tuple((str(n), int(d)) for n, d in self.heads))
        object.__setattr__(self, "hidden", tuple((int(w), str(a)) for w, a in self.hidden))
        if self.input_dim < 1:
            raise ContractViolation("input_dim must be positive")
        if not self.heads:
            raise ContractViolation("a network needs at least one head")
        names = [n for n, _ in self.heads]
        if len(set(names)) != len(names):
            raise ContractViolation(f"duplicate head names: {names}")
        for width, act in self.hidden:
            if width < 1:
                raise ContractViolation("hidden widths must be >= 1")
            if act not in ACTIVATIONS:
                raise ContractViolation(f"unsupported activation {act!r}")
        for name, dim in self.heads:
            if dim < 1:
                raise ContractViolation(f"head {name!r} must have positive dimension")
        object.__setattr__(self, "_layout", self._build_layout())

    @property
    def feature_dim(self) -> int:
        return self.hidden[-1][0] if self.hidden else self.input_dim

    def layout(self) -> tuple[tuple[str, tuple[int, ...]], ...]:
        """Ordered (name, shape) descriptors of every parameter block."""
        return self._layout

    def _build_layout(self):
        blocks = []
        fan_in = self.input_dim
        for idx, (width, _) in enumerate(self.hidden):
            blocks.append((f"hidden{idx}.W", (width, fan_in)))
            blocks.append((f"hidden{idx}.b", (width,)))
            fan_in = width
        for name, dim in self.heads:
            blocks.append((f"head.{name}.W", (dim, fan_in)))
            blocks.append((f"head.{name}.b", (dim,)))
        return tuple(blocks)

    @property
    def num_params(self) -> int:
        return sum(math.prod(shape) for _, shape in self._layout)


@dataclass
class ParameterVector:
    values: np.ndarray
    layout: tuple[tuple[str, tuple[int, ...]], ...]
    _offsets: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ContractViolation("parameter values must be a flat vector")
        offsets = {}
        start = 0
        for name, shape in self.layout:
            size = math.prod(shape)
            offsets[name] = (start, start + size, shape)
            start += size
        if start != self.values.size:
            raise ContractViolation(
                f"parameter vector has {self.values.size} values, layout needs {start}"
            )
        self._offsets = offsets

    def __len__(self) -> int:
        return self.values.size

    def block(self, name: str) -> np.ndarray:
        """A reshaped view (not a copy) of one parameter block."""
        lo, hi, shape = self._offsets[name]
        return self.values[lo:hi].reshape(shape)

    def unflatten(self) -> dict[str, np.ndarray]:
        return {name: self.block(name).copy() for name, _ in self.layout}

    @classmethod
    def flatten(cls, blocks: Mapping[str, np.ndarray], layout) -> "ParameterVector":
        parts = []
        for name, shape in layout:
            arr = np.asarray(blocks[name], dtype=np.float64)
            if arr.shape != tuple(shape):
                raise ContractViolation(f"block {name} has shape {arr.shape}, expected {shape}")
            parts.append(arr.ravel())
        values = np.concatenate(parts) if parts else np.zeros(0)
        return cls(values, tuple(layout))

    def with_values(self, values: np.ndarray) -> "ParameterVector":
        return ParameterVector(np.asarray(values, dtype=np.float64), self.layout)

    def copy(self) -> "ParameterVector":
        return self.with_values(self.values.copy())


def zeros(spec: NetworkSpec) -> ParameterVector:
    return ParameterVector(np.zeros(spec.num_params), spec.layout())


def _orthogonal(shape: tuple[int, int], gain: float, rng: np.random.Generator) -> np.ndarray:
    rows, cols = shape
    flat = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(flat)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


def init_params(
    spec: NetworkSpec,
    rng: np.random.Generator,
    hidden_gain: float = 1.0,
    head_gains: Mapping[str, float] | None = None,
) -> ParameterVector:
    """Orthogonal weights scaled by per-layer gains, zero biases."""
    head_gains = dict(head_gains or {})
    blocks = {}
    for name, shape in spec.layout():
        if name.endswith(".b"):
            blocks[name] = np.zeros(shape)
            continue
        if name.startswith("head."):
            gain = head_gains.get(name.split(".")[1], 1.0)
        else:
            gain = hidden_gain
        blocks[name] = _orthogonal(shape, gain, rng)
    return ParameterVector.flatten(blocks, spec.layout())


def _check_params(spec: NetworkSpec, params: ParameterVector) -> None:
    if params.layout is not spec.layout() and tuple(params.layout) != spec.layout():
        raise ContractViolation("parameter layout does not match the network spec")


def _as_batch(spec: NetworkSpec, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    batch = x[None, :] if single else x
    if batch.ndim != 2 or batch.shape[1] != spec.input_dim:
        raise ContractViolation(f"input has shape {x.shape}, expected trailing dim {spec.input_dim}")
    return batch, single


def forward_cached(spec: NetworkSpec, params: ParameterVector, x):
    """Forward pass that also returns the activations needed by backward."""
    _check_params(spec, params)
    h, single = _as_batch(spec, x)
    acts = [h]
    for idx in range(len(spec.hidden)):
        W = params.block(f"hidden{idx}.W")
        b = params.block(f"hidden{idx}.b")
        h = np.tanh(h @ W.T + b)
        acts.append(h)
    outputs = {}
    for name, _ in spec.heads:
        out = h @ params.block(f"head.{name}.W").T + params.block(f"head.{name}.b")
        outputs[name] = out[0] if single else out
    return outputs, (acts, single)


def forward(spec: NetworkSpec, params: ParameterVector, x) -> dict[str, np.ndarray]:
    return forward_cached(spec, params, x)[0]


def backward_cached(spec: NetworkSpec, params: ParameterVector, cache, head_gradients) -> ParameterVector:
    acts, single = cache
    feats = acts[-1]
    grad = np.zeros(spec.num_params)
    out = ParameterVector(grad, params.layout)
    d_feat = np.zeros_like(feats)
    for name, dim in spec.heads:
        if name not in head_gradients:
            raise ContractViolation(f"missing gradient for head {name!r}")
        g = np.asarray(head_gradients[name], dtype=np.float64)
        g = g[None, :] if single and g.ndim == 1 else g
        if g.shape != (feats.shape[0], dim):
            raise ContractViolation(f"head {name!r} gradient has shape {g.shape}")
        out.block(f"head.{name}.W")[...] = g.T @ feats
        out.block(f"head.{name}.b")[...] = g.sum(axis=0)
        d_feat += g @ params.block(f"head.{name}.W")
    for idx in reversed(range(len(spec.hidden))):
        h = acts[idx + 1]
        d_pre = d_feat * (1.0 - h * h)
        out.block(f"hidden{idx}.W")[...] = d_pre.T @ acts[idx]
        out.block(f"hidden{idx}.b")[...] = d_pre.sum(axis=0)
        d_feat = d_pre @ params.block(f"hidden{idx}.W")
    return out


def backward(spec: NetworkSpec, params: ParameterVector, x, head_gradients) -> ParameterVector:
    """Gradient of ``sum(head_gradients[h] * output[h])`` with respect to params."""
    _, cache = forward_cached(spec, params, x)
    return backward_cached(spec, params, cache, head_gradients)


def finite_difference_gradient(
    loss_fn: Callable[[ParameterVector], float],
    params: ParameterVector,
    step: float = 1e-5,
    indices=None,
) -> ParameterVector:
    """Central-difference gradient estimate.

    When ``indices`` is given only those coordinates are probed; the rest of
    the returned vector is zero.
    """
    if not step > 0:
        raise ContractViolation("finite-difference step must be positive")
    base = params.values
    grad = np.zeros_like(base)
    coords = range(base.size) if indices is None else indices
    probe = base.copy()
    for i in coords:
        probe[i] = base[i] + step
        f_plus = float(loss_fn(params.with_values(probe)))
        probe[i] = base[i] - step
        f_minus = float(loss_fn(params.with_values(probe)))
        probe[i] = base[i]
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NumericError(f"non-finite loss while probing coordinate {i}")
        grad[i] = (f_plus - f_minus) / (2.0 * step)
    return params.with_values(grad)


@dataclass(frozen=True)
class GradientReport:
    max_abs_diff: float
    max_rel_diff: float
    per_parameter_diffs: tuple[float, ...]


def compare_gradients(analytic, numeric, floor: float = 1e-8) -> GradientReport:
    """Relative error uses ``max(|a|, |n|, floor)`` as the denominator."""
    a = np.asarray(getattr(analytic, "values", analytic), dtype=np.float64)
    n = np.asarray(getattr(numeric, "values", numeric), dtype=np.float64)
    diff = np.abs(a - n)
    rel = diff / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return GradientReport(
        max_abs_diff=float(diff.max(initial=0.0)),
        max_rel_diff=float(rel.max(initial=0.0)),
        per_parameter_diffs=tuple(float(d) for d in rel),
    )


class Adam:
    """Adaptive-moment optimizer over a flat parameter vector."""

    def __init__(self, size: int, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def direction(self, grad: np.ndarray) -> np.ndarray:
        """Advance the moment estimates and return the step to subtract."""
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        return self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def step(self, values: np.ndarray, grad: np.ndarray) -> np.ndarray:
        return values - self.direction(grad)


def clip_by_global_norm(grad: np.ndarray, max_norm: float | None) -> tuple[np.ndarray, float]:
    norm = float(np.sqrt(np.dot(grad, grad)))
    if max_norm is not None and norm > max_norm:
        grad = grad * (max_norm / (norm + 1e-12))
    return grad, norm
