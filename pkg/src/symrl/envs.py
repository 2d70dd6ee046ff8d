"""Toy environments and reward-noise channels.

Each environment has a pure ``step`` function over :class:`EnvState` plus a
small stateful wrapper with ``reset(seed)`` / ``step(action)`` used by the
trainer. Noise channels only ever touch rewards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from symrl.errors import ContractViolation


@dataclass(frozen=True)
class EnvState:
    observation: np.ndarray
    terminal: bool = False
    steps_elapsed: int = 0


@dataclass(frozen=True)
class StepResult:
    next_observation: np.ndarray
    reward: float
    terminal: bool
    truncated: bool
    info: dict = field(default_factory=dict)

    @property
    def done(self) -> bool:
        return self.terminal or self.truncated


def _advance(state: EnvState, obs, reward, terminal, limit, info=None) -> StepResult:
    steps = state.steps_elapsed + 1
    truncated = (not terminal) and steps >= limit
    return StepResult(np.asarray(obs, dtype=np.float64), float(reward), bool(terminal), truncated, info or {})


# gridworld ---------------------------------------------------------------

GRID_SIZE = 8
GRID_LIMIT = 64
GRID_START = (0, 0)
GRID_GOAL = (GRID_SIZE - 1, GRID_SIZE - 1)
# (row, col) deltas for up, down, left, right
GRID_MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))


def grid_observation(agent, goal=GRID_GOAL) -> np.ndarray:
    scale = GRID_SIZE - 1
    return np.array([agent[0], agent[1], goal[0], goal[1]], dtype=np.float64) / scale


def _grid_decode(obs) -> tuple[tuple[int, int], tuple[int, int]]:
    cells = np.rint(np.asarray(obs) * (GRID_SIZE - 1)).astype(int)
    return (int(cells[0]), int(cells[1])), (int(cells[2]), int(cells[3]))


def gridworld_step(state: EnvState, action: int) -> StepResult:
    """Move on an 8x8 grid bounded by walls; reward 1 and terminal on the goal."""
    if not (isinstance(action, (int, np.integer)) and 0 <= action < 4):
        raise ContractViolation(f"gridworld action must be in [0, 4), got {action!r}")
    (r, c), goal = _grid_decode(state.observation)
    dr, dc = GRID_MOVES[int(action)]
    nr, nc = r + dr, c + dc
    if not (0 <= nr < GRID_SIZE and 0 <= nc < GRID_SIZE):
        nr, nc = r, c
    at_goal = (nr, nc) == goal
    return _advance(state, grid_observation((nr, nc), goal), 1.0 if at_goal else 0.0, at_goal, GRID_LIMIT)


# cart-pole ---------------------------------------------------------------

CARTPOLE_LIMIT = 500
THETA_LIMIT = 12 * 2 * math.pi / 360
X_LIMIT = 2.4


@dataclass(frozen=True)
class CartPoleParams:
    gravity: float = 9.8
    masscart: float = 1.0
    masspole: float = 0.1
    length: float = 0.5  # half the pole length
    force_mag: float = 10.0
    dt: float = 0.02


def cartpole_failed(x: float, theta: float) -> bool:
    return abs(x) > X_LIMIT or abs(theta) > THETA_LIMIT


def cartpole_step(state: EnvState, action: int, params: CartPoleParams = CartPoleParams()) -> StepResult:
    """Explicit-Euler cart-pole; the step that fails the episode earns 0."""
    if action not in (0, 1):
        raise ContractViolation(f"cart-pole action must be 0 or 1, got {action!r}")
    x, x_dot, theta, theta_dot = (float(v) for v in state.observation)
    if cartpole_failed(x, theta):
        return _advance(state, state.observation, 0.0, True, CARTPOLE_LIMIT)
    force = params.force_mag if action == 1 else -params.force_mag
    total_mass = params.masscart + params.masspole
    pole_ml = params.masspole * params.length
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    temp = (force + pole_ml * theta_dot * theta_dot * sin_t) / total_mass
    theta_acc = (params.gravity * sin_t - cos_t * temp) / (
        params.length * (4.0 / 3.0 - params.masspole * cos_t * cos_t / total_mass)
    )
    x_acc = temp - pole_ml * theta_acc * cos_t / total_mass
    x = x + params.dt * x_dot
    x_dot = x_dot + params.dt * x_acc
    theta = theta + params.dt * theta_dot
    theta_dot = theta_dot + params.dt * theta_acc
    failed = cartpole_failed(x, theta)
    return _advance(state, (x, x_dot, theta, theta_dot), 0.0 if failed else 1.0, failed, CARTPOLE_LIMIT)


# point mass --------------------------------------------------------------

POINTMASS_LIMIT = 200
POINTMASS_DT = 0.05
POINTMASS_VMAX = 2.0
POINTMASS_GOAL = np.zeros(2)


def pointmass_step(state: EnvState, action, goal=POINTMASS_GOAL) -> StepResult:
    """Double integrator in the plane; reward is minus distance to goal minus an action cost."""
    a = np.asarray(action, dtype=np.float64)
    if a.shape != (2,):
        raise ContractViolation(f"point-mass action must have shape (2,), got {a.shape}")
    ax, ay = float(a[0]), float(a[1])
    cx, cy = min(max(ax, -1.0), 1.0), min(max(ay, -1.0), 1.0)
    px, py, vx, vy = (float(v) for v in state.observation)
    vx = min(max(vx + POINTMASS_DT * cx, -POINTMASS_VMAX), POINTMASS_VMAX)
    vy = min(max(vy + POINTMASS_DT * cy, -POINTMASS_VMAX), POINTMASS_VMAX)
    px, py = px + POINTMASS_DT * vx, py + POINTMASS_DT * vy
    dx, dy = px - float(goal[0]), py - float(goal[1])
    reward = -math.sqrt(dx * dx + dy * dy) - 0.01 * (cx * cx + cy * cy)
    info = {"action_clamped": (cx, cy) != (ax, ay)}
    return _advance(state, (px, py, vx, vy), reward, False, POINTMASS_LIMIT, info)


# stateful wrappers -------------------------------------------------------


class Env:
    name = ""
    obs_dim = 0
    binary_rewards = False
    n_actions: int | None = None
    action_low: np.ndarray | None = None
    action_high: np.ndarray | None = None

    def __init__(self):
        self.state: EnvState | None = None
        self.rng = np.random.default_rng(0)

    def reset(self, seed=None) -> np.ndarray:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self.state = EnvState(self.initial_observation(self.rng))
        return self.state.observation

    def initial_observation(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def transition(self, state: EnvState, action) -> StepResult:
        raise NotImplementedError

    def step(self, action) -> StepResult:
        if self.state is None:
            raise ContractViolation("call reset() before step()")
        result = self.transition(self.state, action)
        self.state = EnvState(result.next_observation, result.terminal, self.state.steps_elapsed + 1)
        return result


class GridWorld(Env):
    name = "gridworld"
    obs_dim = 4
    binary_rewards = True
    n_actions = 4

    def initial_observation(self, rng):
        return grid_observation(GRID_START)

    def transition(self, state, action):
        return gridworld_step(state, action)


class CartPole(Env):
    name = "cartpole"
    obs_dim = 4
    binary_rewards = True
    n_actions = 2

    def __init__(self, params: CartPoleParams = CartPoleParams()):
        super().__init__()
        self.params = params

    def initial_observation(self, rng):
        return rng.uniform(-0.05, 0.05, size=4)

    def transition(self, state, action):
        return cartpole_step(state, int(action), self.params)


class PointMass(Env):
    name = "pointmass"
    obs_dim = 4
    action_low = -np.ones(2)
    action_high = np.ones(2)

    def initial_observation(self, rng):
        return np.concatenate([rng.uniform(-1.0, 1.0, size=2), np.zeros(2)])

    def transition(self, state, action):
        return pointmass_step(state, action)


ENVIRONMENTS = {"gridworld": GridWorld, "cartpole": CartPole, "pointmass": PointMass}


def make_env(name: str) -> Env:
    try:
        return ENVIRONMENTS[name]()
    except KeyError:
        raise ContractViolation(f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}") from None


# reward noise ------------------------------------------------------------

NOISE_KINDS = ("none", "bsc", "gaussian")


@dataclass
class NoiseChannel:
    kind: str = "none"
    p: float = 0.1
    sigma: float = 0.05
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0), repr=False)

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ContractViolation(f"noise kind must be one of {NOISE_KINDS}, got {self.kind!r}")
        if self.kind == "bsc" and not 0 <= self.p <= 1:
            raise ContractViolation("bsc crossover probability must lie in [0, 1]")
        if self.kind == "gaussian" and not self.sigma >= 0:
            raise ContractViolation("gaussian sigma must be non-negative")

    def reseed(self, rng: np.random.Generator) -> "NoiseChannel":
        return replace(self, rng=rng)

    def __call__(self, clean_reward):
        return apply_noise(self, clean_reward)


def apply_noise(channel: NoiseChannel, clean_reward):
    """Perturb a reward (scalar or array) through the channel."""
    r = np.asarray(clean_reward, dtype=np.float64)
    if channel.kind == "none":
        noisy = r.copy()
    elif channel.kind == "bsc":
        if np.any((r != 0.0) & (r != 1.0)):
            raise ContractViolation("binary symmetric channel needs rewards in {0, 1}")
        flip = channel.rng.random(r.shape) < channel.p
        noisy = np.where(flip, 1.0 - r, r)
    else:
        noisy = r + channel.rng.normal(0.0, channel.sigma, size=r.shape)
    return float(noisy) if noisy.ndim == 0 else noisy
