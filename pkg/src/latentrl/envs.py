"""Desk-scale environments with multiple optimal solutions.

RingMdp: a cyclic discrete MDP where the all-clockwise and all-counterclockwise
policies visit every state equally often, collect identical returns, yet take
opposite actions everywhere.  PointVel: a 2-D point mass whose forward-velocity
reward is capped, so the optimal return is pinned while the lateral coordinate
and control style stay free.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np


class StateError(RuntimeError):
    """Operation applied to an environment state that cannot accept it."""


class NumericError(FloatingPointError):
    pass


@dataclass
class EnvSpec:
    state_dim: int
    action_dim: int
    action_low: np.ndarray
    action_high: np.ndarray
    horizon: int
    discrete_actions: int | None = None
    dt: float | None = None


@dataclass
class EnvState:
    observation: np.ndarray
    time_step: int = 0
    terminated: bool = False


# ---------------------------------------------------------------------------
# Ring MDP

CW, CCW = 0, 1


@dataclass
class RingMdpConfig:
    n_states: int = 4
    reward_states: frozenset[int] = frozenset({0, 3})
    horizon: int = 16

    def __post_init__(self) -> None:
        if not set(self.reward_states) <= set(range(self.n_states)):
            raise ValueError("reward_states must be a subset of the state indices")


class RingMdp:
    """Cycle of n states; CW moves +1 mod n, CCW moves -1 mod n.

    Reward 1 is collected whenever the next state is a reward state.
    Observations are one-hot vectors over the n states.
    """

    def __init__(self, config: RingMdpConfig | None = None):
        self.config = config or RingMdpConfig()
        n = self.config.n_states
        self.spec = EnvSpec(
            state_dim=n, action_dim=1,
            action_low=np.array([-1.0]), action_high=np.array([1.0]),
            horizon=self.config.horizon, discrete_actions=2,
        )
        self._index: int | None = None

    def _observe(self) -> EnvState:
        obs = np.zeros(self.config.n_states)
        obs[self._index] = 1.0
        return EnvState(obs, self._t, self._t >= self.config.horizon)

    def reset(self, rng: np.random.Generator) -> EnvState:
        self._index = int(rng.integers(self.config.n_states))
        self._t = 0
        return self._observe()

    @property
    def state_index(self) -> int:
        if self._index is None:
            raise StateError("reset() must be called before stepping")
        return self._index

    def step(self, action: int) -> tuple[EnvState, float]:
        if self._index is None:
            raise StateError("reset() must be called before stepping")
        if self._t >= self.config.horizon:
            raise StateError("episode already terminated")
        if action not in (CW, CCW):
            raise ValueError(f"ring action must be CW={CW} or CCW={CCW}, got {action}")
        n = self.config.n_states
        delta = 1 if action == CW else -1
        self._index = (self._index + delta) % n
        self._t += 1
        reward = 1.0 if self._index in self.config.reward_states else 0.0
        return self._observe(), reward

    def transition_matrix(self, policy_action: int) -> np.ndarray:
        """Row-stochastic transition matrix of the stationary policy that
        always takes policy_action."""
        n = self.config.n_states
        p = np.zeros((n, n))
        delta = 1 if policy_action == CW else -1
        for s in range(n):
            p[s, (s + delta) % n] = 1.0
        return p


def ring_policy_return(config: RingMdpConfig, policy_action: int,
                       start_state: int) -> float:
    """Undiscounted return of the constant-action policy over one horizon."""
    s = start_state
    total = 0.0
    delta = 1 if policy_action == CW else -1
    for _ in range(config.horizon):
        s = (s + delta) % config.n_states
        if s in config.reward_states:
            total += 1.0
    return total


# ---------------------------------------------------------------------------
# Velocity-capped point mass

class PointVelVariant(Enum):
    TRAIN = "train"
    BLOCKED = "blocked"
    DRIFT = "drift"


@dataclass
class PointVelConfig:
    v_max: float = 1.0
    dt: float = 0.05
    ctrl_cost: float = 0.01
    accel_gain: float = 4.0
    speed_limit: float = 2.0
    horizon: int = 200
    variant: PointVelVariant = PointVelVariant.TRAIN
    # Blocked variant: flat per-step penalty while y is inside [y_low, y_high].
    # The band straddles the start region widely enough that it must be
    # crossed deliberately; policies without a committed lateral skill pay the
    # penalty for most of the episode.
    block_y_low: float = -5.0
    block_y_high: float = 1.0
    block_penalty: float = 1.0
    # Drift variant: constant lateral force on v_y.
    drift_force: float = 0.5

    def __post_init__(self) -> None:
        if not (0.0 < self.v_max <= self.speed_limit):
            raise ValueError("require 0 < v_max <= speed_limit")
        if self.dt <= 0 or self.horizon < 1:
            raise ValueError("require dt > 0 and horizon >= 1")


class PointVel:
    """2-D point mass with capped forward-velocity reward.

    reward = min(dx/dt, v_max) - ctrl_cost * ||a||^2 + variant terms.
    The observation is (y, v_x, v_y); the unbounded x position is internal so
    network inputs stay in a fixed range.  Episodes end only at the horizon.
    """

    OBS_DIM = 3

    def __init__(self, config: PointVelConfig | None = None):
        self.config = config or PointVelConfig()
        self.spec = EnvSpec(
            state_dim=self.OBS_DIM, action_dim=2,
            action_low=np.array([-1.0, -1.0]), action_high=np.array([1.0, 1.0]),
            horizon=self.config.horizon, dt=self.config.dt,
        )
        self._pos: np.ndarray | None = None

    def _observe(self) -> EnvState:
        obs = np.array([self._pos[1], self._vel[0], self._vel[1]])
        return EnvState(obs, self._t, self._t >= self.config.horizon)

    def reset(self, rng: np.random.Generator) -> EnvState:
        y0 = rng.uniform(-0.1, 0.1)
        self._pos = np.array([0.0, y0])
        self._vel = np.zeros(2)
        self._t = 0
        return self._observe()

    @property
    def position(self) -> np.ndarray:
        if self._pos is None:
            raise StateError("reset() must be called before stepping")
        return self._pos.copy()

    def step(self, action: np.ndarray) -> tuple[EnvState, float]:
        if self._pos is None:
            raise StateError("reset() must be called before stepping")
        if self._t >= self.config.horizon:
            raise StateError("episode already terminated")
        a = np.asarray(action, dtype=np.float64)
        if a.shape != (2,):
            raise ValueError(f"action must have shape (2,), got {a.shape}")
        if np.any(a < -1.0 - 1e-12) or np.any(a > 1.0 + 1e-12):
            warnings.warn("action outside [-1, 1]^2; clipping", stacklevel=2)
            a = np.clip(a, -1.0, 1.0)
        cfg = self.config
        vel = self._vel + cfg.accel_gain * a * cfg.dt
        if cfg.variant is PointVelVariant.DRIFT:
            vel[1] += cfg.drift_force * cfg.dt
        vel = np.clip(vel, -cfg.speed_limit, cfg.speed_limit)
        x_prev = self._pos[0]
        self._pos = self._pos + vel * cfg.dt
        self._vel = vel
        self._t += 1
        reward = min((self._pos[0] - x_prev) / cfg.dt, cfg.v_max)
        reward -= cfg.ctrl_cost * float(a @ a)
        if cfg.variant is PointVelVariant.BLOCKED:
            if cfg.block_y_low <= self._pos[1] <= cfg.block_y_high:
                reward -= cfg.block_penalty
        if not (np.isfinite(self._pos).all() and np.isfinite(self._vel).all()):
            raise NumericError("non-finite point-mass state")
        return self._observe(), reward


def scripted_pointvel_return(config: PointVelConfig | None = None) -> float:
    """Return of the reference controller: full +x thrust until v_x saturates,
    then zero action.  Used as the optimal-return oracle R*."""
    env = PointVel(config or PointVelConfig())
    rng = np.random.default_rng(0)
    env.reset(rng)
    env._pos = np.array([0.0, 0.0])  # y0 does not affect the return; pin it
    total = 0.0
    for _ in range(env.config.horizon):
        if env._vel[0] < env.config.speed_limit:
            a = np.array([1.0, 0.0])
        else:
            a = np.zeros(2)
        _, r = env.step(a)
        total += r
    return total


def make_env(name: str, variant: str = "train",
             ring_config: RingMdpConfig | None = None,
             point_config: PointVelConfig | None = None):
    """Environment factory used by the run harness and CLI."""
    if name == "ring":
        return RingMdp(ring_config)
    if name == "pointvel":
        cfg = replace(point_config or PointVelConfig(),
                      variant=PointVelVariant(variant))
        return PointVel(cfg)
    raise ValueError(f"unknown environment: {name}")
