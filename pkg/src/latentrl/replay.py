"""Fixed-capacity ring buffer of latent-tagged transitions with uniform
mini-batch sampling (with replacement)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class StateError(RuntimeError):
    pass


@dataclass
class Transition:
    s: np.ndarray
    a: np.ndarray
    s_next: np.ndarray
    r: float
    done: bool  # environment-intrinsic termination only, never horizon truncation
    z_cont: np.ndarray
    z_disc: int | None = None


@dataclass
class Batch:
    """Column-stacked view of sampled transitions."""

    s: np.ndarray
    a: np.ndarray
    s_next: np.ndarray
    r: np.ndarray
    done: np.ndarray
    z_cont: np.ndarray
    z_disc: np.ndarray  # -1 where no discrete latent


class ReplayBuffer:
    """Preallocated FIFO storage; oldest entries are overwritten on overflow."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int,
                 cont_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._s = np.zeros((capacity, state_dim))
        self._a = np.zeros((capacity, action_dim))
        self._s_next = np.zeros((capacity, state_dim))
        self._r = np.zeros(capacity)
        self._done = np.zeros(capacity)
        self._z_cont = np.zeros((capacity, max(cont_dim, 1)))
        self._z_disc = np.full(capacity, -1, dtype=np.int64)
        self.cont_dim = cont_dim
        self.size = 0
        self._cursor = 0

    def push(self, t: Transition) -> None:
        i = self._cursor
        self._s[i] = t.s
        self._a[i] = t.a
        self._s_next[i] = t.s_next
        if not np.isfinite(t.r):
            raise ValueError("non-finite reward")
        self._r[i] = t.r
        self._done[i] = 1.0 if t.done else 0.0
        if self.cont_dim:
            self._z_cont[i, :self.cont_dim] = t.z_cont
        self._z_disc[i] = -1 if t.z_disc is None else t.z_disc
        self._cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_uniform(self, batch: int, rng: np.random.Generator) -> Batch:
        """Uniform i.i.d. indices with replacement; batch may exceed size."""
        if self.size == 0:
            raise StateError("cannot sample from an empty buffer")
        idx = rng.integers(self.size, size=batch)
        return self.gather(idx)

    def gather(self, idx: np.ndarray) -> Batch:
        return Batch(
            s=self._s[idx], a=self._a[idx], s_next=self._s_next[idx],
            r=self._r[idx], done=self._done[idx],
            z_cont=self._z_cont[idx, :self.cont_dim] if self.cont_dim
            else np.zeros((len(idx), 0)),
            z_disc=self._z_disc[idx],
        )

    def recent(self, n: int) -> Batch:
        """The n most recently inserted transitions, oldest first."""
        n = min(n, self.size)
        if self.size < self.capacity:
            idx = np.arange(self.size - n, self.size)
        else:
            idx = (np.arange(self._cursor - n, self._cursor)) % self.capacity
        return self.gather(idx)
