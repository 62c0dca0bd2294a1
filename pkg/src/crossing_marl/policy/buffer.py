from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np


@dataclass
class Batch:
    obs: np.ndarray
    act: np.ndarray
    rew: np.ndarray
    next_obs: np.ndarray
    done: np.ndarray


class ReplayBuffer:
    """Fixed-capacity FIFO of transitions for one agent.

    Appends and samples take a lock, so collector threads can append while
    the learner samples.
    """

    def __init__(self, obs_dim: int, act_dim: int, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.obs = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.act = np.zeros((capacity, act_dim), dtype=np.float32)
        self.rew = np.zeros(capacity, dtype=np.float32)
        self.next_obs = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.done = np.zeros(capacity, dtype=np.float32)
        # insertion counter per slot, lets tests check FIFO eviction
        self.stamp = np.full(capacity, -1, dtype=np.int64)
        self._next = 0
        self._size = 0
        self._count = 0
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return self._size

    @property
    def total_added(self) -> int:
        return self._count

    def add(self, obs, act, rew: float, next_obs, done: bool) -> None:
        with self._lock:
            i = self._next
            self.obs[i] = obs
            self.act[i] = act
            self.rew[i] = rew
            self.next_obs[i] = next_obs
            self.done[i] = float(done)
            self.stamp[i] = self._count
            self._count += 1
            self._next = (i + 1) % self.capacity
            self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        """Uniform draw without replacement (capped at the current size)."""
        with self._lock:
            if self._size == 0:
                raise ValueError("cannot sample from an empty buffer")
            n = min(batch_size, self._size)
            idx = rng.choice(self._size, size=n, replace=False)
            return Batch(
                self.obs[idx].copy(), self.act[idx].copy(), self.rew[idx].copy(),
                self.next_obs[idx].copy(), self.done[idx].copy(),
            )

    def stamps(self) -> np.ndarray:
        with self._lock:
            return np.sort(self.stamp[: self._size])
