from __future__ import annotations

import numpy as np


class ReplayBuffer:
    """Fixed-capacity ring buffer shared by every stop agent."""

    def __init__(self, capacity: int, obs_dim: int = 6, dtype=np.float64) -> None:
        if capacity <= 0:
            raise ValueError("capacity must be > 0")
        self.capacity = capacity
        self.states = np.zeros((capacity, obs_dim), dtype=dtype)
        self.next_states = np.zeros((capacity, obs_dim), dtype=dtype)
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity, dtype=dtype)
        self.size = 0
        self._head = 0

    def __len__(self) -> int:
        return self.size

    def push(self, state, action: int, reward: float, next_state) -> None:
        i = self._head
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self._head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.integers(0, self.size, size=n)

    def sample(self, n: int, rng: np.random.Generator):
        if self.size == 0:
            empty = self.states[:0]
            return empty, self.actions[:0], self.rewards[:0], empty
        idx = self.sample_indices(n, rng)
        return self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx]
