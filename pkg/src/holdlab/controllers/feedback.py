from __future__ import annotations

import numpy as np

from .base import HOLD, RELEASE, HoldingController, PlannedHoldController


def feedback_decide(obs, max_hold: float = 90.0) -> int:
    """Hold while the gap behind is larger than the gap ahead."""
    h_fwd, h_bwd, hold = obs[0], obs[1], obs[5]
    if h_bwd > h_fwd and hold < max_hold:
        return HOLD
    return RELEASE


class FeedbackController(HoldingController):
    name = "feedback"

    def decide(self, env, bus, obs: np.ndarray) -> int:
        return feedback_decide(obs, env.cfg.max_hold)


def model_based_hold(obs, speed: float, capacity: int, step: int = 5, max_hold: int = 90) -> int:
    """Time to close half the headway gap, discounted by how full the bus is.

    g = clamp((h_bwd - h_fwd) / (2 v) * (1 - n / c), 0, max_hold), then
    snapped to the action grid.
    """
    if speed <= 0:
        raise ValueError("speed must be > 0")
    h_fwd, h_bwd, n = float(obs[0]), float(obs[1]), float(obs[4])
    raw = (h_bwd - h_fwd) / (2.0 * speed) * (1.0 - min(n, capacity) / capacity)
    raw = min(max(raw, 0.0), float(max_hold))
    q = int(np.floor(raw / step + 0.5)) * step
    return min(max(q, 0), max_hold)


class ModelBasedController(PlannedHoldController):
    name = "model"

    def planned_hold(self, env, bus, obs: np.ndarray) -> float:
        speed = env.cfg.line_by_id[bus.line].mean_speed()
        return model_based_hold(obs, speed, env.cfg.capacity, env.cfg.action_step, env.cfg.max_hold)
