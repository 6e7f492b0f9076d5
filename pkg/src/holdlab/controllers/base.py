from __future__ import annotations

import math

import numpy as np

HOLD = 0
RELEASE = 1


class HoldingController:
    """Interface shared by every holding policy.

    ``decide`` is called at each decision point of a dwelling bus and returns
    HOLD (stay one more action step) or RELEASE.
    """

    name = "base"

    def reset(self, env) -> None:
        pass

    def on_tick(self, env) -> None:
        pass

    def decide(self, env, bus, obs: np.ndarray) -> int:
        return RELEASE

    def on_episode_end(self, env) -> None:
        pass


class NoHolding(HoldingController):
    name = "none"


def quantize_hold(seconds: float, step: int, max_hold: int) -> int:
    """Round to the nearest multiple of ``step`` inside [0, max_hold]."""
    q = int(math.floor(seconds / step + 0.5)) * step
    return min(max(q, 0), max_hold)


class PlannedHoldController(HoldingController):
    """Realizes a per-visit planned duration as repeated hold steps."""

    def __init__(self) -> None:
        # bus id -> (visit index, planned seconds)
        self._plan: dict[int, tuple[int, int]] = {}

    def reset(self, env) -> None:
        self._plan = {}

    def planned_hold(self, env, bus, obs: np.ndarray) -> float:
        raise NotImplementedError

    def decide(self, env, bus, obs: np.ndarray) -> int:
        visit = len(bus.visits)
        key = bus.bus_id
        if key not in self._plan or self._plan[key][0] != visit:
            g = quantize_hold(self.planned_hold(env, bus, obs), env.cfg.action_step, env.cfg.max_hold)
            self._plan[key] = (visit, g)
        return HOLD if bus.holding_elapsed < self._plan[key][1] else RELEASE
