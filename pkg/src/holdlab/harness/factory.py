"""String specs for controllers and rewards, as used on the command line."""

from __future__ import annotations

from pathlib import Path
from typing import Callable

from ..controllers import (ROBUST, STOCHASTIC, FeedbackController, HoldingController, ModelBasedController,
                           NoHolding, PSOConfig, PSOController)
from ..reward import RewardProgram, load_reward_file, preset
from ..rl.agent import GreedyPolicy, TrainConfig, run_training
from ..rl.checkpoint import load_params
from ..sim.config import ScenarioConfig

CONTROLLER_SPECS = ("none", "feedback", "model", "pso-robust", "pso-stochastic", "rl:<checkpoint.npz>",
                    "reward-preset:<name>[@episodes]")


def controller_factory(spec: str, scenario: ScenarioConfig,
                       pso_cfg: PSOConfig | None = None) -> Callable[[], HoldingController]:
    """Return a zero-argument constructor so each run gets a fresh controller."""
    if spec == "none":
        return NoHolding
    if spec == "feedback":
        return FeedbackController
    if spec == "model":
        return ModelBasedController
    if spec in ("pso-robust", "pso-stochastic"):
        mode = ROBUST if spec == "pso-robust" else STOCHASTIC
        return lambda: PSOController(mode, pso_cfg)
    if spec.startswith("rl:"):
        params = load_params(spec[3:])
        return lambda: GreedyPolicy(params.copy(), scenario)
    if spec.startswith("reward-preset:"):
        # train once with the preset, then act greedily with the result
        name, _, eps = spec[len("reward-preset:"):].partition("@")
        cfg = TrainConfig(seed=0, episodes=int(eps) if eps else TrainConfig.episodes)
        params = run_training(scenario, preset(name, scenario.ideal_headway()), cfg).params
        return lambda: GreedyPolicy(params.copy(), scenario)
    raise ValueError(f"unknown controller {spec!r}; choose from {', '.join(CONTROLLER_SPECS)}")


def load_reward(spec: str, scenario: ScenarioConfig) -> RewardProgram:
    """``preset:NAME`` (headway scale taken from the scenario) or a path to a reward file."""
    if spec.startswith("preset:"):
        return preset(spec[len("preset:"):], scenario.ideal_headway())
    path = Path(spec)
    if not path.exists():
        raise FileNotFoundError(f"reward file not found: {spec}")
    return load_reward_file(path)
