"""Scenarios, evaluation, run bookkeeping and the command line."""

from .evaluate import EvalSummary, SeedRow, aggregate, evaluate_multi_seed, format_table, metrics_csv, parse_seeds
from .factory import CONTROLLER_SPECS, controller_factory, load_reward
from .manifest import RunManifest
from .scenarios import BUILTINS, GenParams, builtin_scenario, case1, case2_synthetic, gen_scenario, load_scenario

__all__ = ["EvalSummary", "SeedRow", "aggregate", "evaluate_multi_seed", "format_table", "metrics_csv",
           "parse_seeds", "CONTROLLER_SPECS", "controller_factory", "load_reward", "RunManifest", "BUILTINS",
           "GenParams", "builtin_scenario", "case1", "case2_synthetic", "gen_scenario", "load_scenario"]
