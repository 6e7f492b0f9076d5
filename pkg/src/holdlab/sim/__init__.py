from .config import ConfigError, Demand, LineConfig, ScenarioConfig, StopSpec, load_demand_csv
from .demand import PassengerRecord, generate_passengers
from .dynamics import InvariantViolation, alighting_count, alighting_set, boarding_count, dwell_time, line_headways
from .env import BusEnv, run_episode
from .metrics import MetricsReport, compute_metrics

__all__ = [
    "ConfigError", "Demand", "LineConfig", "ScenarioConfig", "StopSpec", "load_demand_csv",
    "PassengerRecord", "generate_passengers", "InvariantViolation", "alighting_count", "alighting_set",
    "boarding_count", "dwell_time", "line_headways", "BusEnv", "run_episode", "MetricsReport",
    "compute_metrics",
]
