from .base import HOLD, RELEASE, HoldingController, NoHolding, quantize_hold
from .feedback import FeedbackController, ModelBasedController, feedback_decide, model_based_hold
from .pso import (ROBUST, STOCHASTIC, PlanExecutor, PlanProblem, PSOConfig, PSOController, brute_force,
                  forecast_slots, pso_optimize, window_waiting_time)

__all__ = ["HOLD", "RELEASE", "HoldingController", "NoHolding", "quantize_hold", "FeedbackController",
           "ModelBasedController", "feedback_decide", "model_based_hold", "ROBUST", "STOCHASTIC", "PlanExecutor",
           "PlanProblem", "PSOConfig", "PSOController", "brute_force", "forecast_slots", "pso_optimize",
           "window_waiting_time"]
