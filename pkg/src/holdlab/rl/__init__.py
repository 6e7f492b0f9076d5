from .agent import (DQNAgent, GreedyPolicy, ObsNormalizer, RewardFailure, Step, TestResult, TrainConfig, TrainResult,
                    epsilon, run_test, run_training, select_action)
from .checkpoint import load_params, save_params
from .qnet import QNetworkParams, dqn_update, forward, init_params, q_forward, td_loss_and_grad
from .replay import ReplayBuffer

__all__ = ["DQNAgent", "GreedyPolicy", "ObsNormalizer", "RewardFailure", "Step", "TestResult", "TrainConfig",
           "TrainResult", "epsilon", "run_test", "run_training", "select_action", "load_params", "save_params",
           "QNetworkParams", "dqn_update", "forward", "init_params", "q_forward", "td_loss_and_grad",
           "ReplayBuffer"]
