"""Comparison planners: tabular Q-learning, a small numpy DQN and a random policy."""

from .common import act_epsilon_greedy, discretize_state, random_policy, state_features
from .dqn import DQNAgent, MlpQNetwork
from .qlearning import QLearningAgent, QTable

__all__ = [
    "act_epsilon_greedy",
    "discretize_state",
    "random_policy",
    "state_features",
    "DQNAgent",
    "MlpQNetwork",
    "QLearningAgent",
    "QTable",
]
