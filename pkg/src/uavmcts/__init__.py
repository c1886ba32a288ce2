"""UAV-aided mobile edge computing simulator with an online MCTS path planner."""

from .config import ConfigError, WorldConfig
from .env import EnergyBreakdown, SimState, UavMecEnv
from .mcts import MCTSPlanner, TreeNode, ts_budget

__all__ = ["ConfigError", "WorldConfig", "EnergyBreakdown", "SimState", "UavMecEnv", "MCTSPlanner", "TreeNode", "ts_budget"]
__version__ = "0.1.0"
