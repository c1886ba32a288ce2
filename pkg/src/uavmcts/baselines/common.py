from __future__ import annotations

from typing import Sequence

import numpy as np

from ..config import WorldConfig
from ..env import SimState, TerminalStateError, UavMecEnv

BATTERY_BINS = 10


def discretize_state(state: SimState, config: WorldConfig) -> tuple:
    """Table key: (hover id, battery decile, per-user serve counts).

    User positions and demands are deliberately left out to keep the table small.
    """
    frac = state.battery / config.battery_e0
    bucket = min(BATTERY_BINS - 1, max(0, int(frac * BATTERY_BINS)))
    return (state.uav_hover_id, bucket, tuple(int(c) for c in state.served))


def state_features(state: SimState, env: UavMecEnv) -> np.ndarray:
    """Dense feature vector for the DQN."""
    cfg = env.config
    k = env.num_actions
    onehot = np.zeros(k)
    onehot[state.uav_hover_id] = 1.0
    dims = 3 if cfg.is_3d else 2
    pos = state.positions[:, :dims].copy()
    pos[:, :2] /= cfg.region_size
    if dims == 3:
        pos[:, 2] /= max(cfg.user_z_max, 1.0)
    return np.concatenate(
        [
            onehot,
            [state.battery / cfg.battery_e0, state.t / cfg.tree_depth],
            pos.ravel(),
            state.demands / cfg.u_max,
            state.served / 2.0,
        ]
    )


def feature_dim(env: UavMecEnv) -> int:
    cfg = env.config
    dims = 3 if cfg.is_3d else 2
    return env.num_actions + 2 + cfg.num_users * (dims + 2)


def act_epsilon_greedy(
    values: np.ndarray, legal: Sequence[int], epsilon: float, rng: np.random.Generator
) -> int:
    """Epsilon-greedy over ``legal`` indices of ``values``; lowest index wins ties."""
    if not legal:
        raise ValueError("no legal actions")
    if len(legal) == 1:
        return legal[0]
    if epsilon > 0 and rng.random() < epsilon:
        return legal[rng.integers(len(legal))]
    legal_arr = np.asarray(legal)
    return int(legal_arr[np.argmax(np.asarray(values)[legal_arr])])


def random_policy(env: UavMecEnv, state: SimState, rng: np.random.Generator) -> int:
    legal = env.legal_actions(state)
    if not legal:
        raise TerminalStateError("random_policy called on a terminal state")
    return legal[rng.integers(len(legal))]
