"""Tabular Q-learning over a discretised flight state."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..env import SimState, UavMecEnv
from .common import act_epsilon_greedy, discretize_state


@dataclass
class QTable:
    num_actions: int
    learning_rate: float = 0.1
    discount: float = 0.9
    epsilon: float = 1.0
    table: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must lie in (0, 1]")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")

    def values(self, key) -> np.ndarray:
        row = self.table.get(key)
        if row is None:
            row = np.zeros(self.num_actions)
            self.table[key] = row
        return row

    def peek(self, key) -> np.ndarray:
        row = self.table.get(key)
        return row if row is not None else np.zeros(self.num_actions)

    def to_json(self) -> str:
        rows = [[list(_jsonable(k)), v.tolist()] for k, v in self.table.items()]
        return json.dumps(
            {
                "kind": "qtable",
                "num_actions": self.num_actions,
                "learning_rate": self.learning_rate,
                "discount": self.discount,
                "epsilon": self.epsilon,
                "rows": rows,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "QTable":
        d = json.loads(text)
        if d.get("kind") != "qtable":
            raise ValueError("not a serialised QTable")
        qt = cls(d["num_actions"], d["learning_rate"], d["discount"], d["epsilon"])
        for key, vals in d["rows"]:
            qt.table[_tupled(key)] = np.asarray(vals, dtype=float)
        return qt


def _jsonable(key):
    return [list(k) if isinstance(k, tuple) else k for k in key]


def _tupled(key):
    return tuple(tuple(k) if isinstance(k, list) else k for k in key)


def ql_update(qt: QTable, s, a: int, r: float, s_next, next_legal=(), terminal: bool = False) -> float:
    """One Bellman backup on Q(s, a); returns the TD error."""
    row = qt.values(s)
    future = 0.0
    if not terminal and len(next_legal):
        future = float(np.max(qt.peek(s_next)[list(next_legal)]))
    td = r + qt.discount * future - row[a]
    row[a] += qt.learning_rate * td
    return td


class QLearningAgent:
    def __init__(
        self,
        env: UavMecEnv,
        learning_rate: float = 0.1,
        discount: float = 0.9,
        eps_start: float = 1.0,
        eps_end: float = 0.05,
        anneal_episodes: int = 1000,
        rng: np.random.Generator | None = None,
    ):
        self.env = env
        self.q = QTable(env.num_actions, learning_rate, discount, eps_start)
        self.eps_start, self.eps_end = eps_start, eps_end
        self.anneal_episodes = max(1, anneal_episodes)
        self.rng = rng if rng is not None else np.random.default_rng()
        self.episodes_done = 0

    def epsilon(self) -> float:
        frac = min(1.0, self.episodes_done / self.anneal_episodes)
        return self.eps_start + frac * (self.eps_end - self.eps_start)

    def key(self, state: SimState):
        return discretize_state(state, self.env.config)

    def act(self, state: SimState, greedy: bool = False) -> int:
        legal = self.env.legal_actions(state)
        eps = 0.0 if greedy else self.epsilon()
        return act_epsilon_greedy(self.q.peek(self.key(state)), legal, eps, self.rng)

    def train_episode(self, world_rng: np.random.Generator) -> float:
        env = self.env
        self.q.epsilon = self.epsilon()
        s = env.reset(world_rng)
        total = 0.0
        while not env.is_terminal(s):
            a = self.act(s)
            res = env.step(s, a, world_rng)
            nxt_legal = env.legal_actions(res.state)
            ql_update(self.q, self.key(s), a, res.reward, self.key(res.state), nxt_legal, not nxt_legal)
            total += res.reward
            s = res.state
        self.episodes_done += 1
        return total
