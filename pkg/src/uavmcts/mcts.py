"""Online Monte Carlo Tree Search planner for the UAV hover sequence.

Each committed move runs a fixed number of simulations (selection by UCT,
one expansion, a random playout, backpropagation) from the current root and
then commits a root child. The default commit rule is the exploitation term
of UCT (best Q/N); committing on the full UCT score is available but, once
the search has balanced the children, it is close to a uniform pick. The
committed child is re-rooted on the real post-transition state so its
statistics carry over.

The world is stochastic while nodes store a single state. Nodes keep the
state seen when they were expanded; every simulation re-steps the world from
the root with fresh randomness, and legality is always judged on the
simulated state rather than the stored one.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .env import SimState, UavMecEnv

MODES = ("full", "timesaving")
COMMIT_RULES = ("mean", "visits", "uct")


class PlanningError(RuntimeError):
    pass


class TreeNode:
    __slots__ = ("state", "action", "parent", "children", "untried", "visits", "quality")

    def __init__(self, state: SimState, action: int | None = None, parent: "TreeNode | None" = None):
        self.state = state
        self.action = action
        self.parent = parent
        self.children: dict[int, TreeNode] = {}
        self.untried: set[int] = set()
        self.visits = 0
        self.quality = 0.0

    @property
    def mean(self) -> float:
        return self.quality / self.visits if self.visits else 0.0

    def __repr__(self) -> str:
        return f"TreeNode(action={self.action}, N={self.visits}, Q={self.quality:.4f})"


def uct_value(child: TreeNode, parent_visits: int, c: float) -> float:
    if child.visits == 0:
        return math.inf
    return child.quality / child.visits + c * math.sqrt(2.0 * math.log(parent_visits) / child.visits)


def best_uct_child(children, parent_visits: int, c: float) -> TreeNode:
    best, best_val = None, -math.inf
    for ch in children:
        val = uct_value(ch, parent_visits, c)
        if best is None or val > best_val:
            best, best_val = ch, val
    return best


def ts_budget(layer: int, n: int, m: int) -> int:
    """Simulations at tree layer ``layer`` (1-indexed) under the timesaving schedule."""
    if not 1 <= layer <= m:
        raise ValueError(f"layer must lie in [1, {m}], got {layer}")
    return max(1, int(round(n - (layer - 1) * n / m)))


def schedule_total(n: int, m: int, mode: str = "full") -> int:
    if mode == "full":
        return n * m
    return sum(ts_budget(layer, n, m) for layer in range(1, m + 1))


def loop_iterations(n: int, m: int, x: int, mode: str = "full") -> float:
    """Closed-form loop count per flight, ``x`` selection/expansion steps per episode.

    Each episode costs ``m + x`` iterations (descent, rollout, backup); the
    timesaving variant sums the arithmetic series of per-layer budgets.
    """
    if mode == "full":
        return m * n * (m + x)
    return (m + x) * (m * n / 2 + n / 2)


def playout(state: SimState, env: UavMecEnv, rng: np.random.Generator, rewards: list[float] | None = None):
    """Random-policy rollout until a terminal state.

    Returns (mean reward, number of steps). Rewards are appended to
    ``rewards`` when given.
    """
    total, steps = 0.0, 0
    s = state
    while True:
        legal = env.legal_actions(s)
        if not legal:
            break
        a = legal[rng.integers(len(legal))]
        res = env.step(s, a, rng)
        total += res.reward
        if rewards is not None:
            rewards.append(res.reward)
        s = res.state
        steps += 1
    return (total / steps if steps else 0.0), steps


def backpropagate(path: list[TreeNode], value: float) -> None:
    for node in path:
        node.visits += 1
        node.quality += value


@dataclass
class SearchCounters:
    playouts: int = 0
    selection_steps: int = 0
    expansions: int = 0
    rollout_steps: int = 0
    backup_steps: int = 0
    moves: int = 0
    per_layer: list[int] = field(default_factory=list)

    @property
    def tree_ops(self) -> int:
        return self.selection_steps + self.expansions + self.rollout_steps + self.backup_steps

    def as_dict(self) -> dict:
        return {
            "playouts": self.playouts,
            "tree_ops": self.tree_ops,
            "selection_steps": self.selection_steps,
            "expansions": self.expansions,
            "rollout_steps": self.rollout_steps,
            "backup_steps": self.backup_steps,
            "moves": self.moves,
            "per_layer": list(self.per_layer),
        }


class MCTSPlanner:
    def __init__(
        self,
        env: UavMecEnv,
        episodes: int,
        c: float = 1.414,
        mode: str = "full",
        rng: np.random.Generator | None = None,
        commit: str = "mean",
    ):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if commit not in COMMIT_RULES:
            raise ValueError(f"commit must be one of {COMMIT_RULES}")
        if episodes < 1:
            raise ValueError("episodes must be >= 1")
        self.env = env
        self.episodes = episodes
        self.c = c
        self.mode = mode
        self.rng = rng if rng is not None else np.random.default_rng()
        self.counters = SearchCounters()
        self.commit = commit

    def new_root(self, state: SimState) -> TreeNode:
        root = TreeNode(state)
        root.untried = set(self.env.legal_actions(state))
        return root

    def budget(self, layer: int) -> int:
        m = self.env.config.tree_depth
        if self.mode == "full":
            return self.episodes
        return ts_budget(layer, self.episodes, m)

    def select_and_expand(self, root: TreeNode) -> tuple[list[TreeNode], SimState, list[float]]:
        """Descend by UCT and expand one untried action.

        Returns the root-to-leaf path, the simulated leaf state and the rewards
        collected on the way down.
        """
        env, rng = self.env, self.rng
        node, s = root, root.state
        path = [root]
        rewards: list[float] = []
        while True:
            legal = env.legal_actions(s)
            if not legal:
                break
            untried = [a for a in legal if a not in node.children]
            if untried:
                a = untried[rng.integers(len(untried))]
                res = env.step(s, a, rng)
                child = TreeNode(res.state, a, node)
                child.untried = set(env.legal_actions(res.state))
                node.children[a] = child
                node.untried.discard(a)
                path.append(child)
                rewards.append(res.reward)
                self.counters.expansions += 1
                s = res.state
                break
            child = best_uct_child([node.children[a] for a in legal], node.visits, self.c)
            res = env.step(s, child.action, rng)
            rewards.append(res.reward)
            self.counters.selection_steps += 1
            node, s = child, res.state
            path.append(node)
        return path, s, rewards

    def simulate(self, root: TreeNode) -> float:
        path, leaf_state, rewards = self.select_and_expand(root)
        playout(leaf_state, self.env, self.rng, rewards)
        self.counters.playouts += 1
        self.counters.rollout_steps += len(rewards) - (len(path) - 1)
        # average over every interval simulated below the root
        value = sum(rewards) / len(rewards) if rewards else 0.0
        backpropagate(path, value)
        self.counters.backup_steps += len(path)
        return value

    def plan_step(self, root: TreeNode, episodes: int | None = None) -> int:
        if self.env.is_terminal(root.state):
            raise PlanningError("root state is terminal")
        n = episodes if episodes is not None else self.budget(root.state.t + 1)
        for _ in range(n):
            self.simulate(root)
        self.counters.per_layer.append(n)
        self.counters.moves += 1
        legal = self.env.legal_actions(root.state)
        kids = [root.children[a] for a in legal if a in root.children]
        if not kids:
            raise PlanningError("root has no expanded children after search")
        if self.commit == "uct":
            return best_uct_child(kids, root.visits, self.c).action
        if self.commit == "visits":
            return max(kids, key=lambda ch: (ch.visits, ch.mean)).action
        return best_uct_child(kids, root.visits, 0.0).action

    def reroot(self, root: TreeNode, action: int, real_state: SimState) -> TreeNode:
        """Make the committed child the new root, anchored to the observed state."""
        child = root.children.get(action)
        if child is None:
            return self.new_root(real_state)
        child.parent = None
        child.state = real_state
        legal = set(self.env.legal_actions(real_state))
        child.children = {a: ch for a, ch in child.children.items() if a in legal}
        child.untried = legal - child.children.keys()
        return child

    def fly(self, state: SimState, rng: np.random.Generator, on_step=None) -> list:
        """Plan and execute a whole flight; ``rng`` drives the real world."""
        root = self.new_root(state)
        steps = []
        while not self.env.is_terminal(root.state):
            action = self.plan_step(root)
            res = self.env.step(root.state, action, rng)
            steps.append((root.state, action, res))
            if on_step is not None:
                on_step(root.state, action, res)
            root = self.reroot(root, action, res.state)
        return steps


def timed_flight(planner: MCTSPlanner, state: SimState, rng: np.random.Generator):
    t0 = time.perf_counter()
    steps = planner.fly(state, rng)
    return steps, (time.perf_counter() - t0) * 1000.0
