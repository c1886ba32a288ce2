"""Minimal DQN in plain numpy: two ReLU hidden layers, experience replay and
a periodically synced target network, trained with Adam."""

from __future__ import annotations

import json

import numpy as np

from ..env import SimState, UavMecEnv
from .common import act_epsilon_greedy, feature_dim, state_features


class MlpQNetwork:
    def __init__(self, sizes: list[int], rng: np.random.Generator | None = None):
        self.sizes = list(sizes)
        rng = rng if rng is not None else np.random.default_rng()
        self.params: dict[str, np.ndarray] = {}
        for i, (fan_in, fan_out) in enumerate(zip(sizes, sizes[1:])):
            self.params[f"W{i}"] = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
            self.params[f"b{i}"] = np.zeros(fan_out)

    @property
    def num_layers(self) -> int:
        return len(self.sizes) - 1

    def forward(self, x: np.ndarray, keep: bool = False):
        h = np.atleast_2d(x)
        cache = [h]
        for i in range(self.num_layers):
            z = h @ self.params[f"W{i}"] + self.params[f"b{i}"]
            h = np.maximum(z, 0.0) if i < self.num_layers - 1 else z
            cache.append(h)
        return (h, cache) if keep else h

    def backward(self, cache: list[np.ndarray], dout: np.ndarray) -> dict[str, np.ndarray]:
        grads = {}
        g = dout
        for i in reversed(range(self.num_layers)):
            h_in = cache[i]
            grads[f"W{i}"] = h_in.T @ g
            grads[f"b{i}"] = g.sum(axis=0)
            if i > 0:
                g = (g @ self.params[f"W{i}"].T) * (cache[i] > 0)
        return grads

    def copy(self) -> "MlpQNetwork":
        other = MlpQNetwork.__new__(MlpQNetwork)
        other.sizes = list(self.sizes)
        other.params = {k: v.copy() for k, v in self.params.items()}
        return other

    def load_from(self, other: "MlpQNetwork") -> None:
        for k, v in other.params.items():
            self.params[k][...] = v

    def to_json(self) -> str:
        return json.dumps(
            {"kind": "mlp", "sizes": self.sizes, "params": {k: v.tolist() for k, v in self.params.items()}}
        )

    @classmethod
    def from_json(cls, text: str) -> "MlpQNetwork":
        d = json.loads(text)
        if d.get("kind") != "mlp":
            raise ValueError("not a serialised MlpQNetwork")
        net = cls.__new__(cls)
        net.sizes = list(d["sizes"])
        net.params = {k: np.asarray(v, dtype=float) for k, v in d["params"].items()}
        return net


class Adam:
    def __init__(self, params: dict[str, np.ndarray], lr: float = 1e-3, b1=0.9, b2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1 - self.b1**self.t
        c2 = 1 - self.b2**self.t
        for k, g in grads.items():
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def td_targets(target: MlpQNetwork, rewards, next_states, dones, next_masks, gamma: float) -> np.ndarray:
    qn = target.forward(next_states)
    qn = np.where(next_masks, qn, -np.inf)
    best = qn.max(axis=1)
    live = (~np.asarray(dones, bool)) & np.isfinite(best)
    return np.asarray(rewards, float) + gamma * np.where(live, best, 0.0)


def td_loss_and_grads(net: MlpQNetwork, states, actions, targets):
    """Mean squared TD error and its gradient w.r.t. the online parameters."""
    q, cache = net.forward(states, keep=True)
    idx = np.arange(len(actions))
    err = q[idx, actions] - targets
    loss = float(np.mean(err**2))
    dout = np.zeros_like(q)
    dout[idx, actions] = 2.0 * err / len(actions)
    return loss, net.backward(cache, dout)


def dqn_update(net: MlpQNetwork, target: MlpQNetwork, batch: tuple, optimizer: Adam, gamma: float) -> float:
    states, actions, rewards, next_states, dones, next_masks = batch
    y = td_targets(target, rewards, next_states, dones, next_masks, gamma)
    loss, grads = td_loss_and_grads(net, states, actions, y)
    optimizer.step(net.params, grads)
    return loss


class ReplayBuffer:
    def __init__(self, capacity: int, state_dim: int, num_actions: int):
        self.capacity = capacity
        self.s = np.zeros((capacity, state_dim))
        self.a = np.zeros(capacity, dtype=np.int64)
        self.r = np.zeros(capacity)
        self.s2 = np.zeros((capacity, state_dim))
        self.done = np.zeros(capacity, dtype=bool)
        self.mask2 = np.zeros((capacity, num_actions), dtype=bool)
        self.size = 0
        self._i = 0

    def __len__(self) -> int:
        return self.size

    def push(self, s, a, r, s2, done, mask2) -> None:
        i = self._i
        self.s[i], self.a[i], self.r[i], self.s2[i], self.done[i], self.mask2[i] = s, a, r, s2, done, mask2
        self._i = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        idx = rng.integers(self.size, size=batch_size)
        return self.s[idx], self.a[idx], self.r[idx], self.s2[idx], self.done[idx], self.mask2[idx]


class DQNAgent:
    def __init__(
        self,
        env: UavMecEnv,
        hidden: int = 64,
        lr: float = 1e-3,
        discount: float = 0.9,
        replay_size: int = 10_000,
        batch_size: int = 64,
        sync_every: int = 200,
        eps_start: float = 1.0,
        eps_end: float = 0.05,
        anneal_episodes: int = 1000,
        rng: np.random.Generator | None = None,
    ):
        self.env = env
        self.rng = rng if rng is not None else np.random.default_rng()
        dim = feature_dim(env)
        self.net = MlpQNetwork([dim, hidden, hidden, env.num_actions], self.rng)
        self.target = self.net.copy()
        self.opt = Adam(self.net.params, lr)
        self.discount = discount
        self.replay = ReplayBuffer(replay_size, dim, env.num_actions)
        self.batch_size = batch_size
        self.sync_every = sync_every
        self.eps_start, self.eps_end = eps_start, eps_end
        self.anneal_episodes = max(1, anneal_episodes)
        self.episodes_done = 0
        self.updates = 0
        self.last_loss = float("nan")

    def epsilon(self) -> float:
        frac = min(1.0, self.episodes_done / self.anneal_episodes)
        return self.eps_start + frac * (self.eps_end - self.eps_start)

    def act(self, state: SimState, greedy: bool = False) -> int:
        legal = self.env.legal_actions(state)
        eps = 0.0 if greedy else self.epsilon()
        if len(legal) > 1 and eps > 0 and self.rng.random() < eps:
            return legal[self.rng.integers(len(legal))]
        q = self.net.forward(state_features(state, self.env))[0]
        return act_epsilon_greedy(q, legal, 0.0, self.rng)

    def _mask(self, state: SimState) -> np.ndarray:
        m = np.zeros(self.env.num_actions, dtype=bool)
        m[list(self.env.legal_actions(state))] = True
        return m

    def train_episode(self, world_rng: np.random.Generator) -> float:
        env = self.env
        s = env.reset(world_rng)
        feats = state_features(s, env)
        total = 0.0
        while not env.is_terminal(s):
            a = self.act(s)
            res = env.step(s, a, world_rng)
            feats2 = state_features(res.state, env)
            mask2 = self._mask(res.state)
            self.replay.push(feats, a, res.reward, feats2, not mask2.any(), mask2)
            total += res.reward
            if len(self.replay) >= self.batch_size:
                batch = self.replay.sample(self.batch_size, self.rng)
                self.last_loss = dqn_update(self.net, self.target, batch, self.opt, self.discount)
                self.updates += 1
                if self.updates % self.sync_every == 0:
                    self.target.load_from(self.net)
            s, feats = res.state, feats2
        self.episodes_done += 1
        return total
