"""Seeded experiment execution for every planner."""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..baselines import DQNAgent, QLearningAgent, random_policy
from ..env import SimState, StepResult, UavMecEnv
from ..layout import hover_layout, initial_users
from ..mcts import MCTSPlanner
from .config_io import ExperimentSpec

log = logging.getLogger(__name__)


class ExperimentError(RuntimeError):
    def __init__(self, message: str, seed: int | None = None, partial=None):
        super().__init__(message)
        self.seed = seed
        self.partial = partial


@dataclass(frozen=True)
class IntervalRecord:
    t: int
    hover_id: int
    x: float
    y: float
    z: float
    served_user: int
    tasks: int
    e_h: float
    e_c: float
    e_f1: float
    e_f2: float
    battery: float


@dataclass
class FlightResult:
    records: list[IntervalRecord] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)

    @property
    def intervals(self) -> int:
        return len(self.records)

    @property
    def avg_reward(self) -> float:
        return float(np.mean(self.rewards)) if self.rewards else 0.0

    @property
    def avg_throughput(self) -> float:
        """Mean offloaded tasks per flown interval (multiply by B_t for bits)."""
        return sum(r.tasks for r in self.records) / self.intervals if self.records else 0.0

    @property
    def total_energy(self) -> float:
        return sum(r.e_h + r.e_c + r.e_f1 + r.e_f2 for r in self.records)

    def add(self, env: UavMecEnv, prev: SimState, action: int, res: StepResult) -> None:
        x, y, z = env.hover[action]
        e = res.energy
        self.records.append(
            IntervalRecord(
                prev.t, action, float(x), float(y), float(z),
                -1 if res.served_user is None else res.served_user, res.tasks,
                e.e_h, e.e_c, e.e_f1, e.e_f2, res.state.battery,
            )
        )
        self.rewards.append(res.reward)


@dataclass(frozen=True)
class RunMetrics:
    algo: str
    seed: int
    episodes: int
    avg_reward: float
    avg_throughput_tasks: float
    total_energy_J: float
    playouts: int
    wall_ms: float
    intervals: float = 0.0


def build_world(spec: ExperimentSpec, seed: int):
    """Environment and RNG streams for one seed.

    Hover layout, user rows, learner training, evaluation flights and planner
    randomness each draw from their own stream, so changing one planner or
    layout leaves the others' randomness untouched.
    """
    ss = np.random.SeedSequence(seed)
    hover_ss, users_ss, train_ss, eval_ss, plan_ss = ss.spawn(5)
    cfg = spec.world
    env = UavMecEnv(
        cfg,
        hover_layout(cfg, np.random.default_rng(hover_ss)),
        initial_users(cfg, np.random.default_rng(users_ss)),
    )
    eval_children = eval_ss.spawn(spec.eval_flights)
    return env, train_ss, eval_children, plan_ss


def generate_layout(spec: ExperimentSpec, seed: int):
    env, *_ = build_world(spec, seed)
    return env.hover.copy(), env.initial_positions.copy()


def _child(ss: np.random.SeedSequence, *key: int) -> np.random.SeedSequence:
    """Deterministic sub-stream of ``ss`` addressed by ``key``."""
    return np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key + tuple(key))


def fly_policy(env: UavMecEnv, choose, world_rng: np.random.Generator) -> FlightResult:
    flight = FlightResult()
    s = env.reset(world_rng)
    while not env.is_terminal(s):
        a = choose(s)
        res = env.step(s, a, world_rng)
        flight.add(env, s, a, res)
        s = res.state
    return flight


def fly_mcts(planner: MCTSPlanner, world_rng: np.random.Generator) -> FlightResult:
    env = planner.env
    flight = FlightResult()
    planner.fly(env.reset(world_rng), world_rng, on_step=lambda s, a, r: flight.add(env, s, a, r))
    return flight


def _aggregate(algo, seed, episodes, flights, playouts, wall_ms) -> RunMetrics:
    return RunMetrics(
        algo,
        seed,
        episodes,
        float(np.mean([f.avg_reward for f in flights])),
        float(np.mean([f.avg_throughput for f in flights])),
        float(np.mean([f.total_energy for f in flights])),
        int(playouts),
        float(wall_ms),
        float(np.mean([f.intervals for f in flights])),
    )


def run_seed(spec: ExperimentSpec, algo: str, seed: int):
    """All checkpoints of one algorithm on one seed -> (metrics, final flight)."""
    env, train_ss, eval_children, plan_ss = build_world(spec, seed)
    checkpoints = spec.checkpoint_list()
    metrics: list[RunMetrics] = []
    final_flight = None

    def eval_rngs():
        return [np.random.default_rng(c) for c in eval_children]

    if algo in ("mcts", "ts_mcts"):
        mode = "timesaving" if algo == "ts_mcts" else "full"
        for n in checkpoints:
            t0 = time.perf_counter()
            flights, playouts = [], 0
            for i, rng in enumerate(eval_rngs()):
                planner = MCTSPlanner(env, n, spec.uct_c, mode, np.random.default_rng(_child(plan_ss, n, i)))
                flights.append(fly_mcts(planner, rng))
                playouts += planner.counters.playouts
            wall = (time.perf_counter() - t0) * 1000.0
            metrics.append(_aggregate(algo, seed, n, flights, playouts / len(flights), wall))
            final_flight = flights[0]
    elif algo == "random":
        for n in checkpoints:
            t0 = time.perf_counter()
            prng = np.random.default_rng(_child(plan_ss, n))
            flights = [fly_policy(env, lambda s: random_policy(env, s, prng), rng) for rng in eval_rngs()]
            metrics.append(_aggregate(algo, seed, n, flights, 0, (time.perf_counter() - t0) * 1000.0))
            final_flight = flights[0]
    else:
        lp = spec.learners
        agent_rng = np.random.default_rng(plan_ss)
        if algo == "ql":
            agent = QLearningAgent(
                env, lp.ql_lr, lp.ql_discount, lp.eps_start, lp.eps_end, spec.training_episodes, agent_rng
            )
        else:
            agent = DQNAgent(
                env, lp.dqn_hidden, lp.dqn_lr, lp.dqn_discount, lp.dqn_replay, lp.dqn_batch,
                lp.dqn_sync_every, lp.eps_start, lp.eps_end, spec.training_episodes, agent_rng,
            )
        train_rng = np.random.default_rng(train_ss)
        t0 = time.perf_counter()
        done = 0
        for n in checkpoints:
            while done < n:
                agent.train_episode(train_rng)
                done += 1
            flights = [fly_policy(env, lambda s: agent.act(s, greedy=True), rng) for rng in eval_rngs()]
            metrics.append(_aggregate(algo, seed, n, flights, 0, (time.perf_counter() - t0) * 1000.0))
            final_flight = flights[0]
    return metrics, final_flight


def _seed_job(args):
    spec, algo, seed = args
    try:
        return algo, seed, run_seed(spec, algo, seed), None
    except Exception as exc:  # reported with its seed by the caller
        return algo, seed, None, f"{type(exc).__name__}: {exc}"


def _workers(num_jobs: int) -> int:
    cap = os.environ.get("SIM_THREADS")
    n = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(n, num_jobs))


@dataclass
class ExperimentResult:
    metrics: list[RunMetrics]
    traces: dict[tuple[str, int], FlightResult]

    def select(self, algo: str, episodes: int | None = None) -> list[RunMetrics]:
        rows = [m for m in self.metrics if m.algo == algo]
        if episodes is not None:
            rows = [m for m in rows if m.episodes == episodes]
        return rows

    def summary(self):
        """{(algo, episodes): (mean/std of reward and throughput, n_seeds)}."""
        groups: dict[tuple[str, int], list[RunMetrics]] = {}
        for m in self.metrics:
            groups.setdefault((m.algo, m.episodes), []).append(m)
        out = {}
        for key in sorted(groups):
            rows = groups[key]
            r = np.array([m.avg_reward for m in rows])
            th = np.array([m.avg_throughput_tasks for m in rows])
            out[key] = {
                "n_seeds": len(rows),
                "avg_reward_mean": float(r.mean()),
                "avg_reward_std": float(r.std(ddof=1)) if len(r) > 1 else 0.0,
                "avg_throughput_mean": float(th.mean()),
                "avg_throughput_std": float(th.std(ddof=1)) if len(th) > 1 else 0.0,
            }
        return out


def seeds_of(spec: ExperimentSpec) -> list[int]:
    return [spec.base_seed + i for i in range(spec.num_seeds)]


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    """Run every (algorithm, seed) pair and optionally export CSVs.

    A failing seed does not discard finished ones: results gathered so far
    are exported before an :class:`ExperimentError` naming the seed is raised.
    """
    from .export import ensure_writable, export_csv

    if spec.output_dir is not None:
        ensure_writable(spec.output_dir)
    jobs = [(spec, algo, seed) for algo in spec.algorithms for seed in seeds_of(spec)]
    workers = _workers(len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_seed_job, jobs))
    else:
        outcomes = [_seed_job(j) for j in jobs]

    metrics: list[RunMetrics] = []
    traces: dict[tuple[str, int], FlightResult] = {}
    failure = None
    for algo, seed, payload, err in outcomes:
        if err is not None:
            log.error("%s seed %d failed: %s", algo, seed, err)
            failure = failure or (algo, seed, err)
            continue
        rows, flight = payload
        metrics.extend(rows)
        traces[(algo, seed)] = flight
    metrics.sort(key=lambda m: (m.algo, m.seed, m.episodes))
    result = ExperimentResult(metrics, traces)
    if spec.output_dir is not None:
        export_csv(result, spec.output_dir, spec.wall_clock)
    if failure is not None:
        algo, seed, err = failure
        raise ExperimentError(f"{algo} failed on seed {seed}: {err}", seed=seed, partial=result)
    return result
