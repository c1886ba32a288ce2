"""World model: user mobility, LoS channel, energy accounting, fairness and
the per-interval state transition.

The formula helpers accept scalars or numpy arrays so the vectorised
per-action planner and the scalar API share one implementation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import WorldConfig


class TerminalStateError(RuntimeError):
    """Raised when stepping a state that is already terminal."""


class IllegalActionError(ValueError):
    pass


@dataclass(frozen=True)
class HoverPoint:
    id: int
    position: np.ndarray


@dataclass(frozen=True)
class UserState:
    id: int
    position: np.ndarray
    task_demand: int
    times_served: int


@dataclass(frozen=True)
class EnergyBreakdown:
    e_h: float
    e_c: float
    e_f1: float
    e_f2: float

    @property
    def total_w(self) -> float:
        return self.e_h + self.e_c + self.e_f1 + self.e_f2


@dataclass(eq=False)
class SimState:
    uav_hover_id: int
    battery: float
    positions: np.ndarray
    demands: np.ndarray
    served: np.ndarray
    t: int = 0
    _plan: "_ServePlan | None" = field(default=None, repr=False)
    _legal: "tuple[int, ...] | None" = field(default=None, repr=False)

    @property
    def users(self) -> list[UserState]:
        return [
            UserState(i, self.positions[i].copy(), int(self.demands[i]), int(self.served[i]))
            for i in range(len(self.demands))
        ]

    def copy(self) -> "SimState":
        return SimState(
            self.uav_hover_id,
            self.battery,
            self.positions.copy(),
            self.demands.copy(),
            self.served.copy(),
            self.t,
        )

    def same_as(self, other: "SimState") -> bool:
        return (
            self.uav_hover_id == other.uav_hover_id
            and self.battery == other.battery
            and self.t == other.t
            and np.array_equal(self.positions, other.positions)
            and np.array_equal(self.demands, other.demands)
            and np.array_equal(self.served, other.served)
        )


@dataclass(frozen=True)
class StepResult:
    state: SimState
    reward: float
    energy: EnergyBreakdown
    served_user: int | None
    tasks: int


# ---------------------------------------------------------------------------
# formulas


def advance_users(positions: np.ndarray, config: WorldConfig, rng: np.random.Generator) -> np.ndarray:
    """Random-waypoint displacement of every coordinate, clamped to the region."""
    eps = config.mobility_epsilon
    dims = 3 if config.is_3d else 2
    n = positions.shape[0]
    alpha = rng.uniform(-eps, eps, size=(n, dims))
    out = positions.copy()
    out[:, :dims] += alpha
    hi = config.region_size
    if dims == 3:
        hi = np.array([hi, hi, config.user_z_max])
    out[:, :dims] = np.minimum(np.maximum(out[:, :dims], 0.0), hi)
    return out


def sample_tasks(num_users: int, config: WorldConfig, rng: np.random.Generator) -> np.ndarray:
    raw = rng.normal(config.task_mean, config.task_std, size=num_users)
    return np.minimum(np.maximum(np.rint(raw), 0), config.u_max).astype(np.int64)


def fairness_eligible(times_served: int, task_demand: float, beta: float) -> bool:
    return times_served == 0 or (times_served == 1 and task_demand > beta)


def eligible_mask(served: np.ndarray, demands: np.ndarray, beta: float) -> np.ndarray:
    return (served == 0) | ((served == 1) & (demands > beta))


def select_user(
    hover_pos: np.ndarray,
    positions: np.ndarray,
    demands: np.ndarray,
    served: np.ndarray,
    beta: float,
    tol: float = 1e-6,
) -> int | None:
    """Nearest eligible user; near-ties go to the larger demand, then lower id."""
    elig = eligible_mask(served, demands, beta)
    if not elig.any():
        return None
    d = np.sqrt(((positions - hover_pos) ** 2).sum(axis=1))
    d = np.where(elig, d, np.inf)
    cand = d <= d.min() + tol
    return int(np.argmax(np.where(cand, demands, -1)))


def channel_gain_d2(d2, config: WorldConfig):
    return config.ref_gain / d2


def channel_gain(hover_pos, user_pos, config: WorldConfig) -> float:
    """Free-space LoS power gain between a hover point and a user.

    Hover points sit at the flight altitude and ground users at z = 0, so the
    squared 3-D distance is H^2 plus the horizontal term in 2-D mode.
    """
    diff = np.asarray(hover_pos, dtype=float) - np.asarray(user_pos, dtype=float)
    d2 = float(diff @ diff)
    if d2 <= 0.0:
        raise ValueError("zero UAV-user separation")
    return float(channel_gain_d2(d2, config))


def upload_rate(gain, config: WorldConfig):
    return np.log2(1.0 + config.upload_power * gain / config.noise_power)


def fly_energy(dist, config: WorldConfig):
    """(e_f1, e_f2) for flying ``dist`` metres at the configured speed."""
    v = config.uav_speed
    if v <= 0:
        raise ValueError("uav_speed must be > 0")
    kappa = 0.5 * config.uav_mass * (dist / v)
    e_f1 = kappa * v**2
    e_f2 = config.kappa1 * v**3 + (config.kappa2 / v) * (1.0 + config.uav_accel**2 / config.gravity**2)
    return e_f1, e_f2


def compute_energy(bits, config: WorldConfig):
    return config.switched_cap * config.cpu_cycles * bits * config.cpu_freq**2


def interval_energy(
    from_point, to_point, tasks: int, config: WorldConfig, rate: float | None = None
) -> EnergyBreakdown:
    """Energy of one interval: fly ``from_point -> to_point`` then upload and
    compute ``tasks`` tasks at ``rate`` bits/s."""
    if config.uav_speed <= 0:
        raise ValueError("uav_speed must be > 0")
    if tasks < 0:
        raise ValueError("tasks must be >= 0")
    dist = float(np.linalg.norm(np.asarray(to_point, float) - np.asarray(from_point, float)))
    e_f1, e_f2 = fly_energy(dist, config)
    bits = tasks * config.task_bits
    if tasks == 0:
        e_h = 0.0
    else:
        if rate is None or rate <= 0:
            raise ValueError("serving tasks needs a positive upload rate")
        e_h = config.hover_power * bits / rate
    return EnergyBreakdown(float(e_h), float(compute_energy(bits, config)), float(e_f1), float(e_f2))


def reward(tasks: float, total_w: float, config: WorldConfig) -> float:
    return tasks / config.u_max - total_w / config.w_max


def _worst_rate(config: WorldConfig) -> float:
    """Upload rate of the farthest user any hover point can face."""
    r = config.region_size
    if config.is_3d:
        d2 = 2 * r * r + config.plane_heights[-1] ** 2
    else:
        d2 = 2 * r * r + config.altitude**2
    return float(upload_rate(channel_gain_d2(d2, config), config))


# ---------------------------------------------------------------------------
# environment


@dataclass(frozen=True)
class _ServePlan:
    """Outcome of flying to every hover point from one state."""

    served: np.ndarray  # user id per hover point, -1 when idle
    tasks: np.ndarray
    e_h: np.ndarray
    e_c: np.ndarray
    e_f1: np.ndarray
    e_f2: float
    total: np.ndarray


class UavMecEnv:
    """Single-UAV MEC world over a fixed set of hover points.

    States are never mutated by :meth:`step`; each call returns a new one.
    """

    def __init__(self, config: WorldConfig, hover_points: np.ndarray, initial_positions: np.ndarray):
        self.config = config
        self.hover = np.asarray(hover_points, dtype=float)
        self.initial_positions = np.asarray(initial_positions, dtype=float)
        if self.hover.shape != (config.num_hover_points, 3):
            raise ValueError(f"expected {config.num_hover_points} hover points, got {self.hover.shape}")
        if self.initial_positions.shape != (config.num_users, 3):
            raise ValueError("initial_positions must have shape (num_users, 3)")
        diff = self.hover[:, None, :] - self.hover[None, :, :]
        self._hover_dist = np.sqrt((diff**2).sum(axis=2))
        self.num_actions = config.num_hover_points
        self._all_actions = tuple(range(self.num_actions))
        self._threshold = config.battery_threshold * config.battery_e0
        # per-state energy bound: farthest flight from here plus the largest
        # eligible demand uploaded at the worst-case rate
        f1, self._e_f2 = fly_energy(self._hover_dist.max(axis=1), config)
        self._fly_bound = f1 + self._e_f2
        hover_per_task = config.hover_power * config.task_bits / _worst_rate(config)
        self._per_task_bound = hover_per_task + compute_energy(config.task_bits, config)

    @property
    def hover_points(self) -> list[HoverPoint]:
        return [HoverPoint(k, self.hover[k].copy()) for k in range(self.num_actions)]

    def reset(self, rng: np.random.Generator) -> SimState:
        cfg = self.config
        return SimState(
            uav_hover_id=cfg.start_hover_id,
            battery=float(cfg.battery_e0),
            positions=self.initial_positions.copy(),
            demands=sample_tasks(cfg.num_users, cfg, rng),
            served=np.zeros(cfg.num_users, dtype=np.int64),
            t=0,
        )

    def _plan(self, state: SimState) -> _ServePlan:
        if state._plan is not None:
            return state._plan
        cfg = self.config
        elig = eligible_mask(state.served, state.demands, cfg.task_threshold)
        k = self.num_actions
        if elig.any():
            diff = self.hover[:, None, :] - state.positions[None, :, :]
            d2 = (diff**2).sum(axis=2)
            d = np.where(elig, np.sqrt(d2), np.inf)
            cand = d <= d.min(axis=1, keepdims=True) + cfg.dist_tie_tol
            served = np.argmax(np.where(cand, state.demands, -1), axis=1)
            rows = np.arange(k)
            tasks = state.demands[served]
            best_d2 = d2[rows, served]
            if np.any(best_d2 <= 0.0):
                raise ValueError("zero UAV-user separation")
            rate = upload_rate(channel_gain_d2(best_d2, cfg), cfg)
            bits = tasks * cfg.task_bits
            e_h = np.where(tasks > 0, cfg.hover_power * bits / rate, 0.0)
            e_c = compute_energy(bits, cfg).astype(float)
        else:
            served = np.full(k, -1)
            tasks = np.zeros(k, dtype=np.int64)
            e_h = np.zeros(k)
            e_c = np.zeros(k)
        e_f1, e_f2 = fly_energy(self._hover_dist[state.uav_hover_id], cfg)
        total = e_h + e_c + e_f1 + e_f2
        plan = _ServePlan(served, tasks, e_h, e_c, e_f1, float(e_f2), total)
        state._plan = plan
        return plan

    def _single(self, state: SimState, action: int) -> tuple[int, int, EnergyBreakdown, float]:
        """Same arithmetic as :meth:`_plan` restricted to one hover point."""
        cfg = self.config
        elig = eligible_mask(state.served, state.demands, cfg.task_threshold)
        dist = self._hover_dist[state.uav_hover_id, action : action + 1]
        e_f1, e_f2 = fly_energy(dist, cfg)
        if elig.any():
            d2 = ((self.hover[action] - state.positions) ** 2).sum(axis=1)
            d = np.where(elig, np.sqrt(d2), np.inf)
            cand = d <= d.min() + cfg.dist_tie_tol
            user = int(np.argmax(np.where(cand, state.demands, -1)))
            tasks = state.demands[user : user + 1]
            best_d2 = d2[user : user + 1]
            if best_d2[0] <= 0.0:
                raise ValueError("zero UAV-user separation")
            rate = upload_rate(channel_gain_d2(best_d2, cfg), cfg)
            bits = tasks * cfg.task_bits
            e_h = np.where(tasks > 0, cfg.hover_power * bits / rate, 0.0)
            e_c = compute_energy(bits, cfg).astype(float)
        else:
            user, tasks = -1, np.zeros(1, dtype=np.int64)
            e_h = e_c = np.zeros(1)
        total = e_h + e_c + e_f1 + e_f2
        energy = EnergyBreakdown(float(e_h[0]), float(e_c[0]), float(e_f1[0]), float(e_f2))
        return user, int(tasks[0]) if user >= 0 else 0, energy, float(total[0])

    def energy_bound(self, state: SimState) -> float:
        """Cheap upper bound on the energy of any action from ``state``."""
        elig = eligible_mask(state.served, state.demands, self.config.task_threshold)
        top = int(state.demands[elig].max()) if elig.any() else 0
        return float(self._fly_bound[state.uav_hover_id] + top * self._per_task_bound)

    def action_energies(self, state: SimState) -> np.ndarray:
        return self._plan(state).total

    def candidate_actions(self, state: SimState) -> tuple[int, ...]:
        if self.config.allow_hover_in_place:
            return self._all_actions
        return tuple(a for a in self._all_actions if a != state.uav_hover_id)

    def legal_actions(self, state: SimState) -> tuple[int, ...]:
        """Hover points reachable without dropping below the battery threshold."""
        if state._legal is not None:
            return state._legal
        cfg = self.config
        if state.t >= cfg.tree_depth or state.battery < self._threshold:
            legal: tuple[int, ...] = ()
        else:
            cands = self.candidate_actions(state)
            headroom = state.battery - self._threshold
            if headroom >= cfg.w_max or headroom >= self.energy_bound(state):
                legal = cands
            else:
                total = self._plan(state).total
                legal = tuple(a for a in cands if total[a] <= headroom)
        state._legal = legal
        return legal

    def is_terminal(self, state: SimState) -> bool:
        return not self.legal_actions(state)

    def step(self, state: SimState, action: int, rng: np.random.Generator) -> StepResult:
        if self.is_terminal(state):
            raise TerminalStateError("cannot step a terminal state")
        if action not in self.legal_actions(state):
            raise IllegalActionError(f"action {action} is not legal in this state")
        cfg = self.config
        plan = state._plan
        if plan is not None:
            energy = EnergyBreakdown(
                float(plan.e_h[action]), float(plan.e_c[action]), float(plan.e_f1[action]), plan.e_f2
            )
            total = float(plan.total[action])
            user = int(plan.served[action])
            tasks = int(plan.tasks[action]) if user >= 0 else 0
        else:
            user, tasks, energy, total = self._single(state, action)
        served = state.served
        if user >= 0:
            served = served.copy()
            served[user] += 1
        nxt = SimState(
            uav_hover_id=int(action),
            battery=state.battery - total,
            positions=advance_users(state.positions, cfg, rng),
            demands=sample_tasks(cfg.num_users, cfg, rng),
            served=served,
            t=state.t + 1,
        )
        q = reward(tasks, total, cfg)
        return StepResult(nxt, q, energy, user if user >= 0 else None, tasks)
