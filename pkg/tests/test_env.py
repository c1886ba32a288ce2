import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uavmcts.config import WorldConfig
from uavmcts.env import (
    EnergyBreakdown,
    SimState,
    TerminalStateError,
    advance_users,
    channel_gain,
    eligible_mask,
    fairness_eligible,
    interval_energy,
    reward,
    sample_tasks,
    select_user,
    upload_rate,
)

from conftest import make_env

CFG = WorldConfig()
# hand evaluations with the default constants
RATE_1E5 = math.log(1 + 1e5) / math.log(2)
E_F2 = 0.03 * 20**3 + (5 / 20) * (1 + 15**2 / 9.8**2)


def test_unit_conversions():
    assert CFG.noise_power == pytest.approx(1e-15, rel=1e-12)
    assert CFG.ref_gain == pytest.approx(1e-5, rel=1e-12)


class TestMobility:
    @pytest.mark.parametrize(
        "x, alpha, expected",
        [(99.0, 2.0, 100.0), (1.0, -3.0, 0.0), (50.0, 2.5, 52.5)],
    )
    def test_three_case_clamp(self, x, alpha, expected):
        cfg = WorldConfig(region_size=100.0, mobility_epsilon=5.0)

        class FixedRng:
            def uniform(self, lo, hi, size):
                return np.full(size, alpha)

        out = advance_users(np.array([[x, x, 0.0]]), cfg, FixedRng())
        assert out[0, 0] == expected
        assert out[0, 2] == 0.0

    def test_zero_epsilon_freezes(self, rng):
        cfg = WorldConfig(mobility_epsilon=0.0)
        pos = rng.uniform(0, 500, size=(10, 3))
        pos[:, 2] = 0
        assert np.array_equal(advance_users(pos, cfg, rng), pos)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), steps=st.integers(1, 40), three_d=st.booleans())
    def test_positions_stay_in_region(self, seed, steps, three_d):
        kw = dict(hover_layout="planes3d", num_hover_points=27) if three_d else {}
        cfg = WorldConfig(region_size=100.0, mobility_epsilon=60.0, **kw)
        rng = np.random.default_rng(seed)
        pos = np.zeros((6, 3))
        for _ in range(steps):
            pos = advance_users(pos, cfg, rng)
        assert pos[:, :2].min() >= 0 and pos[:, :2].max() <= 100.0
        assert pos[:, 2].min() >= 0 and pos[:, 2].max() <= cfg.user_z_max

    def test_planes3d_moves_vertically(self, rng):
        cfg = WorldConfig(hover_layout="planes3d", num_hover_points=27)
        pos = advance_users(np.full((5, 3), 30.0), cfg, rng)
        assert not np.all(pos[:, 2] == 30.0)


class TestTasks:
    def test_zero_variance(self, rng):
        assert np.all(sample_tasks(50, WorldConfig(task_std=0.0), rng) == 10)

    def test_clamped_to_range(self, rng):
        d = sample_tasks(10_000, WorldConfig(task_std=20.0), rng)
        assert d.min() == 0 and d.max() == 25
        assert d.dtype.kind == "i"

    def test_sample_mean(self):
        d = sample_tasks(100_000, CFG, np.random.default_rng(7))
        # rounding and clipping at 0 / 25 (3 sigma) shift the mean by < 0.01
        assert abs(d.mean() - 10.0) < 0.1


class TestFairness:
    def test_first_serve(self):
        assert fairness_eligible(0, 3, 15)

    def test_second_serve_needs_large_demand(self):
        assert fairness_eligible(1, 16, 15)
        assert not fairness_eligible(1, 10, 15)
        assert not fairness_eligible(1, 15, 15)

    def test_third_serve_never(self):
        assert not fairness_eligible(2, 25, 15)

    def test_mask_matches_scalar(self):
        served = np.array([0, 1, 1, 2, 0])
        demand = np.array([3, 16, 10, 25, 0])
        expected = [fairness_eligible(s, d, 15) for s, d in zip(served, demand)]
        assert eligible_mask(served, demand, 15).tolist() == expected


class TestSelectUser:
    hover = np.array([0.0, 0.0, 100.0])

    def test_nearest(self):
        pos = np.array([[120.0, 0, 0], [100.0, 0, 0]])
        assert select_user(self.hover, pos, np.array([10, 10]), np.zeros(2, int), 15) == 1

    def test_tie_goes_to_larger_demand(self):
        pos = np.array([[100.0, 0, 0], [0, 100.0, 0]])
        assert select_user(self.hover, pos, np.array([7, 18]), np.zeros(2, int), 15) == 1
        pos2 = np.array([[100.0, 0, 0], [0, 100.0 + 5e-7, 0]])
        assert select_user(self.hover, pos2, np.array([18, 7]), np.zeros(2, int), 15) == 0

    def test_equal_tie_lower_id(self):
        pos = np.array([[100.0, 0, 0], [0, 100.0, 0]])
        assert select_user(self.hover, pos, np.array([9, 9]), np.zeros(2, int), 15) == 0

    def test_skips_ineligible(self):
        pos = np.array([[10.0, 0, 0], [300.0, 0, 0]])
        assert select_user(self.hover, pos, np.array([10, 10]), np.array([1, 0]), 15) == 1

    def test_none_when_nobody_eligible(self):
        pos = np.array([[10.0, 0, 0]])
        assert select_user(self.hover, pos, np.array([10]), np.array([2]), 15) is None


class TestChannel:
    def test_gain_directly_below(self):
        g = channel_gain([0, 0, 100], [0, 0, 0], CFG)
        assert math.isclose(g, 1e-5 / 1e4, rel_tol=1e-9)

    def test_gain_offset(self):
        g = channel_gain([100, 0, 100], [0, 0, 0], CFG)
        assert math.isclose(g, 1e-5 / (1e4 + 1e4), rel_tol=1e-9)

    def test_inverse_square(self):
        g1 = channel_gain([0, 0, 100], [0, 0, 0], CFG)
        g2 = channel_gain([0, 0, 200], [0, 0, 0], CFG)
        assert math.isclose(g2, g1 / 4, rel_tol=1e-12)

    def test_zero_distance_rejected(self):
        with pytest.raises(ValueError):
            channel_gain([1, 2, 3], [1, 2, 3], CFG)

    def test_rate_hand_value(self):
        assert math.isclose(upload_rate(1e-9, CFG), RATE_1E5, rel_tol=1e-9)
        assert math.isclose(RATE_1E5, 16.6096, rel_tol=1e-5)

    def test_rate_limits(self):
        assert upload_rate(1e-30, CFG) < 1e-9
        assert math.isclose(upload_rate(CFG.noise_power / CFG.upload_power, CFG), 1.0, rel_tol=1e-12)

    @given(st.floats(1.0, 5000.0), st.floats(1e-3, 1000.0))
    def test_monotone_in_distance(self, d, extra):
        g_near = CFG.ref_gain / d**2
        g_far = CFG.ref_gain / (d + extra) ** 2
        assert g_far < g_near
        assert 0 < upload_rate(g_far, CFG) < upload_rate(g_near, CFG)


class TestEnergy:
    def test_hover_energy(self):
        e = interval_energy([0, 0, 100], [0, 0, 100], 10, CFG, rate=RATE_1E5)
        assert math.isclose(e.e_h, 1e6 / RATE_1E5, rel_tol=1e-9)
        assert math.isclose(e.e_h, 60206.5, rel_tol=1e-5)

    def test_compute_energy(self):
        e = interval_energy([0, 0, 100], [0, 0, 100], 10, CFG, rate=RATE_1E5)
        assert math.isclose(e.e_c, 1e-28 * 1000 * 1e6 * (2e9) ** 2, rel_tol=1e-9)
        assert math.isclose(e.e_c, 0.4, rel_tol=1e-9)

    def test_fly_energy(self):
        e = interval_energy([0, 0, 100], [100, 0, 100], 0, CFG)
        assert math.isclose(e.e_f1, 10_000.0, rel_tol=1e-9)
        assert math.isclose(e.e_f2, E_F2, rel_tol=1e-9)
        assert abs(E_F2 - 240.836) < 5e-4  # quoted to 3 decimals
        assert e.e_h == 0 and e.e_c == 0

    def test_self_loop_still_charges_propulsion(self):
        e = interval_energy([5, 5, 100], [5, 5, 100], 0, CFG)
        assert e.e_f1 == 0 and math.isclose(e.e_f2, E_F2, rel_tol=1e-12)

    def test_decomposition(self):
        e = EnergyBreakdown(1.5, 0.25, 3.0, 4.0)
        assert e.total_w == 1.5 + 0.25 + 3.0 + 4.0

    def test_rejects_bad_speed(self):
        cfg = WorldConfig()
        object.__setattr__(cfg, "uav_speed", 0.0)
        with pytest.raises(ValueError):
            interval_energy([0, 0, 100], [1, 0, 100], 0, cfg)


class TestReward:
    def test_extremes(self):
        assert reward(CFG.u_max, 0.0, CFG) == 1.0
        assert reward(0, CFG.w_max, CFG) == -1.0
        assert math.isclose(reward(CFG.u_max / 2, CFG.w_max / 2, CFG), 0.0, abs_tol=1e-15)

    def test_w_max_bounds_every_action(self, rng):
        env = make_env(task_std=30.0, hover_layout="uniform2d")
        s = env.reset(rng)
        for _ in range(30):
            s.demands[:] = CFG.u_max
            s.served[:] = 0
            assert env.action_energies(s).max() <= CFG.w_max
            s = SimState(s.uav_hover_id, s.battery, rng.uniform(0, 500, (10, 3)) * [1, 1, 0], s.demands, s.served)


class TestStep:
    def test_battery_conservation_and_serve(self, env, rng):
        s = env.reset(rng)
        a = env.legal_actions(s)[0]
        res = env.step(s, a, rng)
        assert res.state.battery == s.battery - res.energy.total_w
        assert res.state.t == 1 and res.state.uav_hover_id == a
        assert res.served_user is not None
        assert res.state.served[res.served_user] == 1
        assert res.tasks == s.demands[res.served_user]
        expected = select_user(env.hover[a], s.positions, s.demands, s.served, 15)
        assert res.served_user == expected
        assert res.reward == reward(res.tasks, res.energy.total_w, env.config)

    def test_step_matches_scalar_formulas(self, env, rng):
        s = env.reset(rng)
        a = env.legal_actions(s)[3]
        res = env.step(s, a, rng)
        u = res.served_user
        g = channel_gain(env.hover[a], s.positions[u], env.config)
        e = interval_energy(env.hover[s.uav_hover_id], env.hover[a], res.tasks, env.config, upload_rate(g, env.config))
        for name in ("e_h", "e_c", "e_f1", "e_f2"):
            assert math.isclose(getattr(res.energy, name), getattr(e, name), rel_tol=1e-12)

    def test_idle_interval(self, env, rng):
        s = env.reset(rng)
        s.served[:] = 2
        a = env.legal_actions(s)[0]
        res = env.step(s, a, rng)
        assert res.served_user is None and res.tasks == 0
        assert res.energy.e_h == 0 and res.energy.e_c == 0
        assert res.energy.e_f1 > 0

    def test_self_loop_excluded_by_default(self, env, rng):
        s = env.reset(rng)
        assert s.uav_hover_id not in env.legal_actions(s)

    def test_self_loop_flag(self, rng):
        env = make_env(allow_hover_in_place=True)
        s = env.reset(rng)
        assert s.uav_hover_id in env.legal_actions(s)
        res = env.step(s, s.uav_hover_id, rng)
        assert res.energy.e_f1 == 0.0 and res.energy.e_f2 > 0

    def test_step_does_not_mutate(self, env, rng):
        s = env.reset(rng)
        before = s.copy()
        env.step(s, env.legal_actions(s)[0], rng)
        assert s.same_as(before)

    def test_terminal_rejects_step(self, env, rng):
        s = env.reset(rng)
        s.t = env.config.tree_depth
        with pytest.raises(TerminalStateError):
            env.step(s, 1, rng)


class TestTerminal:
    def test_fresh_state(self, env, rng):
        assert not env.is_terminal(env.reset(rng))

    def test_below_threshold(self, env, rng):
        s = env.reset(rng)
        s.battery = 0.1 * s.battery - 1.0
        assert env.is_terminal(s)

    def test_horizon(self, env, rng):
        s = env.reset(rng)
        s.t = 10
        assert env.is_terminal(s)

    def test_no_affordable_action(self, env, rng):
        s = env.reset(rng)
        s.battery = env.config.battery_threshold * env.config.battery_e0 + 100.0
        assert env.is_terminal(s)


def _random_episode(env, rng):
    s = env.reset(rng)
    log = []
    while not env.is_terminal(s):
        legal = env.legal_actions(s)
        a = legal[rng.integers(len(legal))]
        res = env.step(s, a, rng)
        log.append((s, res))
        s = res.state
    return log


def test_determinism(env):
    a = _random_episode(env, np.random.default_rng(5))
    b = _random_episode(env, np.random.default_rng(5))
    assert len(a) == len(b)
    for (s1, r1), (s2, r2) in zip(a, b):
        assert s1.same_as(s2) and r1.reward == r2.reward and r1.energy == r2.energy


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), beta=st.sampled_from([5.0, 10.0, 15.0]), e0=st.sampled_from([3e5, 8e5, 2e6]))
def test_episode_invariants(seed, beta, e0):
    env = make_env(task_threshold=beta, battery_e0=e0)
    rng = np.random.default_rng(seed)
    log = _random_episode(env, rng)
    spent = sum(r.energy.total_w for _, r in log)
    assert spent <= env.config.energy_budget + 1e-6
    assert len(log) <= env.config.tree_depth
    counts = np.zeros(env.config.num_users, int)
    for s, r in log:
        if r.served_user is not None:
            if counts[r.served_user] == 1:
                assert s.demands[r.served_user] > beta
            counts[r.served_user] += 1
    assert counts.max(initial=0) <= 2


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), steps=st.integers(0, 8))
def test_single_action_path_matches_full_plan(seed, steps):
    env = make_env(seed=seed % 7)
    rng = np.random.default_rng(seed)
    state = env.reset(rng)
    for _ in range(steps):
        if env.is_terminal(state):
            break
        state = env.step(state, int(rng.choice(env.legal_actions(state))), rng).state
    if env.is_terminal(state):
        return
    energies = env.action_energies(state)
    assert env.energy_bound(state) >= energies.max()
    plan = env._plan(state)
    for a in env.candidate_actions(state):
        user, tasks, energy, total = env._single(state, int(a))
        assert total == energies[a]
        assert user == int(plan.served[a])
        assert energy.total_w == pytest.approx(total, rel=1e-12)


@pytest.mark.parametrize("speed", [5.0, 10.0, 30.0, 60.0])
def test_energy_normaliser_shared_by_slower_speeds_and_still_bounds(speed):
    env = make_env(seed=3, uav_speed=speed)
    if speed <= WorldConfig().norm_speed:
        assert env.config.w_max == WorldConfig().w_max
    rng = np.random.default_rng(0)
    s = env.reset(rng)
    assert env.action_energies(s).max() <= env.config.w_max
