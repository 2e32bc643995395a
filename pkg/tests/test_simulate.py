"""Tests for the event-driven sampler, the LLN experiments and the tilted
importance sampler."""

import math

import numpy as np
import pytest
from scipy import stats

from bdld.chain import ModelParams, stationary_distribution
from bdld.evolve import stationary_dwell_probability, window_probability
from bdld.simulate import (
    SimConfig,
    Trajectory,
    WeightedTrajectory,
    lln_point_experiment,
    lln_stationary_experiment,
    occupation_fractions,
    replication_rng,
    sample_path,
    scaled_path,
    tilted_sample_path,
    tilted_window_experiment,
)
from bdld.tilting import CallableTilt, ClosedFormDualTilt, ConstantTilt


@pytest.fixture(scope="module")
def long_trajectory():
    # One long path at N=100 from state 5; ~1e6 jumps, visits state 5 about
    # 1e4 times, which powers the holding-time statistics below.
    params = ModelParams(100, 1.0)
    return params, sample_path(params, SimConfig(horizon=26_000.0, seed=11, initial=5))


def _complete_holdings(trajectory, state):
    visited = trajectory.visited_states()
    edges = np.concatenate(([0.0], trajectory.jump_times, [trajectory.horizon]))
    durations = np.diff(edges)
    return durations[:-1][visited[:-1] == state]  # last sojourn is censored


class TestSamplePath:
    def test_reproducible(self):
        params = ModelParams(40, 1.0)
        config = SimConfig(horizon=5.0, seed=123, initial=20)
        a = sample_path(params, config, replication=2)
        b = sample_path(params, config, replication=2)
        c = sample_path(params, config, replication=3)
        np.testing.assert_array_equal(a.jump_times, b.jump_times)
        np.testing.assert_array_equal(a.states_after_jump, b.states_after_jump)
        assert not np.array_equal(a.jump_times, c.jump_times)

    def test_single_state_never_moves(self):
        traj = sample_path(ModelParams(1, 1.0), SimConfig(horizon=100.0, seed=1, initial=1))
        assert traj.n_jumps == 0
        assert traj.initial_state == 1

    def test_steps_are_unit(self, long_trajectory):
        _, traj = long_trajectory
        steps = np.diff(traj.visited_states())
        assert set(np.unique(steps)) <= {-1, 1}
        assert np.all(np.diff(traj.jump_times) > 0)
        assert traj.jump_times[-1] <= traj.horizon

    def test_interior_holding_time_mean(self, long_trajectory):
        # holding at m=5 is Exponential(2*lam*5): mean 1/10 within 3 s.e.
        _, traj = long_trajectory
        holds = _complete_holdings(traj, 5)
        assert holds.size >= 10_000
        se = holds.std() / math.sqrt(holds.size)
        assert abs(holds.mean() - 0.1) <= 3 * se

    def test_boundary_holding_time_mean(self, long_trajectory):
        # the reflecting end m=1 exits at rate lam: mean 1 within 3 s.e.
        _, traj = long_trajectory
        holds = _complete_holdings(traj, 1)
        assert holds.size >= 1_000
        se = holds.std() / math.sqrt(holds.size)
        assert abs(holds.mean() - 1.0) <= 3 * se

    def test_interior_holding_time_distribution(self, long_trajectory):
        _, traj = long_trajectory
        holds = _complete_holdings(traj, 5)[:10_000]
        result = stats.kstest(holds, "expon", args=(0.0, 1.0 / 10.0))
        assert result.pvalue > 1e-3

    def test_embedded_jumps_are_symmetric(self, long_trajectory):
        _, traj = long_trajectory
        visited = traj.visited_states()
        prev, nxt = visited[:-1], visited[1:]
        interior = (prev > 1) & (prev < 100)
        ups = float(((nxt - prev)[interior] == 1).mean())
        total = int(interior.sum())
        assert abs(ups - 0.5) <= 3 * math.sqrt(0.25 / total)

    def test_stationary_start_uses_inverse_cdf(self):
        params = ModelParams(50, 1.0)
        config = SimConfig(horizon=0.001, seed=77, initial="stationary")
        starts = np.array([
            sample_path(params, config, replication=rep).initial_state
            for rep in range(4000)
        ])
        pi = stationary_distribution(params)
        # compare the CDF at a few cut points, 3 s.e. each
        for cut in (1, 5, 25):
            exact = pi.mass[:cut].sum()
            freq = float((starts <= cut).mean())
            se = math.sqrt(exact * (1 - exact) / starts.size)
            assert abs(freq - exact) <= 3 * se

    def test_initial_state_out_of_range(self):
        with pytest.raises(ValueError):
            sample_path(ModelParams(5, 1.0), SimConfig(horizon=1.0, seed=1, initial=6))


class TestTrajectoryType:
    def test_validation(self):
        with pytest.raises(ValueError):
            Trajectory(1, np.array([0.5]), np.array([3]), 1.0)  # step of 2
        with pytest.raises(ValueError):
            Trajectory(1, np.array([0.5, 0.4]), np.array([2, 3]), 1.0)  # times not increasing
        with pytest.raises(ValueError):
            Trajectory(1, np.array([1.5]), np.array([2]), 1.0)  # beyond horizon

    def test_state_at(self):
        traj = Trajectory(2, np.array([0.25, 0.75]), np.array([3, 2]), 1.0)
        assert traj.state_at(0.0) == 2
        assert traj.state_at(0.5) == 3
        assert traj.state_at(1.0) == 2

    def test_csv(self, tmp_path):
        traj = Trajectory(2, np.array([0.25]), np.array([3]), 1.0)
        out = tmp_path / "traj.csv"
        traj.to_csv(out)
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "time,state"
        assert lines[1] == "0,2"
        assert lines[2] == "0.25,3"


class TestScaledPath:
    def test_division(self):
        traj = Trajectory(1, np.array([0.2, 0.5]), np.array([2, 1]), 1.0)
        scaled = scaled_path(traj, ModelParams(4, 1.0))
        assert scaled.initial_value == 0.25
        np.testing.assert_allclose(scaled.values_after_jump, [0.5, 0.25])

    def test_constant(self):
        traj = Trajectory(3, np.array([]), np.array([]), 2.0)
        scaled = scaled_path(traj, ModelParams(4, 1.0))
        assert scaled.initial_value == 0.75
        assert scaled.values_after_jump.size == 0

    def test_increments(self, long_trajectory):
        params, traj = long_trajectory
        scaled = scaled_path(traj, params)
        values = np.concatenate(([scaled.initial_value], scaled.values_after_jump))
        steps = np.unique(np.round(np.abs(np.diff(values)) * params.n_states))
        assert steps.tolist() == [1.0]


class TestOccupationFractions:
    def test_constant_path_is_indicator(self):
        traj = Trajectory(3, np.array([]), np.array([]), 5.0)
        occ = occupation_fractions(traj, n_states=4)
        np.testing.assert_array_equal(occ.mass, [0.0, 0.0, 1.0, 0.0])

    def test_small_example(self):
        traj = Trajectory(2, np.array([0.25, 0.75]), np.array([3, 2]), 1.0)
        occ = occupation_fractions(traj, n_states=3)
        np.testing.assert_allclose(occ.mass, [0.0, 0.5, 0.5], atol=1e-15)

    def test_undersized_state_count_rejected(self):
        traj = Trajectory(2, np.array([0.25]), np.array([3]), 1.0)
        with pytest.raises(ValueError):
            occupation_fractions(traj, n_states=2)

    def test_time_reversal_invariance(self):
        traj = Trajectory(2, np.array([0.25, 0.5, 0.8]), np.array([3, 4, 3]), 1.0)
        visited = traj.visited_states()
        durations = np.diff(np.concatenate(([0.0], traj.jump_times, [traj.horizon])))
        rev_states = visited[::-1]
        rev_durations = durations[::-1]
        rev_times = np.cumsum(rev_durations[:-1])
        reversed_traj = Trajectory(int(rev_states[0]), rev_times,
                                   rev_states[1:].astype(np.int64), traj.horizon)
        occ = occupation_fractions(traj, 4)
        occ_rev = occupation_fractions(reversed_traj, 4)
        np.testing.assert_allclose(occ.mass, occ_rev.mass, atol=1e-12)

    def test_long_run_matches_stationary(self):
        params = ModelParams(50, 1.0)
        traj = sample_path(params, SimConfig(horizon=2000.0, seed=5, initial="stationary"))
        occ = occupation_fractions(traj, 50)
        assert occ.tv_distance(stationary_distribution(params)) <= 0.08


class TestLlnPointExperiment:
    def test_impossible_deviation(self):
        res = lln_point_experiment(ModelParams(100, 1.0), 0.5, 1.5,
                                   SimConfig(horizon=1.0, seed=3, replications=50))
        assert res.estimate == 0.0

    def test_estimates_decrease_in_n(self):
        estimates = []
        for n in (250, 500, 1000):
            config = SimConfig(horizon=1.0, seed=42, replications=3000)
            res = lln_point_experiment(ModelParams(n, 1.0), 0.5, 0.05, config)
            estimates.append(res.estimate)
        assert estimates[0] > estimates[1] > estimates[2]

    def test_result_fields(self):
        res = lln_point_experiment(ModelParams(200, 1.0), 0.5, 0.2,
                                   SimConfig(horizon=1.0, seed=9, replications=40))
        obj = res.to_json_obj()
        assert obj["replications"] == 40 and obj["seed"] == 9
        assert obj["params"] == {"n_states": 200, "lambda": 1.0}
        assert res.extra["bound"] == pytest.approx(1.0 / (0.04 * 200))

    def test_bad_start(self):
        with pytest.raises(ValueError):
            lln_point_experiment(ModelParams(100, 1.0), 0.001, 0.2,
                                 SimConfig(horizon=1.0, seed=1, replications=5))
        with pytest.raises(ValueError):
            lln_point_experiment(ModelParams(100, 1.0), 0.5, 0.0,
                                 SimConfig(horizon=1.0, seed=1, replications=5))


class TestLlnStationaryExperiment:
    def test_empty_times_rejected(self):
        with pytest.raises(ValueError):
            lln_stationary_experiment(ModelParams(50, 1.0), 0.5, [],
                                      SimConfig(horizon=1.0, seed=1))

    def test_requires_stationary_start(self):
        with pytest.raises(ValueError):
            lln_stationary_experiment(ModelParams(50, 1.0), 0.5, [0.5],
                                      SimConfig(horizon=1.0, seed=1, initial=10))

    def test_monotone_in_threshold(self):
        params = ModelParams(300, 1.0)
        estimates = []
        for u in (0.05, 0.1, 0.3):
            config = SimConfig(horizon=1.0, seed=15, replications=400)
            res = lln_stationary_experiment(params, u, [0.25, 0.75], config)
            estimates.append(res.estimate)
        assert estimates[0] <= estimates[1] <= estimates[2]

    def test_matches_exact_oracle(self):
        params = ModelParams(200, 1.0)
        times = [0.3, 0.9]
        config = SimConfig(horizon=1.0, seed=8, replications=800)
        res = lln_stationary_experiment(params, 0.15, times, config)
        exact = stationary_dwell_probability(params, 0.15, times, tol=1e-12)
        assert abs(res.estimate - exact) <= 3 * res.stderr

    def test_large_n_matches_exact_oracle(self):
        # N=1e4, u=0.1, four sample times: the convergence toward full
        # concentration is logarithmic in N, so the exact joint value is the
        # only honest gate (about 0.76 here, not anywhere near 1 yet)
        params = ModelParams(10_000, 1.0)
        times = [0.25, 0.5, 0.75, 1.0]
        config = SimConfig(horizon=1.0, seed=20260808, replications=1000)
        res = lln_stationary_experiment(params, 0.1, times, config)
        exact = stationary_dwell_probability(params, 0.1, times, tol=1e-10)
        assert 0.70 < exact < 0.80
        assert abs(res.estimate - exact) <= 3 * res.stderr


class TestTiltedSampling:
    def test_unit_tilt_reproduces_nominal_law_exactly(self):
        params = ModelParams(100, 1.0)
        config = SimConfig(horizon=1.0, seed=99, initial=50)
        weighted = tilted_sample_path(params, ConstantTilt(1.0), config, replication=3)
        plain = sample_path(params, config, replication=3)
        np.testing.assert_array_equal(weighted.trajectory.jump_times, plain.jump_times)
        np.testing.assert_array_equal(weighted.trajectory.states_after_jump,
                                      plain.states_after_jump)
        assert weighted.log_weight == 0.0

    def test_positive_drift_under_upward_tilt(self):
        params = ModelParams(30, 1.0)
        config = SimConfig(horizon=0.5, seed=11, initial=15)
        finals = []
        for rep in range(200):
            traj = tilted_sample_path(params, ConstantTilt(2.0), config, rep).trajectory
            finals.append(traj.states_after_jump[-1] if traj.n_jumps else traj.initial_state)
        assert np.mean(finals) > 15.0

    def test_constant_tilt_is_unbiased(self):
        params = ModelParams(30, 1.0)
        window = (20, 25)
        config = SimConfig(horizon=0.5, seed=7, initial=15, replications=4000)
        res = tilted_window_experiment(params, ConstantTilt(2.0), window, config)
        exact = window_probability(params, 15, 0.5, range(20, 26), tol=1e-12)
        assert abs(res.estimate - exact) <= 3 * res.stderr

    def test_dual_schedule_is_unbiased(self):
        from bdld.optimal_paths import dual_tilt, solve_boundary
        params = ModelParams(100, 1.0)
        tilt = dual_tilt(solve_boundary(0.5, 0.8, 1.0, 1.0))
        config = SimConfig(horizon=1.0, seed=20260808, initial=50, replications=2000)
        res = tilted_window_experiment(params, tilt, (78, 82), config)
        exact = window_probability(params, 50, 1.0, range(78, 83), tol=1e-12)
        assert abs(res.estimate - exact) <= 3 * res.stderr

    def test_singular_schedule_rejected(self):
        # lam*t - c1 crosses [-1, 0] inside the horizon
        tilt = ClosedFormDualTilt(c1=0.5, lam=1.0)
        with pytest.raises(ValueError):
            tilted_sample_path(ModelParams(10, 1.0), tilt,
                               SimConfig(horizon=1.0, seed=1, initial=5))

    def test_nonpositive_callable_rejected(self):
        tilt = CallableTilt(lambda t: 1.0 - 2.0 * t, bound=2.0)
        with pytest.raises(ValueError):
            tilted_sample_path(ModelParams(10, 1.0), tilt,
                               SimConfig(horizon=1.0, seed=4, initial=5))

    def test_callable_matches_closed_form_weights(self):
        closed = ClosedFormDualTilt(c1=-10 / 3, lam=1.0)
        wrapped = CallableTilt(closed.value, bound=closed.sup_bound(1.0))
        params = ModelParams(50, 1.0)
        config = SimConfig(horizon=1.0, seed=21, initial=25)
        a = tilted_sample_path(params, closed, config, replication=5)
        b = tilted_sample_path(params, wrapped, config, replication=5)
        np.testing.assert_array_equal(a.trajectory.jump_times, b.trajectory.jump_times)
        assert abs(a.log_weight - b.log_weight) <= 1e-9

    def test_weighted_trajectory_requires_finite_weight(self):
        traj = Trajectory(1, np.array([]), np.array([]), 1.0)
        with pytest.raises(ValueError):
            WeightedTrajectory(traj, math.inf)


class TestReplicationRng:
    def test_streams_are_keyed(self):
        a = replication_rng(5, 0).random(4)
        b = replication_rng(5, 1).random(4)
        c = replication_rng(5, 0).random(4)
        assert not np.array_equal(a, b)
        np.testing.assert_array_equal(a, c)


class TestSimConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            SimConfig(horizon=0.0, seed=1)
        with pytest.raises(ValueError):
            SimConfig(horizon=1.0, seed=1, replications=0)
        with pytest.raises(ValueError):
            SimConfig(horizon=1.0, seed=1, initial="equilibrium")
