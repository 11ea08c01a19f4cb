"""IMEX solver: exactness on modes, stability, residual diagnostics."""

import numpy as np
import pytest

from freqlab.fields import DegenerateFieldError, Field, make_grid, sample
from freqlab.solver import (BlowUpError, CoefficientSet, SolveSchedule, StabilityError,
                            Trajectory, admissible_dt, geometric_sample_times, residual, solve,
                            step)
from freqlab.hermite import CaloricPolynomial, heat_polynomial_1d


def single_mode(grid, k=1, t=-1.0):
    return sample(lambda x, tt, k=k: np.cos(k * x), grid, t)


class TestStep:
    def test_single_mode_exact_decay(self, grid_1d_small):
        u = single_mode(grid_1d_small)
        dt = 0.01
        out = step(u, CoefficientSet(), np.zeros(1), dt)
        x = grid_1d_small.axis_points()
        assert np.max(np.abs(out.values - np.exp(-dt) * np.cos(x))) < 1e-8
        assert out.time == pytest.approx(-1.0 + dt)

    def test_constant_potential_gauge_factor(self, grid_1d_small):
        u = sample(lambda x, t: np.cos(x) + 0.3 * np.sin(2 * x), grid_1d_small, -1.0)
        dt = 1e-3
        c = 2.5
        coeffs = CoefficientSet(potential=lambda x, t: c + 0.0 * x, bound_M0=3.0)
        gauged = step(u, coeffs, np.zeros(1), dt)
        plain = step(u, CoefficientSet(), np.zeros(1), dt)
        assert np.max(np.abs(gauged.values - plain.values * np.exp(c * dt))) < 1e-8

    def test_oversized_dt_stability_error(self, grid_1d_small):
        u = single_mode(grid_1d_small)
        coeffs = CoefficientSet(drift=(lambda x, t: np.sin(x),), bound_M1=1.0)
        cap = admissible_dt(grid_1d_small, coeffs, np.zeros(1))
        with pytest.raises(StabilityError) as exc:
            step(u, coeffs, np.zeros(1), 10 * cap)
        assert exc.value.dt_admissible == pytest.approx(cap)

    def test_blow_up_reported(self, grid_1d_small):
        u = single_mode(grid_1d_small)
        coeffs = CoefficientSet(potential=lambda x, t: 1e4 + 0.0 * x, bound_M0=1e4)
        with np.errstate(over="ignore", invalid="ignore"), pytest.raises(BlowUpError):
            for _ in range(50):
                u = step(u, coeffs, np.zeros(1), 0.5, check_stability=False)

    def test_admissible_dt_formula(self, grid_1d_small):
        coeffs = CoefficientSet(drift=(lambda x, t: np.sin(x),), bound_M1=2.0)
        cap = admissible_dt(grid_1d_small, coeffs, np.array([3.0]))
        assert cap == pytest.approx(0.5 * grid_1d_small.spacing / 5.0)
        assert admissible_dt(grid_1d_small, CoefficientSet(), np.zeros(1)) == np.inf


class TestSolve:
    def test_single_mode(self, grid_1d_small):
        u0 = single_mode(grid_1d_small, t=-1.0)
        sched = SolveSchedule(-1.0, -0.5, (-0.5,), max_dt=1e-2)
        traj = solve(u0, CoefficientSet(), np.zeros(1), sched)
        x = grid_1d_small.axis_points()
        assert np.max(np.abs(traj.fields[-1].values - np.exp(-0.5) * np.cos(x))) < 1e-6

    def test_two_modes_decay_independently(self, grid_1d_small):
        u0 = sample(lambda x, t: np.cos(x) + np.cos(2 * x), grid_1d_small, -1.0)
        sched = SolveSchedule(-1.0, -0.25, (-0.25,), max_dt=1e-2)
        traj = solve(u0, CoefficientSet(), np.zeros(1), sched)
        x = grid_1d_small.axis_points()
        exact = np.exp(-0.75) * np.cos(x) + np.exp(-3.0) * np.cos(2 * x)
        assert np.max(np.abs(traj.fields[-1].values - exact)) < 1e-6

    def test_caloric_on_large_torus(self):
        # the seam mismatch diffuses but stays exponentially far from origin
        g = make_grid(1, 512, 8 * np.pi)
        poly = CaloricPolynomial(tuple(heat_polynomial_1d(2)))
        u0 = sample(lambda x, t: poly(x, t), g, -0.5)
        sched = SolveSchedule(-0.5, -0.05, (-0.05,), max_dt=2e-3)
        traj = solve(u0, CoefficientSet(), np.zeros(1), sched)
        x = g.axis_points()
        near = np.abs(x) < 2.0
        exact = poly(x[near], -0.05)
        assert np.max(np.abs(traj.fields[-1].values[near] - exact)) < 1e-4

    def test_zero_initial_data_rejected(self, grid_1d_small):
        u0 = Field(grid_1d_small, np.full(grid_1d_small.shape, 1e-40), -1.0)
        sched = SolveSchedule(-1.0, -0.5, (-0.5,))
        with pytest.raises(DegenerateFieldError):
            solve(u0, CoefficientSet(), np.zeros(1), sched)

    def test_gauge_invariance_property(self, grid_1d_small):
        u0 = sample(lambda x, t: np.cos(x) + 0.4 * np.sin(3 * x), grid_1d_small, -1.0)
        sched = SolveSchedule(-1.0, -0.6, (-0.6,), max_dt=1e-3)
        plain = solve(u0, CoefficientSet(), np.zeros(1), sched)
        for c in (-5.0, 2.0, 5.0):
            coeffs = CoefficientSet(potential=lambda x, t, c=c: c + 0.0 * x, bound_M0=5.0)
            gauged = solve(u0, coeffs, np.zeros(1), sched)
            factor = np.exp(c * 0.4)
            rel = np.max(np.abs(gauged.fields[-1].values - factor * plain.fields[-1].values))
            # the potential is treated explicitly at second order, so the
            # gauge factor carries an O(dt^2) relative error per unit time
            assert rel < 1e-4 * factor * np.max(np.abs(plain.fields[-1].values))

    def test_second_order_convergence(self, grid_1d_small):
        u0 = single_mode(grid_1d_small, t=-1.0)
        coeffs = CoefficientSet(potential=lambda x, t: np.cos(x), bound_M0=1.0)

        def err(max_dt):
            ref = solve(u0, coeffs, np.zeros(1),
                        SolveSchedule(-1.0, -0.8, (-0.8,), max_dt=1e-5))
            got = solve(u0, coeffs, np.zeros(1),
                        SolveSchedule(-1.0, -0.8, (-0.8,), max_dt=max_dt))
            return np.max(np.abs(got.fields[-1].values - ref.fields[-1].values))

        assert err(1e-2) / err(5e-3) >= 3.5

    def test_spectral_in_space(self):
        for N in (64,):
            g1 = make_grid(1, N, np.pi)
            g2 = make_grid(1, 2 * N, np.pi)
            sched = SolveSchedule(-1.0, -0.5, (-0.5,), max_dt=1e-3)
            coeffs = CoefficientSet(potential=lambda x, t: np.cos(x), bound_M0=1.0)
            t1 = solve(single_mode(g1), coeffs, np.zeros(1), sched)
            t2 = solve(single_mode(g2), coeffs, np.zeros(1), sched)
            assert np.max(np.abs(t1.fields[-1].values - t2.fields[-1].values[::2])) < 1e-10


class TestSchedulesAndTrajectory:
    def test_geometric_times(self):
        ts = geometric_sample_times(0.25, 0.8, 10)
        assert ts[0] == -0.25
        assert ts[1] == pytest.approx(-0.2)
        assert all(a < b for a, b in zip(ts, ts[1:]))

    def test_geometric_ratio_validation(self):
        with pytest.raises(ValueError, match="ratio"):
            geometric_sample_times(0.25, 0.3)

    def test_geometric_floor(self):
        ts = geometric_sample_times(1.0, 0.8, 1000, t_floor_factor=1e-2)
        assert abs(ts[-1]) >= 1e-2

    def test_schedule_validation(self):
        with pytest.raises(ValueError):
            SolveSchedule(-1.0, -2.0, (-1.5,))
        with pytest.raises(ValueError):
            SolveSchedule(-1.0, -0.5, (0.1,))
        with pytest.raises(ValueError):
            SolveSchedule(-1.0, -0.5, (-0.6, -0.6))
        with pytest.raises(ValueError):
            SolveSchedule(-1.0, -0.5, (-0.7,), max_dt=0.0)

    def test_trajectory_field_at(self, grid_1d_small):
        u0 = single_mode(grid_1d_small)
        sched = SolveSchedule(-1.0, -0.5, (-0.75, -0.5), max_dt=1e-2)
        traj = solve(u0, CoefficientSet(), np.zeros(1), sched)
        assert traj.field_at(-0.75).time == -0.75
        with pytest.raises(KeyError):
            traj.field_at(-0.9)


class TestResidual:
    def make_run(self, grid, coeffs=None, dt=5e-3):
        u0 = single_mode(grid, t=-1.0)
        times = tuple(np.arange(-1.0, -0.5, 0.01))
        sched = SolveSchedule(-1.0, times[-1], times, max_dt=dt)
        return solve(u0, coeffs or CoefficientSet(), np.zeros(1), sched)

    def test_single_mode_residual_small(self, grid_1d_small):
        traj = self.make_run(grid_1d_small)
        assert residual(traj, len(traj.fields) // 2) < 1e-4

    def test_corrupted_sample_jumps(self, grid_1d_small):
        traj = self.make_run(grid_1d_small)
        mid = len(traj.fields) // 2
        base = residual(traj, mid)
        bad = list(traj.fields)
        bad[mid] = bad[mid].with_values(2.0 * bad[mid].values)
        corrupted = Trajectory(tuple(bad), traj.coefficients, traj.drift_a)
        assert residual(corrupted, mid) > 10 * max(base, 1e-12)

    def test_caloric_run_residual(self):
        g = make_grid(1, 512, 8 * np.pi)
        poly = CaloricPolynomial(tuple(heat_polynomial_1d(2)))
        u0 = sample(lambda x, t: poly(x, t), g, -0.5)
        times = tuple(np.arange(-0.2, -0.05, 0.005))
        sched = SolveSchedule(-0.5, times[-1], times, max_dt=2e-3)
        traj = solve(u0, CoefficientSet(), np.zeros(1), sched)
        assert residual(traj, len(traj.fields) - 2) < 1e-3

    def test_interior_index_required(self, grid_1d_small):
        traj = self.make_run(grid_1d_small)
        with pytest.raises(IndexError):
            residual(traj, 0)
        with pytest.raises(IndexError):
            residual(traj, len(traj.fields) - 1)
