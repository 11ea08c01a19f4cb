"""Order-of-vanishing estimators and their consistency report."""

import numpy as np
import pytest

from freqlab.harness import default_radii
from freqlab.recenter import galilean_recenter
from freqlab.similarity import FrequencyTrace, frequency_trace
from freqlab.vanishing import (NotConvergedError, consistency_report, order_from_cylinders,
                               order_from_phi, order_from_qbar)


def make_trace(taus, phi_vals, qbar_vals):
    taus = np.asarray(taus, float)
    return FrequencyTrace(taus, np.asarray(phi_vals, float), np.ones_like(taus),
                          np.asarray(qbar_vals, float), np.asarray(qbar_vals, float),
                          np.zeros(1), float(np.exp(-taus[0])))


class TestOrderFromPhi:
    def test_exact_power_law(self):
        taus = np.linspace(1.5, 6.0, 40)
        t = np.exp(-taus)
        for m in (0.0, 1.0, 2.5):
            trace = make_trace(taus, t**m, np.full_like(taus, m / 2))
            slope, resid = order_from_phi(trace)
            assert slope == pytest.approx(m, abs=1e-10)
            assert resid < 1e-10

    def test_analytic_factor_absorbed(self):
        # a smooth gauge factor e^{c|t|} must not bias the slope
        taus = np.linspace(1.5, 6.0, 40)
        t = np.exp(-taus)
        trace = make_trace(taus, t**2 * np.exp(7.0 * t), np.ones_like(taus))
        slope, _ = order_from_phi(trace)
        assert slope == pytest.approx(2.0, abs=1e-8)

    def test_window_needs_samples(self):
        taus = np.linspace(1.5, 6.0, 40)
        trace = make_trace(taus, np.exp(-taus), np.ones_like(taus))
        with pytest.raises(ValueError, match="need >= 6"):
            order_from_phi(trace, window=(5.9, 6.0))

    def test_negative_slope_clipped(self):
        taus = np.linspace(1.5, 6.0, 40)
        t = np.exp(-taus)
        trace = make_trace(taus, t**-1.0, np.zeros_like(taus))
        slope, _ = order_from_phi(trace)
        assert slope == 0.0


class TestOrderFromQbar:
    def test_plateau_rounds_to_spectrum(self):
        taus = np.linspace(1.5, 6.0, 40)
        qb = 1.5 + 0.02 * np.exp(-(taus - 1.5))
        trace = make_trace(taus, np.exp(-3 * taus), qb)
        m, dist = order_from_qbar(trace)
        assert m == 3
        assert dist < 0.01

    def test_no_plateau_raises(self):
        taus = np.linspace(1.5, 6.0, 40)
        qb = np.sin(3 * taus)
        trace = make_trace(taus, np.exp(-taus), qb)
        with pytest.raises(NotConvergedError) as exc:
            order_from_qbar(trace)
        assert exc.value.tail_variation > 0.1


class TestOrderFromCylinders:
    def test_caloric_calibration(self, caloric2_run, caloric3_run):
        for (traj, eps), d in ((caloric2_run, 2), (caloric3_run, 3)):
            d_cyl, resid = order_from_cylinders(traj, default_radii(eps))
            assert d_cyl == pytest.approx(d, abs=0.05)

    def test_validation(self, caloric2_run):
        traj, eps = caloric2_run
        with pytest.raises(ValueError, match="at least 4"):
            order_from_cylinders(traj, [0.5, 0.4, 0.3])
        with pytest.raises(ValueError, match="<= 1"):
            order_from_cylinders(traj, [1.5, 0.5, 0.4, 0.3])

    def test_uncovered_radius(self, grid_1d_large):
        from tests.conftest import analytic_caloric_trajectory

        traj = analytic_caloric_trajectory(2, grid_1d_large, [-0.2, -0.15])
        with pytest.raises(ValueError, match="not covered"):
            order_from_cylinders(traj, [0.1, 0.08, 0.06, 0.05])


class TestConsistencyReport:
    @pytest.mark.parametrize("d", [2, 3])
    def test_caloric_consistent(self, caloric2_run, caloric3_run, d):
        traj, eps = caloric2_run if d == 2 else caloric3_run
        trace = frequency_trace(traj, np.zeros(1), eps)
        rep = consistency_report(traj, trace, default_radii(eps))
        assert rep.consistent and not rep.partial
        assert rep.m_qbar == d
        assert rep.d_cylinder == pytest.approx(d, abs=0.1)
        assert rep.m_gaussian == pytest.approx(d, abs=0.1)
        assert rep.spectrum_distance < 0.01

    def test_partial_on_estimator_failure(self, caloric2_run):
        traj, eps = caloric2_run
        trace = frequency_trace(traj, np.zeros(1), eps)
        rep = consistency_report(traj, trace, [0.5, 0.4, 0.3])
        assert rep.partial and not rep.consistent
        assert any("cylinder" in n for n in rep.notes)

    def test_recentering_stability(self, caloric2_run):
        # a small off-origin recentering must not move any estimate much
        traj, eps = caloric2_run
        base = frequency_trace(traj, np.zeros(1), eps)
        rep0 = consistency_report(traj, base, default_radii(eps))
        moved = galilean_recenter(traj, np.array([0.1]), eps)
        trace = frequency_trace(moved, moved.drift_a, eps)
        rep1 = consistency_report(moved, trace, default_radii(eps))
        assert rep1.consistent
        assert rep1.m_qbar == rep0.m_qbar
        assert abs(rep1.d_cylinder - rep0.d_cylinder) < 0.05
        assert abs(rep1.m_gaussian - rep0.m_gaussian) < 0.05
