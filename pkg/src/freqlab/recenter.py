"""Optimizing-point search and Galilean recentering.

The Gaussian Rayleigh quotient, averaged over the periodicity cell, equals
the cell Dirichlet quotient; its minimum over centers therefore sits at or
below that average.  We locate a near-minimizer by a coarse scan followed by
coordinate golden-section refinement, then convert the offset into a
constant drift by a linear-in-time translation of the whole trajectory.
"""

from dataclasses import dataclass

import numpy as np

from . import gaussian
from .fields import DegenerateFieldError, integrate_cell, shift_field
from .solver import Trajectory

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


class SearchResolutionError(RuntimeError):
    """The located minimum failed the averaging bound; diagnostics attached."""

    def __init__(self, quotient, cell_quotient, tol, center):
        self.quotient = quotient
        self.cell_quotient = cell_quotient
        self.center = center
        super().__init__(
            f"located quotient {quotient:.6g} exceeds cell quotient {cell_quotient:.6g} + tol {tol:g} "
            f"at center {center}"
        )


class ConcentrationError(ValueError):
    def __init__(self, measured_M, declared_M):
        self.measured_M = measured_M
        super().__init__(
            f"mass concentration check failed: measured ratio {measured_M:.4g} exceeds M={declared_M:.4g}"
        )


@dataclass(frozen=True)
class RecenterResult:
    x_eps: np.ndarray
    quotient_at_x: float
    cell_quotient_q: float
    epsilon: float

    @property
    def drift_a(self):
        return -np.asarray(self.x_eps) / self.epsilon


def choose_epsilon(M0, M1, K0, t_cap=None):
    """epsilon = 1 / (K0 * (M1^2 + M0^(2/3))), optionally clamped below t_cap."""
    if K0 <= 0:
        raise ValueError("K0 must be positive")
    eps = 1.0 / (K0 * (M1**2 + M0 ** (2.0 / 3.0)))
    if t_cap is not None:
        eps = min(eps, 0.5 * t_cap)
    return eps


def _golden_1d(f, lo, hi, tol):
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while abs(b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return (a + b) / 2.0


def _scan_centers(grid, coarse_N, box=None):
    """Coarse center lattice over the cell (or a sub-box), lexicographic order."""
    if box is None:
        L = grid.half_period
        lo, hi = -L, L
    else:
        lo, hi = box
    axis = lo + (hi - lo) * (np.arange(coarse_N) + 0.5) / coarse_N
    if grid.dim == 1:
        return axis[:, None]
    A, B = np.meshgrid(axis, axis, indexing="ij")
    return np.stack([A.ravel(), B.ravel()], axis=1)


def _refine(u, t, start, span, tol):
    """Coordinate golden-section descent from a scan minimizer."""
    center = np.array(start, dtype=float)
    for _ in range(40):
        moved = 0.0
        for j in range(u.grid.dim):
            def f(c, j=j):
                trial = center.copy()
                trial[j] = c
                num, den = gaussian.rayleigh_scan(u, t, trial[None, :])
                return num[0] / den[0]

            new = _golden_1d(f, center[j] - span, center[j] + span, tol * span)
            moved = max(moved, abs(new - center[j]))
            center[j] = new
        span *= 0.5
        if moved < tol and span < tol:
            break
    num, den = gaussian.rayleigh_scan(u, t, center[None, :])
    return center, float(num[0] / den[0])


def find_x_eps(u, epsilon, coarse_N=32, tol=1e-6):
    """Locate a center minimizing the Gaussian Rayleigh quotient at t=-eps.

    Coarse scan over coarse_N^n centers, then golden-section refinement.
    The averaging identity guarantees the true minimum does not exceed the
    cell Dirichlet quotient; a violation is surfaced as a resolution error.
    """
    t = -abs(epsilon)
    q_cell = gaussian.dirichlet_quotient_cell(u)  # raises on zero field
    centers = _scan_centers(u.grid, coarse_N)
    num, den = gaussian.rayleigh_scan(u, t, centers)
    quot = num / den
    best = int(np.argmin(np.round(quot / tol) * tol))  # lexicographic tie-break
    span = u.grid.half_period / coarse_N
    center, val = _refine(u, t, centers[best], span, tol)
    if val > quot[best]:
        center, val = centers[best].copy(), float(quot[best])
    if val > q_cell + tol:
        raise SearchResolutionError(val, q_cell, tol, center)
    return RecenterResult(center, val, q_cell, abs(epsilon))


def find_x_eps_ball(u, epsilon, M, coarse_N=32, tol=1e-6, bound_constant=None):
    """Ball variant: search over B_2 under a mass-concentration hypothesis.

    Requires total cell mass <= M * mass on the unit ball; the returned
    quotient is asserted against C * M * q with a conservative constant.
    """
    t = -abs(epsilon)
    grid = u.grid
    n = grid.dim
    coords = grid.meshgrid()
    rr2 = sum(c**2 for c in coords)
    u2 = u.values**2
    h = grid.spacing**n
    total = float(np.sum(u2)) * h
    ball1 = float(np.sum(u2[rr2 < 1.0])) * h
    if ball1 <= 0 or total > M * ball1:
        measured = np.inf if ball1 <= 0 else total / ball1
        raise ConcentrationError(measured, M)
    q_cell = gaussian.dirichlet_quotient_cell(u)
    centers = _scan_centers(grid, coarse_N, box=(-2.0, 2.0))
    keep = np.sqrt(np.sum(centers**2, axis=1)) <= 2.0
    centers = centers[keep]
    num, den = gaussian.rayleigh_scan(u, t, centers)
    quot = num / den
    best = int(np.argmin(np.round(quot / tol) * tol))
    center, val = _refine(u, t, centers[best], 2.0 / coarse_N, tol)
    if np.sqrt(np.sum(center**2)) > 2.0 or val > quot[best]:
        center, val = centers[best].copy(), float(quot[best])
    if bound_constant is None:
        bound_constant = 4.0 * (2.0 * np.pi) ** (n / 2.0) * 2.0
    if val > bound_constant * M * q_cell + tol:
        raise SearchResolutionError(val, bound_constant * M * q_cell, tol, center)
    return RecenterResult(center, val, q_cell, abs(epsilon))


def galilean_recenter(traj, x_eps, epsilon):
    """Translate each field by -(x_eps/eps) * t, recording the drift.

    The transformed solution agrees with the shifted original at t=-eps and
    approaches the untouched solution as t -> 0^-; cell integrals are
    preserved exactly (spectral phase shift).
    """
    x_eps = np.atleast_1d(np.asarray(x_eps, dtype=float))
    grid = traj.grid
    L = grid.half_period
    wrapped = (x_eps + L) % (2 * L) - L
    out = []
    for f in traj.fields:
        s = (wrapped / abs(epsilon)) * f.time
        out.append(shift_field(f, s))
    return Trajectory(tuple(out), traj.coefficients, -wrapped / abs(epsilon))
