"""Similarity frame: U(y, tau) = exp(-|y|^2/8) u(y e^{-tau/2}, -e^{-tau}).

The heat operator becomes H = -Lap + |y|^2/16 - n/4 in this frame; the
frequency quantities Q and Qbar are Rayleigh quotients of H and of its
drift-corrected version A(tau).  The physical-space Gaussian functionals are
the primary computation path; quadrature in the y-frame is the cross-check.
"""

from dataclasses import dataclass

import numpy as np

from . import gaussian
from .fields import DegenerateFieldError, eval_interpolant_axes

DEFAULT_Y_RADIUS = 16.0
DEFAULT_Y_POINTS = {1: 641, 2: 257}


class ResolutionError(RuntimeError):
    """The torus grid can no longer resolve the shrinking Gaussian window."""


@dataclass(frozen=True)
class SimilarityField:
    """U sampled on a uniform tensor grid over [-y_radius, y_radius]^n."""

    axes: tuple
    values: np.ndarray
    tau: float

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ValueError("non-finite similarity field values")
        object.__setattr__(self, "axes", tuple(np.asarray(a, dtype=float) for a in self.axes))
        object.__setattr__(self, "values", vals)

    @property
    def dim(self):
        return len(self.axes)

    @property
    def spacing(self):
        return float(self.axes[0][1] - self.axes[0][0])

    @property
    def quad_weight(self):
        return self.spacing**self.dim

    def norm_sq(self):
        return float(np.sum(self.values**2)) * self.quad_weight

    def meshgrid(self):
        if self.dim == 1:
            return (self.axes[0],)
        return tuple(np.meshgrid(self.axes[0], self.axes[1], indexing="ij"))


def y_axes(n, y_radius=DEFAULT_Y_RADIUS, points=None):
    if points is None:
        points = DEFAULT_Y_POINTS[n]
    ax = np.linspace(-y_radius, y_radius, points)
    return (ax,) * n


def to_similarity(u, epsilon=None, y_radius=DEFAULT_Y_RADIUS, points=None):
    """Pull a physical field at time t < 0 into the similarity frame.

    The pullback samples the trigonometric interpolant of u at y*e^{-tau/2}
    and applies the Gaussian weight.  Refuses to proceed once the whole
    y-window collapses under one torus grid spacing.
    """
    t = u.time
    if t >= 0:
        raise ValueError("similarity frame requires t < 0")
    if epsilon is not None and not (-abs(epsilon) <= t):
        raise ValueError(f"field time {t:g} outside [-epsilon, 0)")
    n = u.grid.dim
    axes = y_axes(n, y_radius, points)
    scale = np.sqrt(abs(t))  # e^{-tau/2}
    if scale * y_radius < u.grid.spacing:
        raise ResolutionError(
            f"y-window {scale * y_radius:g} below grid spacing {u.grid.spacing:g} at t={t:g}"
        )
    phys_axes = [a * scale for a in axes]
    samples = eval_interpolant_axes(u, phys_axes)
    mesh = np.meshgrid(*axes, indexing="ij") if n == 2 else [axes[0]]
    w = np.exp(-sum(m**2 for m in mesh) / 8.0)
    tau = -np.log(abs(t))
    return SimilarityField(axes, w * samples, tau)


def _laplacian_fd(values, h, n):
    """6th-order centered finite-difference Laplacian; zero beyond the window.

    Valid because similarity fields decay like exp(-|y|^2/8) at the boundary.
    """
    c = np.array([1.0 / 90, -3.0 / 20, 3.0 / 2, -49.0 / 18, 3.0 / 2, -3.0 / 20, 1.0 / 90])
    out = np.zeros_like(values)
    for axis in range(n):
        padded = np.concatenate(
            [np.zeros_like(np.take(values, range(3), axis=axis)), values,
             np.zeros_like(np.take(values, range(3), axis=axis))], axis=axis)
        acc = np.zeros_like(values)
        for off, ci in enumerate(c):
            sl = [slice(None)] * n
            sl[axis] = slice(off, off + values.shape[axis])
            acc += ci * padded[tuple(sl)]
        out += acc / (h * h)
    return out


def apply_H(U, boundary_tol=1e-6):
    """H U = -Lap U + (|y|^2/16 - n/4) U on the y-grid.

    Requires the field to have decayed at the window edge (relative to its
    peak), since the Laplacian stencil treats values beyond the edge as zero.
    """
    n = U.dim
    if U.dim == 2:
        edge = np.max(np.abs(np.concatenate([U.values[0], U.values[-1], U.values[:, 0], U.values[:, -1]])))
    else:
        edge = max(abs(U.values[0]), abs(U.values[-1]))
    peak = np.max(np.abs(U.values))
    if peak > 0 and edge > boundary_tol * peak:
        raise ResolutionError("similarity field not resolved: boundary values too large")
    mesh = U.meshgrid()
    y2 = sum(m**2 for m in mesh)
    lap = _laplacian_fd(U.values, U.spacing, n)
    vals = -lap + (y2 / 16.0 - n / 4.0) * U.values
    return SimilarityField(U.axes, vals, U.tau)


def qbar(U, tau, drift_a):
    """(HU,U)/||U||^2 minus the exponentially damped drift correction."""
    ns = U.norm_sq()
    if ns <= 0:
        raise DegenerateFieldError("qbar of a zero similarity field")
    HU = apply_H(U)
    q = float(np.sum(HU.values * U.values)) * U.quad_weight / ns
    a = np.atleast_1d(np.asarray(drift_a, dtype=float))
    if np.any(a != 0.0):
        mesh = U.meshgrid()
        corr = 0.0
        for j in range(U.dim):
            corr += a[j] * float(np.sum(mesh[j] * U.values**2)) * U.quad_weight
        q -= np.exp(-tau / 2.0) * corr / ns
    return q


def quadratic_form_identity(U):
    """(HU,U) recomputed as ||grad U||^2 + ||yU||^2/16 - (n/4)||U||^2."""
    n = U.dim
    h = U.spacing
    grads = np.gradient(U.values, h, edge_order=2)
    if n == 1:
        grads = [grads]
    g2 = sum(np.sum(g**2) for g in grads) * U.quad_weight
    mesh = U.meshgrid()
    y2 = sum(m**2 for m in mesh)
    yU = float(np.sum(y2 * U.values**2)) * U.quad_weight
    ns = U.norm_sq()
    return float(g2) + yU / 16.0 - (n / 4.0) * ns


@dataclass(frozen=True)
class FrequencyTrace:
    """Sampled tau -> (phi, q, Q, Qbar) along a trajectory."""

    taus: np.ndarray
    phi_vals: np.ndarray
    q_vals: np.ndarray
    Q_vals: np.ndarray
    Qbar_vals: np.ndarray
    drift_a: np.ndarray
    epsilon: float

    @property
    def tau0(self):
        return float(np.log(1.0 / self.epsilon))

    @property
    def times(self):
        return -np.exp(-self.taus)

    def __len__(self):
        return len(self.taus)


def frequency_trace(traj, drift_a, epsilon, crosscheck=False, crosscheck_tol=1e-3):
    """Assemble the frequency quantities from a trajectory on [-eps, 0).

    Q is computed in physical space as |t| times the Gaussian Rayleigh
    quotient; Qbar subtracts the drift correction.  Samples past the torus
    resolution guard (sqrt|t| below one grid spacing) are dropped.  With
    crosscheck=True each retained sample is recomputed by y-frame quadrature
    and required to agree within crosscheck_tol relative.
    """
    a = np.atleast_1d(np.asarray(drift_a, dtype=float))
    grid = traj.grid
    taus, phis, qs, Qs, Qbars = [], [], [], [], []
    for f in traj.fields:
        t = f.time
        if t < -abs(epsilon) - 1e-12:
            continue
        if np.sqrt(abs(t)) < grid.spacing:
            break  # Gaussian width below the grid scale; stop the trace
        tau = -np.log(abs(t))
        p = gaussian.phi(f, t)
        if p <= 0:
            break
        q = gaussian.dirichlet_quotient_cell(f)
        Q = abs(t) * gaussian.gaussian_rayleigh(f, t)
        mom = gaussian.weighted_first_moment(f, t)
        Qb = Q - float(np.dot(a[: grid.dim], mom)) / p
        if crosscheck:
            try:
                U = to_similarity(f)
                Qb_sim = qbar(U, tau, a)
                ref = max(1.0, abs(Qb))
                if abs(Qb_sim - Qb) > crosscheck_tol * ref:
                    raise RuntimeError(
                        f"similarity cross-check failed at tau={tau:g}: "
                        f"physical {Qb:g} vs y-frame {Qb_sim:g}"
                    )
            except ResolutionError:
                pass
        taus.append(tau)
        phis.append(p)
        qs.append(q)
        Qs.append(Q)
        Qbars.append(Qb)
    return FrequencyTrace(
        np.array(taus), np.array(phis), np.array(qs), np.array(Qs), np.array(Qbars),
        a, float(abs(epsilon)))


def qbar_derivative_diag(trace):
    """Centered finite-difference dQbar/dtau; diagnostic only."""
    if len(trace) < 3:
        raise ValueError("need at least 3 samples to differentiate")
    return list(np.gradient(trace.Qbar_vals, trace.taus, edge_order=1))
