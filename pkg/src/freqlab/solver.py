"""Time integration of du/dt = Lap(u) + (a + w).grad(u) + v*u on the torus.

Backward-launch convention: data is given at some t_start < 0 and integrated
toward t -> 0^-.  Diffusion is handled exactly in spectral space by an
integrating factor; the bounded drift and potential terms are advanced with
an explicit second-order Runge-Kutta under a CFL-style cap.
"""

from dataclasses import dataclass, field as dfield
from typing import Callable, Optional

import numpy as np

from .fields import DegenerateFieldError, Field, integrate_cell, sample, spectral_gradient, spectral_laplacian


class StabilityError(ValueError):
    def __init__(self, dt, dt_admissible):
        self.dt = dt
        self.dt_admissible = dt_admissible
        super().__init__(
            f"dt={dt:g} violates the advective stability cap; admissible dt <= {dt_admissible:g}"
        )


class BlowUpError(RuntimeError):
    def __init__(self, last_good_time):
        self.last_good_time = last_good_time
        super().__init__(f"non-finite state encountered; last good time t={last_good_time:g}")


@dataclass(frozen=True)
class CoefficientSet:
    """Drift components w_j(x..,t) and potential v(x..,t) with sup bounds.

    Descriptors are vectorized callables taking the grid coordinate arrays
    and the time.  None means identically zero.  The declared bounds must
    dominate the sampled sup on a dense grid; this is checked on demand by
    `validate_on`.
    """

    drift: tuple = ()
    potential: Optional[Callable] = None
    bound_M1: float = 1.0
    bound_M0: float = 1.0

    def __post_init__(self):
        if self.bound_M0 < 1.0 or self.bound_M1 < 1.0:
            raise ValueError("bounds M0, M1 must be >= 1")

    def validate_on(self, grid, times):
        """Dense-sample the coefficients and check the declared sup bounds."""
        for t in times:
            for j, w in enumerate(self.drift):
                if w is None:
                    continue
                s = sample(w, grid, t).max_abs()
                if s > self.bound_M1 + 1e-12:
                    raise ValueError(
                        f"sampled sup|w_{j}|={s:g} at t={t:g} exceeds declared M1={self.bound_M1:g}"
                    )
            if self.potential is not None:
                s = sample(self.potential, grid, t).max_abs()
                if s > self.bound_M0 + 1e-12:
                    raise ValueError(
                        f"sampled sup|v|={s:g} at t={t:g} exceeds declared M0={self.bound_M0:g}"
                    )

    def drift_fields(self, grid, t, n):
        out = []
        for j in range(n):
            w = self.drift[j] if j < len(self.drift) else None
            out.append(None if w is None else sample(w, grid, t).values)
        return out

    def potential_field(self, grid, t):
        return None if self.potential is None else sample(self.potential, grid, t).values


ZERO_COEFFS = CoefficientSet()


def geometric_sample_times(epsilon, ratio=0.8, count=40, t_floor_factor=1e-3):
    """Sample times t_k = -epsilon * ratio^k, stopping at -t_floor_factor*epsilon.

    Uniform coverage in log|t|, which is what the slope estimators consume.
    """
    if not (0.5 < ratio < 0.95):
        raise ValueError("geometric ratio must lie in (0.5, 0.95)")
    ts = []
    t = -abs(epsilon)
    floor = abs(epsilon) * t_floor_factor
    for _ in range(count):
        if abs(t) < floor:
            break
        ts.append(t)
        t *= ratio
    return ts


@dataclass(frozen=True)
class SolveSchedule:
    t_start: float
    t_end: float
    sample_times: tuple
    max_dt: float = 1e-3

    def __post_init__(self):
        if not (self.t_start < 0 and self.t_start < self.t_end < 0):
            raise ValueError("need t_start < t_end < 0")
        st = tuple(float(t) for t in self.sample_times)
        if any(t >= 0 for t in st):
            raise ValueError("sample times must be negative")
        if list(st) != sorted(set(st)):
            raise ValueError("sample times must be strictly increasing")
        if st and (st[0] < self.t_start - 1e-15 or st[-1] > self.t_end + 1e-15):
            raise ValueError("sample times must lie in [t_start, t_end]")
        if self.max_dt <= 0:
            raise ValueError("max_dt must be positive")
        object.__setattr__(self, "sample_times", st)


@dataclass(frozen=True)
class Trajectory:
    fields: tuple
    coefficients: CoefficientSet
    drift_a: np.ndarray

    def __post_init__(self):
        fs = tuple(self.fields)
        times = [f.time for f in fs]
        if times != sorted(set(times)):
            raise ValueError("trajectory times must be strictly increasing")
        grids = {f.grid for f in fs}
        if len(grids) > 1:
            raise ValueError("all trajectory fields must share one grid")
        a = np.atleast_1d(np.asarray(self.drift_a, dtype=float))
        object.__setattr__(self, "fields", fs)
        object.__setattr__(self, "drift_a", a)

    @property
    def times(self):
        return np.array([f.time for f in self.fields])

    @property
    def grid(self):
        return self.fields[0].grid

    def field_at(self, t, tol=1e-12):
        for f in self.fields:
            if abs(f.time - t) <= tol * max(1.0, abs(t)):
                return f
        raise KeyError(f"no trajectory sample at t={t:g}")


def admissible_dt(grid, coeffs, drift_a, safety=0.5):
    """Advective stability cap: dt <= safety * spacing / (|a|_inf + M1)."""
    a_inf = float(np.max(np.abs(np.atleast_1d(drift_a)))) if np.size(drift_a) else 0.0
    speed = a_inf + (coeffs.bound_M1 if coeffs.drift else 0.0)
    if speed == 0.0:
        return np.inf
    return safety * grid.spacing / speed


def _explicit_rhs(grid, values, coeffs, drift_a, t, n):
    """Non-stiff part (a + w).grad(u) + v*u evaluated in physical space."""
    rhs = np.zeros_like(values)
    a = np.atleast_1d(np.asarray(drift_a, dtype=float))
    drift_vals = coeffs.drift_fields(grid, t, n)
    need_grad = np.any(a != 0.0) or any(w is not None for w in drift_vals)
    if need_grad:
        f = Field(grid, values, t)
        grads = spectral_gradient(f)
        for j in range(n):
            cj = a[j] if j < a.size else 0.0
            wj = drift_vals[j]
            if wj is not None:
                rhs += (cj + wj) * grads[j].values
            elif cj != 0.0:
                rhs += cj * grads[j].values
    v = coeffs.potential_field(grid, t)
    if v is not None:
        rhs += v * values
    return rhs


def step(u, coeffs, drift_a, dt, check_stability=True):
    """One IMEX step of size dt from u.time.

    Diffusion is integrated exactly via the spectral factor exp(-|k|^2 dt);
    the drift/potential terms use Heun's method on the transformed variable.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    grid = u.grid
    n = grid.dim
    if check_stability:
        cap = admissible_dt(grid, coeffs, drift_a)
        if dt > cap * (1 + 1e-12):
            raise StabilityError(dt, cap)
    k2 = sum(k**2 for k in grid.wavenumbers())
    E = np.exp(-k2 * dt)
    t0 = u.time
    hat0 = u.spectrum()
    f0 = _explicit_rhs(grid, u.values, coeffs, drift_a, t0, n)
    pred_hat = E * (hat0 + dt * np.fft.fftn(f0))
    pred = np.fft.ifftn(pred_hat).real
    f1 = _explicit_rhs(grid, pred, coeffs, drift_a, t0 + dt, n)
    new_hat = E * (hat0 + 0.5 * dt * np.fft.fftn(f0)) + 0.5 * dt * np.fft.fftn(f1)
    vals = np.fft.ifftn(new_hat).real
    if not np.all(np.isfinite(vals)):
        raise BlowUpError(t0)
    return Field(grid, vals, t0 + dt)


def solve(u0, coeffs, drift_a, sched):
    """Integrate from sched.t_start and collect fields at the sample times."""
    grid = u0.grid
    if abs(u0.time - sched.t_start) > 1e-12 * max(1.0, abs(sched.t_start)):
        raise ValueError(f"u0.time={u0.time:g} != sched.t_start={sched.t_start:g}")
    if np.sqrt(np.sum(u0.values**2)) <= 1e-30 * u0.values.size:
        raise DegenerateFieldError("zero initial data")
    cap = min(sched.max_dt, admissible_dt(grid, coeffs, drift_a))
    checkpoints = list(sched.sample_times)
    if not checkpoints or abs(checkpoints[-1] - sched.t_end) > 1e-15:
        checkpoints.append(sched.t_end)
    out = []
    u = u0
    if checkpoints and abs(checkpoints[0] - sched.t_start) <= 1e-15:
        out.append(u0)
        checkpoints = checkpoints[1:]
    for tc in checkpoints:
        span = tc - u.time
        if span <= 0:
            continue
        nsub = max(1, int(np.ceil(span / cap - 1e-12)))
        dt = span / nsub
        for _ in range(nsub):
            u = step(u, coeffs, drift_a, dt, check_stability=False)
        u = Field(grid, u.values, tc)  # snap accumulated time to the checkpoint
        if any(abs(tc - ts) <= 1e-15 for ts in sched.sample_times):
            out.append(u)
    return Trajectory(tuple(out), coeffs, np.atleast_1d(np.asarray(drift_a, dtype=float)))


def residual(traj, at):
    """Discrete L2 residual of the PDE at an interior sample index.

    Time derivative by the centered two-point slope across the neighbors of
    the sample; space terms spectrally.
    """
    fs = traj.fields
    if not (0 < at < len(fs) - 1):
        raise IndexError(f"interior index required, got {at} of {len(fs)} samples")
    um, u0, up = fs[at - 1], fs[at], fs[at + 1]
    dt_total = up.time - um.time
    ut = (up.values - um.values) / dt_total
    grid = u0.grid
    n = grid.dim
    lap = spectral_laplacian(u0).values
    rhs = _explicit_rhs(grid, u0.values, traj.coefficients, traj.drift_a, u0.time, n)
    res = ut - lap - rhs
    return float(np.sqrt(integrate_cell(u0.with_values(res**2))))
