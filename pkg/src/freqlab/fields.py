"""Periodic torus grids, sampled scalar fields, and spectral calculus.

Everything downstream consumes these primitives: fields live on a uniform
grid over the periodicity cell [-L, L]^n (n = 1 or 2), differentiation and
integration are spectral, so they are exact for band-limited data.
"""

from dataclasses import dataclass, field as dfield

import numpy as np


class DegenerateFieldError(ValueError):
    """Raised when an operation needs a nonzero field and gets a zero one."""


def _is_power_of_two(k):
    return k >= 1 and (k & (k - 1)) == 0


@dataclass(frozen=True)
class TorusGrid:
    """Uniform grid on the periodicity cell [-half_period, half_period]^dim.

    N points per axis (power of two), spacing 2*half_period/N; the right
    endpoint is excluded, as usual for periodic sampling.
    """

    dim: int
    points_per_axis: int
    half_period: float = np.pi

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if not _is_power_of_two(self.points_per_axis) or self.points_per_axis < 16:
            raise ValueError(
                f"points_per_axis must be a power of two >= 16, got {self.points_per_axis}"
            )
        if not self.half_period > 0:
            raise ValueError("half_period must be positive")

    @property
    def spacing(self):
        return 2.0 * self.half_period / self.points_per_axis

    @property
    def shape(self):
        return (self.points_per_axis,) * self.dim

    def axis_points(self):
        """1D coordinate array shared by every axis."""
        N = self.points_per_axis
        return -self.half_period + self.spacing * np.arange(N)

    def meshgrid(self):
        """Coordinate arrays (one per axis) with indexing='ij'."""
        x = self.axis_points()
        if self.dim == 1:
            return (x,)
        return tuple(np.meshgrid(x, x, indexing="ij"))

    def wavenumbers(self):
        """Angular wavenumbers per axis matching numpy's FFT layout."""
        N = self.points_per_axis
        k = 2.0 * np.pi * np.fft.fftfreq(N, d=self.spacing)
        if self.dim == 1:
            return (k,)
        return tuple(np.meshgrid(k, k, indexing="ij"))

    @property
    def cell_volume(self):
        return (2.0 * self.half_period) ** self.dim


def make_grid(n, N, half_period=np.pi):
    """Build a TorusGrid, rejecting invalid dimension or point counts."""
    return TorusGrid(dim=n, points_per_axis=N, half_period=float(half_period))


@dataclass(frozen=True)
class Field:
    """Real scalar samples on a TorusGrid at a fixed time t <= 0.

    Immutable; the spectral representation is computed on demand and cached.
    """

    grid: TorusGrid
    values: np.ndarray
    time: float
    _spectral_cache: dict = dfield(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            bad = np.argwhere(~np.isfinite(vals))[0]
            raise ValueError(f"non-finite field value at grid index {tuple(bad)}")
        object.__setattr__(self, "values", vals)

    def spectrum(self):
        """Forward FFT of the values (cached)."""
        if "hat" not in self._spectral_cache:
            self._spectral_cache["hat"] = np.fft.fftn(self.values)
        return self._spectral_cache["hat"]

    def with_values(self, values, time=None):
        return Field(self.grid, values, self.time if time is None else time)

    def l2_cell(self):
        """L2 norm over the periodicity cell."""
        return np.sqrt(integrate_cell(self.with_values(self.values**2)))

    def max_abs(self):
        return float(np.max(np.abs(self.values)))


def sample(descriptor, grid, t):
    """Sample an analytic descriptor f(*coords, t) on the grid at time t.

    The descriptor must accept the grid's coordinate arrays (one per axis)
    followed by the time, and evaluate vectorized.
    """
    coords = grid.meshgrid()
    vals = np.asarray(descriptor(*coords, t), dtype=float)
    vals = np.broadcast_to(vals, grid.shape).copy()
    if not np.all(np.isfinite(vals)):
        bad = np.argwhere(~np.isfinite(vals))[0]
        pt = tuple(float(c[tuple(bad)]) for c in coords)
        raise ValueError(f"descriptor returned non-finite value at x={pt}, t={t}")
    return Field(grid, vals, float(t))


def spectral_gradient(f):
    """Gradient of the trigonometric interpolant, one Field per axis."""
    hat = f.spectrum()
    ks = f.grid.wavenumbers()
    out = []
    for k in ks:
        comp = np.fft.ifftn(1j * k * hat).real
        out.append(f.with_values(comp))
    return out


def spectral_laplacian(f):
    hat = f.spectrum()
    k2 = sum(k**2 for k in f.grid.wavenumbers())
    return f.with_values(np.fft.ifftn(-k2 * hat).real)


def integrate_cell(f):
    """Integral over the periodicity cell (exact for band-limited data)."""
    return float(np.sum(f.values)) * f.grid.spacing ** f.grid.dim


def shift_field(f, shift):
    """Translate periodically: returns g with g(x) = f(x - shift).

    Exact on the trigonometric interpolant (phase shift in spectral space).
    """
    shift = np.atleast_1d(np.asarray(shift, dtype=float))
    if shift.size != f.grid.dim:
        raise ValueError("shift dimension mismatch")
    hat = f.spectrum().copy()
    phase = np.zeros(f.grid.shape)
    for s, k in zip(shift, f.grid.wavenumbers()):
        phase = phase + k * s
    return f.with_values(np.fft.ifftn(hat * np.exp(-1j * phase)).real)


def eval_interpolant_axes(f, axes_points):
    """Evaluate the trigonometric interpolant on a tensor grid of points.

    axes_points: one 1D array of evaluation coordinates per axis.  Points are
    wrapped into the periodicity cell automatically.  Returns an array of
    shape (len(axes_points[0]), ...).
    """
    if len(axes_points) != f.grid.dim:
        raise ValueError("need one coordinate array per axis")
    hat = f.spectrum() / f.grid.points_per_axis ** f.grid.dim
    N = f.grid.points_per_axis
    k1d = 2.0 * np.pi * np.fft.fftfreq(N, d=f.grid.spacing)
    # sample index j corresponds to x = -L + j h, so evaluation phases are
    # taken relative to the first grid point
    x0 = -f.grid.half_period
    mats = [np.exp(1j * np.outer(np.asarray(p, dtype=float) - x0, k1d)) for p in axes_points]
    if f.grid.dim == 1:
        return (mats[0] @ hat).real
    return (mats[0] @ hat @ mats[1].T).real
