"""Hermite eigenbasis of the similarity-frame operator and caloric polynomials.

Hermite functions are built by the stable three-term recurrence; the scaled
products phi_alpha(y/2) diagonalize the operator H = -Lap + |y|^2/16 - n/4
with eigenvalues |alpha|/2.  Caloric polynomials (annihilated by d/dt - Lap)
are generated with exact integer coefficients by the heat-polynomial formula.
"""

from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from math import factorial

import numpy as np

from .fields import DegenerateFieldError


@dataclass(frozen=True)
class MultiIndex:
    components: tuple

    def __post_init__(self):
        c = tuple(int(k) for k in self.components)
        if any(k < 0 for k in c):
            raise ValueError("multi-index components must be non-negative")
        object.__setattr__(self, "components", c)

    @property
    def order(self):
        return sum(self.components)

    def __iter__(self):
        return iter(self.components)


@dataclass(frozen=True)
class CaloricTerm:
    mu: tuple
    l: int
    coeff: float


@dataclass(frozen=True)
class CaloricPolynomial:
    """Sum of coeff * x^mu * t^l terms annihilated by the heat operator."""

    terms: tuple

    def __post_init__(self):
        tms = tuple(self.terms)
        if not tms:
            raise ValueError("empty caloric polynomial")
        object.__setattr__(self, "terms", tms)

    @property
    def degree(self):
        return max(sum(t.mu) + 2 * t.l for t in self.terms)

    @property
    def dim(self):
        return len(self.terms[0].mu)

    def __call__(self, *coords_t):
        *coords, t = coords_t
        out = 0.0
        for tm in self.terms:
            term = tm.coeff * np.power(t, tm.l) if tm.l else tm.coeff * np.ones_like(t)
            for xi, m in zip(coords, tm.mu):
                if m:
                    term = term * np.power(xi, m)
            out = out + term
        return out

    def heat_operator_residual(self):
        """(d/dt - Lap) applied termwise, collected exactly over rationals.

        Returns a dict of monomial -> coefficient; empty iff caloric.
        """
        acc = {}
        for tm in self.terms:
            c = Fraction(tm.coeff).limit_denominator(10**12)
            if tm.l >= 1:
                key = (tm.mu, tm.l - 1)
                acc[key] = acc.get(key, Fraction(0)) + c * tm.l
            for i, m in enumerate(tm.mu):
                if m >= 2:
                    mu2 = list(tm.mu)
                    mu2[i] = m - 2
                    key = (tuple(mu2), tm.l)
                    acc[key] = acc.get(key, Fraction(0)) - c * m * (m - 1)
        return {k: v for k, v in acc.items() if v != 0}

    def is_caloric(self):
        return not self.heat_operator_residual()


def hermite_fn(k, x):
    """Hermite function h_k(x) * exp(-x^2/2) by the three-term recurrence."""
    if k < 0:
        raise ValueError("negative Hermite index")
    x = np.asarray(x, dtype=float)
    w = np.exp(-x * x / 2.0)
    hkm1 = w
    if k == 0:
        return hkm1
    hk = 2.0 * x * w
    for j in range(1, k):
        hkm1, hk = hk, 2.0 * x * hk - 2.0 * j * hkm1
    return hk


def hermite_norm_sq(k):
    """L2 norm squared of the k-th Hermite function: 2^k k! sqrt(pi)."""
    return 2.0**k * factorial(k) * np.sqrt(np.pi)


def phi_alpha(alpha, *coords):
    """Orthonormal product Hermite function at the given coordinate arrays."""
    if not isinstance(alpha, MultiIndex):
        alpha = MultiIndex(tuple(np.atleast_1d(alpha)))
    if len(alpha.components) != len(coords):
        raise ValueError("multi-index / coordinate dimension mismatch")
    out = 1.0
    for k, xi in zip(alpha, coords):
        out = out * hermite_fn(k, xi) / np.sqrt(hermite_norm_sq(k))
    return out


def multi_indices(n, max_order):
    """All multi-indices in n axes with |alpha| <= max_order, graded order."""
    out = []
    for total in range(max_order + 1):
        if n == 1:
            out.append(MultiIndex((total,)))
        else:
            for a1 in range(total + 1):
                out.append(MultiIndex((a1, total - a1)))
    return out


def eigenbasis_on_grid(ygrid_axes, n, max_order):
    """phi_alpha(y/2) sampled on a tensor y-grid, normalized in the discrete L2.

    Returns (indices, list of arrays).  Normalization uses the same trapezoid
    quadrature that the frequency quantities use, so projections are exactly
    consistent with it.
    """
    hy = ygrid_axes[0][1] - ygrid_axes[0][0]
    weight = hy**n
    idx = multi_indices(n, max_order)
    basis = []
    for alpha in idx:
        if n == 1:
            vals = phi_alpha(alpha, ygrid_axes[0] / 2.0)
        else:
            Y1, Y2 = np.meshgrid(ygrid_axes[0], ygrid_axes[1], indexing="ij")
            vals = phi_alpha(alpha, Y1 / 2.0, Y2 / 2.0)
        nrm = np.sqrt(np.sum(vals**2) * weight)
        basis.append(vals / nrm)
    return idx, basis


def project(U, max_order):
    """Expand a similarity field over the scaled Hermite basis.

    Returns (dict MultiIndex -> coefficient, residual_norm).  The expansion
    uses discrete inner products on U's own y-grid.
    """
    if max_order > 12:
        raise ValueError("max_order must be <= 12")
    n = U.dim
    hy = U.spacing
    weight = hy**n
    idx, basis = eigenbasis_on_grid(U.axes, n, max_order)
    coeffs = {}
    recon = np.zeros_like(U.values)
    for alpha, b in zip(idx, basis):
        c = float(np.sum(U.values * b) * weight)
        coeffs[alpha] = c
        recon += c * b
    resid = float(np.sqrt(np.sum((U.values - recon) ** 2) * weight))
    return coeffs, resid


def spectrum_dist(q):
    """Distance from q to the half-integer spectrum {m/2 : m >= 0}."""
    if q <= 0:
        return -q if q < 0 else 0.0
    m = int(np.floor(2.0 * q))
    # ties broken toward smaller m
    lo = abs(q - m / 2.0)
    hi = abs((m + 1) / 2.0 - q)
    return min(lo, hi)


def nearest_spectrum_point(q):
    """Index m of the nearest point m/2 of the spectrum (ties to smaller m)."""
    if q <= 0:
        return 0
    m = int(np.floor(2.0 * q))
    lo = abs(q - m / 2.0)
    hi = abs((m + 1) / 2.0 - q)
    return m if lo <= hi else m + 1


def heat_polynomial_1d(d):
    """1D heat polynomial of degree d: sum_l d!/((d-2l)! l!) x^(d-2l) t^l."""
    terms = []
    for l in range(d // 2 + 1):
        c = factorial(d) // (factorial(d - 2 * l) * factorial(l))
        terms.append(CaloricTerm((d - 2 * l,), l, float(c)))
    return terms


def caloric_basis(d, n):
    """Basis of homogeneous caloric polynomials of parabolic degree d.

    In one dimension this is the single heat polynomial; in two, products of
    axis heat polynomials of complementary degree.  Coefficients are exact
    integers, so the heat-operator check holds in rational arithmetic.
    """
    if not (0 <= d <= 8):
        raise ValueError("caloric basis supported for 0 <= d <= 8")
    if n == 1:
        return [CaloricPolynomial(tuple(heat_polynomial_1d(d)))]
    out = []
    for d1 in range(d + 1):
        t1 = heat_polynomial_1d(d1)
        t2 = heat_polynomial_1d(d - d1)
        terms = []
        for a in t1:
            for b in t2:
                terms.append(CaloricTerm((a.mu[0], b.mu[0]), a.l + b.l, a.coeff * b.coeff))
        out.append(CaloricPolynomial(tuple(terms)))
    return out


def fit_caloric(traj, d, radii=None, degenerate_tol=1e-8):
    """Least-squares caloric polynomial of degree d near (0,0).

    Samples are gathered from shrinking parabolic cylinders (weighted by
    r^-d, replicating the asymptotic structure of the approximation) and fit
    against the caloric basis.  Returns (polynomial, residual) where the
    residual is the weighted sup of |u - P| / |(x,t)|^d over the innermost
    cylinder.  Raises DegenerateFieldError for identically small data.
    """
    grid = traj.grid
    n = grid.dim
    if radii is None:
        radii = [0.4 * (0.7**k) for k in range(5)]
    radii = sorted(radii, reverse=True)
    basis = caloric_basis(d, n)
    rows, targets, weights = [], [], []
    coords = grid.meshgrid()
    rr = np.sqrt(sum(c**2 for c in coords))
    for r in radii:
        ts = [f for f in traj.fields if -r * r < f.time < 0]
        if len(ts) < 2:
            raise ValueError(f"cylinder r={r:g} not covered by trajectory samples")
        mask = rr < r
        w = r ** (-d)
        for f in ts:
            pts = [c[mask] for c in coords]
            uvals = f.values[mask]
            row_block = np.stack([p(*pts, f.time) for p in basis], axis=-1)
            rows.append(row_block * w)
            targets.append(uvals * w)
            weights.append((pts, f.time, uvals, r))
    A = np.vstack(rows)
    b = np.concatenate(targets)
    if np.max(np.abs(b)) < 1e-14 * max(1.0, np.max(np.abs(A))):
        raise DegenerateFieldError("trajectory is numerically zero near (0,0)")
    coeffs, *_ = np.linalg.lstsq(A, b, rcond=None)
    merged = {}
    for c, p in zip(coeffs, basis):
        for tm in p.terms:
            key = (tm.mu, tm.l)
            merged[key] = merged.get(key, 0.0) + c * tm.coeff
    poly = CaloricPolynomial(tuple(CaloricTerm(mu, l, c) for (mu, l), c in merged.items()))
    # weighted sup residual on the innermost cylinder
    r_in = radii[-1]
    worst = 0.0
    for pts, tval, uvals, r in weights:
        if r != r_in:
            continue
        pnorm = np.sqrt(sum(p**2 for p in pts) + abs(tval))
        err = np.abs(uvals - poly(*pts, tval)) / np.maximum(pnorm, 1e-30) ** d
        if err.size:
            worst = max(worst, float(np.max(err)))
    degenerate = all(abs(c) < degenerate_tol for c in coeffs)
    if degenerate:
        raise DegenerateFieldError("fitted caloric polynomial is degenerate")
    return poly, worst
