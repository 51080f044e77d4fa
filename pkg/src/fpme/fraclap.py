"""Two realizations of the fractional Laplacian ``(-Delta)^(sigma/2)``.

``SpectralOperator``
    Dirichlet sine eigenbasis on the grid box; drives the time stepper.
``apply_singular_integral``
    Whole-space principal-value integral with normalization ``C_{N,sigma}``;
    used for operator-level checks on analytic functions such as the
    cutoff family ``phi_R``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy import fft as sfft
from scipy.special import roots_jacobi, roots_legendre

from .fields import Grid, GridMismatchError, ScalarField

SPECTRA = ("exact", "discrete")


def normalization_constant(N: int, sigma: float) -> float:
    """``C_{N,sigma} = 2^(sigma-1) sigma Gamma((N+sigma)/2) / (pi^(N/2) Gamma(1-sigma/2))``."""
    if N < 1:
        raise ValueError(f"dimension must be >= 1, got {N}")
    if not 0 < sigma < 2:
        raise ValueError(f"order sigma must lie in (0, 2), got {sigma}")
    return (2.0 ** (sigma - 1) * sigma * math.gamma(0.5 * (N + sigma))
            / (math.pi ** (0.5 * N) * math.gamma(1 - 0.5 * sigma)))


def riesz_constant(N: int, sigma: float) -> float:
    """Constant ``c`` with ``(-Delta)^(-sigma/2) f = c * int f(y) |x-y|^(sigma-N) dy``."""
    if not 0 < sigma < N:
        raise ValueError(f"Riesz potential needs 0 < sigma < N, got sigma={sigma}, N={N}")
    return (math.gamma(0.5 * (N - sigma))
            / (2.0**sigma * math.pi ** (0.5 * N) * math.gamma(0.5 * sigma)))


# ------------------------------------------------------------------ spectral


def _dst(a: np.ndarray) -> np.ndarray:
    # orthonormal DST-I is its own inverse
    return sfft.dstn(a, type=1, norm="ortho")


@dataclass(frozen=True, eq=False)
class SpectralOperator:
    """Fractional power of the Dirichlet Laplacian on the grid box.

    ``spectrum='exact'`` uses the continuum eigenvalues
    ``lambda_k = sum_i (k_i pi / 2R)^2`` of the tensor sine modes.
    ``spectrum='discrete'`` uses the eigenvalues of the second-order
    finite-difference Dirichlet Laplacian on the same modes,
    ``sum_i (4/h^2) sin^2(k_i pi / (2(n+1)))``.  Its fractional powers are
    M-matrices for every sigma, so the implicit scheme preserves order,
    positivity and the weighted L1 contraction exactly.  The exact table
    has that property only for ``N = 1, sigma <= 1``.
    """

    grid: Grid
    sigma: float
    spectrum: str = "exact"
    eigenvalues: np.ndarray = field(init=False, repr=False)
    multipliers: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not 0 < self.sigma <= 2:
            raise ValueError(f"order sigma must lie in (0, 2], got {self.sigma}")
        if self.spectrum not in SPECTRA:
            raise ValueError(f"spectrum must be one of {SPECTRA}, got {self.spectrum!r}")
        g = self.grid
        k = np.arange(1, g.n + 1, dtype=float)
        if self.spectrum == "exact":
            lam1 = (k * np.pi / (2.0 * g.R)) ** 2
        else:
            lam1 = (4.0 / g.h**2) * np.sin(k * np.pi / (2.0 * (g.n + 1))) ** 2
        if g.N == 1:
            lam = lam1
        else:
            lam = lam1[:, None] + lam1[None, :]
        lam.setflags(write=False)
        mult = lam ** (0.5 * self.sigma)
        mult.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "multipliers", mult)

    def with_sigma(self, sigma: float) -> "SpectralOperator":
        return SpectralOperator(self.grid, sigma, self.spectrum)

    @staticmethod
    def transform(values: np.ndarray) -> np.ndarray:
        """Coefficients in the orthonormal discrete sine basis (self-inverse)."""
        return _dst(values)

    def apply(self, values: np.ndarray) -> np.ndarray:
        return _dst(self.multipliers * _dst(values))

    def apply_power(self, values: np.ndarray, s: float) -> np.ndarray:
        """``A^s`` for real ``s`` (``s = -1`` is the Dirichlet Green operator)."""
        return _dst(self.multipliers**s * _dst(values))

    def solve_shifted(self, values: np.ndarray, shift: float, scale: float) -> np.ndarray:
        """``(shift + scale * A)^-1 values``."""
        return _dst(_dst(values) / (shift + scale * self.multipliers))

    def quadratic_form(self, values: np.ndarray) -> float:
        """``<A f, f>`` under the unweighted node inner product."""
        c = _dst(values)
        return float(np.sum(self.multipliers * c * c))

    def seminorm_sq(self, values: np.ndarray) -> float:
        """Squared ``H^(sigma/2)`` seminorm with the grid measure ``h^N``."""
        return self.quadratic_form(values) * self.grid.cell_volume

    def mode(self, k: Sequence[int]) -> np.ndarray:
        """Node values of the tensor sine mode with multi-index ``k``."""
        g = self.grid
        k = tuple(k)
        if len(k) != g.N:
            raise ValueError(f"mode index {k} has wrong length for N={g.N}")
        out = np.ones(g.shape)
        for xi, ki in zip(g.coords(), k):
            out = out * np.sin(ki * np.pi * (xi + g.R) / (2.0 * g.R))
        return out

    def multiplier(self, k: Sequence[int]) -> float:
        return float(self.multipliers[tuple(ki - 1 for ki in k)])


def apply_spectral(op: SpectralOperator, f: ScalarField) -> ScalarField:
    if f.grid != op.grid:
        raise GridMismatchError(f"field on {f.grid}, operator on {op.grid}")
    return ScalarField(op.grid, op.apply(f.values))


# -------------------------------------------------------------------- cutoff


def eta(s):
    """Nonincreasing C^2 cutoff: 1 on [0,1], 0 on [2,inf), quintic bridge."""
    s = np.asarray(s, dtype=float)
    t = np.clip(s - 1.0, 0.0, 1.0)
    # factored near t = 1 to keep relative accuracy where eta is tiny
    return np.where(t < 0.5, 1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t * t),
                    (1.0 - t) ** 3 * (1.0 + 3.0 * t + 6.0 * t * t))


def eta_complement(s):
    """``1 - eta(s)`` without cancellation where ``eta`` is close to 1."""
    s = np.asarray(s, dtype=float)
    t = np.clip(s - 1.0, 0.0, 1.0)
    return np.where(t < 0.5, t**3 * (10.0 - 15.0 * t + 6.0 * t * t),
                    1.0 - (1.0 - t) ** 3 * (1.0 + 3.0 * t + 6.0 * t * t))


@dataclass(frozen=True)
class CutoffFamily:
    """``phi_R(x) = eta(|x| / R)``."""

    R: float = 1.0

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError(f"cutoff scale must be positive, got {self.R}")

    def __call__(self, points):
        p = np.asarray(points, dtype=float)
        r = np.abs(p) if p.ndim <= 1 else np.linalg.norm(p, axis=-1)
        return eta(r / self.R)

    def complement(self, points):
        """``1 - phi_R``, accurate where ``phi_R`` is close to 1."""
        p = np.asarray(points, dtype=float)
        r = np.abs(p) if p.ndim <= 1 else np.linalg.norm(p, axis=-1)
        return eta_complement(r / self.R)

    # radii where the profile is only C^2; used as quadrature breakpoints
    @property
    def kinks(self) -> tuple:
        return (self.R, 2.0 * self.R)

    @property
    def support_radius(self) -> float:
        return 2.0 * self.R

    limit_at_infinity = 0.0


def cutoff_value(family: CutoffFamily, x) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return float(eta(np.linalg.norm(x) / family.R))


# ---------------------------------------------------------- singular integral


@dataclass(frozen=True)
class QuadratureSpec:
    """Radial quadrature for the principal-value integral around a point.

    ``eps``: radius of the Gauss-Jacobi near-field ball, where the
    symmetrized second difference cancels the singularity.  ``X``: outer
    radius; beyond it the constant part is integrated analytically.
    ``n_near``: Gauss-Jacobi nodes; ``n_far``: geometric far-field panels
    (``order`` Gauss-Legendre nodes each); ``n_theta``: angular nodes on the
    half circle (N = 2 only).
    """

    eps: float = 0.1
    X: float = 50.0
    n_near: int = 32
    n_far: int = 64
    order: int = 16
    n_theta: int = 128

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("near-field radius eps must be positive")
        if not self.X > self.eps:
            raise ValueError("outer radius X must exceed eps")
        if min(self.n_near, self.n_far) < 16:
            raise ValueError("panel counts must be at least 16")

    @classmethod
    def for_scale(cls, R: float, h: Optional[float] = None, **kw) -> "QuadratureSpec":
        eps = 2.0 * h if h is not None else R / 8.0
        return cls(eps=eps, X=50.0 * R, **kw)

    def refined(self) -> "QuadratureSpec":
        return replace(self, eps=0.6 * self.eps, n_near=self.n_near + 8,
                       n_far=self.n_far + 24, order=self.order + 4,
                       n_theta=self.n_theta + 64)


class IntegralEstimate(NamedTuple):
    value: float
    tail_converged: bool

    def __float__(self):
        return float(self.value)


def _segments(eps: float, X: float, breaks: Sequence[float], n_far: int):
    """Far-field panels on [eps, X]: geometric, with ``breaks`` inserted."""
    nodes = set(np.geomspace(eps, X, n_far + 1).tolist())
    nodes.update(b for b in breaks if eps < b < X)
    pts = np.array(sorted(nodes))
    # drop slivers that would only repeat a breakpoint
    keep = np.concatenate([[True], np.diff(pts) > 1e-13 * pts[1:]])
    return pts[keep]


def _second_difference(f: Callable, x: np.ndarray, y: np.ndarray, n_theta: int) -> np.ndarray:
    """``g(y) = sum over half sphere of 2f(x) - f(x+y e) - f(x-y e)``.

    Returns the angular integral over the half sphere (N = 2) or the
    plain symmetric difference (N = 1), evaluated for each radius in ``y``.
    """
    N = x.size
    fx = float(np.asarray(f(x[None, :] if N > 1 else x)).ravel()[0])
    comp = getattr(f, "complement", None)
    if comp is not None and fx > 0.5:
        # second differences of 1 - f: same integrand, no cancellation near 1
        return -_second_difference(comp, x, y, n_theta)
    if N == 1:
        xp = (x[0] + y)[:, None]
        xm = (x[0] - y)[:, None]
        return 2.0 * fx - np.asarray(f(xp)).ravel() - np.asarray(f(xm)).ravel()
    # periodic trapezoid on [0, pi) with offset nodes
    th = (np.arange(n_theta) + 0.5) * np.pi / n_theta
    e = np.stack([np.cos(th), np.sin(th)], axis=1)
    disp = y[:, None, None] * e[None, :, :]
    vals = 2.0 * fx - np.asarray(f(x + disp)) - np.asarray(f(x - disp))
    return vals.sum(axis=1) * (np.pi / n_theta)


def _radial_breaks(f, x: np.ndarray) -> list:
    kinks = getattr(f, "kinks", ())
    r = float(np.linalg.norm(x))
    out = []
    for k in kinks:
        out.extend([abs(k - r), k + r])
    return [b for b in out if b > 0]


def apply_singular_integral(f: Callable, x, sigma: float,
                            spec: Optional[QuadratureSpec] = None) -> IntegralEstimate:
    """``C_{N,sigma} P.V. int (f(x) - f(z)) / |x-z|^(N+sigma) dz`` at one point.

    ``f`` maps an array of points of shape ``(..., N)`` (or ``(m,)`` for
    ``N = 1``) to values.  Optional attributes refine the quadrature:
    ``kinks`` (radii where a radial ``f`` loses smoothness),
    ``support_radius`` and ``limit_at_infinity``.  Without a known limit the
    tail is probed; an unsettled tail is returned with
    ``tail_converged=False``.
    """
    spec = spec or QuadratureSpec()
    x = np.atleast_1d(np.asarray(x, dtype=float))
    N = x.size
    if N not in (1, 2):
        raise ValueError("singular integral implemented for N = 1, 2")
    C = normalization_constant(N, sigma)

    X = spec.X
    supp = getattr(f, "support_radius", None)
    if supp is not None:
        X = max(X, 2.0 * (float(np.linalg.norm(x)) + supp))

    limit = getattr(f, "limit_at_infinity", None)
    converged = True
    fx = float(np.asarray(f(x[None, :] if N > 1 else x)).ravel()[0])
    if limit is None:
        probes = []
        for s in (1.0, 2.0, 4.0):
            for sgn in (1.0, -1.0):
                p = x + sgn * s * X * np.eye(N)[0]
                probes.append(float(np.asarray(f(p[None, :] if N > 1 else p)).ravel()[0]))
        limit = float(np.mean(probes))
        if np.ptp(probes) > 1e-8 * max(1.0, abs(fx)):
            converged = False

    breaks = sorted(b for b in _radial_breaks(f, x) if b < X)
    near = min([spec.eps] + [b for b in breaks])
    # near field: g(y)/y^2 smooth on [0, near], weight y^(1-sigma)
    t, w = roots_jacobi(spec.n_near, 0.0, 1.0 - sigma)
    y = 0.5 * near * (1.0 + t)
    w = w * (0.5 * near) ** (2.0 - sigma)
    g = _second_difference(f, x, y, spec.n_theta)
    total = float(np.sum(w * g / (y * y)))

    # far field: geometric Gauss-Legendre panels, breakpoints inserted
    edges = _segments(near, X, breaks, spec.n_far)
    tl, wl = roots_legendre(spec.order)
    a, b = edges[:-1], edges[1:]
    yy = (0.5 * (b - a)[:, None] * (tl[None, :] + 1.0) + a[:, None]).ravel()
    ww = (0.5 * (b - a)[:, None] * wl[None, :]).ravel()
    g = _second_difference(f, x, yy, spec.n_theta)
    total += float(np.sum(ww * g * yy ** (-1.0 - sigma)))

    # beyond X the integrand is (f(x) - limit) over the full sphere
    omega = 2.0 if N == 1 else 2.0 * math.pi
    total += omega * (fx - limit) * X ** (-sigma) / sigma
    return IntegralEstimate(C * total, converged)


class ScalingResidual(NamedTuple):
    absolute: float
    relative: float
    lhs: float
    rhs: float


def cutoff_scaling_residual(R: float, x, sigma: float,
                            spec: Optional[QuadratureSpec] = None) -> ScalingResidual:
    """Compare ``A[phi_R](x)`` with ``R^-sigma A[phi_1](x/R)``.

    The two sides use different quadratures: ``spec`` on the scale-``R``
    function and ``spec.refined()`` (rescaled) on the unit cutoff.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    spec = spec or QuadratureSpec.for_scale(R)
    lhs = apply_singular_integral(CutoffFamily(R), x, sigma, spec)
    if R == 1.0:
        return ScalingResidual(0.0, 0.0, lhs.value, lhs.value)
    ref = spec.refined()
    ref = replace(ref, eps=ref.eps / R, X=ref.X / R)
    rhs = apply_singular_integral(CutoffFamily(1.0), x / R, sigma, ref)
    b = R ** (-sigma) * rhs.value
    diff = abs(lhs.value - b)
    scale = max(abs(lhs.value), abs(b))
    rel = diff / scale if scale > 0 else 0.0
    return ScalingResidual(diff, rel, lhs.value, b)


def cutoff_tail_profile(sigma: float, radii: Sequence[float], N: int = 1,
                        spec: Optional[QuadratureSpec] = None) -> np.ndarray:
    """``|A[phi_1](x)|`` along the first axis at the given radii."""
    spec = spec or QuadratureSpec.for_scale(1.0)
    phi = CutoffFamily(1.0)
    out = []
    for r in radii:
        x = np.zeros(N)
        x[0] = r
        out.append(abs(apply_singular_integral(phi, x, sigma, spec).value))
    return np.array(out)


def fit_tail_constant(sigma: float, radii: Sequence[float], N: int = 1,
                      spec: Optional[QuadratureSpec] = None) -> float:
    """Smallest ``C`` with ``|A[phi_1](x)| <= C / (1 + |x|^(N+sigma))`` on ``radii``."""
    vals = cutoff_tail_profile(sigma, radii, N, spec)
    r = np.asarray(radii, dtype=float)
    return float(np.max(vals * (1.0 + r ** (N + sigma))))
