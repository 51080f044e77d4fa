"""Riesz potentials, the time-integrated flux ``U`` and admissible decay exponents.

The Riesz potential here is the unnormalized convolution
``P[rho](x) = int rho(y) |x - y|^(sigma - N) dy``.  The inverse of the
whole-space fractional Laplacian is ``riesz_constant(N, sigma) * P``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.special import roots_jacobi, roots_legendre

from .fields import DensityProfile, Grid, GridMismatchError, ScalarField
from .fraclap import SpectralOperator, riesz_constant

MARGIN = 0.01


def square_cell_integral(a: float, b: float) -> float:
    """``int_[0,a]x[0,b] |z|^-1 dz = a asinh(b/a) + b asinh(a/b)``."""
    return a * math.asinh(b / a) + b * math.asinh(a / b)


def singular_cell_weight(N: int, sigma: float, h: float) -> float:
    """``int |z|^(sigma-N) dz`` over the cell ``[-h/2, h/2]^N``."""
    if N == 1:
        return 2.0 * (0.5 * h) ** sigma / sigma
    if N == 2:
        # eight triangles: int_0^{pi/4} int_0^{(h/2)/cos t} r^(sigma-1) dr dt
        ang, _ = integrate.quad(lambda t: math.cos(t) ** (-sigma), 0.0, 0.25 * math.pi,
                                epsabs=0, epsrel=1e-13)
        return 8.0 * (0.5 * h) ** sigma / sigma * ang
    raise ValueError("singular cell weight implemented for N = 1, 2")


@dataclass(frozen=True, eq=False)
class RieszEvaluator:
    """Direct-summation Riesz potential on a grid.

    Off-diagonal cells use the midpoint rule; the cell containing the target
    node uses the exact kernel integral times the density at the node.
    Beyond the grid cells the density's analytic tail (when a profile is
    given) is integrated radially from the box edge outwards.
    """

    grid: Grid
    sigma: float
    cell_weight: float = field(init=False)
    n_ray: int = 48
    n_angle: int = 48

    def __post_init__(self):
        N = self.grid.N
        if N < 2:
            raise ValueError("Riesz potentials are evaluated for N >= 2 only")
        if not 0 < self.sigma < N:
            raise ValueError(f"kernel needs 0 < sigma < N, got sigma={self.sigma}")
        object.__setattr__(self, "cell_weight", singular_cell_weight(N, self.sigma, self.grid.h))

    # grid part ----------------------------------------------------------
    def grid_sum(self, rho: np.ndarray, x) -> float:
        g = self.grid
        x = np.asarray(x, dtype=float)
        pts = g.points()
        d = np.linalg.norm(pts - x[None, :], axis=1)
        w = rho.ravel()
        hit = d < 1e-9 * g.h
        with np.errstate(divide="ignore"):
            k = np.where(hit, 0.0, d ** (self.sigma - g.N))
        total = float(np.dot(k, w)) * g.cell_volume
        if hit.any():
            total += self.cell_weight * float(w[hit][0])
        return total

    # analytic tail -------------------------------------------------------
    def tail(self, profile: DensityProfile, x) -> float:
        """``int rho(y) |x-y|^(sigma-N)`` over the complement of the grid cells."""
        g = self.grid
        x = np.asarray(x, dtype=float)
        if profile.kind == "constant":
            raise ValueError("constant density has no finite Riesz potential")
        a, s, N, c = profile.alpha, self.sigma, g.N, profile.c
        p = a - s + N - 3.0
        if p <= -1.0:
            raise ValueError(f"tail integral diverges: need alpha > sigma (alpha={a}, sigma={s})")
        half = g.R - 0.5 * g.h
        if np.max(np.abs(x)) >= half:
            raise ValueError("analytic tail needs the target inside the grid box")
        t_s, w_s = roots_jacobi(self.n_ray, 0.0, p)
        sv = 0.5 * (t_s + 1.0)
        ws = w_s * 0.5 ** (p + 1.0)
        t_a, w_a = roots_legendre(self.n_angle)
        total = 0.0
        # eight octants: r_b(theta) = half / cos(theta - axis direction)
        for k in range(8):
            th = (k + 0.5 * (t_a + 1.0)) * 0.25 * math.pi
            wt = w_a * 0.125 * math.pi
            # distance to the square edge along direction theta
            rb = half / np.maximum(np.abs(np.cos(th)), np.abs(np.sin(th)))
            e = np.stack([np.cos(th), np.sin(th)], axis=1)
            for rbi, ei, wi in zip(rb, e, wt):
                # y = (rb/s) e; |x - y| = (rb/s) |e - s x / rb|
                diff = np.linalg.norm(ei[None, :] - sv[:, None] * x[None, :] / rbi, axis=1)
                smooth = diff ** (s - N) * (1.0 + (sv * profile.s0 / rbi) ** 2) ** (-0.5 * a)
                total += wi * c * rbi ** (s - N - a + 2.0) * float(np.dot(ws, smooth))
        return total

    def potential(self, rho: ScalarField, x, profile: Optional[DensityProfile] = None) -> float:
        if rho.grid != self.grid:
            raise GridMismatchError(f"density on {rho.grid}, evaluator on {self.grid}")
        val = self.grid_sum(np.asarray(rho.values), x)
        if profile is not None:
            val += self.tail(profile, x)
        return val


def riesz_potential(rho: ScalarField, sigma: float, x,
                    profile: Optional[DensityProfile] = None) -> float:
    """Unnormalized Riesz potential of ``rho`` at ``x``.

    With ``profile`` the analytic density beyond the grid is added, so the
    value approximates the whole-space potential; without it ``rho`` is
    taken to vanish off the grid.
    """
    N = rho.grid.N
    if sigma >= N:
        raise ValueError(f"Riesz potential needs sigma < N, got sigma={sigma}, N={N}")
    return RieszEvaluator(rho.grid, sigma).potential(rho, x, profile)


# ------------------------------------------------------------ decay exponents


@dataclass(frozen=True)
class DecayQuery:
    N: int
    sigma: float
    alpha: float
    regime: str = "A2"

    def __post_init__(self):
        problems = admissibility_problems(self)
        if problems:
            raise ValueError("; ".join(problems))


def admissibility_problems(q) -> list:
    out = []
    if q.N < 2:
        out.append(f"N >= 2 violated (N={q.N})")
    if not 0 < q.sigma < 2:
        out.append(f"0 < sigma < 2 violated (sigma={q.sigma})")
    if q.regime == "A2":
        if not q.alpha > q.sigma:
            out.append(f"alpha > sigma violated (alpha={q.alpha}, sigma={q.sigma}), regime A2 inadmissible")
        elif q.N >= 3 and not q.N / q.sigma > max(q.N / q.alpha, 2.0 / q.sigma):
            out.append("N/sigma > max(N/alpha, 2/sigma) violated: empty r-interval")
    elif q.regime == "A2star":
        if not q.alpha > q.N:
            out.append(f"alpha > N violated (alpha={q.alpha}, N={q.N}), regime A2star inadmissible")
    else:
        out.append(f"unknown regime {q.regime!r}")
    return out


def predicted_exponent(q: DecayQuery, eps: float = MARGIN) -> float:
    """Best admissible decay exponent of the Riesz potential bound.

    The bound ``C |x|^e(r, nu)`` holds on an open set of ``(r, nu)``; the
    infimum sits on its boundary.  The returned value evaluates ``e`` at a
    point moved ``eps`` inside the set, so it lies slightly above the
    infimum.
    """
    N, s, a = q.N, q.sigma, q.alpha
    if q.regime == "A2" and N >= 3:
        # e = s - N/r,   max(N/a, 2/s) < r < N/s
        r = max(N / a, 2.0 / s) + eps
        return s - N / r
    if q.regime == "A2":
        # N = 2: e = s - nu - 2/r,  0 < nu < s,
        # max(2/s, 2/(2-nu), 2/(a-nu)) < r < 2/(s-nu)
        nu = s - eps
        r = max(2.0 / s, 2.0 / (2.0 - nu), 2.0 / (a - nu)) + eps
        return s - nu - 2.0 / r
    # A2star: e = s - nu - N/r,  N(2-s)/2 < nu < N,  max(2/s, N/(a-nu)) < r < N/(N-nu)
    nu = N - eps
    r = max(2.0 / s, N / (a - nu)) + eps
    return s - nu - N / r


def limiting_exponent(q: DecayQuery) -> float:
    """The infimum itself (not attained)."""
    N, s, a = q.N, q.sigma, q.alpha
    if q.regime == "A2" and N >= 3:
        return s - min(a, N * s / 2.0)
    if q.regime == "A2":
        return max(-s, s - 2.0, s - a)
    return max(s - N - N * s / 2.0, s - a)


# ------------------------------------------------------------------ U field


def accumulate_U(traj, tau: float, t: float) -> ScalarField:
    """Trapezoidal ``int_tau^t u^m ds`` over the stored sample times."""
    i, j = traj.index(tau), traj.index(t)
    if j < i:
        raise ValueError("need tau <= t")
    m = traj.params.m
    out = np.zeros(traj.grid.shape)
    for k in range(i, j):
        dt = traj.times[k + 1] - traj.times[k]
        out += 0.5 * dt * (np.power(traj.fields[k], m) + np.power(traj.fields[k + 1], m))
    return ScalarField(traj.grid, out, nonnegative=True)


def window_mask(grid: Grid, r_lo: float, r_hi: float) -> np.ndarray:
    r = grid.radius()
    return (r >= r_lo - 1e-12) & (r <= r_hi + 1e-12)


def green_identity_residual(traj, tau: float, t: float, window: Sequence[float],
                            kernel: str = "box") -> float:
    """``max |U - K[rho (u(tau) - u(t))]| / max U`` over the window ``(r_lo, r_hi)``.

    ``kernel='box'`` uses the Green operator of the Dirichlet generator the
    trajectory was computed with; ``kernel='riesz'`` uses the whole-space
    kernel ``riesz_constant * |x-y|^(sigma-N)`` (meaningful only when the
    box is large compared with the window).
    """
    g = traj.grid
    r_lo, r_hi = window
    if r_hi >= g.R - g.h:
        raise ValueError("observation window must lie strictly inside the grid")
    U = accumulate_U(traj, tau, t).values
    if tau == t:
        return 0.0
    f = traj.rho * (traj.fields[traj.index(tau)] - traj.fields[traj.index(t)])
    mask = window_mask(g, r_lo, r_hi)
    if kernel == "box":
        op = SpectralOperator(g, traj.params.sigma, traj.spectrum)
        rhs = op.apply_power(f, -1.0)[mask]
    elif kernel == "riesz":
        ev = RieszEvaluator(g, traj.params.sigma)
        c = riesz_constant(g.N, traj.params.sigma)
        rhs = np.array([c * ev.grid_sum(f, p) for p in g.points()[mask.ravel()]])
    else:
        raise ValueError(f"unknown kernel {kernel!r}")
    top = float(np.max(U[mask])) if mask.any() else 0.0
    if top == 0.0:
        return 0.0
    return float(np.max(np.abs(U[mask] - rhs)) / top)
