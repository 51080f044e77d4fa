"""Backward-Euler time integration of ``rho u_t + A(u^m) = 0`` on a box.

Each step solves ``F(u) = rho (u - u_prev) + dt A(u^m) = 0`` by a damped
Newton iteration.  The Newton system ``(rho + dt A D) du = -F`` with
``D = m u^(m-1)`` is symmetrized as ``(rho/D + dt A) w = -F``,
``du = w / D``, and solved with preconditioned conjugate gradients.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .fields import (DensityProfile, Grid, GridMismatchError, InitialDatum,
                     ScalarField, check_same_grid, grid_with_spacing,
                     sample_density, weighted_mass)
from .fraclap import SpectralOperator

log = logging.getLogger(__name__)

JACOBIAN_FLOOR = 1e-12


class StepFailure(RuntimeError):
    """A time step could not be completed after the allowed dt halvings."""

    def __init__(self, msg, trail=None):
        super().__init__(msg)
        self.trail = trail or []


@dataclass(frozen=True)
class PhysParams:
    sigma: float = 1.0
    m: float = 2.0

    def __post_init__(self):
        if not 0 < self.sigma < 2:
            raise ValueError(f"sigma must lie in (0, 2), got {self.sigma}")
        if not self.m >= 1:
            raise ValueError(f"m must be >= 1, got {self.m}")

    def G(self, s):
        return np.power(s, self.m)


@dataclass(frozen=True)
class StepperConfig:
    """Time step and solver tolerances.

    ``growth`` > 1 ramps the step geometrically up to ``dt_max`` (useful for
    decay fits spanning decades in time); the default keeps ``dt`` fixed.
    """

    dt: float = 1e-2
    newton_tol: float = 1e-11
    max_newton: int = 40
    linear_tol: float = 1e-12
    max_linear: int = 400
    floor: float = 0.0
    growth: float = 1.0
    dt_max: Optional[float] = None
    max_halvings: int = 10

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"time step dt must be positive, got {self.dt}")
        if not 0 < self.newton_tol <= 1e-4:
            raise ValueError(f"newton_tol must lie in (0, 1e-4], got {self.newton_tol}")
        if self.growth < 1:
            raise ValueError("growth factor must be >= 1")
        if self.max_newton < 1 or self.max_linear < 1:
            raise ValueError("iteration limits must be positive")
        if self.floor != 0.0:
            raise ValueError("positivity floor is fixed at 0")


@dataclass
class StepRecord:
    t: float
    dt: float
    newton_iterations: int
    linear_iterations: int
    residual: float
    mass: float
    linf: float
    seminorm_sq: float  # |u^m|^2 in the homogeneous H^(sigma/2) seminorm
    halvings: int = 0


@dataclass
class Trajectory:
    """Sampled solution plus one record per accepted step."""

    grid: Grid
    times: List[float] = field(default_factory=list)
    fields: List[np.ndarray] = field(default_factory=list)
    records: List[StepRecord] = field(default_factory=list)
    rho: Optional[np.ndarray] = None
    params: Optional[PhysParams] = None
    config: Optional[StepperConfig] = None
    spectrum: str = "discrete"

    def append(self, t: float, u: np.ndarray) -> None:
        v = np.array(u, dtype=float)
        v.setflags(write=False)
        self.times.append(float(t))
        self.fields.append(v)

    def field_at(self, t: float) -> ScalarField:
        return ScalarField(self.grid, self.fields[self.index(t)], nonnegative=True)

    def index(self, t: float) -> int:
        tt = np.asarray(self.times)
        j = int(np.argmin(np.abs(tt - t)))
        if abs(tt[j] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"time {t} is not a sample time of the trajectory")
        return j

    def masses(self) -> np.ndarray:
        h = self.grid.cell_volume
        return np.array([weighted_mass(u, self.rho, h) for u in self.fields])

    def sup_norms(self) -> np.ndarray:
        return np.array([float(np.max(u)) if u.size else 0.0 for u in self.fields])

    def records_between(self, t0: float, t1: float) -> List[StepRecord]:
        eps = 1e-12 * max(1.0, abs(t1))
        return [r for r in self.records if t0 + eps < r.t <= t1 + eps]

    def reversed(self) -> "Trajectory":
        """Sample order flipped in time; only useful to build violating inputs."""
        out = Trajectory(self.grid, list(self.times), list(reversed(self.fields)),
                         list(self.records), self.rho, self.params, self.config,
                         self.spectrum)
        return out


# --------------------------------------------------------------------- step


def _residual(u, u_prev, rho, op, m, dt):
    return rho * (u - u_prev) + dt * op.apply(np.power(u, m))


class _Precond:
    """Constant-coefficient spectral solve for ``diag + dt A``, diagonally rescaled.

    With ``a`` the mean multiplier and ``c`` a reference diagonal value, the
    preconditioner is ``E^(1/2) (c + dt A)^-1 E^(1/2)`` where
    ``E = (c + dt a) / (diag + dt a)``.  Where ``diag`` is near ``c`` this is
    the plain spectral solve; where ``diag`` dominates (``u`` near 0 and
    ``m > 1``) it reduces to Jacobi scaling.
    """

    def __init__(self, op: SpectralOperator, diag: np.ndarray, dt: float, shift: float):
        a = float(np.mean(op.multipliers))
        self.op, self.shift, self.dt = op, shift, dt
        self.e = np.sqrt((shift + dt * a) / (diag + dt * a))

    def __call__(self, r):
        r = self.e * r.reshape(self.op.grid.shape)
        return (self.e * self.op.solve_shifted(r, self.shift, self.dt)).ravel()


def _newton_direction(u, F, rho, op, m, dt, cfg):
    shape = u.shape
    if m == 1:
        D = np.ones_like(u)
    else:
        D = m * np.power(u, m - 1) + m * JACOBIAN_FLOOR ** (m - 1)
    diag = rho / D
    size = u.size

    def matvec(w):
        w = w.reshape(shape)
        return (diag * w + dt * op.apply(w)).ravel()

    A = LinearOperator((size, size), matvec=matvec, dtype=float)
    P = _Precond(op, diag, dt, float(np.median(diag)))
    M = LinearOperator((size, size), matvec=P, dtype=float)
    count = [0]

    def cb(_):
        count[0] += 1

    b = -F.ravel()
    w, info = cg(A, b, rtol=cfg.linear_tol, atol=0.0, maxiter=cfg.max_linear, M=M, callback=cb)
    return (w.reshape(shape) / D), count[0], info


def _newton(u_prev, rho, op, m, dt, cfg):
    """Return ``(u, newton_its, linear_its, residual_ratio)`` or raise StepFailure."""
    scale = float(np.linalg.norm(rho * u_prev))
    if scale == 0.0:
        return np.zeros_like(u_prev), 1, 0, 0.0
    target = cfg.newton_tol * scale
    u = u_prev.copy()
    F = _residual(u, u_prev, rho, op, m, dt)
    res = float(np.linalg.norm(F))
    lin_total = 0
    for it in range(1, cfg.max_newton + 1):
        du, nlin, _ = _newton_direction(u, F, rho, op, m, dt, cfg)
        lin_total += nlin
        lam = 1.0
        accepted = False
        for _ in range(30):
            # projection onto u >= 0 keeps the iterate admissible
            trial = np.maximum(u + lam * du, 0.0)
            Ft = _residual(trial, u_prev, rho, op, m, dt)
            rt = float(np.linalg.norm(Ft))
            if rt < res or rt <= target:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            raise StepFailure(f"line search stalled at residual {res / scale:.3e}")
        u, F, res = trial, Ft, rt
        if res <= target:
            return u, it, lin_total, res / scale
    raise StepFailure(
        f"Newton did not converge in {cfg.max_newton} iterations "
        f"(relative residual {res / scale:.3e}, target {cfg.newton_tol:.1e})")


def _step_values(u_prev, rho, params, op, cfg, dt):
    return _newton(u_prev, rho, op, params.m, dt, cfg)


def step(u_prev: ScalarField, rho: ScalarField, params: PhysParams,
         op: SpectralOperator, cfg: StepperConfig, dt: Optional[float] = None) -> ScalarField:
    """One backward-Euler step of size ``dt`` (default ``cfg.dt``)."""
    g = check_same_grid(u_prev, rho)
    if g != op.grid:
        raise GridMismatchError(f"fields on {g}, operator on {op.grid}")
    if np.any(u_prev.values < 0):
        raise ValueError("u_prev must be nonnegative")
    if np.any(rho.values <= 0):
        raise ValueError("density must be positive")
    dt = cfg.dt if dt is None else dt
    u, _, _, _ = _step_with_retry(np.asarray(u_prev.values), np.asarray(rho.values),
                                  params, op, cfg, dt, [])
    return ScalarField(g, u, nonnegative=True)


def _step_with_retry(u, rho, params, op, cfg, dt, trail):
    """Advance by ``dt`` in full; a failed attempt is split into two half steps."""
    return _advance(u, rho, params, op, cfg, dt, 0, trail)


def _advance(u, rho, params, op, cfg, dt, depth, trail):
    try:
        v, its, lin, res = _step_values(u, rho, params, op, cfg, dt)
        return v, (its, lin, res, depth), dt, depth
    except StepFailure as exc:
        trail.append({"dt": dt, "halvings": depth, "error": str(exc)})
        if depth >= cfg.max_halvings:
            raise StepFailure(f"step aborted after {depth} dt halvings: {exc}", trail) from None
        log.info("step rejected at dt=%g (%s); halving", dt, exc)
        v, info, _, d1 = _advance(u, rho, params, op, cfg, 0.5 * dt, depth + 1, trail)
        v, info2, _, d2 = _advance(v, rho, params, op, cfg, 0.5 * dt, depth + 1, trail)
        merged = (info[0] + info2[0], info[1] + info2[1], max(info[2], info2[2]), max(d1, d2))
        return v, merged, dt, max(d1, d2)


# -------------------------------------------------------------- trajectories


def default_sample_times(T: float, count: int = 10) -> list:
    return list(np.linspace(0.0, T, count + 1))


def geometric_sample_times(t0: float, T: float, per_octave: int = 4) -> list:
    """``0, t0, t0 2^(1/k), ...`` up to and including ``T``."""
    j = int(math.floor(per_octave * math.log2(T / t0) + 1e-9))
    ts = [t0 * 2.0 ** (i / per_octave) for i in range(j + 1)]
    if ts[-1] < T * (1 - 1e-12):
        ts.append(T)
    return [0.0] + ts


def solve_dirichlet(u0: ScalarField, rho: ScalarField, params: PhysParams,
                    op: SpectralOperator, cfg: StepperConfig, T: float,
                    sample_times: Optional[Sequence[float]] = None) -> Trajectory:
    """Integrate to ``T``; fields are stored at ``sample_times`` (hit exactly)."""
    g = check_same_grid(u0, rho)
    if g != op.grid:
        raise GridMismatchError(f"fields on {g}, operator on {op.grid}")
    if np.any(u0.values < 0):
        raise ValueError("initial datum must be nonnegative")
    if not T > 0:
        raise ValueError("horizon T must be positive")
    samples = sorted(set(float(s) for s in (sample_times or default_sample_times(T))))
    samples = [s for s in samples if 0.0 <= s <= T * (1 + 1e-12)]
    if not samples or samples[0] > 0.0:
        samples.insert(0, 0.0)
    if samples[-1] < T * (1 - 1e-12):
        samples.append(T)

    r = np.asarray(rho.values)
    u = np.array(u0.values, dtype=float)
    traj = Trajectory(g, rho=r, params=params, config=cfg, spectrum=op.spectrum)
    traj.append(0.0, u)
    t = 0.0
    dt = cfg.dt
    dt_cap = cfg.dt_max if cfg.dt_max is not None else math.inf
    nxt = 1
    trail: list = []
    while nxt < len(samples):
        target = samples[nxt]
        h = min(dt, target - t)
        if target - t <= dt * (1 + 1e-9):
            h = target - t
        try:
            u, (its, lin, res, depth), _, _ = _step_with_retry(u, r, params, op, cfg, h, trail)
        except StepFailure as exc:
            exc.trail = list(trail) + [asdict(rec) for rec in traj.records[-5:]]
            raise
        t = target if h == target - t else t + h
        v = np.power(u, params.m)
        traj.records.append(StepRecord(
            t=t, dt=h, newton_iterations=its, linear_iterations=lin, residual=res,
            mass=weighted_mass(u, r, g.cell_volume), linf=float(u.max()),
            seminorm_sq=op.seminorm_sq(v), halvings=depth))
        if t == target:
            traj.append(t, u)
            nxt += 1
        dt = min(dt * cfg.growth, dt_cap)
    return traj


# ---------------------------------------------------------------- exhaustion


@dataclass
class ExhaustionReport:
    radii: list
    window: float
    min_increments: list      # per consecutive pair, min over window and samples
    sup_increments: list      # per consecutive pair, max over window and samples
    tolerance: float
    monotone: bool
    trajectories: list = field(repr=False, default_factory=list)

    @property
    def increment_ratios(self) -> list:
        s = self.sup_increments
        return [s[i] / s[i + 1] if s[i + 1] > 0 else math.inf for i in range(len(s) - 1)]


def _window_values(traj: Trajectory, window: float, ref_points: np.ndarray) -> np.ndarray:
    g = traj.grid
    idx = tuple(np.array([g.index_of(p)[a] for p in ref_points]) for a in range(g.N))
    return np.stack([u[idx] for u in traj.fields])


def solve_exhaustion(u0: InitialDatum, profile: DensityProfile, params: PhysParams,
                     cfg: StepperConfig, radii: Sequence[float], T: float, h: float,
                     N: int = 1, sample_times: Optional[Sequence[float]] = None,
                     tol: float = 1e-8, spectrum: str = "discrete", window: Optional[float] = None):
    """Dirichlet runs on growing boxes at fixed spacing ``h``.

    Returns ``(trajectory on the largest box, ExhaustionReport)``.  The
    comparison window is the set of nodes with sup-norm ``|x| <= R_1/2``.
    """
    radii = [float(R) for R in radii]
    if len(radii) < 2 or any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("need at least two strictly increasing radii")
    samples = list(sample_times or default_sample_times(T))
    trajs = []
    for R in radii:
        g = grid_with_spacing(N, R, h)
        op = SpectralOperator(g, params.sigma, spectrum)
        trajs.append(solve_dirichlet(u0.sample(g), sample_density(profile, g, params.sigma),
                                     params, op, cfg, T, samples))
    w = window if window is not None else 0.5 * radii[0]
    g0 = trajs[0].grid
    pts = g0.points()
    pts = pts[np.max(np.abs(pts), axis=1) <= w + 1e-12]
    vals = [_window_values(tr, w, pts) for tr in trajs]
    mins, sups = [], []
    for a, b in zip(vals, vals[1:]):
        d = b - a
        mins.append(float(d.min()))
        sups.append(float(d.max()))
    rep = ExhaustionReport(radii, w, mins, sups, tol, all(x >= -tol for x in mins), trajs)
    if not rep.monotone:
        log.warning("exhaustion monotonicity violated: min increments %s", mins)
    return trajs[-1], rep


# ------------------------------------------------------------- L1 data (sigma=1)


@dataclass
class CapReport:
    caps: list
    datum_gaps: list          # ||u0^M_{j+1} - u0^M_j||_{L1_rho}
    trajectory_gaps: list     # per pair, array over sample times
    sup_norms: list           # per cap, array over sample times
    times: list
    trajectories: list = field(repr=False, default_factory=list)

    def contraction_holds(self, slack: float = 1e-10) -> bool:
        return all(np.all(g <= d * (1 + 1e-9) + slack)
                   for g, d in zip(self.trajectory_gaps, self.datum_gaps))


def solve_L1_datum(u0: InitialDatum, rho: ScalarField, params: PhysParams,
                   op: SpectralOperator, cfg: StepperConfig, T: float,
                   caps: Sequence[float] = (10.0, 100.0, 1000.0),
                   sample_times: Optional[Sequence[float]] = None) -> CapReport:
    """Bounded-data runs on truncations ``u0 ^ M`` for increasing caps ``M``."""
    if params.sigma != 1:
        raise ValueError("unbounded data are handled for sigma = 1 only")
    caps = [float(c) for c in caps]
    if any(b <= a for a, b in zip(caps, caps[1:])):
        raise ValueError("caps must be strictly increasing")
    g = op.grid
    r = np.asarray(rho.values)
    data = [u0.capped(M).sample(g) for M in caps]
    trajs = [solve_dirichlet(d, rho, params, op, cfg, T, sample_times) for d in data]
    hN = g.cell_volume
    dgaps = [float(np.sum(np.abs(b.values - a.values) * r) * hN) for a, b in zip(data, data[1:])]
    tgaps = [np.array([np.sum(np.abs(ub - ua) * r) * hN for ua, ub in zip(ta.fields, tb.fields)])
             for ta, tb in zip(trajs, trajs[1:])]
    sups = [tr.sup_norms() for tr in trajs]
    return CapReport(caps, dgaps, tgaps, sups, list(trajs[0].times), trajs)
