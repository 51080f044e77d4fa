"""Pass/fail checks over stored trajectories.

Every check returns a :class:`CheckReport`.  Checks read only the data kept
in a :class:`~fpme.evolve.Trajectory` (fields, sample times, step records),
so verdicts can be re-evaluated without re-running the solver.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .fields import DensityProfile, GridMismatchError, ScalarField, weighted_mass
from .potentials import (DecayQuery, RieszEvaluator, accumulate_U,
                         predicted_exponent)

PASS, FAIL, INFO, SKIP = "pass", "fail", "informational", "skipped"


@dataclass
class CheckReport:
    name: str
    claim: str
    measured: object
    tolerance: object
    verdict: str
    series: dict = field(default_factory=dict)
    notes: str = ""

    def __post_init__(self):
        if self.verdict not in (PASS, FAIL, INFO, SKIP):
            raise ValueError(f"bad verdict {self.verdict!r}")

    @property
    def gating(self) -> bool:
        return self.verdict in (PASS, FAIL)

    @property
    def passed(self) -> bool:
        return self.verdict != FAIL

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "CheckReport":
        return cls(**d)


def _plain(obj):
    # numpy scalars/arrays to builtin types, with a fixed float repr
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def write_reports(reports: Sequence[CheckReport], outdir) -> Path:
    """One JSON file per check plus ``summary.csv``; returns the summary path."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    for i, r in enumerate(reports):
        (out / f"{i:02d}_{r.name}.json").write_text(r.to_json() + "\n")
    path = out / "summary.csv"
    path.write_text(summary_csv(reports))
    return path


def summary_csv(reports: Sequence[CheckReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["check", "cited_claim", "measured", "tolerance", "verdict"])
    for r in reports:
        w.writerow([r.name, r.claim, _scalar_text(r.measured), _scalar_text(r.tolerance), r.verdict])
    return buf.getvalue()


def _scalar_text(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.10g}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return ";".join(_scalar_text(x) for x in v)
    return str(v)


def read_reports(outdir) -> list:
    return [CheckReport.from_dict(json.loads(p.read_text()))
            for p in sorted(Path(outdir).glob("*.json"))]


def _rho(traj, rho):
    r = traj.rho if rho is None else np.asarray(getattr(rho, "values", rho))
    if r is None:
        raise ValueError("trajectory carries no density; pass rho")
    return r


# -------------------------------------------------------------------- mass


def mass_series(traj, rho=None, regime: Optional[str] = None, tol: float = 0.01):
    """Weighted L1 mass per sample.  Gating only for slowly decaying densities."""
    r = _rho(traj, rho)
    h = traj.grid.cell_volume
    masses = np.array([weighted_mass(u, r, h) for u in traj.fields])
    regime = regime or getattr(rho, "label", "") or ""
    m0 = masses[0]
    drift = float(np.max(np.abs(masses - m0)) / m0) if m0 > 0 else 0.0
    series = {"t": list(traj.times), "mass": masses}
    if m0 == 0:
        return masses, CheckReport("mass", "mass conservation (slow density decay)",
                                   0.0, tol, PASS, series, "zero datum")
    if regime == "A1":
        v = PASS if drift < tol else FAIL
        return masses, CheckReport("mass", "mass conservation (slow density decay)",
                                   drift, tol, v, series)
    dec = bool(np.all(np.diff(masses) < 0))
    note = "mass strictly decreasing" if dec else "mass not strictly decreasing"
    return masses, CheckReport("mass", "mass escape (fast density decay)",
                               float((masses[-1] - m0) / m0), None, INFO, series, note)


def contraction_series(traj_a, traj_b, rho=None, tol: float = 1e-8):
    """``sum [u_a - u_b]_+ rho h^N`` per sample; must not grow by more than ``tol`` per step."""
    if traj_a.grid != traj_b.grid:
        raise GridMismatchError(f"{traj_a.grid} vs {traj_b.grid}")
    if traj_a.config != traj_b.config or traj_a.params != traj_b.params:
        raise ValueError("contraction needs identical solver configurations")
    if len(traj_a.times) != len(traj_b.times) or not np.allclose(traj_a.times, traj_b.times):
        raise ValueError("contraction needs identical sample times")
    r = _rho(traj_a, rho)
    h = traj_a.grid.cell_volume
    s = np.array([float(np.sum(np.maximum(ua - ub, 0.0) * r) * h)
                  for ua, ub in zip(traj_a.fields, traj_b.fields)])
    steps = _steps_between(traj_a)
    growth = np.diff(s) / np.maximum(steps, 1)
    worst = float(growth.max()) if growth.size else 0.0
    v = PASS if worst <= tol else FAIL
    return s, CheckReport("contraction", "weighted L1 contraction of positive parts",
                          worst, tol, v, {"t": list(traj_a.times), "gap": s})


def _steps_between(traj) -> np.ndarray:
    """Number of accepted steps between consecutive samples."""
    if not traj.records:
        return np.ones(max(len(traj.times) - 1, 0))
    rt = np.array([r.t for r in traj.records])
    st = np.asarray(traj.times)
    out = [np.sum((rt > a + 1e-12) & (rt <= b + 1e-12)) for a, b in zip(st[:-1], st[1:])]
    return np.array(out, dtype=float)


def a_priori_bounds(traj, rho=None, linf_tol: float = 1e-12, mass_tol: float = 1e-10):
    """Sup norm and weighted mass never exceed their initial values."""
    r = _rho(traj, rho)
    h = traj.grid.cell_volume
    sup = traj.sup_norms()
    mass = np.array([weighted_mass(u, r, h) for u in traj.fields])
    over_sup = float(np.max(sup - sup[0]))
    over_mass = float(np.max(mass - mass[0]))
    neg = float(min(u.min() for u in traj.fields)) if traj.fields else 0.0
    ok = over_sup <= linf_tol and over_mass <= mass_tol and neg >= 0.0
    return CheckReport("a_priori_bounds", "sup norm and weighted mass bounded by the datum",
                       [over_sup, over_mass, neg], [linf_tol, mass_tol, 0.0],
                       PASS if ok else FAIL, {"t": list(traj.times), "sup": sup, "mass": mass})


# ------------------------------------------------------------------ energy


def energy_residual(traj, t0: Optional[float] = None, t1: Optional[float] = None) -> float:
    """``|sum dt |u^m|^2_{H^(s/2)} + (E(t1) - E(t0))/(m+1)| / E(t0)``, ``E = sum u^(m+1) rho h^N``."""
    m = traj.params.m
    t0 = traj.times[0] if t0 is None else t0
    t1 = traj.times[-1] if t1 is None else t1
    r = traj.rho
    h = traj.grid.cell_volume
    E0 = float(np.sum(np.power(traj.fields[traj.index(t0)], m + 1) * r) * h)
    E1 = float(np.sum(np.power(traj.fields[traj.index(t1)], m + 1) * r) * h)
    if E0 == 0:
        return 0.0
    diss = sum(rec.dt * rec.seminorm_sq for rec in traj.records_between(t0, t1))
    return abs(diss + (E1 - E0) / (m + 1)) / E0


def energy_identity(traj, half=None, ratio: float = 2.0, ratio_tol: float = 0.3) -> CheckReport:
    """Energy balance residual.  With ``half`` (same run at dt/2) the order is checked."""
    res = energy_residual(traj)
    name, claim = "energy_identity", "energy identity, squared seminorm form"
    if res == 0.0 and (half is None or energy_residual(half) == 0.0):
        return CheckReport(name, claim, 0.0, ratio_tol, PASS, {}, "zero energy")
    if half is None:
        return CheckReport(name, claim, res, None, INFO, {"residual": res},
                           "no half-step run given; order not checked")
    res_h = energy_residual(half)
    q = res / res_h if res_h > 0 else math.inf
    v = PASS if abs(q - ratio) <= ratio_tol else FAIL
    return CheckReport(name, claim, q, ratio_tol, v, {"residual": res, "residual_half": res_h})


def energy_dissipation(traj, tol: float = 1e-12) -> CheckReport:
    """``sum u^(m+1) rho h^N`` nonincreasing across samples."""
    m = traj.params.m
    h = traj.grid.cell_volume
    E = np.array([float(np.sum(np.power(u, m + 1) * traj.rho) * h) for u in traj.fields])
    worst = float(np.max(np.diff(E) / max(E[0], 1e-300))) if E.size > 1 else 0.0
    return CheckReport("energy_dissipation", "energy nonincreasing", worst, tol,
                       PASS if worst <= tol else FAIL, {"E": E})


# ------------------------------------------------------------------ Benilan


def benilan_check(traj, m: Optional[float] = None, tol: float = 1e-6) -> CheckReport:
    """``t^(1/(m-1)) u`` nondecreasing at every node over consecutive samples."""
    m = traj.params.m if m is None else m
    name, claim = "benilan", "t^(1/(m-1)) u nondecreasing"
    if m == 1:
        return CheckReport(name, claim, None, tol, SKIP, {}, "skipped: exponent 1/(m-1) undefined for m = 1")
    p = 1.0 / (m - 1.0)
    t = np.asarray(traj.times)
    u0 = float(np.max(traj.fields[0])) if traj.fields else 0.0
    if u0 == 0:
        return CheckReport(name, claim, 0.0, tol, PASS, {}, "zero datum")
    order = np.argsort(t, kind="stable")
    worst = math.inf
    per = []
    for a, b in zip(order[:-1], order[1:]):
        d = t[b] ** p * traj.fields[b] - t[a] ** p * traj.fields[a]
        per.append(float(d.min()))
        worst = min(worst, per[-1])
    limit = -tol * u0
    return CheckReport(name, claim, worst, limit, PASS if worst >= limit else FAIL,
                       {"t": t[order][1:], "min_difference": per})


# ---------------------------------------------------------------- smoothing


def smoothing_exponent(N: int, m: float) -> float:
    return 1.0 / (m - 1.0 + 1.0 / N)


def loglog_slope(x, y) -> float:
    x, y = np.asarray(x, float), np.asarray(y, float)
    keep = (x > 0) & (y > 0)
    if keep.sum() < 2:
        raise ValueError("need at least two positive points for a log-log fit")
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])


def smoothing_fit(traj, N: int, m: float, window: Sequence[float] = (0.01, 1.0),
                  margin: float = 0.15) -> CheckReport:
    """Slope of ``log |u(t)|_inf`` against ``log t``; must be <= ``-theta (1 - margin)``."""
    theta = smoothing_exponent(N, m)
    t = np.asarray(traj.times)
    sup = traj.sup_norms()
    sel = (t >= window[0] * (1 - 1e-12)) & (t <= window[1] * (1 + 1e-12)) & (t > 0)
    limit = -theta * (1.0 - margin)
    series = {"t": t[sel], "sup": sup[sel], "theta": theta}
    if sel.sum() < 2:
        return CheckReport("smoothing", "sup-norm smoothing rate t^-theta", None, limit, INFO,
                           series, "fewer than two samples in the fit window")
    slope = loglog_slope(t[sel], sup[sel])
    span = math.log10(t[sel].max() / t[sel].min())
    if span < 1.0 - 1e-9:
        return CheckReport("smoothing", "sup-norm smoothing rate t^-theta", slope, limit, INFO,
                           series, f"window spans {span:.2f} decades (< 1)")
    return CheckReport("smoothing", "sup-norm smoothing rate t^-theta", slope, limit,
                       PASS if slope <= limit else FAIL, series)


# ------------------------------------------------------------------ U decay


def _axis_window(grid, r_lo, r_hi):
    """Nodes along the positive first axis (second coordinate nearest 0)."""
    ax = grid.axis()
    j = int(np.argmin(np.abs(ax)))
    sel = [i for i in range(grid.n) if r_lo - 1e-12 <= math.hypot(ax[i], ax[j]) <= r_hi + 1e-12 and ax[i] > 0]
    return [(i, j) for i in sel]


def u_decay_check(traj, profile: DensityProfile, tau: float, t: float,
                  window: Optional[Sequence[float]] = None, bound_factor: float = 1.05,
                  slope_margin: float = 0.2, regime: Optional[str] = None) -> CheckReport:
    """Pointwise Riesz bound on ``U`` and its decay slope along the first axis."""
    g = traj.grid
    sigma = traj.params.sigma
    if g.N != 2:
        raise ValueError("decay check is defined for N = 2")
    if profile.tail_class(sigma, g.N) not in ("A2", "A2star"):
        raise ValueError(f"decay check needs a fast-decaying density (alpha > sigma), "
                         f"got alpha={profile.alpha}, sigma={sigma}")
    # alpha > N also satisfies the alpha > sigma hypothesis; its bound is the default
    regime = regime or "A2"
    w = window or (g.R / 4.0, g.R / 2.0)
    U = accumulate_U(traj, tau, t).values
    u0 = float(np.max(traj.fields[0]))
    nodes = _axis_window(g, *w)
    ax = g.axis()
    pts = [np.array([ax[i], ax[j]]) for i, j in nodes]
    radii = np.array([np.linalg.norm(p) for p in pts])
    Uw = np.array([U[i, j] for i, j in nodes])
    expo = predicted_exponent(DecayQuery(2, sigma, profile.alpha, regime))
    name, claim = "u_decay", "U bounded by the Riesz potential and decaying at infinity"
    if not np.any(Uw > 0):
        return CheckReport(name, claim, [0.0, None], [bound_factor, expo + slope_margin], PASS,
                           {"r": radii, "U": Uw}, "U vanishes on the window")
    ev = RieszEvaluator(g, sigma)
    rf = ScalarField(g, traj.rho)
    pot = np.array([ev.potential(rf, p, profile) for p in pts])
    bound = 2.0 * u0 * pot
    ratio = float(np.max(Uw / bound))
    slope = loglog_slope(radii, Uw)
    ok = ratio <= bound_factor and slope <= expo + slope_margin
    return CheckReport(name, claim, [ratio, slope], [bound_factor, expo + slope_margin],
                       PASS if ok else FAIL,
                       {"r": radii, "U": Uw, "potential": pot, "bound": bound,
                        "predicted_exponent": expo})


def decay_rows(report: CheckReport) -> str:
    """Rows ``|x|,potential,U_value,fitted_slope,predicted_exponent``."""
    s = report.series
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["|x|", "potential", "U_value", "fitted_slope", "predicted_exponent"])
    slope = report.measured[1] if isinstance(report.measured, list) else ""
    for r, p, u in zip(s.get("r", []), s.get("potential", []), s.get("U", [])):
        w.writerow([f"{r:.10g}", f"{p:.10g}", f"{u:.10g}", f"{slope:.6g}", f"{s['predicted_exponent']:.6g}"])
    return buf.getvalue()
