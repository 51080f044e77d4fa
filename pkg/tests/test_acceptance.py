"""Acceptance suite: fifteen end-to-end criteria at their stated tolerances.

Each criterion is a function returning ``(passed, detail)``; expensive
solver runs are cached so that criteria sharing a run (a priori bounds,
Benilan) do not repeat it.  One ``PASS``/``FAIL`` line per criterion is
printed at the end of the pytest session (see ``conftest.py``) or when
the module is executed directly.
"""
import math
import sys
import time
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from fpme import diagnostics as dg  # noqa: E402
from fpme.evolve import (PhysParams, StepperConfig, geometric_sample_times,  # noqa: E402
                         solve_dirichlet, solve_exhaustion, solve_L1_datum)
from fpme.fields import (DensityProfile, InitialDatum, ScalarField,  # noqa: E402
                         grid_with_spacing, make_grid, sample_density)
from fpme.fraclap import (SpectralOperator, cutoff_scaling_residual,  # noqa: E402
                          cutoff_tail_profile, normalization_constant)
from fpme.potentials import (DecayQuery, RieszEvaluator, accumulate_U,  # noqa: E402
                             predicted_exponent, riesz_potential)

from oracles import disk_potential_center, gamma_constant  # noqa: E402

RESULTS = {}
SEED = 20261014


def _timed(fn, *a, **kw):
    t0 = time.perf_counter()
    out = fn(*a, **kw)
    return out, time.perf_counter() - t0


def _every(T, dt):
    return list(np.round(np.arange(0.0, T + dt / 2, dt), 12))


# ------------------------------------------------------------- shared runs

@lru_cache(maxsize=None)
def mode_run(sigma, dt, m=1.0, T=0.5):
    """m = 1 (or m), rho = 1, first sine mode, exact spectrum, N = 1."""
    g = make_grid(1, 1.0, 127)
    op = SpectralOperator(g, sigma, "exact")
    u0 = ScalarField(g, np.abs(op.mode([1])))
    tr = solve_dirichlet(u0, ScalarField(g, np.ones(g.shape)), PhysParams(sigma, m), op,
                         StepperConfig(dt=dt), T, _every(T, 0.05))
    return tr, op


@lru_cache(maxsize=None)
def bump_run(dt, T=0.5):
    g = make_grid(1, 4.0, 127)
    op = SpectralOperator(g, 1.0)
    u0 = InitialDatum("gaussian_bump", 1.0, 0.7).sample(g)
    return solve_dirichlet(u0, ScalarField(g, np.ones(g.shape)), PhysParams(1.0, 2.0), op,
                           StepperConfig(dt=dt), T, _every(T, 0.05))


@lru_cache(maxsize=None)
def crossing_pair():
    g = grid_with_spacing(1, 20.0, 0.1)
    op = SpectralOperator(g, 1.0)
    rho = ScalarField(g, np.ones(g.shape))
    p, cfg, T = PhysParams(1.0, 2.0), StepperConfig(dt=0.01), 1.0
    a = InitialDatum("gaussian_bump", 1.0, 1.0, center=(-1.0,)).sample(g)
    b = InitialDatum("gaussian_bump", 0.8, 1.5, center=(1.0,)).sample(g)
    (ta, tb), secs = _timed(lambda: [solve_dirichlet(d, rho, p, op, cfg, T, _every(T, 0.01))
                                     for d in (a, b)])
    return ta, tb, secs


@lru_cache(maxsize=None)
def exhaustion_runs():
    return solve_exhaustion(InitialDatum("gaussian_bump", 1.0, 1.0), DensityProfile(),
                            PhysParams(1.0, 2.0), StepperConfig(dt=0.01), [10.0, 20.0, 40.0],
                            1.0, 0.1, N=1)


@lru_cache(maxsize=None)
def mass_run(R):
    g = grid_with_spacing(1, R, 0.1)
    rho = sample_density(DensityProfile("power_tail", 1.0, 0.5, 1.0), g, 1.0)
    op = SpectralOperator(g, 1.0)
    u0 = InitialDatum("gaussian_bump", 0.2, 1.0).sample(g)
    return solve_dirichlet(u0, rho, PhysParams(1.0, 2.0), op, StepperConfig(dt=0.01), 1.0), rho


NONUNIQ = dict(profile=DensityProfile("power_tail", 1.0, 3.0, 1.0), c=1.0, tau=1.0, T=4.0,
               dt=0.025, h=0.5, radii=(16.0, 32.0))


@lru_cache(maxsize=None)
def nonuniqueness_run():
    q = NONUNIQ
    (tr, rep), secs = _timed(
        solve_exhaustion, InitialDatum("constant", q["c"]), q["profile"], PhysParams(1.0, 2.0),
        StepperConfig(dt=q["dt"]), q["radii"], q["T"], q["h"], N=2,
        sample_times=_every(q["T"], q["dt"]))
    return tr, rep, secs


@lru_cache(maxsize=None)
def smoothing_run(m):
    if m == 2.0:
        h, R, w, dt = 0.005, 5.0, 0.01, 1e-4
    else:
        h, R, w, dt = 5e-4, 5.0, 0.001, 1e-5
    g = grid_with_spacing(1, R, h)
    op = SpectralOperator(g, 1.0)
    u0 = InitialDatum("gaussian_bump", 1.0 / (w * math.sqrt(math.pi)), w).sample(g)
    cfg = StepperConfig(dt=dt, growth=1.05, dt_max=0.01)
    return _timed(solve_dirichlet, u0, ScalarField(g, np.ones(g.shape)), PhysParams(1.0, m),
                  op, cfg, 1.0, geometric_sample_times(0.01, 1.0, 4))


@lru_cache(maxsize=None)
def cap_runs():
    g = grid_with_spacing(1, 2.0, 0.0005)
    rho = sample_density(DensityProfile("power_tail", 1.0, 0.5, 1.0), g, 1.0)
    op = SpectralOperator(g, 1.0)
    d = InitialDatum("power_singularity", 0.5, 1.0, beta=0.5)
    cfg = StepperConfig(dt=1e-5, growth=1.1, dt_max=0.002)
    return solve_L1_datum(d, rho, PhysParams(1.0, 2.0), op, cfg, 0.1, (10.0, 100.0, 1000.0),
                          geometric_sample_times(0.001, 0.1, 2))


# --------------------------------------------------------------- criteria

def c01_operator_exactness():
    def run():
        worst = 0.0
        for sigma in (0.5, 1.0, 1.5):
            op = SpectralOperator(make_grid(1, 1.0, 256), sigma, "exact")
            for k in range(1, 6):
                f = op.mode([k])
                lam = (k * math.pi / 2.0) ** sigma  # lambda_k^(sigma/2) on (-1, 1)
                worst = max(worst, float(np.max(np.abs(op.apply(f) - lam * f)) / (lam * np.max(np.abs(f)))))
        return worst
    worst, secs = _timed(run)
    return worst < 1e-10 and secs < 1.0, f"max rel error {worst:.2e}, {secs:.2f} s"


def c02_normalization_constants():
    a = abs(normalization_constant(1, 1.0) - 1 / math.pi)
    b = abs(normalization_constant(2, 1.0) - 1 / (2 * math.pi))
    oa = abs(normalization_constant(1, 1.0) - gamma_constant(1, 1.0))
    ob = abs(normalization_constant(2, 1.0) - gamma_constant(2, 1.0))
    worst = max(a, b, oa, ob)
    return worst < 1e-12, f"max abs deviation {worst:.1e}"


def c03_cutoff_scaling():
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for sigma in (0.5, 1.0, 1.5):
        for _ in range(20):
            R = float(rng.uniform(1.5, 10.0))
            x = float(rng.uniform(0.0, 3.0) * R)
            worst = max(worst, cutoff_scaling_residual(R, x, sigma).relative)
    return worst < 1e-6, f"max relative residual {worst:.1e} over 3 x 20 pairs"


def c04_cutoff_tail():
    def run():
        r = np.geomspace(5.0, 50.0, 16)
        return [dg.loglog_slope(r, cutoff_tail_profile(s, r)) for s in (0.5, 1.0, 1.5)]
    slopes, secs = _timed(run)
    errs = [abs(sl + 1 + s) for sl, s in zip(slopes, (0.5, 1.0, 1.5))]
    ok = max(errs) <= 0.15 and secs < 30
    return ok, "slopes " + ", ".join(f"{v:.3f}" for v in slopes) + f", {secs:.1f} s"


def _mode_error(sigma, dt):
    tr, op = mode_run(sigma, dt)
    mu = (math.pi / 2.0) ** sigma  # lambda_1^(sigma/2) on (-1, 1)
    xi = np.abs(op.mode([1]))
    return max(float(np.max(np.abs(u - math.exp(-mu * t) * xi))) for t, u in zip(tr.times, tr.fields))


def c05_linear_oracle():
    ratios = []
    for sigma in (0.5, 1.0, 1.5):
        ratios.append(_mode_error(sigma, 0.01) / _mode_error(sigma, 0.005))
    ok = all(abs(q - 2.0) <= 0.2 for q in ratios)
    return ok, "error ratios " + ", ".join(f"{q:.3f}" for q in ratios)


def _all_runs():
    out = [mode_run(s, dt)[0] for s in (0.5, 1.0, 1.5) for dt in (0.01, 0.005)]
    out += [bump_run(0.02), bump_run(0.01)]
    ta, tb, _ = crossing_pair()
    out += [ta, tb]
    out += exhaustion_runs()[1].trajectories
    out += [mass_run(40.0)[0], mass_run(80.0)[0]]
    out += nonuniqueness_run()[1].trajectories
    out += [smoothing_run(2.0)[0], smoothing_run(1.0)[0]]
    out += cap_runs().trajectories
    return out


def c06_a_priori_bounds():
    runs = _all_runs()
    reps = [dg.a_priori_bounds(tr) for tr in runs]
    sup = max(r.measured[0] for r in reps)
    mass = max(r.measured[1] for r in reps)
    ok = all(r.verdict == dg.PASS for r in reps)
    return ok, f"{len(runs)} runs, worst sup excess {sup:.1e}, worst mass excess {mass:.1e}"


def c07_contraction():
    ta, tb, secs = crossing_pair()
    worst, positive = -math.inf, True
    for x, y in ((ta, tb), (tb, ta)):
        s, rep = dg.contraction_series(x, y, tol=1e-8)
        worst = max(worst, rep.measured)
        positive = positive and bool(np.all(s > 0))
    ok = worst < 1e-8 and positive and secs < 120
    return ok, f"max per-step growth {worst:.1e}, {secs:.1f} s"


def c08_exhaustion():
    _, rep = exhaustion_runs()
    ratios = rep.increment_ratios
    ok = rep.monotone and all(q >= 2.0 for q in ratios)
    return ok, (f"min increments {', '.join(f'{v:.1e}' for v in rep.min_increments)}; "
                f"sup-increment ratios {', '.join(f'{q:.2f}' for q in ratios)}")


def c09_mass_conservation():
    drifts = []
    for R in (40.0, 80.0):
        tr, rho = mass_run(R)
        _, rep = dg.mass_series(tr, rho=rho, tol=0.01)
        drifts.append(rep.measured)
    ok = drifts[0] < 0.01 and drifts[1] < 0.003 and drifts[1] < drifts[0]
    return ok, f"drift {100 * drifts[0]:.3f}% at R=40, {100 * drifts[1]:.3f}% at R=80"


def c10_riesz_potential():
    g = grid_with_spacing(2, 1.5, 2.0 ** -7)
    disk = ScalarField(g, (g.radius() <= 1.0).astype(float))
    want = disk_potential_center()
    e1 = abs(riesz_potential(disk, 1.0, [0.0, 0.0]) / want - 1)
    g = grid_with_spacing(2, 2.0, 2.0 ** -5)
    rho = ScalarField(g, np.exp(-g.radius() ** 2))
    mass = float(np.sum(rho.values)) * g.cell_volume
    e2 = max(abs(riesz_potential(rho, s, [100.0, 0.0]) / (mass * 100.0 ** (s - 2)) - 1)
             for s in (0.5, 1.0, 1.5))
    return e1 < 0.005 and e2 < 0.02, f"disk centre rel {e1:.1e}, far field rel {e2:.1e}"


def c11_nonuniqueness():
    q = NONUNIQ
    tr, _, secs = nonuniqueness_run()
    g = tr.grid
    m = tr.params.m
    lo, hi = g.R / 4.0, g.R / 2.0
    ax = g.axis()
    j = g.index_of([0.0, 0.0])[1]
    nodes = [i for i in range(g.n) if lo <= ax[i] <= hi]
    U = accumulate_U(tr, q["tau"], q["T"]).values
    ev = RieszEvaluator(g, 1.0)
    rf = ScalarField(g, tr.rho)
    r = np.array([ax[i] for i in nodes])
    Uw = np.array([U[i, j] for i in nodes])
    pot = np.array([ev.potential(rf, [x, 0.0], q["profile"]) for x in r])
    ratio = float(np.max(Uw / (2.0 * q["c"] ** m * pot)))
    slope = dg.loglog_slope(r, Uw)
    expo = predicted_exponent(DecayQuery(2, 1.0, 3.0))
    const = q["c"] ** m * (q["T"] - q["tau"])
    gap = const / Uw[-1]
    ok = (ratio <= 1.05 and slope <= -1 + 0.2 and gap >= 10 and g.n <= 128 and secs < 600)
    return ok, (f"(a) max U/bound {ratio:.3f}; (b) slope {slope:.3f} (predicted {expo:.3f}); "
                f"(c) constant/minimal {gap:.0f}; n={g.n}, {secs:.0f} s")


def c12_benilan():
    tr = exhaustion_runs()[0]
    rep = dg.benilan_check(tr, tol=1e-6)
    return rep.verdict == dg.PASS, f"min difference {rep.measured:.2e} (limit {rep.tolerance:.1e})"


def c13_energy_identity():
    r1 = dg.energy_identity(mode_run(1.0, 0.01)[0], half=mode_run(1.0, 0.005)[0])
    r2 = dg.energy_identity(bump_run(0.02), half=bump_run(0.01))
    ok = r1.verdict == dg.PASS and r2.verdict == dg.PASS
    return ok, f"residual ratio m=1 {r1.measured:.3f}, m=2 {r2.measured:.3f}"


def c14_smoothing():
    out, ok = [], True
    for m, theta in ((2.0, 0.5), (1.0, 1.0)):
        tr, secs = smoothing_run(m)
        rep = dg.smoothing_fit(tr, 1, m, (0.01, 1.0), 0.15)
        ok = ok and rep.verdict == dg.PASS and rep.measured <= -theta * 0.85 and secs < 300
        out.append(f"m={m:g} slope {rep.measured:.3f} ({secs:.0f} s)")
    return ok, "; ".join(out)


def c15_unbounded_data():
    rep = cap_runs()
    final = [float(s[-1]) for s in rep.sup_norms]
    spread = (max(final) - min(final)) / max(final)
    ok = rep.contraction_holds() and spread <= 0.05
    # the sampled singularity is finite at the grid scale; caps above its peak change nothing
    g = rep.trajectories[0].grid
    peak = float(InitialDatum("power_singularity", 0.5, 1.0, beta=0.5).sample(g).values.max())
    active = [f"{M:g}" for M in rep.caps if M < peak]
    return ok, (f"datum peak {peak:.1f}, active caps {','.join(active)}; "
                f"contraction {'holds' if rep.contraction_holds() else 'violated'}; "
                f"sup(0.1) " + ", ".join(f"{v:.4g}" for v in final) + f"; spread {100 * spread:.2f}%")


CRITERIA = [
    (1, "operator exactness on sine modes", c01_operator_exactness),
    (2, "normalization constants", c02_normalization_constants),
    (3, "cutoff scaling identity", c03_cutoff_scaling),
    (4, "cutoff tail law", c04_cutoff_tail),
    (5, "linear eigenmode oracle", c05_linear_oracle),
    (6, "a priori bounds on every run", c06_a_priori_bounds),
    (7, "L1 contraction, crossing bumps", c07_contraction),
    (8, "exhaustion monotonicity", c08_exhaustion),
    (9, "mass conservation, slow decay", c09_mass_conservation),
    (10, "Riesz potential values", c10_riesz_potential),
    (11, "nonuniqueness witness", c11_nonuniqueness),
    (12, "Benilan estimate", c12_benilan),
    (13, "energy identity order", c13_energy_identity),
    (14, "smoothing exponent", c14_smoothing),
    (15, "unbounded-data stability", c15_unbounded_data),
]


def evaluate(number):
    k, label, fn = CRITERIA[number - 1]
    try:
        ok, detail = fn()
    except Exception as exc:  # recorded as a failure line, re-raised by the test
        RESULTS[k] = (label, False, f"error: {exc!r}")
        raise
    RESULTS[k] = (label, bool(ok), detail)
    return bool(ok), detail


def summary_lines():
    return [f"[{'PASS' if ok else 'FAIL'}] criterion {k:2d}: {label} -- {detail}"
            for k, (label, ok, detail) in sorted(RESULTS.items())]


@pytest.mark.slow
@pytest.mark.parametrize("number", [c[0] for c in CRITERIA],
                         ids=[f"{c[0]:02d}-{c[2].__name__[4:]}" for c in CRITERIA])
def test_acceptance(number):
    ok, detail = evaluate(number)
    print(f"criterion {number}: {detail}")
    assert ok, detail


if __name__ == "__main__":
    for k, _, _ in CRITERIA:
        try:
            evaluate(k)
        except Exception:
            pass
    print("\n".join(summary_lines()))
    sys.exit(0 if all(ok for _, ok, _ in RESULTS.values()) else 1)
