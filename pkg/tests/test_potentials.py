import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fpme.diagnostics import loglog_slope
from fpme.evolve import PhysParams, StepperConfig, Trajectory, solve_dirichlet
from fpme.fields import (DensityProfile, InitialDatum, ScalarField,
                         grid_with_spacing, make_grid, sample_density)
from fpme.fraclap import SpectralOperator
from fpme.potentials import (DecayQuery, RieszEvaluator, accumulate_U,
                             green_identity_residual, limiting_exponent,
                             predicted_exponent, riesz_potential,
                             singular_cell_weight, square_cell_integral)

from oracles import best_exponent_search, disk_potential_center


# ---------------------------------------------------------- singular cell

@pytest.mark.parametrize("sigma", [0.3, 1.0, 1.7])
def test_cell_weight_one_dimension(sigma):
    h = 0.2
    assert singular_cell_weight(1, sigma, h) == pytest.approx(2 * (h / 2) ** sigma / sigma, rel=1e-15)


def test_cell_weight_square_closed_form():
    h = 0.3
    w = singular_cell_weight(2, 1.0, h)
    assert w == pytest.approx(4 * square_cell_integral(h / 2, h / 2), rel=1e-12)
    assert w == pytest.approx(4 * h * math.asinh(1.0), rel=1e-12)
    ev = RieszEvaluator(make_grid(2, 1.0, 9), 0.6)
    assert ev.cell_weight > 0


# --------------------------------------------------------------- potential

def test_unit_disk_center():
    g = grid_with_spacing(2, 1.5, 2.0 ** -7)
    rho = ScalarField(g, (g.radius() <= 1.0).astype(float))
    want = disk_potential_center()
    assert want == pytest.approx(2 * math.pi, rel=1e-12)
    assert riesz_potential(rho, 1.0, [0.0, 0.0]) == pytest.approx(want, rel=5e-3)


def test_zero_density_and_bad_order():
    g = make_grid(2, 2.0, 15)
    zero = ScalarField(g, np.zeros(g.shape))
    assert riesz_potential(zero, 1.0, [0.0, 0.0]) == 0.0
    with pytest.raises(ValueError, match="sigma < N"):
        riesz_potential(zero, 2.0, [0.0, 0.0])
    with pytest.raises(ValueError, match="N >= 2"):
        RieszEvaluator(make_grid(1, 2.0, 15), 0.5)


def test_far_field():
    g = grid_with_spacing(2, 2.0, 2.0 ** -5)
    rho = ScalarField(g, np.exp(-g.radius() ** 2))
    mass = float(np.sum(rho.values)) * g.cell_volume
    for sigma in (0.5, 1.0, 1.5):
        v = riesz_potential(rho, sigma, [100.0, 0.0])
        assert v == pytest.approx(mass * 100.0 ** (sigma - 2), rel=0.02)


def test_analytic_tail_adds_outside_mass():
    # with the analytic tail the value no longer depends on the box size
    prof = DensityProfile("power_tail", 1.0, 3.0, 1.0)
    vals = []
    for R in (8.0, 16.0):
        g = grid_with_spacing(2, R, 0.25)
        vals.append(RieszEvaluator(g, 1.0).potential(sample_density(prof, g), [2.0, 0.0], prof))
    assert vals[0] == pytest.approx(vals[1], rel=2e-3)
    g = grid_with_spacing(2, 8.0, 0.25)
    with pytest.raises(ValueError, match="alpha > sigma"):
        RieszEvaluator(g, 1.0).tail(DensityProfile("power_tail", 1.0, 0.8, 1.0), [0.0, 0.0])


@given(seed=st.integers(0, 2**31), sigma=st.floats(0.2, 1.8))
@settings(max_examples=25, deadline=None)
def test_potential_monotone_in_density(seed, sigma):
    rng = np.random.default_rng(seed)
    g = make_grid(2, 2.0, 15)
    a = rng.random(g.shape)
    b = a + rng.random(g.shape)
    x = rng.uniform(-1.5, 1.5, 2)
    pa = riesz_potential(ScalarField(g, a), sigma, x)
    pb = riesz_potential(ScalarField(g, b), sigma, x)
    assert pa <= pb


def test_potential_slope_below_prediction():
    prof = DensityProfile("power_tail", 1.0, 1.6, 1.0)  # A2, not integrable
    g = grid_with_spacing(2, 64.0, 1.0)
    rho = sample_density(prof, g, 1.0)
    ev = RieszEvaluator(g, 1.0)
    # |x| in [5 s0, 50 s0], nodes of the h = 1 grid
    r = np.array([5.0, 7.0, 10.0, 14.0, 20.0, 28.0, 40.0, 50.0])
    pot = [ev.potential(rho, [x, 0.0], prof) for x in r]
    slope = loglog_slope(r, pot)
    assert slope <= predicted_exponent(DecayQuery(2, 1.0, 1.6)) + 0.1


# -------------------------------------------------------- decay exponents

def test_predicted_exponent_examples():
    assert limiting_exponent(DecayQuery(3, 1.0, 2.0)) == pytest.approx(-0.5)
    assert limiting_exponent(DecayQuery(2, 1.0, 3.0)) == pytest.approx(-1.0)
    e3 = predicted_exponent(DecayQuery(3, 1.0, 2.0))
    e2 = predicted_exponent(DecayQuery(2, 1.0, 3.0))
    assert -0.5 < e3 < -0.48
    assert -1.0 < e2 < -0.98
    with pytest.raises(ValueError, match="alpha > sigma violated"):
        DecayQuery(3, 1.5, 1.0)
    with pytest.raises(ValueError, match="alpha > N violated"):
        DecayQuery(2, 1.0, 1.5, "A2star")
    # for N >= 3 and alpha > sigma the r-interval is never empty
    assert predicted_exponent(DecayQuery(3, 0.5, 0.7)) < 0


@pytest.mark.parametrize("q", [
    (3, 1.0, 2.0, "A2"), (3, 1.5, 4.0, "A2"), (4, 1.0, 1.5, "A2"), (3, 0.8, 1.2, "A2"),
    (2, 1.0, 3.0, "A2"), (2, 0.5, 0.7, "A2"), (2, 1.5, 1.8, "A2"), (2, 1.2, 5.0, "A2"),
    (2, 1.0, 3.0, "A2star"), (3, 1.5, 3.5, "A2star"), (2, 0.5, 2.5, "A2star"),
])
def test_exponents_match_brute_force(q):
    N, s, a, reg = q
    dq = DecayQuery(N, s, a, reg)
    inf = best_exponent_search(N, s, a, reg)
    assert limiting_exponent(dq) == pytest.approx(inf, abs=2e-3)
    e = predicted_exponent(dq)
    assert inf <= e <= inf + 0.05
    assert e < 0


def test_alpha_above_N_exponent_is_below_integrable_rate():
    # An integrable positive density has potential >= c |x|^(sigma-N) far out, so
    # no valid bound can decay faster than sigma - N.  The alpha > N formula does.
    dq = DecayQuery(2, 1.0, 3.0, "A2star")
    assert predicted_exponent(dq) < 1.0 - 2.0 - 0.5
    prof = DensityProfile("power_tail", 1.0, 3.0, 1.0)
    g = grid_with_spacing(2, 64.0, 1.0)
    ev = RieszEvaluator(g, 1.0)
    rho = sample_density(prof, g, 1.0)
    r = np.array([8.0, 12.0, 18.0, 26.0])
    pot = [ev.potential(rho, [x, 0.0], prof) for x in r]
    slope = loglog_slope(r, pot)
    assert slope == pytest.approx(-1.0, abs=0.1)
    assert slope > predicted_exponent(dq) + 0.5


# -------------------------------------------------------------------- U

def _constant_trajectory(c=2.0, m=2.0, times=(0.0, 0.5, 1.0, 2.0)):
    g = make_grid(2, 4.0, 15)
    tr = Trajectory(g, rho=np.ones(g.shape), params=PhysParams(1.0, m))
    for t in times:
        tr.append(t, np.full(g.shape, c))
    return tr


def test_accumulate_U_constant_and_degenerate():
    tr = _constant_trajectory()
    np.testing.assert_array_equal(accumulate_U(tr, 0.5, 0.5).values, 0.0)
    np.testing.assert_allclose(accumulate_U(tr, 0.5, 2.0).values, 4.0 * 1.5, rtol=1e-15)
    with pytest.raises(ValueError):
        accumulate_U(tr, 0.3, 1.0)


def test_constant_solution_U_does_not_decay():
    tr = _constant_trajectory()
    U = accumulate_U(tr, 0.0, 2.0).values
    assert np.ptp(U) == 0.0 and U[0, 0] == pytest.approx(8.0)


@given(st.lists(st.floats(0.01, 1.0), min_size=3, max_size=8))
@settings(max_examples=30, deadline=None)
def test_accumulate_U_additive(gaps):
    times = np.concatenate([[0.0], np.cumsum(gaps)])
    g = make_grid(1, 2.0, 9)
    tr = Trajectory(g, rho=np.ones(g.shape), params=PhysParams(1.0, 1.5))
    rng = np.random.default_rng(len(gaps))
    for t in times:
        tr.append(t, rng.random(g.shape))
    a, mid, b = times[0], times[len(times) // 2], times[-1]
    lhs = accumulate_U(tr, a, mid).values + accumulate_U(tr, mid, b).values
    np.testing.assert_allclose(lhs, accumulate_U(tr, a, b).values, rtol=1e-14)


# ----------------------------------------------------------- Green identity

def _green_run(h, dt, m=1.0, R=8.0, T=1.0):
    g = grid_with_spacing(2, R, h)
    prof = DensityProfile("power_tail", 1.0, 3.0, 1.0)
    rho = sample_density(prof, g, 1.0)
    op = SpectralOperator(g, 1.0)
    u0 = InitialDatum("gaussian_bump", 1.0, 2.0).sample(g)
    ts = list(np.round(np.arange(0, T + dt / 2, dt), 12))
    return solve_dirichlet(u0, rho, PhysParams(1.0, m), op, StepperConfig(dt=dt), T, ts)


def test_green_identity_degenerate_window():
    tr = _green_run(0.5, 0.1)
    assert green_identity_residual(tr, 0.5, 0.5, (2.0, 4.0)) == 0.0
    with pytest.raises(ValueError, match="inside the grid"):
        green_identity_residual(tr, 0.0, 1.0, (2.0, 7.9))


def test_green_identity_linear_small_grid():
    tr = _green_run(0.25, 0.05)
    assert green_identity_residual(tr, 0.0, 1.0, (2.0, 4.0)) < 0.05


def test_green_identity_refinement():
    coarse = green_identity_residual(_green_run(0.5, 0.1), 0.0, 1.0, (2.0, 4.0))
    fine = green_identity_residual(_green_run(0.25, 0.05), 0.0, 1.0, (2.0, 4.0))
    assert fine / coarse < 0.7
