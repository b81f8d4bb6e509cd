import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from singular_system.errors import BallEscape, DomainError, MaxIterations, SearchExhausted
from singular_system.fixed_point import (KappaSpec, apply_T, choose_parameters,
                                         contraction_structure, empirical_contraction,
                                         fixed_point_defect, into_structure, picard,
                                         positivity_cap, power_remainder, scaled_I,
                                         tail_contraction)
from singular_system.grid import RadialGrid, norm_X, zero_field
from singular_system.profile import ProfileSpec, weighted_residual
from singular_system.verify import system_residual

HALF = KappaSpec("power", 0.5, 0.5)


def test_kappa_families():
    r = np.array([0.0, 0.25, 1.0])
    assert np.allclose(KappaSpec("power", 2.0, 2.0)(r), [0.0, 0.125, 2.0])
    assert np.allclose(KappaSpec("ramp", 1.0, 0.5)(r), [0.0, 0.5, 1.0])
    tab = KappaSpec("table", table_r=(0.0, 0.5, 1.0), table_values=(0.0, 2.0, 1.0))
    assert np.allclose(tab(r), [0.0, 1.0, 1.0])
    assert tab.sup_ball(0.75) == 2.0 and tab.sup_ball(0.25) == 1.0
    assert KappaSpec.zero().is_zero()


@pytest.mark.parametrize("kw", [dict(family="cubic"), dict(c=-1.0), dict(alpha=0.0),
                                dict(family="table", table_r=(0.1, 1.0), table_values=(0.0, 1.0)),
                                dict(family="table", table_r=(0.0, 1.0), table_values=(1.0, 1.0))])
def test_kappa_rejects(kw):
    with pytest.raises(DomainError):
        KappaSpec(**kw)


@given(st.floats(-0.2, 0.2).filter(lambda v: v == 0.0 or abs(v) > 1e-100),
       st.sampled_from([1.1, 1.5, 1.6, 1.9]))
def test_power_remainder_against_high_precision(x, p):
    mpmath.mp.dps = 320
    exact = float(mpmath.fabs(1 + mpmath.mpf(x)) ** p - 1 - p * mpmath.mpf(x))
    got = power_remainder(x, p)
    if abs(x) < 0.1:
        # series branch: relative accuracy even where the remainder is tiny
        assert abs(got - exact) <= 1e-14 * abs(exact) + 1e-300
    else:
        # direct branch: a few ulps of the cancelling terms
        assert abs(got - exact) <= 1e-15 * (abs(1 + x) ** p + 1 + p * abs(x))


@given(st.floats(-10, -1e-3), st.floats(-5, 5), st.sampled_from([1.2, 1.6]))
def test_scaled_I_definition(W, Z, p):
    direct = abs(W + Z) ** p - abs(W) ** p - p * abs(W) ** (p - 2) * W * Z
    assert scaled_I(W, Z, p) == pytest.approx(direct, rel=1e-9, abs=1e-12 * abs(W) ** p)
    assert scaled_I(W, Z, p) >= 0.0


def test_structures_monotone(prm):
    a = into_structure(prm, HALF, HALF, 0.1, 0.1, 10.0)
    assert into_structure(prm, HALF, HALF, 0.1, 0.1, 100.0) < a
    assert into_structure(prm, HALF, HALF, 0.2, 0.1, 10.0) > a
    b = contraction_structure(prm, HALF, HALF, 0.1, 0.1, 10.0)
    assert contraction_structure(prm, HALF, HALF, 0.1, 0.1, 100.0) < b


def test_zero_kappa_maps_origin_to_origin(prm, coarse):
    z = zero_field(coarse)
    ph, ps, _ = apply_T(prm, 10.0, KappaSpec.zero(), KappaSpec.zero(), (z, z))
    assert norm_X(ph, prm.sigma) == 0.0 and norm_X(ps, prm.sigma) == 0.0


def test_zero_kappa_residual_equals_profile_residual(prm, grid):
    pair, rep = picard(prm, 10.0, KappaSpec.zero(), KappaSpec.zero(), 0.03, grid=grid)
    assert len(rep.iterations) == 1
    _, _, sysrep = system_residual(prm, pair, KappaSpec.zero(), KappaSpec.zero())
    assert sysrep["relative_u"] == pytest.approx(
        weighted_residual(ProfileSpec(prm, 10.0), grid, "fd"), rel=1e-10)


def test_empirical_contraction_small(prm, coarse):
    lip, ratios, skipped = empirical_contraction(prm, 100.0, HALF, HALF, 2 ** -8, n_pairs=4,
                                                 grid=coarse)
    assert 0.0 < lip < 0.5 and len(ratios) == 4 and skipped == 0


def test_choose_and_picard(prm, grid):
    choice = choose_parameters(prm, HALF, HALF, grid)
    assert choice.t > 1.0 and choice.R <= positivity_cap(prm, choice.t, grid)
    assert choice.certificate["measured_into"] <= choice.R
    assert choice.certificate["measured_contraction"] <= 0.5
    pair, rep = picard(prm, choice.t, HALF, HALF, choice.R, grid=grid)
    assert rep.converged and rep.empirical_contraction <= 0.9
    assert rep.iterations[-1]["step_norm"] <= 1e-8
    assert fixed_point_defect(prm, pair, HALF, HALF) <= 1e-8


def test_choice_monotone_in_kappa(prm, coarse):
    t_small = choose_parameters(prm, KappaSpec("power", 0.5, 0.5), HALF, coarse).t
    t_big = choose_parameters(prm, KappaSpec("power", 20.0, 0.5), HALF, coarse).t
    assert t_big >= t_small


def test_search_exhausted(prm, coarse):
    with pytest.raises(SearchExhausted) as info:
        choose_parameters(prm, KappaSpec("power", 100.0, 0.5), KappaSpec("power", 100.0, 0.5),
                          coarse, t_exponents=range(1, 3))
    assert info.value.best is not None


def test_choose_rejects_small_t(prm, coarse):
    with pytest.raises(DomainError):
        choose_parameters(prm, HALF, HALF, coarse, t_fixed=1.0)


def test_picard_failures_carry_report(prm, coarse):
    big = KappaSpec("power", 50.0, 0.5)
    with pytest.raises(BallEscape) as esc:
        picard(prm, 10.0, big, big, 1e-3, grid=coarse)
    assert esc.value.report.iterations
    with pytest.raises(MaxIterations) as mx:
        picard(prm, 10.0, HALF, HALF, 0.03, tol=1e-300, max_iter=3, grid=coarse)
    assert len(mx.value.report.iterations) == 3


def test_tail_contraction():
    assert tail_contraction([1.0, 0.1, 0.01, 0.001]) == pytest.approx(0.1)
    assert tail_contraction([1.0, 1e-20, 1e-19]) == pytest.approx(1e-20)
    assert tail_contraction([1.0]) == 0.0
