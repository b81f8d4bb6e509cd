import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from singular_system.errors import BoundViolation, PositivityViolation
from singular_system.fixed_point import KappaSpec, assemble
from singular_system.grid import RadialField, zero_field
from singular_system.verify import (decay_bound, inequality_ratios, inequality_suite,
                                    lower_bound_constant, positivity_and_blowup, power_difference,
                                    profile_bracket, profile_lower_bound, sample_triples,
                                    taylor_remainder, verify_all, zero_cases)

vec = st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3)


@settings(max_examples=200)
@given(vec, vec, st.sampled_from([1.1, 1.5, 1.9, 2.0]))
def test_taylor_remainder_matches_definition(x, y, p):
    x = np.array([x])
    y = np.array([y])
    nx = np.linalg.norm(x)
    direct = np.linalg.norm(x + y) ** p - nx ** p - (p * nx ** (p - 2) * (x @ y.T)[0, 0]
                                                     if nx > 0 else 0.0)
    scale = np.linalg.norm(x + y) ** p + nx ** p + p * nx ** (p - 1) * np.linalg.norm(y) + 1e-300
    assert abs(taylor_remainder(x, y, p)[0] - direct) <= 1e-12 * scale


@settings(max_examples=200)
@given(vec, vec, vec, st.sampled_from([1.1, 1.5, 2.0]))
def test_power_difference_matches_definition(x, y, z, p):
    x, y, z = (np.array([v]) for v in (x, y, z))
    a = np.linalg.norm(x + y) ** p
    b = np.linalg.norm(x + z) ** p
    assert abs(power_difference(x, y, z, p)[0] - (a - b)) <= 1e-12 * (a + b) + 1e-300


def test_p2_taylor_identity():
    rng = np.random.default_rng(0)
    x, y, z = sample_triples(rng, 3000, 3)
    r1, _, _ = inequality_ratios(x, y, z, 2.0)
    assert np.nanmax(np.abs(r1 - 1.0)) <= 1e-12


@pytest.mark.parametrize("p", [1.1, 1.5, 2.0])
def test_zero_cases_exact(p):
    assert zero_cases(p, 3, np.random.default_rng(1)) == 0.0


def test_inequality_suite_small():
    rep = inequality_suite(1.5, dims=(2,), n_samples=20_000, seed=3)
    assert rep["pass"]
    with pytest.raises(ValueError):
        inequality_suite(2.5)


def test_lower_bound(prm):
    assert lower_bound_constant(prm) == pytest.approx(4.0 ** (-1 / 0.6) * 1.5)
    for t in (0.0, 10.0, 1e3):
        assert profile_lower_bound(prm, t)["min_margin"] >= 0.0
    # cut too far out for the hypothesis t z^(xi-1) <= 1
    with pytest.raises(ValueError):
        profile_lower_bound(prm, 1e3, z_cut=0.5)


def test_lower_bound_violation_reported(prm, monkeypatch):
    import singular_system.verify as v
    monkeypatch.setattr(v, "lower_bound_constant", lambda prm: 10.0)
    with pytest.raises(BoundViolation):
        v.profile_lower_bound(prm, 0.0)


def test_positivity_violation(prm, coarse):
    z = zero_field(coarse)
    bad = RadialField(coarse, -2e6 * np.ones(coarse.M + 1), np.zeros(coarse.M + 1), "analytic")
    pair = assemble(prm, 10.0, bad, z, 0.01, coarse)
    with pytest.raises(PositivityViolation) as info:
        positivity_and_blowup(prm, pair)
    assert info.value.node == 0


def test_profile_pair_sits_in_bracket(prm, coarse):
    z = zero_field(coarse)
    rep = positivity_and_blowup(prm, assemble(prm, 10.0, z, z, 0.01, coarse))
    assert rep["pass"]
    low, high, _ = profile_bracket(prm, 10.0, coarse, 0.01)
    assert 0.0 < low < high


def test_decay_bound_dominates_profile(prm):
    from singular_system.profile import ProfileSpec, w_value
    for t in (1e2, 1e3):
        assert w_value(ProfileSpec(prm, t), 0.1) <= decay_bound(prm, t, 0.1)


def test_verify_all_reduced(prm, coarse):
    k = KappaSpec("power", 0.5, 0.5)
    opt = {"identity_cases": 5, "exponent_cases": 3, "max_mode": 5, "profile_t": [0.0, 10.0],
           "mode_t": [0.0, 10.0], "modes": [1], "bvp_cases": 2, "stability_t": [0.0, 1e3],
           "family_size": 2, "decay_t": [1e2, 1e3], "inequality_p": [1.5],
           "inequality_dims": [2], "inequality_samples": 5000, "lower_bound_t": [0.0]}
    a = verify_all(prm, coarse, k, k, opt)
    b = verify_all(prm, coarse, k, k, opt, workers=2)
    assert a == b or str(a) == str(b)
    assert set(a) >= {"identities", "construction", "decay", "inequalities_p1.5"}
    for name, res in a.items():
        assert set(res) >= {"pass", "metric", "tolerance"}
