import math

import pytest
from hypothesis import given, settings, strategies as st

from singular_system.errors import DomainError
from singular_system.params import (characteristic, derive_params, eigenvalue, identity_residuals,
                                    limit_exponents, mode_exponents, parse_sign, quadratic_roots,
                                    sign_certificate)


@st.composite
def admissible(draw):
    n = draw(st.integers(3, 12))
    lo = n / (n - 1.0)
    u = draw(st.floats(1e-4, 1 - 1e-4))
    return n, lo + (2.0 - lo) * u


def test_values_n3_p16():
    prm = derive_params(3, 1.6)
    # xi = 1.2, beta = 0.6/0.2, sigma = 0.4/0.6
    assert prm.xi == pytest.approx(1.2, rel=1e-15)
    assert prm.beta == pytest.approx(3.0, rel=1e-14)
    assert prm.sigma == pytest.approx(2.0 / 3.0, rel=1e-15)
    assert prm.c_beta == pytest.approx(3.0 ** (-1.0 / 0.6), rel=1e-14)


@pytest.mark.parametrize("n,p", [(2, 1.5), (3, 1.5), (3, 2.0), (3, 2.5), (4, 1.3), (3, math.nan)])
def test_domain_errors(n, p):
    with pytest.raises(DomainError):
        derive_params(n, p)


def test_noninteger_dimension():
    with pytest.raises(DomainError):
        derive_params(3.5, 1.7)


@settings(max_examples=200, deadline=None)
@given(admissible())
def test_identities_hold(np_):
    prm = derive_params(*np_)
    assert max(identity_residuals(prm).values()) <= 1e-12
    rep = sign_certificate(prm)
    assert rep.negative and rep.scaled_error <= 1e-10


@settings(max_examples=100, deadline=None)
@given(admissible(), st.integers(1, 60), st.sampled_from([1, -1]))
def test_exponents_are_roots_and_straddle(np_, k, sign):
    prm = derive_params(*np_)
    ex = mode_exponents(prm, k, sign)
    for g in (ex.gamma_plus, ex.gamma_minus):
        scale = g * g + abs((prm.n_dim - 2.0 - sign * prm.p / prm.beta) * g) + ex.lambda_k
        assert abs(characteristic(prm, k, sign, g)) <= 1e-12 * scale
    assert ex.gamma_minus + prm.sigma < 0.0 < ex.gamma_plus + prm.sigma
    if sign < 0:
        assert ex.gamma_minus + prm.sigma <= -1.0
    lo, hi = limit_exponents(prm, k)
    assert lo + prm.sigma < 0.0 < hi + prm.sigma


@given(st.floats(-50, 50), st.floats(0, 1e4))
def test_quadratic_roots_vieta(b, lam):
    lo, hi = quadratic_roots(b, lam)
    assert lo <= hi
    assert lo + hi == pytest.approx(-b, abs=1e-9 * (1 + abs(b) + math.sqrt(lam)))
    assert lo * hi == pytest.approx(-lam, rel=1e-12, abs=1e-300)


def test_eigenvalue_and_sign():
    prm = derive_params(3, 1.6)
    assert [eigenvalue(prm, k) for k in range(4)] == [0.0, 2.0, 6.0, 12.0]
    with pytest.raises(DomainError):
        eigenvalue(prm, -1)
    assert parse_sign("+") == 1 and parse_sign("-p") == -1 and parse_sign(-1.6) == -1
    with pytest.raises(DomainError):
        parse_sign(0)
