import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from singular_system.errors import DomainError
from singular_system.grid import RadialGrid
from singular_system.params import derive_params
from singular_system.profile import (ProfileSpec, g_scaled, scaled_derivative_defect,
                                     scaled_w_values, sigma_limit_constant, w_closed_t0, w_prime,
                                     w_second, w_value, w_values, weighted_residual)


def test_closed_form_t0(prm, grid):
    r = grid.r[:-1]
    q = w_values(ProfileSpec(prm, 0.0), r)
    assert np.max(np.abs(q / w_closed_t0(prm, r) - 1.0)) <= 1e-9


def test_vectorized_matches_pointwise(prm):
    spec = ProfileSpec(prm, 37.0)
    r = np.array([1e-5, 3e-3, 0.2, 0.9])
    assert np.allclose(w_values(spec, r), [w_value(spec, x) for x in r], rtol=1e-11)


def test_w_vanishes_at_one(prm):
    assert w_value(ProfileSpec(prm, 5.0), 1.0) == 0.0


@pytest.mark.parametrize("t", [0.0, 1.0, 1e2, 1e4])
def test_weighted_residual(prm, grid, t):
    assert weighted_residual(ProfileSpec(prm, t), grid) <= 1e-8


def test_fd_residual_second_order(prm):
    spec = ProfileSpec(prm, 10.0)
    a = weighted_residual(spec, RadialGrid(1e-6, 1024), "fd")
    b = weighted_residual(spec, RadialGrid(1e-6, 2048), "fd")
    assert 3.5 < a / b < 4.5


def test_w_second_matches_difference_of_w_prime(prm):
    spec = ProfileSpec(prm, 20.0)
    r = np.array([1e-4, 1e-2, 0.5])
    eps = 1e-6 * r
    fd = (w_prime(spec, r + eps) - w_prime(spec, r - eps)) / (2 * eps)
    assert np.allclose(w_second(spec, r), fd, rtol=1e-7)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 1e6), st.floats(1e-8, 1.0))
def test_scaled_derivative_identity(t, r):
    prm = derive_params(3, 1.6)
    spec = ProfileSpec(prm, t)
    assert abs(scaled_derivative_defect(spec, r)) <= 1e-15 * g_scaled(spec, r)


@settings(max_examples=20, deadline=None)
@given(st.floats(1e-3, 1e5))
def test_scaled_w_decreases_and_is_bounded(t):
    prm = derive_params(3, 1.6)
    r = np.geomspace(1e-6, 1.0, 60)
    v = scaled_w_values(ProfileSpec(prm, t), r)
    assert np.all(np.diff(v) <= 1e-15)
    assert np.all(v <= prm.c_beta / prm.sigma * (1 + 1e-12))


@pytest.mark.parametrize("t", [0.0, 10.0, 1e3])
def test_sigma_limit_is_c_beta_over_sigma(prm, t):
    lim = sigma_limit_constant(ProfileSpec(prm, t))
    assert lim.estimate == pytest.approx(prm.c_beta / prm.sigma, abs=max(10 * lim.error, 1e-9))


def test_negative_t_rejected(prm):
    with pytest.raises(DomainError):
        ProfileSpec(prm, -1.0)
    with pytest.raises(DomainError):
        w_value(ProfileSpec(prm, 1.0), 0.0)
