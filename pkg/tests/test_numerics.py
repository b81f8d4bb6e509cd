import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from singular_system.numerics import fd_weights, stencil_matrix, uniform_derivative, weighted_cumint


@given(st.integers(3, 8), st.integers(1, 2), st.floats(-1, 1))
def test_fd_weights_exact_on_polynomials(n, m, x0):
    x = np.linspace(-1.0, 1.0, n)
    w = fd_weights(x, x0, m)
    for deg in range(n):
        exact = 0.0 if deg < m else math.factorial(deg) / math.factorial(deg - m) * x0 ** (deg - m)
        assert w @ x ** deg == pytest.approx(exact, abs=1e-8)


@pytest.mark.parametrize("order", [2, 4, 6])
def test_uniform_derivative_order(order):
    errs = []
    for n in (41, 81):
        s = np.linspace(0.0, 1.0, n)
        d = uniform_derivative(np.sin(3 * s), s[1] - s[0], order)
        errs.append(np.max(np.abs(d - 3 * np.cos(3 * s))))
    assert errs[0] / errs[1] > 2 ** order * 0.6


def test_stencil_rows_sum_to_zero():
    starts, w = stencil_matrix(20, 6, 2)
    assert np.allclose(w.sum(axis=1), 0.0, atol=1e-9)
    assert starts.min() == 0 and starts.max() + w.shape[1] == 20


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 4.0), st.floats(-0.4, 1.0))
def test_weighted_cumint_closed_form(lam, nu):
    # int_{s_a}^{s} e^{nu s'} e^{lam (s' - s)} ds' in closed form
    s = np.linspace(-5.0, 0.0, 401)
    vals = np.exp(nu * s)
    out = weighted_cumint(s, vals, lambda x: lam * x, 200)
    a = s[200]
    exact = (np.exp(nu * s) - np.exp((nu + lam) * a - lam * s)) / (nu + lam)
    assert np.max(np.abs(out - exact) / (1.0 + np.abs(exact))) < 1e-10


def test_weighted_cumint_infinite_tail():
    s = np.linspace(-5.0, 0.0, 401)
    out = weighted_cumint(s, np.exp(0.3 * s), lambda x: 2.0 * x, None)
    assert np.max(np.abs(out - np.exp(0.3 * s) / 2.3)) < 1e-9
