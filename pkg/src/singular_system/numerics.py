"""Small numerical kernels shared by the solvers.

* fd_weights: finite-difference weights on arbitrary nodes (Fornberg's recursion).
* uniform_derivative: first derivative of samples on a uniform grid.
* weighted_cumint: cumulative integrals with an exponential weight,
      I_j = int_{s_a}^{s_j} B(s') exp(L(s') - L(s_j)) ds',
  which is the form every nested integral of the mode solvers takes once the
  radius is written as r = e^s and the fields are scaled by their natural
  powers of r. Weights enter only through differences of L, so nothing
  overflows however steep the power laws are.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from .errors import QuadratureError

GAUSS_X, GAUSS_W = np.polynomial.legendre.leggauss(6)


def fd_weights(x, x0, m):
    """Weights c_i with sum c_i f(x_i) ~ f^(m)(x0) (Fornberg 1988)."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    c = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = x[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


def stencil_matrix(n, order, deriv):
    """Banded description of an order-``order`` derivative on a unit-spaced grid.

    Returns (starts, weights): row j uses nodes starts[j] .. starts[j]+width-1
    with the given weights (to be divided by h**deriv). Interior rows use the
    centred (order+1)-point stencil; rows near the ends are one-sided and use
    order+deriv points, so they keep the full order (a one-sided stencil of
    order+1 points loses deriv-1 orders). Unused columns carry zero weight.
    """
    width = order + deriv
    half = order // 2
    weights = np.zeros((n, width))
    starts = np.empty(n, dtype=int)
    cache = {}
    for j in range(n):
        if half <= j <= n - 1 - half:
            starts[j] = min(j - half, n - width)
            off = j - starts[j]
            key = ("c", off)
            if key not in cache:
                w = np.zeros(width)
                w[off - half:off + half + 1] = fd_weights(
                    np.arange(-half, half + 1, dtype=float), 0.0, deriv)
                cache[key] = w
        else:
            starts[j] = min(max(j - half, 0), n - width)
            off = j - starts[j]
            key = ("o", off)
            if key not in cache:
                cache[key] = fd_weights(np.arange(width, dtype=float), float(off), deriv)
        weights[j] = cache[key]
    return starts, weights


def uniform_derivative(y, h, order=4):
    """d/ds of samples on a uniform grid; centred in the interior, one-sided at the ends."""
    y = np.asarray(y, dtype=float)
    starts, w = stencil_matrix(len(y), order, 1)
    idx = starts[:, None] + np.arange(w.shape[1])[None, :]
    return np.sum(w * y[idx], axis=1) / h


def _tail(spline, s0, log_weight, b0):
    """int_{-inf}^{s0} B(s) exp(L(s) - L(s0)) ds with B continued as a power law."""
    if b0 == 0.0:
        return 0.0
    nu = float(spline(s0, 1)) / b0
    l0 = float(log_weight(np.array([s0]))[0])
    eps = 1e-3
    dl = (l0 - float(log_weight(np.array([s0 - eps]))[0])) / eps
    if nu + dl <= 0.0:
        # local slope model would not decay; fall back to a flat continuation
        nu = 0.0
    if dl <= 0.0:
        raise QuadratureError("tail weight does not decay below the first node")

    def integrand(u):
        return math.exp(nu * u + float(log_weight(np.array([s0 + u]))[0]) - l0)

    val, err = quad(integrand, -np.inf, 0.0, epsabs=0.0, epsrel=1e-12, limit=200)
    if not np.isfinite(val) or err > 1e-9 * abs(val) + 1e-300:
        raise QuadratureError(f"tail quadrature failed (value {val!r}, error {err!r})")
    return b0 * val


def weighted_cumint(s, values, log_weight, anchor):
    """I_j = int_{s_a}^{s_j} B(s') exp(L(s') - L(s_j)) ds' at every node.

    B is the not-a-knot cubic spline through ``values``; each cell is
    integrated by 6-point Gauss-Legendre against the exact weight.
    ``anchor`` is a node index, or None for s_a = -infinity, in which case
    the part below s_0 is closed with a power-law continuation of B.
    """
    s = np.asarray(s, dtype=float)
    values = np.asarray(values, dtype=float)
    n = len(s)
    spline = CubicSpline(s, values)
    h = np.diff(s)
    mid = 0.5 * (s[1:] + s[:-1])
    xg = mid[:, None] + 0.5 * h[:, None] * GAUSS_X[None, :]
    bg = spline(xg)
    lg = log_weight(xg)
    ln = log_weight(s)
    wg = 0.5 * h[:, None] * GAUSS_W[None, :]
    up = np.sum(wg * bg * np.exp(lg - ln[1:, None]), axis=1)
    down = np.sum(wg * bg * np.exp(lg - ln[:-1, None]), axis=1)
    f_up = np.exp(ln[:-1] - ln[1:]).tolist()
    f_down = np.exp(ln[1:] - ln[:-1]).tolist()
    up = up.tolist()
    down = down.tolist()

    out = [0.0] * n
    if anchor is None:
        start = 0
        out[0] = _tail(spline, s[0], log_weight, float(values[0]))
    else:
        start = int(anchor)
        if not 0 <= start < n:
            raise IndexError("anchor outside the grid")
    acc = out[start]
    for j in range(start, n - 1):
        acc = f_up[j] * acc + up[j]
        out[j + 1] = acc
    acc = out[start]
    for j in range(start - 1, -1, -1):
        acc = f_down[j] * acc - down[j]
        out[j] = acc
    res = np.array(out)
    if not np.all(np.isfinite(res)):
        raise QuadratureError("non-finite value in cumulative integral")
    return res
