"""The explicit radial singular profile of -Delta w = |grad w|^p.

    w_t(r)  = int_r^1 dy / (t y^xi + beta y)^(1/(p-1)),   t >= 0
    w_t'(r) = -(t r^xi + beta r)^(-1/(p-1))

so that r^(sigma+1) w_t' = -g_t(r) with g_t(r) = (t r^(xi-1) + beta)^(-1/(p-1)),
and w_0 = (C_beta/sigma)(r^-sigma - 1) in closed form.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .errors import ConvergenceError, DomainError, QuadratureError
from .grid import RadialField, RadialGrid, fd_second_derivative, norm_Y
from .params import Params

QUAD_TOL = 1e-12
_GL_HI = np.polynomial.legendre.leggauss(12)
_GL_LO = np.polynomial.legendre.leggauss(7)


@dataclass(frozen=True)
class ProfileSpec:
    params: Params
    t: float = 0.0

    def __post_init__(self):
        t = float(self.t)
        if not math.isfinite(t) or t < 0.0:
            raise DomainError(f"t must be finite and >= 0, got {self.t!r}")
        object.__setattr__(self, "t", t)


def g_scaled(spec: ProfileSpec, r):
    """g_t(r) = (t r^(xi-1) + beta)^(-1/(p-1)) = -r^(sigma+1) w_t'(r)."""
    prm = spec.params
    r = np.asarray(r, dtype=float)
    return (spec.t * r ** (prm.xi - 1.0) + prm.beta) ** (-1.0 / (prm.p - 1.0))


def theta(spec: ProfileSpec, r):
    """t r^(xi-1) / (t r^(xi-1) + beta), the share of the t-term in the denominator."""
    prm = spec.params
    a = spec.t * np.asarray(r, dtype=float) ** (prm.xi - 1.0)
    return a / (a + prm.beta)


def w_prime(spec: ProfileSpec, r):
    """w_t'(r) = -(t r^xi + beta r)^(-1/(p-1))."""
    prm = spec.params
    r = np.asarray(r, dtype=float)
    return -(spec.t * r ** prm.xi + prm.beta * r) ** (-1.0 / (prm.p - 1.0))


def w_second(spec: ProfileSpec, r):
    """Analytic w_t'' = r^-(sigma+2) g (sigma+1)(1 + (xi-1) theta)."""
    prm = spec.params
    r = np.asarray(r, dtype=float)
    return (r ** (-(prm.sigma + 2.0)) * g_scaled(spec, r) * (prm.sigma + 1.0)
            * (1.0 + (prm.xi - 1.0) * theta(spec, r)))


def w_closed_t0(prm: Params, r):
    """w_0(r) = (C_beta/sigma)(r^-sigma - 1)."""
    r = np.asarray(r, dtype=float)
    return prm.c_beta / prm.sigma * np.expm1(-prm.sigma * np.log(r))


def _scaled_integrand(spec, s, s_ref):
    # r^sigma w_t(r) = int_{ln r}^0 exp(-sigma (s - ln r)) g_t(e^s) ds
    return np.exp(-spec.params.sigma * (s - s_ref)) * g_scaled(spec, np.exp(s))


def w_value(spec: ProfileSpec, r) -> float:
    """w_t(r) for a single radius by adaptive quadrature in s = ln y."""
    r = float(r)
    if not (0.0 < r <= 1.0):
        raise DomainError(f"r must lie in (0, 1], got {r!r}")
    if r == 1.0:
        return 0.0
    sr = math.log(r)
    sig = spec.params.sigma

    def f(s):
        return float(_scaled_integrand(spec, s, sr))

    scale = r ** sig
    with warnings.catch_warnings():
        # quad warns when it cannot reach epsrel; the explicit check below decides
        warnings.simplefilter("ignore", IntegrationWarning)
        val, err = quad(f, sr, 0.0, epsabs=0.1 * QUAD_TOL * scale, epsrel=1e-14, limit=500)
    w = val / scale
    if not np.isfinite(w) or err / scale > QUAD_TOL * (1.0 + w):
        raise QuadratureError(f"w_t({r!r}): error estimate {err / scale:.3e} above tolerance")
    return w


def _adaptive_cells(a, b, f, rtol=1e-14, max_depth=60):
    """int_a^b f per cell (vectorized Gauss pairs with bisection of failing cells)."""
    xh, wh = _GL_HI
    xl, wl = _GL_LO
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    total = np.zeros_like(a)
    owner = np.arange(len(a))
    for _ in range(max_depth):
        if len(a) == 0:
            return total
        mid = 0.5 * (a + b)
        half = 0.5 * (b - a)
        fh = f(mid[:, None] + half[:, None] * xh[None, :], owner)
        fl = f(mid[:, None] + half[:, None] * xl[None, :], owner)
        ih = half * (fh @ wh)
        il = half * (fl @ wl)
        ok = np.abs(ih - il) <= rtol * np.abs(ih) + 1e-300
        np.add.at(total, owner[ok], ih[ok])
        bad = ~ok
        a, b, owner = a[bad], b[bad], owner[bad]
        m = 0.5 * (a + b)
        a, b, owner = np.concatenate([a, m]), np.concatenate([m, b]), np.concatenate([owner, owner])
    raise QuadratureError("profile quadrature: subdivision budget exhausted")


def scaled_w_values(spec: ProfileSpec, r):
    """r^sigma w_t(r) at many radii (0 < r <= 1), by composite adaptive Gauss in s.

    Cells run between consecutive sorted radii and are accumulated from r = 1
    downward, so the cost is one pass regardless of how many radii are asked.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0) or np.any(r > 1.0):
        raise DomainError("radii must lie in (0, 1]")
    order = np.argsort(r)
    rs = r[order]
    s_nodes = np.append(np.log(rs), 0.0)
    a = s_nodes[:-1]
    b = s_nodes[1:]
    sig = spec.params.sigma

    def f(x, owner):
        return _scaled_integrand(spec, x, a[owner][:, None])

    cells = _adaptive_cells(a, b, f)
    # J_i = int_{s_i}^0 e^{-sigma (s - s_i)} g ds = cell_i + e^{-sigma (s_{i+1} - s_i)} J_{i+1}
    decay = np.exp(-sig * (b - a)).tolist()
    cells = cells.tolist()
    acc = 0.0
    out = np.empty(len(rs))
    for i in range(len(rs) - 1, -1, -1):
        acc = cells[i] + decay[i] * acc
        out[i] = acc
    res = np.empty_like(out)
    res[order] = out
    return res


def w_values(spec: ProfileSpec, r):
    """w_t at many radii; see scaled_w_values."""
    r = np.asarray(r, dtype=float)
    return scaled_w_values(spec, r) * r ** (-spec.params.sigma)


def profile_field(spec: ProfileSpec, grid: RadialGrid) -> RadialField:
    """w_t sampled on the grid with its analytic derivative."""
    vals = w_values(spec, grid.r)
    vals[-1] = 0.0
    return RadialField(grid, vals, w_prime(spec, grid.r), "analytic")


def scaled_residual(spec: ProfileSpec, r):
    """r^(sigma+2) (-w'' - (N-1) w'/r - |w'|^p) from the analytic derivatives."""
    prm = spec.params
    g = g_scaled(spec, r)
    th = theta(spec, r)
    return -g * (prm.sigma + 1.0) * (1.0 + (prm.xi - 1.0) * th) + (prm.n_dim - 1.0) * g - g ** prm.p


def scalar_residual(spec: ProfileSpec, grid: RadialGrid, second="analytic") -> RadialField:
    """Residual -w'' - (N-1) w'/r - |w'|^p of the scalar equation on the grid.

    ``second="analytic"`` uses the closed-form w''; ``second="fd"`` replaces
    it by the finite-difference second derivative of quadrature values.
    """
    prm = spec.params
    r = grid.r
    if second == "analytic":
        res = scaled_residual(spec, r) * r ** (-(prm.sigma + 2.0))
    elif second == "fd":
        wf = profile_field(spec, grid)
        w2 = fd_second_derivative(wf).values
        wp = wf.deriv
        res = -w2 - (prm.n_dim - 1.0) * wp / r - np.abs(wp) ** prm.p
    else:
        raise ValueError("second must be 'analytic' or 'fd'")
    return RadialField(grid, res)


def weighted_residual(spec: ProfileSpec, grid: RadialGrid, second="analytic") -> float:
    """norm_Y(residual) / norm_Y(|w'|^p)."""
    prm = spec.params
    res = scalar_residual(spec, grid, second)
    rhs = RadialField(grid, np.abs(w_prime(spec, grid.r)) ** prm.p)
    return norm_Y(res, prm.sigma) / norm_Y(rhs, prm.sigma)


def scaled_derivative_defect(spec: ProfileSpec, r):
    """r^(sigma+1) w_t'(r) + g_t(r), which vanishes identically."""
    r = np.asarray(r, dtype=float)
    return r ** (spec.params.sigma + 1.0) * w_prime(spec, r) + g_scaled(spec, r)


def scaled_w_slope(spec: ProfileSpec, r):
    """r^(1-sigma) d/dr (r^sigma w_t) = sigma r^sigma w_t + r^(sigma+1) w_t' (negative)."""
    r = np.asarray(r, dtype=float)
    return spec.params.sigma * scaled_w_values(spec, r) - g_scaled(spec, r)


@dataclass
class SigmaLimit:
    estimate: float
    error: float
    r_start: float
    exponents: list
    table: list = field(repr=False, default_factory=list)

    @property
    def bracket(self):
        return (self.estimate - self.error, self.estimate + self.error)


def asymptotic_radius(spec: ProfileSpec, r_min=1e-6, eps=1e-3):
    """A radius below which t r^(xi-1) <= eps * beta (and at most r_min)."""
    prm = spec.params
    if spec.t == 0.0:
        return r_min
    # compare in logs: r^(xi-1) <= eps beta / t
    log_r = math.log(eps * prm.beta / spec.t) / (prm.xi - 1.0)
    return math.exp(min(math.log(r_min), log_r))


def sigma_limit_constant(spec: ProfileSpec, r_min=1e-6, levels=8) -> SigmaLimit:
    """Richardson extrapolation of r^sigma w_t(r) as r -> 0.

    Samples r_j = r_0 2^j with r_0 inside the regime t r^(xi-1) << beta and
    eliminates the correction exponents k(xi-1) and sigma in increasing order.
    The error is the size of the last elimination step; ConvergenceError is
    raised if the steps do not contract.
    """
    prm = spec.params
    r0 = asymptotic_radius(spec, r_min)
    rs = r0 * 2.0 ** np.arange(levels + 1)
    vals = scaled_w_values(spec, rs)
    exps = sorted({k * (prm.xi - 1.0) for k in range(1, levels + 1)} | {prm.sigma})
    if spec.t == 0.0:
        exps = [prm.sigma]
    exps = exps[:levels]
    table = [vals.tolist()]
    col = vals
    steps = []
    for e in exps:
        if len(col) < 2:
            break
        f = 2.0 ** e
        new = (f * col[:-1] - col[1:]) / (f - 1.0)
        steps.append(abs(new[0] - col[0]))
        col = new
        table.append(col.tolist())
    est = float(col[0])
    floor = 1e-13 * abs(est)
    err = max(steps[-1], floor) if steps else floor
    if len(steps) >= 3 and steps[-1] > floor and steps[-1] > steps[0]:
        raise ConvergenceError(f"Richardson steps do not contract: {steps}")
    return SigmaLimit(est, float(err), float(r0), list(exps), table)
