"""Radial mode problems of the two decoupled linear operators.

For a mode k with eigenvalue lambda_k and parameter t >= 0 we solve, on (0, 1],

    -a'' - (N-1) a'/r + lambda_k a/r^2 + sign * p a' / (beta r + t r^xi) = b,   a(1) = 0,

where sign = +1 (operator L+) or -1 (operator L-). Everything is computed in
the scaled variables of the weighted norms,

    A = r^sigma a,   D = r^(sigma+1) a',   B = r^(sigma+2) b,

on the uniform log grid s = ln r, which keeps all quantities O(1).

Three solvers:
  * solve_k0       (k = 0, any t): integrating factor mu with
                   (mu a')' = -mu b, and a(r) = -int_r^1 a'.
  * solve_mode_t0  (k >= 1, t = 0): variation of parameters with the Euler
                   solutions r^gamma+ and r^gamma-.
  * solve_mode_bvp (k >= 1, any t): finite differences in s with a(1) = 0 and
                   an asymptotic inner condition that removes the r^gamma-
                   component at r_min.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import splu

from .errors import DomainError, GridMismatch, SingularMatrix
from .grid import RadialField, RadialGrid, norm_X, norm_Y
from .numerics import stencil_matrix, uniform_derivative, weighted_cumint
from .params import (Params, eigenvalue, limit_exponents, mode_exponents, parse_sign,
                     quadratic_roots)


@dataclass(frozen=True)
class ModeSpec:
    params: Params
    k: int
    sign: int
    t: float = 0.0
    lambda_k: float = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "sign", parse_sign(self.sign))
        t = float(self.t)
        if not math.isfinite(t) or t < 0.0:
            raise DomainError(f"t must be finite and >= 0, got {self.t!r}")
        object.__setattr__(self, "t", t)
        lam = eigenvalue(self.params, self.k)
        if self.lambda_k is not None and abs(self.lambda_k - lam) > 1e-12 * (1.0 + lam):
            raise DomainError(f"lambda_k must equal k(k+N-2) = {lam}, got {self.lambda_k}")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "lambda_k", lam)

    @property
    def sign_label(self):
        return "+" if self.sign > 0 else "-"


@dataclass
class ModeSolution:
    spec: ModeSpec
    a: RadialField
    rhs: RadialField
    solve_method: str
    anchor: float | None = None        # inner anchor radius of the k=0 solver (0.0 = origin)
    info: dict = field(default_factory=dict)

    @property
    def grid(self):
        return self.a.grid

    def scaled(self):
        """(A, D) = (r^sigma a, r^(sigma+1) a')."""
        sig = self.spec.params.sigma
        return self.a.scaled_values(sig), self.a.scaled_deriv(sig + 1.0)


# ---------------------------------------------------------------- coefficients

def drift(spec: ModeSpec, r):
    """q(r) = p / (beta + t r^(xi-1)), so the drift term is sign * q(r) a'/r."""
    prm = spec.params
    r = np.asarray(r, dtype=float)
    return prm.p / (prm.beta + spec.t * r ** (prm.xi - 1.0))


def _log_bracket(spec: ModeSpec, log_r):
    """ln((t r^(xi-1) + beta) / (t + beta)) evaluated without overflow."""
    prm = spec.params
    if spec.t == 0.0:
        return np.zeros_like(log_r)
    lt = math.log(spec.t)
    return (np.logaddexp(math.log(prm.beta), lt + (prm.xi - 1.0) * log_r)
            - np.logaddexp(math.log(prm.beta), lt))


def log_mu_s(spec: ModeSpec, s):
    """ln mu at r = e^s.

    mu'/mu is the coefficient of a' after writing the k = 0 operator as
    -(1/mu)(mu a')': (N-1)/r - sign * p/(beta r + t r^xi). Integrating from 1:
        ln mu = (N-1 - sign p/beta) ln r + sign (p/(p-1)) ln((t r^(xi-1)+beta)/(t+beta)).
    """
    prm = spec.params
    s = np.asarray(s, dtype=float)
    sg = spec.sign
    return (prm.n_dim - 1.0 - sg * prm.p / prm.beta) * s + sg * prm.q * _log_bracket(spec, s)


def log_mu(spec: ModeSpec, r):
    return log_mu_s(spec, np.log(np.asarray(r, dtype=float)))


def mu_factor(spec: ModeSpec, r):
    return np.exp(log_mu(spec, r))


def mu_log_derivative(spec: ModeSpec, r):
    """Analytic mu'/mu (used by the product-rule check)."""
    prm = spec.params
    r = np.asarray(r, dtype=float)
    return (prm.n_dim - 1.0) / r - spec.sign * drift(spec, r) / r


def apply_operator(spec: ModeSpec, r, a, da, d2a):
    """Left-hand side of the mode equation for analytic samples (a, a', a'')."""
    prm = spec.params
    r = np.asarray(r, dtype=float)
    return (-d2a - (prm.n_dim - 1.0) * da / r + spec.lambda_k * a / r ** 2
            + spec.sign * drift(spec, r) * da / r)


def _check_rhs(spec, b):
    if not isinstance(b, RadialField):
        raise TypeError("b must be a RadialField")
    return b.grid, b.grid.r ** (spec.params.sigma + 2.0) * b.values


def _assemble(spec, grid, A, D, b, method, anchor=None, **info):
    sig = spec.params.sigma
    r = grid.r
    a = RadialField(grid, A * r ** (-sig), D * r ** (-(sig + 1.0)), "quadrature")
    return ModeSolution(spec, a, b, method, anchor, dict(info))


# ---------------------------------------------------------------- k = 0

def k0_anchor_index(spec: ModeSpec, grid: RadialGrid):
    """Inner anchor of the k = 0 solver as a node index (None = the origin).

    L-: the homogeneous solution a' = C/mu has r^(sigma+1)|a'| ~ r^(sigma+2-N-p/beta)
    unbounded at 0, so the only admissible choice is mu a' -> 0, i.e. the
    inner integral starts at 0.
    L+: the homogeneous solution is admissible (exponent xi-1 > 0) and the
    anchor is a choice: R_t = t^(-1/(xi-1)), clamped into [r_min, 1] and
    snapped to the nearest node.
    """
    if spec.sign < 0:
        return None
    prm = spec.params
    if spec.t <= 1.0:
        return grid.M
    log_rt = -math.log(spec.t) / (prm.xi - 1.0)
    j = int(round((log_rt - grid.s[0]) / grid.h))
    return min(max(j, 0), grid.M)


def anchor_radius(spec, grid, index):
    return 0.0 if index is None else float(grid.r[index])


def solve_k0(spec: ModeSpec, b: RadialField, anchor=None) -> ModeSolution:
    """k = 0 mode via the integrating factor.

        a'(r) = -(1/mu(r)) int_{anchor}^r mu b,   a(r) = -int_r^1 a'.

    ``anchor`` overrides the default anchor (a radius in [r_min, 1], snapped
    to a node; only meaningful for L+).
    """
    if spec.k != 0:
        raise DomainError(f"solve_k0 needs k = 0, got k = {spec.k}")
    grid, B = _check_rhs(spec, b)
    prm = spec.params
    if anchor is None:
        idx = k0_anchor_index(spec, grid)
    else:
        if spec.sign < 0:
            raise DomainError("L- admits no anchor other than the origin")
        idx = int(round((math.log(anchor) - grid.s[0]) / grid.h))
        idx = min(max(idx, 0), grid.M)
    s = grid.s
    sig = prm.sigma

    def lam(x):
        return log_mu_s(spec, x) - (sig + 1.0) * x

    D = -weighted_cumint(s, B, lam, idx)
    A = weighted_cumint(s, D, lambda x: -sig * x, grid.M)
    A[-1] = 0.0
    return _assemble(spec, grid, A, D, b, "integrating-factor", anchor_radius(spec, grid, idx))


# ---------------------------------------------------------------- k >= 1, t = 0

def t0_constant(prm: Params, k, sign):
    """C_k with sup r^sigma |a| <= C_k ||b||_Y for the variation-of-parameters solution."""
    ex = mode_exponents(prm, k, sign)
    c = prm.sigma + ex.gamma_plus
    d = -(prm.sigma + ex.gamma_minus)
    return (2.0 / d + 1.0 / c) / (ex.gamma_plus - ex.gamma_minus)


def solve_mode_t0(spec: ModeSpec, b: RadialField) -> ModeSolution:
    """k >= 1 at t = 0 by variation of parameters.

    With g+ > -sigma > g- the Euler exponents, F(s) = int_{-inf}^s B e^{-d(s-s')},
    d = -(sigma+g-), and G(s) = int_s^0 B e^{-c(s'-s)}, c = sigma+g+:
        (g- - g+) A = e^{cs} F(0) - G - F
        (g- - g+) D = g+ (e^{cs} F(0) - G) - g- F.
    """
    if spec.k == 0:
        raise DomainError("solve_mode_t0 needs k >= 1")
    if spec.t != 0.0:
        raise DomainError(f"solve_mode_t0 needs t = 0, got t = {spec.t}")
    grid, B = _check_rhs(spec, b)
    prm = spec.params
    ex = mode_exponents(prm, spec.k, spec.sign)
    gp, gm = ex.gamma_plus, ex.gamma_minus
    c = prm.sigma + gp
    d = -(prm.sigma + gm)
    if not (c > 0.0 and d > 0.0):
        raise DomainError(f"exponents do not straddle -sigma: {gm}, {gp}")
    s = grid.s
    F = weighted_cumint(s, B, lambda x: d * x, None)
    G = -weighted_cumint(s, B, lambda x: -c * x, grid.M)
    ecs = np.exp(c * s)
    head = ecs * F[-1] - G
    A = (head - F) / (gm - gp)
    D = (gp * head - gm * F) / (gm - gp)
    A[-1] = 0.0
    ck = t0_constant(prm, spec.k, spec.sign)
    return _assemble(spec, grid, A, D, b, "variation-of-parameters", C_k=ck,
                     gamma_plus=gp, gamma_minus=gm)


# ---------------------------------------------------------------- k >= 1, any t

def _local_exponents(spec: ModeSpec, r):
    """Frozen-coefficient Euler exponents at radius r (c = N-2 - sign q(r))."""
    prm = spec.params
    c0 = prm.n_dim - 2.0 - spec.sign * float(drift(spec, r))
    lo, hi = quadratic_roots(c0, spec.lambda_k)
    return c0, lo, hi


def _operator_matrix(spec, grid, order):
    prm = spec.params
    n = grid.M + 1
    h = grid.h
    sig = prm.sigma
    c = prm.n_dim - 2.0 - spec.sign * drift(spec, grid.r)
    s1, w1 = stencil_matrix(n, order, 1)
    s2, w2 = stencil_matrix(n, order, 2)
    # interior: -Y'' + (2 sigma - c) Y' + (lambda - sigma^2 + c sigma) Y
    vals1 = (w1 * ((2.0 * sig - c) / h)[:, None]).ravel()
    vals2 = (-w2 / h ** 2).ravel()
    rows1 = np.repeat(np.arange(n), w1.shape[1])
    rows2 = np.repeat(np.arange(n), w2.shape[1])
    cols1 = (s1[:, None] + np.arange(w1.shape[1])[None, :]).ravel()
    cols2 = (s2[:, None] + np.arange(w2.shape[1])[None, :]).ravel()
    m = sp.coo_matrix((vals1, (rows1, cols1)), shape=(n, n))
    m = m + sp.coo_matrix((vals2, (rows2, cols2)), shape=(n, n))
    m = m + sp.diags(spec.lambda_k - sig * sig + c * sig)
    return m.tolil(), (s1, w1)


REFINE_STEPS = 2


def _extended_residual(mat, y, rhs):
    """rhs - mat @ y accumulated in extended precision.

    The discrete operator has condition number ~ M^2, so plain LU leaves
    node-to-node noise of that many ulps in Y; differentiating Y twice (as
    every residual check does) would amplify it by h^-2. One or two
    refinement sweeps with this residual reduce the noise to rounding.
    """
    coo = mat.tocoo()
    ld = np.longdouble
    prod = coo.data.astype(ld) * y.astype(ld)[coo.col]
    acc = np.zeros(mat.shape[0], dtype=ld)
    np.add.at(acc, coo.row, prod)
    return (rhs.astype(ld) - acc).astype(float)


def solve_mode_bvp(spec: ModeSpec, b: RadialField, order=6) -> ModeSolution:
    """k >= 1, any t >= 0, by finite differences in s = ln r.

    Unknown Y = r^sigma a satisfies
        -Y'' + (2 sigma - c) Y' + (lambda - sigma^2 + c sigma) Y = B,  c = N-2 - sign q(r),
    with Y(0) = 0. At r_min the coefficients are frozen and B is continued as
    a power law B0 e^{nu (s-s0)}; the local particular solution K0 e^{nu (s-s0)}
    plus the admissible homogeneous mode e^{m s}, m = g+_loc + sigma, gives
        Y'(s0) - m Y(s0) = (nu - m) K0,
    which excludes the r^g- component. ``order`` (2, 4 or 6) is the accuracy of
    the centred stencils; the default 6 keeps one-sided end stencils accurate
    enough for the 1e-6 residual certificate.
    """
    if spec.k == 0:
        raise DomainError("solve_mode_bvp needs k >= 1 (use solve_k0 for k = 0)")
    if order not in (2, 4, 6):
        raise ValueError("order must be 2, 4 or 6")
    grid, B = _check_rhs(spec, b)
    prm = spec.params
    sig = prm.sigma
    n = grid.M + 1
    h = grid.h
    mat, (s1, w1) = _operator_matrix(spec, grid, order)
    rhs = B.copy()

    c0, glo, ghi = _local_exponents(spec, grid.r[0])
    m_exp = ghi + sig
    b0 = float(B[0])
    if b0 != 0.0:
        nu = float(CubicSpline(grid.s, B)(grid.s[0], 1)) / b0
        pol = (nu - sig) ** 2 + c0 * (nu - sig) - spec.lambda_k
        if abs(pol) < 1e-8:
            nu, pol = 0.0, sig * sig - c0 * sig - spec.lambda_k
        k0 = -b0 / pol
    else:
        nu, k0 = 0.0, 0.0
    row0 = np.zeros(n)
    row0[s1[0]:s1[0] + w1.shape[1]] = w1[0] / h
    row0[0] -= m_exp
    mat[0, :] = row0
    rhs[0] = (nu - m_exp) * k0
    mat[n - 1, :] = 0.0
    mat[n - 1, n - 1] = 1.0
    rhs[n - 1] = 0.0
    csc = mat.tocsc()
    try:
        lu = splu(csc)
        Y = lu.solve(rhs)
        for _ in range(REFINE_STEPS):
            Y = Y + lu.solve(_extended_residual(csc, Y, rhs))
    except RuntimeError as exc:
        raise SingularMatrix(
            f"BVP matrix singular (M={grid.M}, r_min={grid.r_min}, k={spec.k}, t={spec.t}): {exc}")
    if not np.all(np.isfinite(Y)):
        raise SingularMatrix(f"BVP solve produced non-finite values (M={grid.M}, k={spec.k})")
    Y[-1] = 0.0
    D = uniform_derivative(Y, h, order) - sig * Y
    sol = _assemble(spec, grid, Y, D, b, "bvp-collocation", None,
                    order=order, inner_exponent=ghi, inner_slope=nu)
    sol.a = RadialField(grid, sol.a.values, sol.a.deriv, "finite-difference")
    return sol


def solve_mode(spec: ModeSpec, b: RadialField) -> ModeSolution:
    """Dispatch: k = 0 -> solve_k0; t = 0 -> solve_mode_t0; else solve_mode_bvp."""
    if spec.k == 0:
        return solve_k0(spec, b)
    if spec.t == 0.0:
        return solve_mode_t0(spec, b)
    return solve_mode_bvp(spec, b)


# ---------------------------------------------------------------- certificates

def weighted_mode_residual(sol: ModeSolution) -> np.ndarray:
    """r^(sigma+2) times the residual of the mode equation, at every node.

    D' is taken by 6th-order differences in s of the scaled derivative, so the
    check does not reuse the solver's quadrature.
    """
    spec = sol.spec
    prm = spec.params
    grid = sol.grid
    A, D = sol.scaled()
    B = sol.rhs.scaled_values(prm.sigma + 2.0)
    Ds = uniform_derivative(D, grid.h, 6)
    q = drift(spec, grid.r)
    return -Ds + (prm.sigma + 2.0 - prm.n_dim + spec.sign * q) * D + spec.lambda_k * A - B


def relative_residual(sol: ModeSolution) -> float:
    res = np.max(np.abs(weighted_mode_residual(sol)))
    ny = norm_Y(sol.rhs, sol.spec.params.sigma)
    return float(res / ny) if ny > 0 else float(res)


def stability_ratio(sol: ModeSolution) -> float:
    sig = sol.spec.params.sigma
    ny = norm_Y(sol.rhs, sig)
    return norm_X(sol.a, sig) / ny if ny > 0 else 0.0


def tail_exponent(sol: ModeSolution, decades=1.0):
    """Least-squares slope of ln|a| against ln r over the first ``decades`` above r_min."""
    grid = sol.grid
    n = int(round(decades * math.log(10.0) / grid.h)) + 1
    y = np.abs(sol.a.values[:n])
    x = grid.s[:n]
    ok = y > 0
    return float(np.polyfit(x[ok], np.log(y[ok]), 1)[0])


def kernel_classification(spec: ModeSpec) -> dict:
    """Exponent bookkeeping behind the (non)triviality of the kernel in X."""
    prm = spec.params
    sig = prm.sigma
    out = {"k": spec.k, "sign": spec.sign_label, "t": spec.t, "lambda_k": spec.lambda_k}
    if spec.k == 0:
        if spec.sign < 0:
            e = sig + 2.0 - prm.n_dim - prm.p / prm.beta
            out.update(exponent=e, closed_form=(prm.xi - 1.0) * (-1.0 - prm.p) / (prm.p - 1.0),
                       admissible=e >= 0.0, kernel="trivial" if e < 0.0 else "nontrivial",
                       reason="r^(sigma+1)/mu ~ r^(sigma+2-N-p/beta) is unbounded at 0; "
                              "the homogeneous constant is forced to vanish")
        else:
            e = sig + 2.0 - prm.n_dim + prm.p / prm.beta
            out.update(exponent=e, closed_form=prm.xi - 1.0, admissible=e >= 0.0,
                       kernel="one-dimensional",
                       reason="r^(sigma+1)/mu ~ r^(xi-1) is bounded; the solution is fixed "
                              "by the inner anchor")
        out["limit_exponent"] = sig + 2.0 - prm.n_dim
        return out
    ex = mode_exponents(prm, spec.k, spec.sign)
    lo, hi = limit_exponents(prm, spec.k)
    out.update(
        gamma_plus=ex.gamma_plus, gamma_minus=ex.gamma_minus,
        gamma_plus_plus_sigma=ex.gamma_plus + sig, gamma_minus_plus_sigma=ex.gamma_minus + sig,
        residual=max(ex.residual_plus, ex.residual_minus),
        limit_gamma_plus=hi, limit_gamma_minus=lo,
        straddles=(ex.gamma_minus + sig < 0.0 < ex.gamma_plus + sig),
        limit_straddles=(lo + sig < 0.0 < hi + sig),
    )
    out["kernel"] = "trivial" if out["straddles"] and out["limit_straddles"] else "unresolved"
    return out


def check_same_grid(*fields_):
    g0 = fields_[0].grid
    for f in fields_[1:]:
        if f.grid != g0:
            raise GridMismatch("fields live on different grids")
    return g0
