"""The nonlinear correction map, parameter selection and Picard iteration.

With u = w_t + phi and v = w_t + psi the system becomes the coupled linear
system for (phi, psi) with right-hand sides

    H1(psi) = kappa1 |w' + psi'|^p + I(psi),
    H2(phi) = kappa2 |w' + phi'|^p + I(phi),
    I(z)    = |w' + z'|^p - |w'|^p - p |w'|^(p-2) w' z',

and T_t(phi, psi) is the solution of that linear system. A fixed point of T_t
in the ball {||phi||_X, ||psi||_X <= R} gives a solution pair.

All nonlinear terms are evaluated in the scaled variables W = r^(sigma+1) w'
= -g_t and Z = r^(sigma+1) z', for which r^(sigma+2) |w' + z'|^p = |W + Z|^p.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (BallEscape, DomainError, GridMismatch, MaxIterations, MissingDerivative,
                     SearchExhausted)
from .fields import random_x_field
from .grid import RadialField, RadialGrid, norm_X, zero_field
from .linear_system import CoupledRHS, solve_coupled
from .params import Params
from .profile import ProfileSpec, g_scaled, profile_field, scaled_w_values

FAMILIES = ("power", "ramp", "table")
SERIES_CUT = 0.1


@dataclass(frozen=True)
class KappaSpec:
    """A nonnegative continuous radial coefficient with kappa(0) = 0.

    power: c r^alpha;  ramp: c min(r/alpha, 1);  table: piecewise-linear
    through (table_r, table_values), which must start at (0, 0).
    """

    family: str = "power"
    c: float = 0.0
    alpha: float = 1.0
    table_r: tuple = ()
    table_values: tuple = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"kappa family must be one of {FAMILIES}, got {self.family!r}")
        if self.family == "table":
            r = np.asarray(self.table_r, dtype=float)
            v = np.asarray(self.table_values, dtype=float)
            if r.ndim != 1 or r.shape != v.shape or len(r) < 2:
                raise DomainError("kappa table needs matching 1-d arrays of length >= 2")
            if r[0] != 0.0 or v[0] != 0.0 or np.any(np.diff(r) <= 0.0) or r[-1] < 1.0:
                raise DomainError("kappa table must start at (0, 0), increase in r and reach r = 1")
            if np.any(v < 0.0) or not np.all(np.isfinite(v)):
                raise DomainError("kappa table values must be finite and >= 0")
            object.__setattr__(self, "table_r", tuple(r.tolist()))
            object.__setattr__(self, "table_values", tuple(v.tolist()))
        else:
            if not (math.isfinite(self.c) and self.c >= 0.0):
                raise DomainError(f"kappa c must be finite and >= 0, got {self.c!r}")
            if not (math.isfinite(self.alpha) and self.alpha > 0.0):
                raise DomainError(f"kappa alpha must be finite and > 0, got {self.alpha!r}")
            object.__setattr__(self, "c", float(self.c))
            object.__setattr__(self, "alpha", float(self.alpha))

    @classmethod
    def zero(cls):
        return cls("power", 0.0, 1.0)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.family == "power":
            return self.c * r ** self.alpha
        if self.family == "ramp":
            return self.c * np.minimum(r / self.alpha, 1.0)
        return np.interp(r, self.table_r, self.table_values)

    def sup_ball(self, delta):
        """sup of kappa over 0 < r <= delta (exact: monotone families, table maxima)."""
        if self.family != "table":
            return float(self(delta))
        r = np.asarray(self.table_r)
        inside = np.asarray(self.table_values)[r <= delta]
        return float(max(inside.max(initial=0.0), float(self(delta))))

    def is_zero(self):
        if self.family == "table":
            return not any(self.table_values)
        return self.c == 0.0


# ---------------------------------------------------------------- nonlinearity

def power_remainder(x, p):
    """|1 + x|^p - 1 - p x for real x, accurate when |x| is small.

    For |x| < SERIES_CUT the binomial series is summed (term ratio <= 0.1 so
    40 terms reach rounding); elsewhere the direct formula has no cancellation
    problem beyond a few ulps of |1 + x|^p.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return float(power_remainder(x[None], p)[0])
    out = np.abs(1.0 + x) ** p - 1.0 - p * x
    small = np.abs(x) < SERIES_CUT
    if np.any(small):
        xs = x[small]
        coef = p * (p - 1.0) / 2.0
        term = coef * xs * xs
        acc = term.copy()
        for k in range(2, 40):
            coef = coef * (p - k) / (k + 1.0)
            term = coef * xs ** (k + 1)
            acc += term
        out[small] = acc
    return out


def scaled_I(W, Z, p):
    """|W + Z|^p - |W|^p - p |W|^(p-2) W Z for W != 0, via the stable remainder."""
    W = np.asarray(W, dtype=float)
    return np.abs(W) ** p * power_remainder(np.asarray(Z, dtype=float) / W, p)


def nonlinearity_I(prm: Params, t, zeta: RadialField) -> RadialField:
    """I(zeta) = |w' + zeta'|^p - |w'|^p - p |w'|^(p-2) w' zeta' on the grid."""
    if zeta.deriv is None:
        raise MissingDerivative("nonlinearity_I needs derivative samples")
    grid = zeta.grid
    W = -g_scaled(ProfileSpec(prm, t), grid.r)
    Z = zeta.scaled_deriv(prm.sigma + 1.0)
    return RadialField(grid, scaled_I(W, Z, prm.p) * grid.r ** (-(prm.sigma + 2.0)), label="I")


@dataclass
class MapContext:
    """Grid-level data reused by every application of T_t."""

    params: Params
    t: float
    kappa1: KappaSpec
    kappa2: KappaSpec
    grid: RadialGrid
    W: np.ndarray = field(init=False, repr=False)
    k1: np.ndarray = field(init=False, repr=False)
    k2: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        r = self.grid.r
        self.W = -g_scaled(ProfileSpec(self.params, self.t), r)
        self.k1 = self.kappa1(r)
        self.k2 = self.kappa2(r)

    def scaled_rhs(self, phi: RadialField, psi: RadialField):
        """(r^(sigma+2) H1(psi), r^(sigma+2) H2(phi))."""
        p = self.params.p
        sig1 = self.params.sigma + 1.0
        dphi = phi.scaled_deriv(sig1)
        dpsi = psi.scaled_deriv(sig1)
        bf = self.k1 * np.abs(self.W + dpsi) ** p + scaled_I(self.W, dpsi, p)
        bg = self.k2 * np.abs(self.W + dphi) ** p + scaled_I(self.W, dphi, p)
        return bf, bg


def _context(prm, t, kappa1, kappa2, grid):
    return MapContext(prm, float(t), kappa1, kappa2, grid)


def apply_T_ctx(ctx: MapContext, pair):
    phi, psi = pair
    if phi.grid != ctx.grid or psi.grid != ctx.grid:
        raise GridMismatch("pair does not live on the map's grid")
    bf, bg = ctx.scaled_rhs(phi, psi)
    w = ctx.grid.r ** (-(ctx.params.sigma + 2.0))
    rhs = CoupledRHS(RadialField(ctx.grid, bf * w, label="H1"), RadialField(ctx.grid, bg * w, label="H2"))
    sol = solve_coupled(ctx.params, ctx.t, rhs)
    info = {"norm_Y_f": sol.norms["norm_Y_f"], "norm_Y_g": sol.norms["norm_Y_g"],
            "residual_1": sol.residual_1, "residual_2": sol.residual_2}
    return sol.phi, sol.psi, info


def apply_T(prm: Params, t, kappa1: KappaSpec, kappa2: KappaSpec, pair):
    """(phi_hat, psi_hat, info) = T_t(phi, psi) with one coupled linear solve."""
    ctx = _context(prm, t, kappa1, kappa2, pair[0].grid)
    return apply_T_ctx(ctx, pair)


def pair_norm(a, b, sigma):
    return norm_X(a, sigma) + norm_X(b, sigma)


# ---------------------------------------------------------------- probes

def _random_pair(grid, prm, radius, rng, on_sphere=False):
    return (random_x_field(grid, prm, radius, rng, on_sphere=on_sphere),
            random_x_field(grid, prm, radius, rng, on_sphere=on_sphere))


def _contraction_samples(ctx: MapContext, radius, n_pairs, rng):
    sig = ctx.params.sigma
    ratios = []
    skipped = 0
    for i in range(n_pairs):
        a = _random_pair(ctx.grid, ctx.params, radius, rng)
        if i % 2 == 0:
            b = _random_pair(ctx.grid, ctx.params, radius, rng)
        else:
            # nearby pair: probes the local Lipschitz constant
            d = _random_pair(ctx.grid, ctx.params, 1e-2 * radius, rng)
            b = (a[0] + d[0], a[1] + d[1])
        den = pair_norm(b[0] - a[0], b[1] - a[1], sig)
        if den == 0.0:
            skipped += 1
            continue
        ta = apply_T_ctx(ctx, a)
        tb = apply_T_ctx(ctx, b)
        num = pair_norm(tb[0] - ta[0], tb[1] - ta[1], sig)
        ratios.append(num / den)
    return ratios, skipped


def empirical_contraction(prm: Params, t, kappa1, kappa2, R, n_pairs=8, seed=0,
                          grid: RadialGrid | None = None):
    """Largest observed ||T a - T b|| / ||a - b|| over random pairs in the R-ball.

    Norms are the product norm ||phi||_X + ||psi||_X; coincident pairs are
    skipped. Returns (max_ratio, ratios, skipped).
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    grid = grid or RadialGrid()
    ctx = _context(prm, t, kappa1, kappa2, grid)
    rng = np.random.default_rng(seed)
    ratios, skipped = _contraction_samples(ctx, R, n_pairs, rng)
    return (max(ratios) if ratios else float("nan")), ratios, skipped


def _into_probe(ctx: MapContext, R, n_probe, rng):
    """max over probes of max(||phi_hat||_X, ||psi_hat||_X), the origin included.

    Random probes lie on the sphere ||phi||_X = ||psi||_X = R, where the
    nonlinear terms are largest.
    """
    sig = ctx.params.sigma
    z = zero_field(ctx.grid)
    worst = 0.0
    probes = [(z, z)] + [_random_pair(ctx.grid, ctx.params, R, rng, True) for _ in range(n_probe)]
    for pr in probes:
        ph, ps, _ = apply_T_ctx(ctx, pr)
        worst = max(worst, norm_X(ph, sig), norm_X(ps, sig))
    return worst


# ---------------------------------------------------------------- parameter choice

def into_structure(prm: Params, kappa1, kappa2, R, delta, t):
    """R^p + sup_{B_delta}(kappa1 + kappa2) + t^(-p/(p-1)) delta^(-(xi-1) p/(p-1))."""
    e = prm.p / (prm.p - 1.0)
    return (R ** prm.p + kappa1.sup_ball(delta) + kappa2.sup_ball(delta)
            + t ** (-e) * delta ** (-(prm.xi - 1.0) * e))


def contraction_structure(prm: Params, kappa1, kappa2, R, delta, t):
    """sup_{B_delta}(kappa1 + kappa2) + 2 R^(p-1) + 1/(t delta^(xi-1))."""
    return (kappa1.sup_ball(delta) + kappa2.sup_ball(delta) + 2.0 * R ** (prm.p - 1.0)
            + 1.0 / (t * delta ** (prm.xi - 1.0)))


@dataclass
class ParameterChoice:
    R: float
    delta: float
    t: float
    certificate: dict
    table: list = field(default_factory=list, repr=False)

    def as_dict(self):
        return {"R": self.R, "delta": self.delta, "t": self.t, "certificate": self.certificate}


CALIBRATION = ((2.0 ** -4, 2.0 ** -8, 10.0), (2.0 ** -8, 2.0 ** -8, 10.0),
               (2.0 ** -4, 2.0 ** -8, 1e3))


def calibrate(prm, kappa1, kappa2, grid, n_probe=2, n_pairs=4, seed=0, triples=CALIBRATION):
    """Measured surrogates for the two unquantified constants.

    C_into = max measured ||T||_X / into_structure and C_contr = max measured
    Lipschitz ratio / contraction_structure over the calibration triples.
    """
    rng = np.random.default_rng(seed)
    c_into = 0.0
    c_con = 0.0
    rows = []
    for R, delta, t in triples:
        ctx = _context(prm, t, kappa1, kappa2, grid)
        into = _into_probe(ctx, R, n_probe, rng)
        ratios, _ = _contraction_samples(ctx, R, n_pairs, rng)
        lip = max(ratios) if ratios else 0.0
        si = into_structure(prm, kappa1, kappa2, R, delta, t)
        sc = contraction_structure(prm, kappa1, kappa2, R, delta, t)
        c_into = max(c_into, into / si)
        c_con = max(c_con, lip / sc)
        rows.append({"R": R, "delta": delta, "t": t, "into": into, "lipschitz": lip,
                     "into_structure": si, "contraction_structure": sc})
    return c_into, c_con, rows


def positivity_cap(prm: Params, t, grid: RadialGrid, decades=2.0):
    """Half of r^sigma w_t at r = r_min 10^decades.

    Since r^sigma w_t decreases in r, any R below this keeps
    r^sigma u >= r^sigma w_t - R > 0 on the first ``decades`` above r_min.
    """
    r_hi = np.array([grid.r_min * 10.0 ** decades])
    return 0.5 * float(scaled_w_values(ProfileSpec(prm, t), r_hi)[0])


def choose_parameters(prm: Params, kappa1: KappaSpec, kappa2: KappaSpec,
                      grid: RadialGrid | None = None, t_exponents=range(1, 7),
                      R_exponents=range(2, 41), delta_exponents=range(1, 61),
                      t_fixed=None, n_probe=2, n_pairs=4, seed=0) -> ParameterChoice:
    """Smallest t = 10^m (then largest R = 2^-j) passing both certificates.

    Stage 1 (prediction): with measured constants C_into, C_contr a triple is
    a candidate when C_into * into_structure <= R and
    C_contr * contraction_structure <= 1/2 for some delta = 2^-j.
    Stage 2 (certification): the candidate's (R, t) is probed directly;
    it is accepted only if every probed ||T||_X <= R and every probed
    Lipschitz ratio <= 1/2. ``t_fixed`` restricts the search to one t and
    then calibrates at that t, since the measured ratios shrink quickly with
    t and constants taken at t <= 10^3 are far too pessimistic beyond it.
    Positivity near the origin needs R below the profile's scaled size, so R
    is also capped at half of r^sigma w_t at 100 r_min (see positivity_cap).
    Raises SearchExhausted with the best margins if nothing passes.
    """
    grid = grid or RadialGrid()
    triples = CALIBRATION
    if t_fixed is not None and float(t_fixed) > 1.0:
        R_top = 2.0 ** -np.ceil(-np.log2(positivity_cap(prm, float(t_fixed), grid)))
        triples = ((R_top, 2.0 ** -8, float(t_fixed)), (R_top / 16.0, 2.0 ** -8, float(t_fixed)))
    c_into, c_con, calib = calibrate(prm, kappa1, kappa2, grid, n_probe, n_pairs, seed, triples)
    t_values = [float(t_fixed)] if t_fixed is not None else [10.0 ** m for m in t_exponents]
    table = []
    best = None
    rng = np.random.default_rng(seed + 1)
    for t in t_values:
        if t <= 1.0:
            raise DomainError(f"the construction needs t > 1, got {t!r}")
        cap = positivity_cap(prm, t, grid)
        for j in R_exponents:
            R = 2.0 ** -j
            if R > cap:
                continue
            cand = None
            for jd in delta_exponents:
                delta = 2.0 ** -jd
                mi = R - c_into * into_structure(prm, kappa1, kappa2, R, delta, t)
                mc = 0.5 - c_con * contraction_structure(prm, kappa1, kappa2, R, delta, t)
                row = {"t": t, "R": R, "delta": delta, "into_margin": mi, "contraction_margin": mc}
                if best is None or min(mi / R, mc) > min(best["into_margin"] / best["R"],
                                                         best["contraction_margin"]):
                    best = row
                if mi >= 0.0 and mc >= 0.0:
                    cand = row
                    break
            if cand is None:
                continue
            ctx = _context(prm, t, kappa1, kappa2, grid)
            into = _into_probe(ctx, R, n_probe, rng)
            ratios, _ = _contraction_samples(ctx, R, n_pairs, rng)
            lip = max(ratios) if ratios else 0.0
            cand.update(measured_into=into, measured_contraction=lip,
                        certified=bool(into <= R and lip <= 0.5))
            table.append(cand)
            if cand["certified"]:
                cert = {"C_into": c_into, "C_contraction": c_con,
                        "into_margin": cand["into_margin"],
                        "contraction_margin": cand["contraction_margin"],
                        "measured_into": into, "measured_contraction": lip,
                        "calibration": calib}
                return ParameterChoice(R, cand["delta"], t, cert, table)
    raise SearchExhausted(
        f"no (R, delta, t) passed both certificates (C_into={c_into:.3g}, "
        f"C_contraction={c_con:.3g})", best=best)


# ---------------------------------------------------------------- Picard

@dataclass
class SolutionPair:
    phi: RadialField
    psi: RadialField
    u: RadialField
    v: RadialField
    w: RadialField
    t: float
    R_ball: float


@dataclass
class IterationReport:
    iterations: list
    converged: bool
    empirical_contraction: float
    parameters: dict

    def as_dict(self):
        return {"iterations": self.iterations, "converged": self.converged,
                "empirical_contraction": self.empirical_contraction,
                "parameters": self.parameters}


NOISE_FLOOR = 1e-13


def tail_contraction(steps, floor=NOISE_FLOOR):
    """max step_{i+1}/step_i over the last half of the usable steps.

    Steps at or below ``floor`` times the first step are rounding noise and
    are not used as denominators.
    """
    if len(steps) < 2 or steps[0] == 0.0:
        return 0.0
    thresh = floor * steps[0]
    ratios = [steps[i + 1] / steps[i] for i in range(len(steps) - 1) if steps[i] > thresh]
    if not ratios:
        return 0.0
    tail = ratios[len(ratios) // 2:]
    return float(max(tail))


def assemble(prm: Params, t, phi, psi, R, grid):
    w = profile_field(ProfileSpec(prm, t), grid)
    u = RadialField(grid, w.values + phi.values, w.deriv + phi.deriv, "quadrature", "u")
    v = RadialField(grid, w.values + psi.values, w.deriv + psi.deriv, "quadrature", "v")
    return SolutionPair(phi, psi, u, v, w, float(t), float(R))


def picard(prm: Params, t, kappa1: KappaSpec, kappa2: KappaSpec, R, tol=1e-8, max_iter=200,
           grid: RadialGrid | None = None, delta=None):
    """Iterate (phi, psi) <- T_t(phi, psi) from (0, 0) until the step is <= tol.

    Raises BallEscape if an iterate leaves the R-ball and MaxIterations if
    the budget runs out; both carry the partial IterationReport.
    """
    if tol <= 0.0:
        raise ValueError("tol must be > 0")
    grid = grid or RadialGrid()
    sig = prm.sigma
    ctx = _context(prm, t, kappa1, kappa2, grid)
    phi = zero_field(grid)
    psi = zero_field(grid)
    rows = []
    steps = []
    params = {"R": float(R), "delta": None if delta is None else float(delta), "t": float(t)}
    for i in range(1, max_iter + 1):
        nphi, npsi, info = apply_T_ctx(ctx, (phi, psi))
        step = pair_norm(nphi - phi, npsi - psi, sig)
        steps.append(step)
        a, b = norm_X(nphi, sig), norm_X(npsi, sig)
        ratio = step / steps[-2] if len(steps) > 1 and steps[-2] > 0 else None
        rows.append({"index": i, "norm_X_phi": a, "norm_X_psi": b, "step_norm": step,
                     "ratio": ratio, "residual": max(info["residual_1"], info["residual_2"])})
        phi, psi = nphi, npsi
        if a > R or b > R:
            rep = IterationReport(rows, False, tail_contraction(steps), params)
            raise BallEscape(f"iterate {i} left the ball: ||phi||_X={a:.3e}, ||psi||_X={b:.3e}, "
                             f"R={R:.3e}", rep)
        if step <= tol:
            rep = IterationReport(rows, True, tail_contraction(steps), params)
            return assemble(prm, t, phi, psi, R, grid), rep
    rep = IterationReport(rows, False, tail_contraction(steps), params)
    raise MaxIterations(f"no convergence in {max_iter} iterations (last step {steps[-1]:.3e})", rep)


def construct(prm: Params, kappa1, kappa2, grid=None, t=None, R=None, delta=None, tol=1e-8,
              max_iter=200, seed=0):
    """choose_parameters when (t, R) are not both given, then picard.

    Returns (SolutionPair, IterationReport, ParameterChoice or None).
    """
    grid = grid or RadialGrid()
    choice = None
    if R is None:
        choice = choose_parameters(prm, kappa1, kappa2, grid, t_fixed=t, seed=seed)
        t, R, delta = choice.t, choice.R, choice.delta
    elif t is None:
        raise DomainError("an explicit R needs an explicit t")
    pair, rep = picard(prm, t, kappa1, kappa2, R, tol, max_iter, grid, delta)
    return pair, rep, choice


def fixed_point_defect(prm, pair: SolutionPair, kappa1, kappa2):
    """||T(phi, psi) - (phi, psi)|| in the product norm."""
    ph, ps, _ = apply_T(prm, pair.t, kappa1, kappa2, (pair.phi, pair.psi))
    return pair_norm(ph - pair.phi, ps - pair.psi, prm.sigma)


def rhs_norms(prm, pair: SolutionPair, kappa1, kappa2):
    ctx = _context(prm, pair.t, kappa1, kappa2, pair.phi.grid)
    bf, bg = ctx.scaled_rhs(pair.phi, pair.psi)
    return float(np.max(np.abs(bf))), float(np.max(np.abs(bg)))
