"""The coupled radial linear system and its decoupling.

For the profile gradient w' = w_t' the pair (phi, psi) solves

    -phi'' - (N-1) phi'/r + q(r) psi'/r = f,
    -psi'' - (N-1) psi'/r + q(r) phi'/r = g,       phi(1) = psi(1) = 0,

with q(r) = p |w'|^(p-1) r = p/(beta + t r^(xi-1)). Sum and difference give
two scalar k = 0 problems, L+ zeta1 = f + g and L- zeta2 = f - g, and
phi = (zeta1 + zeta2)/2, psi = (zeta1 - zeta2)/2.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatch
from .grid import RadialField, norm_X, norm_Y
from .mode_solver import ModeSpec, ModeSolution, drift, solve_k0
from .numerics import uniform_derivative
from .params import Params

RESIDUAL_TOL = 1e-6


@dataclass(frozen=True)
class CoupledRHS:
    f: RadialField
    g: RadialField

    def __post_init__(self):
        if self.f.grid != self.g.grid:
            raise GridMismatch("f and g live on different grids")

    @property
    def grid(self):
        return self.f.grid

    def scaled(self, prm: Params):
        """(B_f, B_g) = r^(sigma+2) (f, g)."""
        return self.f.scaled_values(prm.sigma + 2.0), self.g.scaled_values(prm.sigma + 2.0)


@dataclass
class CoupledSolution:
    phi: RadialField
    psi: RadialField
    zeta1: ModeSolution
    zeta2: ModeSolution
    rhs: CoupledRHS
    t: float
    stability_ratio: float
    residual_1: float
    residual_2: float
    norms: dict = field(default_factory=dict)

    def report(self):
        """JSON-ready summary."""
        return {"t": self.t, "norm_Y_f": self.norms["norm_Y_f"], "norm_Y_g": self.norms["norm_Y_g"],
                "norm_X_phi": self.norms["norm_X_phi"], "norm_X_psi": self.norms["norm_X_psi"],
                "ratio": self.stability_ratio, "residual_1": self.residual_1,
                "residual_2": self.residual_2}


def coupled_operator(prm: Params, t, r, phi, psi):
    """Left-hand sides of both lines for analytic samples.

    ``phi`` and ``psi`` are triples (value, first, second derivative).
    """
    q = drift(ModeSpec(prm, 0, +1, t), r)
    _, p1, p2 = phi
    _, s1, s2 = psi
    n1 = prm.n_dim - 1.0
    return (-p2 - n1 * p1 / r + q * s1 / r,
            -s2 - n1 * s1 / r + q * p1 / r)


def coupled_residuals(prm: Params, t, phi: RadialField, psi: RadialField, rhs: CoupledRHS):
    """r^(sigma+2)-weighted residuals of both lines at every node.

    Uses the scaled derivatives D = r^(sigma+1) phi' and 6th-order differences
    in s = ln r for D', independent of the quadrature that produced D.
    """
    grid = phi.grid
    sig = prm.sigma
    q = drift(ModeSpec(prm, 0, +1, t), grid.r)
    dp = phi.scaled_deriv(sig + 1.0)
    ds = psi.scaled_deriv(sig + 1.0)
    bf, bg = rhs.scaled(prm)
    c = sig + 2.0 - prm.n_dim
    r1 = -uniform_derivative(dp, grid.h, 6) + c * dp + q * ds - bf
    r2 = -uniform_derivative(ds, grid.h, 6) + c * ds + q * dp - bg
    return r1, r2


def _half(a: RadialField, b: RadialField, sign):
    return RadialField(a.grid, 0.5 * (a.values + sign * b.values),
                       0.5 * (a.deriv + sign * b.deriv), "quadrature")


def solve_coupled(prm: Params, t, rhs: CoupledRHS) -> CoupledSolution:
    """Decouple, solve the two k = 0 problems, recombine, and certify.

    The residuals are reported relative to norm_Y(f) + norm_Y(g) (the same
    denominator as the stability ratio).
    """
    f, g = rhs.f, rhs.g
    F = RadialField(f.grid, f.values + g.values, label="F")
    G = RadialField(f.grid, f.values - g.values, label="G")
    z1 = solve_k0(ModeSpec(prm, 0, +1, t), F)
    z2 = solve_k0(ModeSpec(prm, 0, -1, t), G)
    phi = _half(z1.a, z2.a, +1.0)
    psi = _half(z1.a, z2.a, -1.0)
    sig = prm.sigma
    nf, ng = norm_Y(f, sig), norm_Y(g, sig)
    nphi, npsi = norm_X(phi, sig), norm_X(psi, sig)
    denom = nf + ng
    ratio = (nphi + npsi) / denom if denom > 0 else 0.0
    r1, r2 = coupled_residuals(prm, t, phi, psi, rhs)
    scale = denom if denom > 0 else 1.0
    res1 = float(np.max(np.abs(r1)) / scale)
    res2 = float(np.max(np.abs(r2)) / scale)
    norms = {"norm_Y_f": nf, "norm_Y_g": ng, "norm_X_phi": nphi, "norm_X_psi": npsi}
    return CoupledSolution(phi, psi, z1, z2, rhs, float(t), ratio, res1, res2, norms)


@dataclass
class SweepReport:
    t_list: list
    ratios: np.ndarray          # shape (len(t_list), len(family))
    residuals: np.ndarray

    @property
    def per_t_sup(self):
        """Family-sup of the ratio at each t (the estimate of the solution-operator norm)."""
        return self.ratios.max(axis=1)

    def summary(self):
        sup = self.per_t_sup
        pooled = self.ratios
        return {
            "t": list(self.t_list),
            "ratios": pooled.tolist(),
            "per_t_sup": sup.tolist(),
            "max": float(pooled.max()), "min": float(pooled.min()),
            "spread": float(sup.max() / sup.min()) if sup.min() > 0 else math.inf,
            "pooled_spread": float(pooled.max() / pooled.min()) if pooled.min() > 0 else math.inf,
            "max_residual": float(self.residuals.max()),
        }


def stability_sweep(prm: Params, t_list, rhs_family, workers=1) -> SweepReport:
    """Stability ratios over a t-grid and a family of right-hand sides.

    ``spread`` is max_t / min_t of the family-sup ratio; ``pooled_spread``
    also mixes different data and is reported for information.
    """
    t_list = list(t_list)
    family = list(rhs_family)
    if not t_list or not family:
        raise ValueError("stability_sweep needs a nonempty t-list and rhs family")
    jobs = [(t, rhs) for t in t_list for rhs in family]

    def run(job):
        sol = solve_coupled(prm, job[0], job[1])
        return sol.stability_ratio, max(sol.residual_1, sol.residual_2)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(run, jobs))
    else:
        out = [run(j) for j in jobs]
    shape = (len(t_list), len(family))
    ratios = np.array([o[0] for o in out]).reshape(shape)
    res = np.array([o[1] for o in out]).reshape(shape)
    return SweepReport(t_list, ratios, res)
