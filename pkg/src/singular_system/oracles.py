"""Closed-form reference solutions used by the certificates and the tests.

Manufactured solutions fix a smooth a*, apply the operator analytically and
hand the resulting right-hand side to a solver; the solver must return a*.
"""
from __future__ import annotations

import numpy as np

from .grid import RadialField, RadialGrid
from .linear_system import CoupledRHS, coupled_operator
from .mode_solver import ModeSpec, apply_operator
from .params import Params, characteristic, mode_exponents


def manufactured_k0(spec: ModeSpec, grid: RadialGrid):
    """a* = (1-r)^2 (a*(1) = a*'(1) = 0, so every inner anchor reproduces it
    up to r^(sigma+1) a*'(anchor)). Returns (a*, b)."""
    r = grid.r
    a = (1.0 - r) ** 2
    da = -2.0 * (1.0 - r)
    d2a = 2.0 * np.ones_like(r)
    b = apply_operator(spec, r, a, da, d2a)
    return RadialField(grid, a, da, "analytic", "a*"), RadialField(grid, b, label="b*")


def manufactured_mode(spec: ModeSpec, grid: RadialGrid):
    """a* = r (1-r)^2, which vanishes at 0 and 1 and has no r^gamma- part."""
    r = grid.r
    a = r * (1.0 - r) ** 2
    da = (1.0 - r) ** 2 - 2.0 * r * (1.0 - r)
    d2a = -4.0 * (1.0 - r) + 2.0 * r
    b = apply_operator(spec, r, a, da, d2a)
    return RadialField(grid, a, da, "analytic", "a*"), RadialField(grid, b, label="b*")


def unit_rhs_solution(prm: Params, k, sign, grid: RadialGrid):
    """Exact t = 0 solution for b = r^(-sigma-2), k >= 1.

    r^g is mapped to -P(g) r^(g-2) with P the characteristic polynomial, so
    a = K (r^-sigma - r^g+) with K = -1/P(-sigma).
    """
    ex = mode_exponents(prm, k, sign)
    K = -1.0 / characteristic(prm, k, sign, -prm.sigma)
    r = grid.r
    sig = prm.sigma
    gp = ex.gamma_plus
    a = K * (r ** -sig - r ** gp)
    da = K * (-sig * r ** (-sig - 1.0) - gp * r ** (gp - 1.0))
    return RadialField(grid, a, da, "analytic", "exact")


def manufactured_pair(prm: Params, t, grid: RadialGrid):
    """(phi*, psi*) with phi*(1) = psi*(1) = 0 and phi*' + psi*' = 0 at r = 1.

    phi* = r (1-r)^2 and psi* = r^2 sin(pi r)^2 / pi; the vanishing of
    (phi* + psi*)' at 1 matches the L+ anchor used for t <= 1.
    Returns (phi*, psi*, CoupledRHS).
    """
    r = grid.r
    ph = (r * (1.0 - r) ** 2, (1.0 - r) ** 2 - 2.0 * r * (1.0 - r), -4.0 * (1.0 - r) + 2.0 * r)
    s = np.sin(np.pi * r)
    c = np.cos(np.pi * r)
    ps = (r ** 2 * s * s / np.pi,
          2.0 * r * s * s / np.pi + 2.0 * r ** 2 * s * c,
          2.0 * s * s / np.pi + 8.0 * r * s * c + 2.0 * np.pi * r ** 2 * (c * c - s * s))
    f, g = coupled_operator(prm, t, r, ph, ps)
    phi = RadialField(grid, ph[0], ph[1], "analytic", "phi*")
    psi = RadialField(grid, ps[0], ps[1], "analytic", "psi*")
    return phi, psi, CoupledRHS(RadialField(grid, f, label="f*"), RadialField(grid, g, label="g*"))
