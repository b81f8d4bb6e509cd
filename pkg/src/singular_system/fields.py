"""Built-in right-hand sides and random correction fields.

Right-hand sides are described by their scaled form B = r^(sigma+2) b, which
is what the Y-norm measures; correction fields phi are described in closed
form together with phi' so that norm_X is exact on the grid.
"""
from __future__ import annotations

import numpy as np

from .grid import RadialField, RadialGrid, norm_X
from .params import Params


def rhs_from_scaled(grid: RadialGrid, prm: Params, B, label=""):
    """b = r^-(sigma+2) B as a RadialField."""
    return RadialField(grid, np.asarray(B, dtype=float) * grid.r ** (-(prm.sigma + 2.0)), label=label)


def unit_rhs(grid: RadialGrid, prm: Params):
    """b = r^(-sigma-2), the extremal data with norm_Y = 1."""
    return rhs_from_scaled(grid, prm, np.ones(grid.M + 1), "unit")


def _scaled_profiles(r, rng):
    c = rng.uniform(-1.0, 1.0, 3)
    e = rng.uniform(1.0, 3.0, 2)
    return c[0] + c[1] * r ** e[0] + c[2] * r ** e[1]


BUILTIN_RHS = ("unit", "linear", "half", "cosine", "bump")


def builtin_scaled(name, r):
    """Scaled profiles B(r) of the named built-in right-hand sides."""
    if name == "unit":
        return np.ones_like(r)
    if name == "linear":
        return 1.0 - 2.0 * r
    if name == "half":
        return np.sqrt(r)
    if name == "cosine":
        return np.cos(np.pi * r)
    if name == "bump":
        return np.exp(-np.log(r / 1e-3) ** 2 / 8.0)
    raise KeyError(f"unknown built-in rhs {name!r}; choose from {BUILTIN_RHS}")


def builtin_rhs(grid: RadialGrid, prm: Params, name):
    B = builtin_scaled(name, grid.r)
    return rhs_from_scaled(grid, prm, B / np.max(np.abs(B)), name)


def rhs_family(grid: RadialGrid, prm: Params, size=5, seed=None):
    """Right-hand sides with norm_Y = 1.

    Without a seed the first ``size`` built-ins are returned; with a seed the
    members are random mixtures c0 + c1 r^e1 + c2 r^e2, e_i in [1, 3].
    """
    out = []
    if seed is None:
        for name in BUILTIN_RHS[:size]:
            out.append(builtin_rhs(grid, prm, name))
        return out
    rng = np.random.default_rng(seed)
    while len(out) < size:
        B = _scaled_profiles(grid.r, rng)
        peak = np.max(np.abs(B))
        if peak < 1e-3:
            continue
        out.append(rhs_from_scaled(grid, prm, B / peak, f"mix{len(out)}"))
    return out


def random_x_field(grid: RadialGrid, prm: Params, radius, rng, terms=3, on_sphere=False):
    """A random phi with phi(1) = 0 and norm_X(phi) = radius * u, u ~ U(0, 1]
    (u = 1 with ``on_sphere``).

    phi = sum c_i (r^m_i - 1) with m_i in (-sigma, 2], so r^sigma phi and
    r^(sigma+1) phi' stay bounded at the origin.
    """
    r = grid.r
    sig = prm.sigma
    c = rng.normal(size=terms)
    m = rng.uniform(-sig + 1e-3, 2.0, terms)
    vals = sum(ci * (r ** mi - 1.0) for ci, mi in zip(c, m))
    der = sum(ci * mi * r ** (mi - 1.0) for ci, mi in zip(c, m))
    vals[-1] = 0.0
    fld = RadialField(grid, vals, der, "analytic")
    u = rng.uniform(1e-3, 1.0)
    scale = radius * (1.0 if on_sphere else u) / norm_X(fld, sig)
    return fld * scale
