"""Geometric radial grids, sampled radial fields and the weighted sup-norms.

    ||phi||_X = sup r^sigma |phi| + r^(sigma+1) |phi'|
    ||f||_Y   = sup r^(sigma+2) |f|

Suprema are maxima over grid nodes, so they under-estimate the continuous
suprema by O(h^2) in log r; nothing is claimed about (0, r_min).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DomainError, GridMismatch, MissingDerivative
from .numerics import fd_weights

DEFAULT_R_MIN = 1e-6
DEFAULT_NODES = 2048
DERIV_KINDS = ("analytic", "quadrature", "finite-difference")
END_POINTS = 8


@dataclass(frozen=True)
class RadialGrid:
    """Nodes r_j = r_min (1/r_min)^(j/M), j = 0..M, with r_M = 1 exactly."""

    r_min: float = DEFAULT_R_MIN
    node_count: int = DEFAULT_NODES

    def __post_init__(self):
        if not (0.0 < self.r_min < 1.0):
            raise DomainError(f"r_min must lie in (0, 1), got {self.r_min!r}")
        if int(self.node_count) != self.node_count or self.node_count < 16:
            raise DomainError(f"node_count must be an integer >= 16, got {self.node_count!r}")
        object.__setattr__(self, "r_min", float(self.r_min))
        object.__setattr__(self, "node_count", int(self.node_count))

    @property
    def M(self):
        return self.node_count

    @cached_property
    def s(self):
        """Uniform log-radius nodes s_j = ln r_j (s_M = 0)."""
        s = math.log(self.r_min) * (1.0 - np.arange(self.M + 1) / self.M)
        s[-1] = 0.0
        s.flags.writeable = False
        return s

    @cached_property
    def h(self):
        """Log spacing."""
        return -math.log(self.r_min) / self.M

    @cached_property
    def r(self):
        r = np.exp(self.s)
        r[-1] = 1.0
        r.flags.writeable = False
        return r

    @property
    def nodes(self):
        return self.r

    def refine(self):
        """Same r_min, twice the node count (every old node is kept)."""
        return RadialGrid(self.r_min, 2 * self.M)


@dataclass(frozen=True, eq=False)
class RadialField:
    """Samples of a radial function and (optionally) its radial derivative."""

    grid: RadialGrid
    values: np.ndarray
    deriv: np.ndarray | None = None
    deriv_kind: str | None = None
    label: str = field(default="", compare=False)

    def __post_init__(self):
        n = self.grid.M + 1
        v = np.asarray(self.values, dtype=float)
        if v.shape != (n,):
            raise GridMismatch(f"values have shape {v.shape}, grid needs ({n},)")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)
        if self.deriv is not None:
            d = np.asarray(self.deriv, dtype=float)
            if d.shape != (n,):
                raise GridMismatch(f"deriv has shape {d.shape}, grid needs ({n},)")
            if not np.all(np.isfinite(d)):
                raise ValueError("field derivative must be finite")
            object.__setattr__(self, "deriv", d)
            kind = self.deriv_kind or "analytic"
            if kind not in DERIV_KINDS:
                raise ValueError(f"deriv_kind must be one of {DERIV_KINDS}, got {kind!r}")
            object.__setattr__(self, "deriv_kind", kind)

    @property
    def r(self):
        return self.grid.r

    def has_deriv(self):
        return self.deriv is not None

    def scaled_values(self, power):
        return self.grid.r ** power * self.values

    def scaled_deriv(self, power):
        if self.deriv is None:
            raise MissingDerivative("field has no derivative samples")
        return self.grid.r ** power * self.deriv

    def _combine(self, other, op):
        if isinstance(other, RadialField):
            if other.grid != self.grid:
                raise GridMismatch("fields live on different grids")
            vals = op(self.values, other.values)
            if self.deriv is not None and other.deriv is not None:
                kind = self.deriv_kind if self.deriv_kind == other.deriv_kind else "quadrature"
                return RadialField(self.grid, vals, op(self.deriv, other.deriv), kind)
            return RadialField(self.grid, vals)
        raise TypeError("can only combine with another RadialField")

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, c):
        c = float(c)
        d = None if self.deriv is None else c * self.deriv
        return RadialField(self.grid, c * self.values, d, self.deriv_kind)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0


def field_from_function(grid, f, df=None, kind="analytic"):
    """Sample a callable (and optionally its derivative) on the grid."""
    r = grid.r
    return RadialField(grid, f(r), None if df is None else df(r), kind if df is not None else None)


def zero_field(grid):
    z = np.zeros(grid.M + 1)
    return RadialField(grid, z, z.copy(), "analytic")


def norm_X(fld: RadialField, sigma) -> float:
    """max_j r^sigma |phi| + r^(sigma+1) |phi'|."""
    if fld.deriv is None:
        raise MissingDerivative("norm_X needs derivative samples")
    r = fld.grid.r
    return float(np.max(r ** sigma * np.abs(fld.values) + r ** (sigma + 1.0) * np.abs(fld.deriv)))


def norm_Y(fld, sigma) -> float:
    """max_j r^(sigma+2) |f|."""
    if isinstance(fld, RadialField):
        r, v = fld.grid.r, fld.values
    else:
        raise TypeError("norm_Y expects a RadialField")
    return float(np.max(r ** (sigma + 2.0) * np.abs(v)))


def _stencil_rows(r):
    """Interior 3-point weights for the second derivative on nonuniform nodes."""
    hm = r[1:-1] - r[:-2]
    hp = r[2:] - r[1:-1]
    wm = 2.0 / (hm * (hm + hp))
    w0 = -2.0 / (hm * hp)
    wp = 2.0 / (hp * (hm + hp))
    return wm, w0, wp


def fd_second_derivative(fld: RadialField) -> RadialField:
    """Second radial derivative of the sampled values.

    Interior nodes use the 3-point nonuniform second difference; the two end
    nodes use one-sided stencils on END_POINTS nodes. Short one-sided stencils
    have error constants far above the central one and would dominate every
    residual sup once the profile varies steeply at r_min (large t); with 8
    points the interior 3-point error is what remains. Every stencil is exact
    for quadratics.
    """
    r, u = fld.grid.r, fld.values
    out = np.empty_like(u)
    wm, w0, wp = _stencil_rows(r)
    out[1:-1] = wm * u[:-2] + w0 * u[1:-1] + wp * u[2:]
    w_lo = fd_weights(r[:END_POINTS], r[0], 2)
    w_hi = fd_weights(r[-END_POINTS:], r[-1], 2)
    out[0] = w_lo @ u[:END_POINTS]
    out[-1] = w_hi @ u[-END_POINTS:]
    return RadialField(fld.grid, out)


def fd_first_derivative(fld: RadialField) -> RadialField:
    """3-point nonuniform first derivative (one-sided 3-point at the ends)."""
    r, u = fld.grid.r, fld.values
    out = np.empty_like(u)
    hm = r[1:-1] - r[:-2]
    hp = r[2:] - r[1:-1]
    out[1:-1] = (-hp / (hm * (hm + hp)) * u[:-2] + (hp - hm) / (hm * hp) * u[1:-1]
                 + hm / (hp * (hm + hp)) * u[2:])
    out[0] = fd_weights(r[:3], r[0], 1) @ u[:3]
    out[-1] = fd_weights(r[-3:], r[-1], 1) @ u[-3:]
    return RadialField(fld.grid, u, out, "finite-difference")


def write_csv(path, columns: dict):
    """Write equal-length columns with a header and 17 significant digits."""
    names = list(columns)
    data = np.column_stack([np.asarray(columns[k], dtype=float) for k in names])
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header=",".join(names), comments="")


def read_csv(path):
    """Inverse of write_csv: returns {column: array}."""
    with open(path) as fh:
        names = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {k: data[:, i] for i, k in enumerate(names)}


def field_to_csv(fld: RadialField, path):
    deriv = fld.deriv if fld.deriv is not None else np.full_like(fld.values, np.nan)
    write_csv(path, {"r": fld.grid.r, "value": fld.values, "deriv": deriv})
