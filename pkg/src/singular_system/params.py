"""Problem constants, derived exponents and the exponent algebra.

For a dimension N >= 3 and gradient exponent N/(N-1) < p < 2 the package
works with

    xi    = (p-1)(N-1)
    beta  = (p-1)/(xi-1)
    sigma = (2-p)/(p-1)
    C_beta = beta**(-1/(p-1))

The spherical-harmonic eigenvalues are lambda_k = k(k+N-2), and the Euler
exponents of a mode are the roots of g**2 + (N-2-kappa/beta) g - lambda_k = 0
with kappa = +p or -p.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import CertificateError, DomainError

ENDPOINT_MARGIN = 1e-12
IDENTITY_TOL = 1e-12


@dataclass(frozen=True)
class Params:
    n_dim: int
    p: float
    xi: float
    beta: float
    sigma: float
    c_beta: float

    @property
    def q(self):
        """Conjugate exponent p/(p-1)."""
        return self.p / (self.p - 1.0)


def derive_params(n_dim, p) -> Params:
    """Validate (N, p) and compute the derived constants.

    Raises DomainError naming the violated bound.
    """
    if isinstance(n_dim, bool) or int(n_dim) != n_dim:
        raise DomainError(f"N must be an integer, got {n_dim!r}")
    n_dim = int(n_dim)
    p = float(p)
    if not math.isfinite(p):
        raise DomainError(f"p must be finite, got {p!r}")
    if n_dim < 3:
        raise DomainError(f"N must be >= 3, got {n_dim}")
    lower = n_dim / (n_dim - 1.0)
    if p <= lower + ENDPOINT_MARGIN:
        raise DomainError(
            f"p must be > N/(N-1) = {lower!r} (strict, margin {ENDPOINT_MARGIN:g}); got {p!r}")
    if p >= 2.0 - ENDPOINT_MARGIN:
        raise DomainError(f"p must be < 2 (strict, margin {ENDPOINT_MARGIN:g}); got {p!r}")

    xi = (p - 1.0) * (n_dim - 1)
    beta = (p - 1.0) / (xi - 1.0)
    sigma = (2.0 - p) / (p - 1.0)
    c_beta = beta ** (-1.0 / (p - 1.0))
    params = Params(n_dim, p, xi, beta, sigma, c_beta)
    worst = max(identity_residuals(params).values())
    if worst > IDENTITY_TOL:
        raise CertificateError(f"identity check failed for N={n_dim}, p={p}: {worst:.3e}")
    return params


def _scaled(lhs, rhs, scale):
    return abs(lhs - rhs) / max(scale, 1e-300)


def identity_residuals(prm: Params) -> dict:
    """Residuals of the eight algebraic identities between derived constants.

    Each residual is |lhs - rhs| divided by the sum of magnitudes of the
    additive terms involved, i.e. the relative error a floating-point
    evaluation can be expected to attain even near the endpoints of the
    admissible p-range.
    """
    n, p, xi, b, s, cb = prm.n_dim, prm.p, prm.xi, prm.beta, prm.sigma, prm.c_beta
    out = {}
    rhs = 1.0 / (p - 1.0)
    out["sigma+1=1/(p-1)"] = _scaled(s + 1.0, rhs, abs(s) + 1.0 + rhs)
    out["(sigma+1)p=sigma+2"] = _scaled((s + 1.0) * p, s + 2.0, (s + 1.0) * p + s + 2.0)
    out["beta(xi-1)=p-1"] = _scaled(b * (xi - 1.0), p - 1.0, b * (xi + 1.0) + p + 1.0)
    out["N-2-sigma=1/beta"] = _scaled(n - 2.0 - s, 1.0 / b, n + 2.0 + s + 1.0 / b)
    lhs = s + 2.0 - n - p / b
    rhs = (xi - 1.0) * (-1.0 - p) / (p - 1.0)
    out["sigma+2-N-p/beta=(xi-1)(-1-p)/(p-1)"] = _scaled(
        lhs, rhs, s + 2.0 + n + p / b + (xi + 1.0) * (1.0 + p) / (p - 1.0))
    lhs = (n - 1.0) * p - s - 2.0
    rhs = (xi - 1.0) * p / (p - 1.0)
    out["(N-1)p-sigma-2=(xi-1)p/(p-1)"] = _scaled(
        lhs, rhs, (n - 1.0) * p + s + 2.0 + (xi + 1.0) * p / (p - 1.0))
    out["N-3-sigma-p/beta=-xi"] = _scaled(n - 3.0 - s - p / b, -xi, n + 3.0 + s + p / b + xi)
    out["C_beta^(p-1)=1/beta"] = _scaled(cb ** (p - 1.0), 1.0 / b, cb ** (p - 1.0) + 1.0 / b)
    return out


def eigenvalue(prm: Params, k) -> float:
    """Sphere-Laplacian eigenvalue lambda_k = k(k+N-2)."""
    if int(k) != k or k < 0:
        raise DomainError(f"mode index must be a nonnegative integer, got {k!r}")
    k = int(k)
    return float(k * (k + prm.n_dim - 2))


def parse_sign(kappa_sign) -> int:
    """Normalize '+', '-', +1, -1 (or +p/-p) to +1 / -1."""
    if isinstance(kappa_sign, str):
        s = kappa_sign.strip().lower()
        if s in ("+", "plus", "+p", "pos"):
            return 1
        if s in ("-", "minus", "-p", "neg"):
            return -1
        raise DomainError(f"unknown sign {kappa_sign!r}")
    v = float(kappa_sign)
    if v > 0:
        return 1
    if v < 0:
        return -1
    raise DomainError("sign must be nonzero")


@dataclass(frozen=True)
class ModeExponents:
    k: int
    lambda_k: float
    gamma_plus: float
    gamma_minus: float
    kappa_sign: int      # +1 for kappa=+p, -1 for kappa=-p
    residual_plus: float
    residual_minus: float


def quadratic_roots(b, lam):
    """Real roots (lo, hi) of g**2 + b g - lam with lam >= 0, without cancellation."""
    disc = math.sqrt(b * b + 4.0 * lam)
    if b >= 0.0:
        lo = -0.5 * (b + disc)
        hi = 0.0 if lam == 0.0 else -lam / lo
    else:
        hi = 0.5 * (disc - b)
        lo = 0.0 if lam == 0.0 else -lam / hi
    return lo, hi


def characteristic(prm: Params, k, kappa_sign, gamma):
    lam = eigenvalue(prm, k)
    kappa = parse_sign(kappa_sign) * prm.p
    return gamma * gamma + (prm.n_dim - 2.0 - kappa / prm.beta) * gamma - lam


def mode_exponents(prm: Params, k, kappa_sign) -> ModeExponents:
    """Euler exponents of mode k for the drift kappa = +p or -p."""
    sgn = parse_sign(kappa_sign)
    lam = eigenvalue(prm, k)
    b = prm.n_dim - 2.0 - sgn * prm.p / prm.beta
    lo, hi = quadratic_roots(b, lam)
    return ModeExponents(
        int(k), lam, hi, lo, sgn,
        abs(hi * hi + b * hi - lam), abs(lo * lo + b * lo - lam))


def limit_exponents(prm: Params, k):
    """Exponents of the drift-free limit g**2 + (N-2) g - lambda_k = 0 (t -> infinity)."""
    return quadratic_roots(prm.n_dim - 2.0, eigenvalue(prm, k))


@dataclass(frozen=True)
class SignReport:
    direct: float
    closed_form: float
    scaled_error: float
    negative: bool


def sign_certificate(prm: Params, tol=1e-10) -> SignReport:
    """Evaluate f(-sigma-1), f(g) = g**2 + (N-2+p/beta) g - lambda_1, two ways.

    The direct substitution and the closed form 2p(1-xi)/(p-1)**2 must agree
    and both be negative; otherwise CertificateError.
    """
    n, p = prm.n_dim, prm.p
    g = -(prm.sigma + 1.0)
    c1 = n - 2.0 + p / prm.beta
    lam1 = n - 1.0
    direct = g * g + c1 * g - lam1
    closed = 2.0 * p * (1.0 - prm.xi) / (p - 1.0) ** 2
    scale = g * g + abs(c1 * g) + lam1
    err = abs(direct - closed) / scale
    neg = direct < 0.0 and closed < 0.0
    if not neg:
        raise CertificateError(f"f(-sigma-1) not negative: direct={direct!r}, closed={closed!r}")
    if err > tol:
        raise CertificateError(f"f(-sigma-1) evaluations disagree: scaled error {err:.3e}")
    return SignReport(direct, closed, err, neg)
