"""Exponent bundle for the level estimates, the iteration and the gamma threshold."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np


class ExponentError(ValueError):
    pass


@dataclass(frozen=True)
class ExponentSet:
    N: int
    t: float
    p: float
    q: float
    s: float
    s_star: float
    beta: float
    theta: float
    xi: float
    eta: float
    mu: float
    a_bold: float
    b_bold: float
    c_bold: float

    def as_dict(self) -> dict:
        return asdict(self)

    def rescaled(self, lam: float) -> "ExponentSet":
        """Same bundle with xi and eta both multiplied by ``lam``."""
        return with_ratio(self, xi=self.xi * lam, eta=self.eta * lam)


def sobolev_conjugate(N: int, s: float) -> float:
    return N * s / (N - s)


def _dependent(N, p, theta, xi, eta):
    mu = (2 * xi * (p - 1) / p + 2 * eta) / (theta - 1)
    a = xi * (theta - 1) / (2 * eta) + xi * (p - 1) / (2 * eta * p)
    b = (xi / eta + N / 2) * (theta - 1)
    c = (xi / eta) * (p - 1) / p
    return mu, a, b, c


def with_ratio(e: ExponentSet, xi: float, eta: float) -> ExponentSet:
    mu, a, b, c = _dependent(e.N, e.p, e.theta, xi, eta)
    return replace(e, xi=xi, eta=eta, mu=mu, a_bold=a, b_bold=b, c_bold=c)


def derive_exponents(N: int, t: float, p: float, q: float) -> ExponentSet:
    """Solve the exponent system for (N, t, p, q) with the normalization xi = 1."""
    if N not in (2, 3):
        raise ExponentError(f"N must be 2 or 3, got {N}")
    if not t > N:
        raise ExponentError(f"t must exceed N (t={t}, N={N})")
    if not p > 1:
        raise ExponentError(f"p must exceed 1 (p={p})")
    if not 2 < q < 2 * p:
        raise ExponentError(f"q must lie in (2, 2p) (q={q}, p={p})")
    s = 2 * q * N * (p - 1) / (N * (2 * p - q) + 2 * q * (p - 1))
    if not 1 < s < N:
        raise ExponentError(f"inadmissible (p,q) for this N: s={s!r} not in (1, {N})")
    s_star = sobolev_conjugate(N, s)
    beta = 1 - 2 / q + (1 - s / t) * (s_star / s) * (2 * p - q) / (p * q)
    theta = (1 / p + math.sqrt(1 / p**2 + 4 * beta)) / 2
    if not theta > 1:
        raise ExponentError(f"degenerate exponent system: theta={theta!r} <= 1")
    xi = 1.0
    eta = beta * xi / theta
    mu, a, b, c = _dependent(N, p, theta, xi, eta)
    return ExponentSet(N, t, p, q, s, s_star, beta, theta, xi, eta, mu, a, b, c)


def default_exponents(N: int = 2) -> ExponentSet:
    return derive_exponents(N, 5.0 if N == 2 else 6.0, 2.0, 3.0)


@dataclass
class ExponentResiduals:
    quadratic: float
    first_equation: float
    second_equation: float
    s_star_identity: float
    theta_gt_one: bool
    a_lt_one: bool
    theta_negative: bool


def validate_exponents(e: ExponentSet) -> ExponentResiduals:
    """Residuals of the defining relations; a reporting operation, never raises."""
    quad = abs(e.theta**2 - e.theta / e.p - e.beta)
    first = abs(e.xi / e.p + e.eta - e.theta * e.xi)
    second = abs(e.beta * e.xi - e.theta * e.eta)
    closed = 2 * e.q * (e.p - 1) / (2 * e.p - e.q)
    ident = abs(sobolev_conjugate(e.N, e.s) - closed) / abs(closed)
    return ExponentResiduals(quad, first, second, ident, e.theta > 1, e.a_bold < 1, e.theta < 0)


def admissible_grid(N: int, n: int = 20, t_max_factor: float = 4.0, p_max: float = 6.0):
    """n^3 parameter points: t in (N, t_max_factor*N], p in (1, p_max], q spread over (2, 2p).

    Points where s falls outside (1, N) are skipped.
    """
    ts = np.linspace(N, t_max_factor * N, n + 1)[1:]
    ps = np.linspace(1.0, p_max, n + 1)[1:]
    fracs = (np.arange(n) + 0.5) / n
    out = []
    for t in ts:
        for p in ps:
            for fr in fracs:
                q = 2 + fr * (2 * p - 2)
                try:
                    out.append(derive_exponents(N, float(t), float(p), float(q)))
                except ExponentError as exc:
                    if "inadmissible" not in str(exc):
                        raise
    return out


def grid_survey(N: int, n: int = 20) -> dict:
    """Check the defining identities and the claims theta > 1, a_bold < 1 over a grid."""
    pts = admissible_grid(N, n)
    res = [validate_exponents(e) for e in pts]
    return {
        "N": N,
        "points": len(pts),
        "max_quadratic_residual": max(r.quadratic for r in res),
        "max_system_residual": max(max(r.first_equation, r.second_equation) for r in res),
        "max_s_star_residual": max(r.s_star_identity for r in res),
        "theta_violations": sum(not r.theta_gt_one for r in res),
        "a_violations": sum(not r.a_lt_one for r in res),
        "min_theta": min(e.theta for e in pts),
        "max_a_bold": max(e.a_bold for e in pts),
    }
