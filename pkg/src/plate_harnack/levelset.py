"""Superlevel sets of grid functions and the De Giorgi machinery built on them.

Every inequality checker evaluates its right-hand side with the unknown
constant set to 1 and reports the ratio lhs/rhs_unit as the implied constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exponents import ExponentSet
from .geometry import Ball, GeometryError, ball_cells, interior_distance, unit_ball_volume
from .plate import ScalarField

# values of Phi below this are treated as exact zeros
PHI_FLOOR = 1e-300


@dataclass
class CheckReport:
    lhs: float
    rhs_unit: float
    context: dict = field(default_factory=dict)

    @property
    def implied_constant(self) -> float:
        if self.lhs <= 0:
            return 0.0
        if self.rhs_unit <= 0:
            return math.inf
        return self.lhs / self.rhs_unit

    def passes(self, c: float) -> bool:
        return self.lhs <= c * self.rhs_unit

    def row(self) -> dict:
        return {"lhs": self.lhs, "rhs_unit": self.rhs_unit, "implied_constant": self.implied_constant, **self.context}


@dataclass
class LevelSetStats:
    k: float
    r: float
    measure: float
    integrals: dict
    grad_t_integral: float


class BallData:
    """Values, gradient norms and center distances of the interior cells in a ball."""

    def __init__(self, u: ScalarField, center, r: float):
        mask = u.mask
        center = np.asarray(center, dtype=float)
        if interior_distance(mask, center) <= r:
            raise GeometryError("ball not contained in domain")
        cells = ball_cells(mask, Ball(tuple(center), r))
        self.u = u
        self.center = center
        self.r = r
        self.cells = cells
        self.values = u.values[cells]
        self.grad = u.grad_norm[cells]
        self.dist = np.sqrt(((mask.coords[cells] - center) ** 2).sum(axis=1))
        self.vol = mask.cell_volume

    def within(self, rho: float) -> np.ndarray:
        return self.dist <= rho * (1 + 1e-12)

    def superlevel(self, k: float, rho: float) -> np.ndarray:
        return self.within(rho) & (self.values > k)

    def measure(self, k: float, rho: float) -> float:
        return float(self.superlevel(k, rho).sum()) * self.vol

    def power_integral(self, k: float, rho: float, e: float) -> float:
        sel = self.superlevel(k, rho)
        return float(((self.values[sel] - k) ** e).sum()) * self.vol

    def grad_integral(self, k: float, rho: float, t: float) -> float:
        sel = self.superlevel(k, rho)
        return float((self.grad[sel] ** t).sum()) * self.vol

    def bracket(self, k: float, rho: float, t: float) -> float:
        """int (u-k)^t + rho^t int |grad u|^t over A+(k, rho)."""
        return self.power_integral(k, rho, t) + rho**t * self.grad_integral(k, rho, t)

    def phi(self, k: float, rho: float, e: ExponentSet) -> float:
        sel = self.superlevel(k, rho)
        if not sel.any():
            return 0.0
        i2 = float(((self.values[sel] - k) ** 2).sum()) * self.vol
        val = i2**e.xi * (float(sel.sum()) * self.vol) ** e.eta
        return val if val >= PHI_FLOOR else 0.0

    def sup(self, rho: float) -> float:
        return float(self.values[self.within(rho)].max())


def level_stats(u: ScalarField, center, k: float, r: float, exponents=(1, 2), t: float = 2.0) -> LevelSetStats:
    """Measure of A+(x0,k,r) = {x in B(x0,r): u > k} and truncated integrals over it."""
    ball = BallData(u, center, r)
    integrals = {float(e): ball.power_integral(k, r, e) for e in exponents}
    return LevelSetStats(k, r, ball.measure(k, r), integrals, ball.grad_integral(k, r, t))


def check_level_estimate(u: ScalarField, center, k: float, rho: float, r: float, e: ExponentSet) -> CheckReport:
    """Sobolev-type level estimate for the s*-th moment on A+(k, rho)."""
    if not 0 < rho < r:
        raise ValueError("need 0 < rho < r")
    ball = BallData(u, center, r)
    ss = e.s_star
    lhs = ball.power_integral(k, rho, ss)
    meas = ball.measure(k, r)
    rhs = (r - rho) ** (-ss) * meas ** ((1 - e.s / e.t) * ss / e.s) * ball.bracket(k, r, e.t) ** (ss / e.t)
    return CheckReport(lhs, rhs, {"check": "level_estimate", "k": k, "rho": rho, "r": r, "center": list(map(float, center))})


def check_iterated_estimate(
    u: ScalarField, center, l: float, k: float, rho: float, r: float, e: ExponentSet
) -> CheckReport:
    """Second-moment estimate at a higher level l in terms of level k data."""
    if not l > k:
        raise ValueError("precondition violated: need l > k")
    if not 0 < rho < r:
        raise ValueError("need 0 < rho < r")
    ball = BallData(u, center, r)
    p = e.p
    lhs = ball.power_integral(l, rho, 2)
    rhs = (
        (r - rho) ** (-2 * (p - 1) / p)
        * ball.measure(k, r) ** e.beta
        * ball.power_integral(k, r, 2) ** (1 / p)
        * ball.bracket(k, r, e.t) ** (2 * (p - 1) / (p * e.t))
    )
    return CheckReport(
        lhs, rhs, {"check": "iterated_estimate", "l": l, "k": k, "rho": rho, "r": r, "center": list(map(float, center))}
    )


def _d_unit(ball: BallData, k: float, r: float, e: ExponentSet) -> float:
    p, xi, eta, th = e.p, e.xi, e.eta, e.theta
    meas = ball.measure(k, r)
    if meas == 0:
        return 0.0
    return (
        r ** (-xi * (p - 1) / (eta * p))
        * ball.bracket(k, r, e.t) ** (xi * (p - 1) / (e.t * p * eta))
        * ball.power_integral(k, r, 2) ** (xi * (th - 1) / (2 * eta))
        * meas ** ((th - 1) / 2)
    )


def degiorgi_d(u: ScalarField, center, k: float, r: float, e: ExponentSet, c: float = 1.0) -> float:
    """The increment d with sup over B(center, r/2) of u <= k + d."""
    if not c > 0:
        raise ValueError("c must be positive")
    return c * _d_unit(BallData(u, center, r), k, r, e)


def degiorgi_sup_report(u: ScalarField, center, k: float, r: float, e: ExponentSet) -> CheckReport:
    """(sup_{B(r/2)} u - k)^+ against d evaluated with c = 1."""
    ball = BallData(u, center, r)
    lhs = max(ball.sup(r / 2) - k, 0.0)
    return CheckReport(lhs, _d_unit(ball, k, r, e), {"check": "degiorgi_sup", "k": k, "r": r})


@dataclass
class IterationTrace:
    d: float
    levels: np.ndarray
    radii: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    mu: float
    converged: bool
    phi_decay: bool
    sup_half: float
    sup_bound_holds: bool

    @property
    def psi_bounded(self) -> bool:
        return self.converged


def _iteration_constant(ball: BallData, k0: float, r: float, e: ExponentSet, c: float) -> float:
    """The factor A multiplying Psi_m^theta / d^(2 eta) in the recursion."""
    p, xi, eta = e.p, e.xi, e.eta
    big_m = c * ball.bracket(k0, r, e.t) ** (2 * (p - 1) / (p * e.t))
    return 2 ** (2 * (p - 1) / p * xi + 2 * eta + e.mu) / r ** (2 * (p - 1) / p * xi) * big_m**xi


def iteration_d(ball: BallData, k0: float, r: float, e: ExponentSet, c: float) -> float:
    """d solving A * Psi_0^(theta-1) / d^(2 eta) = 1."""
    psi0 = ball.phi(k0, r, e)
    if psi0 == 0:
        return 0.0
    log_d = (math.log(_iteration_constant(ball, k0, r, e, c)) + (e.theta - 1) * math.log(psi0)) / (2 * e.eta)
    return math.exp(log_d)


def run_iteration(ball: BallData, k0: float, r: float, e: ExponentSet, d: float, m_max: int = 12) -> IterationTrace:
    m = np.arange(m_max + 1)
    levels = k0 + d - d / 2.0**m
    radii = r / 2 + r / 2.0 ** (m + 1)
    phi = np.array([ball.phi(k, rho, e) for k, rho in zip(levels, radii)])
    psi = 2.0 ** (e.mu * m) * phi
    psi0 = psi[0]
    tol = 1e-12 * psi0
    bounded = bool(np.all(psi <= psi0 + tol))
    decay = bool(np.all(phi <= 2.0 ** (-e.mu * m) * phi[0] + tol))
    sup_half = ball.sup(r / 2)
    return IterationTrace(d, levels, radii, phi, psi, e.mu, bounded, decay, sup_half, bool(sup_half <= k0 + d))


def degiorgi_iterate(u: ScalarField, center, k0: float, r: float, e: ExponentSet, c: float, m_max: int = 12) -> IterationTrace:
    """Levels k_m rising to k0 + d on radii r_m shrinking to r/2, with d from the closing condition."""
    if not c > 0:
        raise ValueError("c must be positive")
    ball = BallData(u, center, r)
    return run_iteration(ball, k0, r, e, iteration_d(ball, k0, r, e, c), m_max)


def minimal_iteration_constant(ball: BallData, k0: float, r: float, e: ExponentSet, m_max: int = 12) -> float:
    """Smallest c (to bisection accuracy) whose iteration keeps Psi bounded and the sup bound valid.

    d grows with c and every Phi(k_m, r_m) is nonincreasing in d, so the
    admissible set of c is an upper ray.
    """
    if ball.phi(k0, r, e) == 0:
        return 0.0

    def ok(log_c):
        tr = run_iteration(ball, k0, r, e, iteration_d(ball, k0, r, e, math.exp(log_c)), m_max)
        return tr.converged and tr.sup_bound_holds

    lo, hi = -60.0, 60.0
    if ok(lo):
        return math.exp(lo)
    if not ok(hi):
        return math.inf
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return math.exp(hi)


def check_poincare_half(u: ScalarField, center, r: float, p_norm: float) -> CheckReport:
    """L^p norm on a ball against r times the gradient L^p norm, for u vanishing on half the ball."""
    if not p_norm > 1:
        raise ValueError("p_norm must exceed 1")
    ball = BallData(u, center, r)
    zero = np.abs(ball.values) <= 1e-14
    if 2 * zero.sum() < ball.values.size:
        raise ValueError("zero-set too small: u must vanish on at least half the ball")
    N = u.mask.dim
    lhs = float((np.abs(ball.values) ** p_norm).sum() * ball.vol) ** (1 / p_norm)
    grad = float((ball.grad**p_norm).sum() * ball.vol) ** (1 / p_norm)
    rhs = unit_ball_volume(N) * p_norm * (N - 1) / N * r * grad
    return CheckReport(lhs, rhs, {"check": "poincare_half", "r": r, "p": p_norm, "center": list(map(float, center))})
