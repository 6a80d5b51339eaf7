"""Harnack-type bound on a ball and its propagation along a chain of balls."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exponents import ExponentSet
from .geometry import DomainMask, chain_of_balls
from .levelset import BallData
from .plate import ScalarField


@dataclass
class LevelClassification:
    i1: tuple | None
    i2: tuple | None
    k0: float | None


def classify_levels(u: ScalarField, center, r: float) -> LevelClassification:
    """Split the levels in (min u, max u) on the ball by half-measure superlevel sets.

    I1 holds levels whose strict superlevel set fills less than half the ball,
    I2 those whose closed superlevel set fills at least half.  Intervals are
    returned as (lower, upper) pairs: I1 = [lower, max u), I2 = (min u, upper].
    """
    vals = np.sort(BallData(u, center, r).values)
    n = vals.size
    lo, hi = float(vals[0]), float(vals[-1])
    if lo == hi:
        return LevelClassification(None, None, None)
    # strict superlevel count above level v_j is n - (number of values <= v_j)
    count_le = np.searchsorted(vals, vals, side="right")
    i1_start = vals[2 * (n - count_le) < n]
    inf_i1 = float(i1_start.min())
    i1 = (max(inf_i1, lo), hi) if inf_i1 < hi else None
    count_lt = np.searchsorted(vals, vals, side="left")
    i2_end = vals[2 * (n - count_lt) >= n]
    sup_i2 = float(i2_end.max())
    i2 = (lo, sup_i2) if sup_i2 > lo else None
    k0 = 0.5 * (inf_i1 + sup_i2) if (i1 is not None and i2 is not None) else None
    return LevelClassification(i1, i2, k0)


@dataclass
class HarnackReport:
    sup_half: float
    inf_half: float
    inf_full: float
    grad_t_term: float
    grad_2_term: float
    r_power: float
    k0: float | None

    @property
    def rhs_unit(self) -> float:
        return self.r_power * self.grad_t_term * self.grad_2_term

    @property
    def implied_constant(self) -> float:
        gap = self.sup_half - self.inf_full
        if gap <= 0:
            return 0.0
        return gap / self.rhs_unit if self.rhs_unit > 0 else np.inf

    def passes(self, c: float) -> bool:
        return self.sup_half <= self.inf_full + c * self.rhs_unit


def harnack_terms(grad_norm: np.ndarray, vol: float, r: float, e: ExponentSet, N: int):
    ratio = e.xi / e.eta
    gt = float((grad_norm**e.t).sum() * vol) ** (ratio * (e.p - 1) / (e.t * e.p))
    g2 = float((grad_norm**2).sum() * vol) ** (e.xi * (e.theta - 1) / (2 * e.eta))
    rp = r ** ((ratio + N / 2) * (e.theta - 1))
    return gt, g2, rp


def harnack_check(u: ScalarField, center, r: float, e: ExponentSet) -> HarnackReport:
    """Both sides of sup_{B(r/2)} u <= inf_{B(r)} u + c * (gradient terms), constant-free."""
    ball = BallData(u, center, r)
    gt, g2, rp = harnack_terms(ball.grad, ball.vol, r, e, u.mask.dim)
    half = ball.within(r / 2)
    cls = classify_levels(u, center, r)
    return HarnackReport(
        float(ball.values[half].max()),
        float(ball.values[half].min()),
        float(ball.values.min()),
        gt,
        g2,
        rp,
        cls.k0,
    )


@dataclass
class OscillationReport:
    u_max: float
    u_min: float
    h: int
    r: float
    rhs_unit: float
    centers: np.ndarray

    @property
    def implied_constant(self) -> float:
        gap = self.u_max - self.u_min
        if gap <= 0:
            return 0.0
        return gap / self.rhs_unit if self.rhs_unit > 0 else np.inf


def value_at(u: ScalarField, x) -> float:
    """Value at the interior node nearest to x."""
    mask = u.mask
    idx = np.rint((np.asarray(x, float) - mask.origin) / mask.h).astype(int)
    if np.any(idx < 0) or np.any(idx >= np.array(mask.extents)):
        raise ValueError("point is outside the grid")
    num = mask.numbering[tuple(idx)]
    if num < 0:
        raise ValueError("point is not at an interior node")
    return float(u.values[num])


def chain_bound(u: ScalarField, x_max, x_min, mask: DomainMask, r: float, e: ExponentSet) -> OscillationReport:
    """Oscillation between two points against chain length times global gradient terms."""
    chain = chain_of_balls(mask, x_max, x_min, r)
    gt, g2, rp = harnack_terms(u.grad_norm, mask.cell_volume, r, e, mask.dim)
    return OscillationReport(value_at(u, x_max), value_at(u, x_min), chain.h, r, chain.h * rp * gt * g2, chain.centers)


def locate_extremum(u: ScalarField, region=None, kind: str = "max"):
    """Grid argmax/argmin of u over interior nodes, optionally restricted by a boolean selector."""
    sel = np.ones(u.mask.n_interior, dtype=bool) if region is None else np.asarray(region, bool)
    ids = np.flatnonzero(sel)
    pick = ids[np.argmax(u.values[ids])] if kind == "max" else ids[np.argmin(u.values[ids])]
    return u.mask.coords[pick]
