"""Positivity experiments for Delta^2 - gamma*Delta: thresholds, gamma scans,
source decomposition over an exhaustion, superposition and interpolation."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .exponents import ExponentSet
from .geometry import DomainMask
from .linalg import SolverError
from .plate import ScalarField, assemble_plate, energy_report, solve_plate_stats

VARIANTS = ("two_eta", "four_eta")


def compute_gamma0(f_integral: float, d_omega: float, e: ExponentSet, c: float, variant: str = "two_eta") -> float:
    """Threshold gamma_0 above which the solution is positive.

    ``two_eta`` uses the outer exponent 2*eta/(xi*(theta-1)); ``four_eta``
    the 4*eta/(xi*(theta-1)) of the bound on the exhaustion thresholds.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    if f_integral < 0 or d_omega <= 0 or c <= 0:
        raise ValueError("need f_integral >= 0, d_omega > 0, c > 0")
    if f_integral == 0:
        return 0.0
    mult = 2.0 if variant == "two_eta" else 4.0
    outer = mult * e.eta / (e.xi * (e.theta - 1))
    d_exp = outer * ((2 / e.t) * (3 - e.N) * e.c_bold + e.b_bold)
    return c**outer * d_omega**d_exp * f_integral ** (e.a_bold * outer)


def gamma0_both(f_integral, d_omega, e, c) -> dict:
    return {v: compute_gamma0(f_integral, d_omega, e, c, v) for v in VARIANTS}


@dataclass
class ScanPoint:
    gamma: float
    min_u: float
    max_u: float
    energy: float
    bend: float
    stretch: float
    identity_residual: float
    iterations: int
    residual: float
    converged: bool = True


@dataclass
class GammaScanResult:
    gammas: list
    points: list
    gamma0_paper: dict
    gamma_star_empirical: float | None
    f_integral: float
    constant: float
    tol_pos: float
    domain: dict
    failed: list = field(default_factory=list)

    @property
    def min_u(self) -> list:
        return [p.min_u for p in self.points]

    @property
    def energies(self) -> list:
        return [p.energy for p in self.points]

    def summary(self) -> dict:
        return {
            "gamma0": self.gamma0_paper,
            "gamma_star_empirical": self.gamma_star_empirical,
            "f_integral": self.f_integral,
            "constant": self.constant,
            "tol_pos": self.tol_pos,
            "domain": self.domain,
            "n_points": len(self.points),
            "failed_gammas": self.failed,
            "positive_at_zero": bool(self.points and self.points[0].min_u >= -self.tol_pos * self.points[0].max_u),
        }


def _solve_point(mask, gamma, f, tol) -> tuple[ScanPoint, ScalarField]:
    u, stats = solve_plate_stats(mask, gamma, f, tol)
    rep = energy_report(mask, gamma, u, f)
    return (
        ScanPoint(
            float(gamma),
            float(u.values.min()),
            float(u.values.max()),
            rep.work,
            rep.bend,
            rep.stretch,
            rep.identity_residual,
            stats.iterations,
            stats.final_residual,
        ),
        u,
    )


def _map(fn, items, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def scan_gamma(
    mask: DomainMask,
    f: ScalarField,
    gamma_grid,
    e: ExponentSet,
    c: float,
    tol_pos: float = 1e-8,
    tol: float = 1e-10,
    threads: int = 1,
) -> GammaScanResult:
    """Solve on each gamma of an increasing grid and record the solution minimum."""
    gammas = [float(g) for g in gamma_grid]
    if any(g < 0 for g in gammas) or any(b <= a for a, b in zip(gammas, gammas[1:])):
        raise ValueError("gamma grid must be nonnegative and strictly increasing")
    if np.any(f.values < 0):
        raise ValueError("source must be nonnegative")
    f_int = f.integral()
    if not f_int > 0:
        raise ValueError("source must have positive integral")

    def work(g):
        try:
            return _solve_point(mask, g, f, tol)[0]
        except SolverError as exc:
            st = exc.stats
            return ScanPoint(g, math.nan, math.nan, math.nan, math.nan, math.nan, math.nan, st.iterations, st.final_residual, False)

    pts = _map(work, gammas, threads)
    failed = [p.gamma for p in pts if not p.converged]
    good = [p for p in pts if p.converged]
    star = next((p.gamma for p in good if p.min_u >= -tol_pos * p.max_u), None)
    return GammaScanResult(
        gammas, pts, gamma0_both(f_int, mask.diameter, e, c), star, f_int, c, tol_pos, mask.metadata(), failed
    )


def is_positive(u: ScalarField, tol_pos: float = 1e-8) -> bool:
    return bool(u.values.min() >= -tol_pos * u.values.max())


def exhaustion(mask: DomainMask, levels: int = 3, delta0: float | None = None) -> list[np.ndarray]:
    """Nested selectors {dist > delta_m}, delta halving, with the last set the whole domain."""
    if levels < 1:
        raise ValueError("need at least one level")
    dist = mask.cell_distance
    if delta0 is None:
        delta0 = 0.5 * float(dist.max())
    sets = [dist > delta0 / 2**m for m in range(levels - 1)]
    sets.append(np.ones(mask.n_interior, dtype=bool))
    for a, b in zip(sets, sets[1:]):
        if not a.any() or a.sum() >= b.sum():
            raise ValueError("exhaustion levels are not strictly nested at this resolution")
    return sets


@dataclass
class Decomposition:
    omegas: list
    weights: np.ndarray
    parts: list

    def total(self) -> ScalarField:
        out = self.parts[0]
        for g in self.parts[1:]:
            out = out + g
        return out


def decompose_source(f: ScalarField, omegas) -> Decomposition:
    """g_m = chi_m / (m^2 S) f with S = sum_m chi_m / m^2 over the provided sets."""
    omegas = [np.asarray(o, dtype=bool) for o in omegas]
    for a, b in zip(omegas, omegas[1:]):
        if np.any(a & ~b) or a.sum() >= b.sum():
            raise ValueError("exhaustion sets must be strictly nested")
    weights = np.zeros(f.mask.n_interior)
    for m, om in enumerate(omegas, start=1):
        weights += om / m**2
    support = f.values != 0
    if np.any(support & (weights == 0)):
        raise ValueError("source escapes exhaustion")
    safe = np.where(weights > 0, weights, 1.0)
    parts = [ScalarField(f.mask, np.where(om, f.values / (m**2 * safe), 0.0)) for m, om in enumerate(omegas, start=1)]
    return Decomposition(omegas, weights, parts)


def partition_of_unity_error(dec: Decomposition) -> float:
    total = np.zeros_like(dec.weights)
    for m, om in enumerate(dec.omegas, start=1):
        total += np.where(dec.weights > 0, om / (m**2 * np.where(dec.weights > 0, dec.weights, 1.0)), 0.0)
    covered = dec.weights > 0
    return float(np.abs(total[covered] - 1.0).max())


@dataclass
class SuperpositionResult:
    relative_gap: float
    partial_gaps: list
    part_minima: list


def superposition_check(mask: DomainMask, gamma: float, dec: Decomposition, tol: float = 1e-10) -> SuperpositionResult:
    """Compare the solve for f against the running sums of the solves for each g_m."""
    A = assemble_plate(mask, gamma)
    u, _ = solve_plate_stats(mask, gamma, dec.total(), tol, matrix=A)
    scale = float(np.abs(u.values).max())
    acc = np.zeros(mask.n_interior)
    gaps, minima = [], []
    for g in dec.parts:
        ui, _ = solve_plate_stats(mask, gamma, g, tol, matrix=A)
        acc += ui.values
        gaps.append(float(np.abs(u.values - acc).max()) / scale)
        minima.append(float(ui.values.min()))
    return SuperpositionResult(gaps[-1], gaps, minima)


@dataclass
class InterpolationResult:
    taus: list
    gamma_taus: list
    min_w: list
    max_w: list
    verdict: str


def interpolation_scan(
    mask: DomainMask, f: ScalarField, gamma0: float, n_tau: int = 11, tol_pos: float = 1e-8, tol: float = 1e-10, threads: int = 1
) -> InterpolationResult:
    """Solve at gamma = tau * gamma0 on a uniform tau grid and record minima."""
    if n_tau < 2:
        raise ValueError("n_tau must be at least 2")
    taus = [float(t) for t in np.linspace(0.0, 1.0, n_tau)]
    gammas = [t * gamma0 for t in taus]
    sols = _map(lambda g: solve_plate_stats(mask, g, f, tol)[0], gammas, threads)
    mins = [float(u.values.min()) for u in sols]
    maxs = [float(u.values.max()) for u in sols]
    pos = [mn >= -tol_pos * mx for mn, mx in zip(mins, maxs)]
    if not (pos[0] and pos[-1]):
        verdict = "endpoint hypothesis fails"
    elif all(pos):
        verdict = "positive throughout"
    else:
        verdict = "interior loss of positivity"
    return InterpolationResult(taus, gammas, mins, maxs, verdict)


def dilate(mask: DomainMask, f_fn, gamma: float, s: float):
    """Problem on Omega/s for v(y) = u(s y): operator Delta^2 - gamma s^2 Delta, source s^4 f(s y).

    The node set is reused with every length divided by s, so the returned
    mask has spacing h/s.
    """
    small = mask.scaled(1.0 / s)
    g = ScalarField.from_function(small, lambda y: s**4 * f_fn(s * y))
    return small, g, gamma * s**2
