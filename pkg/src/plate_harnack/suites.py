"""Seeded test-field suites and the calibrate-then-verify protocol for unknown constants.

A calibration run evaluates the implied constant of an inequality on a
suite of smooth random fields and fixes c := SAFETY * (suite maximum).  The
constant is then checked on a held-out suite drawn from an independent
stream of the same seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exponents import ExponentSet
from .geometry import DomainMask, build_domain
from .harnack import harnack_check
from .levelset import BallData, check_poincare_half, degiorgi_iterate, degiorgi_sup_report, minimal_iteration_constant
from .plate import ScalarField

SAFETY = 1.5


@dataclass
class BumpField:
    """Sum of Gaussian bumps times the clamped envelope dist(x, boundary)^2."""

    centers: np.ndarray
    widths: np.ndarray
    amplitudes: np.ndarray

    def sample(self, mask: DomainMask) -> ScalarField:
        x = mask.coords
        env = mask.distance(x, conservative=False) ** 2
        total = np.zeros(mask.n_interior)
        for c, w, a in zip(self.centers, self.widths, self.amplitudes):
            total += a * np.exp(-((x - c) ** 2).sum(axis=1) / (2 * w**2))
        return ScalarField(mask, env * total)


@dataclass
class Probe:
    """One evaluation site: a field plus a ball and a level."""

    field: ScalarField
    center: np.ndarray
    r: float
    level_quantile: float

    def level(self) -> float:
        return float(np.quantile(BallData(self.field, self.center, self.r).values, self.level_quantile))


def random_bump_field(mask: DomainMask, rng: np.random.Generator, max_bumps: int = 5) -> BumpField:
    n = int(rng.integers(1, max_bumps + 1))
    ids = rng.choice(mask.n_interior, size=n, replace=False)
    scale = mask.diameter
    return BumpField(mask.coords[ids], rng.uniform(0.08, 0.3, n) * scale, rng.uniform(0.5, 1.5, n))


def make_probes(mask: DomainMask, n_fields: int, rng: np.random.Generator, min_depth: float = 0.15) -> list[Probe]:
    # deep enough that the 8h radius floor still leaves the ball inside
    deep = np.flatnonzero(mask.cell_distance >= max(min_depth, 8 * mask.h / 0.9))
    if deep.size == 0:
        raise ValueError("domain has no cells deep enough for probe balls")
    probes = []
    for _ in range(n_fields):
        f = random_bump_field(mask, rng).sample(mask)
        ci = int(rng.choice(deep))
        depth = float(mask.cell_distance[ci])
        r = max(float(rng.uniform(0.5, 0.9)) * depth, 8 * mask.h)
        probes.append(Probe(f, mask.coords[ci], r, float(rng.uniform(0.2, 0.8))))
    return probes


def suite_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent generators for the calibration and held-out suites."""
    calib, held = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(calib), np.random.default_rng(held)


def default_suite_mask(h: float = 1 / 64) -> DomainMask:
    return build_domain("rectangle", h)


@dataclass
class CalibrationResult:
    name: str
    constant: float
    calibration_max: float
    calibration_values: list
    heldout_values: list
    violations: int
    extra: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "name": self.name,
            "constant": self.constant,
            "safety_factor": SAFETY,
            "calibration_max": self.calibration_max,
            "n_calibration": len(self.calibration_values),
            "n_heldout": len(self.heldout_values),
            "heldout_max": max(self.heldout_values) if self.heldout_values else 0.0,
            "violations": self.violations,
            **self.extra,
        }


def _finite_max(values) -> float:
    vals = [v for v in values if math.isfinite(v)]
    if len(vals) != len(values):
        raise ValueError("infinite implied constant in calibration suite")
    return max(vals)


def calibrate_degiorgi(
    e: ExponentSet, seed: int = 0, n_fields: int = 50, mask: DomainMask | None = None, m_max: int = 12
) -> CalibrationResult:
    """Calibrate the constant of the iteration closing condition and verify on held-out fields.

    Held-out checks per field: Psi_m <= Psi_0 for m <= m_max, and
    sup_{B(r/2)} u <= k + d, both with d from the closing condition.
    """
    mask = mask or default_suite_mask()
    calib_rng, held_rng = suite_streams(seed)
    calib = []
    for pr in make_probes(mask, n_fields, calib_rng):
        ball = BallData(pr.field, pr.center, pr.r)
        calib.append(minimal_iteration_constant(ball, pr.level(), pr.r, e, m_max))
    cmax = _finite_max(calib)
    c = SAFETY * cmax
    held, violations, psi_fail, sup_fail = [], 0, 0, 0
    for pr in make_probes(mask, n_fields, held_rng):
        k = pr.level()
        held.append(minimal_iteration_constant(BallData(pr.field, pr.center, pr.r), k, pr.r, e, m_max))
        tr = degiorgi_iterate(pr.field, pr.center, k, pr.r, e, c, m_max)
        psi_fail += not tr.converged
        sup_fail += not tr.sup_bound_holds
        violations += not (tr.converged and tr.sup_bound_holds)
    return CalibrationResult(
        "degiorgi_iteration", c, cmax, calib, held, violations, {"psi_violations": psi_fail, "sup_violations": sup_fail}
    )


def calibrate_degiorgi_display(e: ExponentSet, seed: int = 0, n_fields: int = 50, mask=None) -> CalibrationResult:
    """Same protocol for the closed-form increment d with its own constant."""
    mask = mask or default_suite_mask()
    calib_rng, held_rng = suite_streams(seed)
    calib = [
        degiorgi_sup_report(pr.field, pr.center, pr.level(), pr.r, e).implied_constant
        for pr in make_probes(mask, n_fields, calib_rng)
    ]
    cmax = _finite_max(calib)
    c = SAFETY * cmax
    reports = [degiorgi_sup_report(pr.field, pr.center, pr.level(), pr.r, e) for pr in make_probes(mask, n_fields, held_rng)]
    held = [rep.implied_constant for rep in reports]
    return CalibrationResult("degiorgi_display", c, cmax, calib, held, sum(not rep.passes(c) for rep in reports))


def calibrate_harnack(e: ExponentSet, seed: int = 0, n_fields: int = 50, mask=None) -> CalibrationResult:
    mask = mask or default_suite_mask()
    calib_rng, held_rng = suite_streams(seed)
    calib = [harnack_check(pr.field, pr.center, pr.r, e).implied_constant for pr in make_probes(mask, n_fields, calib_rng)]
    cmax = _finite_max(calib)
    c = SAFETY * cmax
    reports = [harnack_check(pr.field, pr.center, pr.r, e) for pr in make_probes(mask, n_fields, held_rng)]
    held = [rep.implied_constant for rep in reports]
    return CalibrationResult("harnack", c, cmax, calib, held, sum(not rep.passes(c) for rep in reports))


@dataclass
class HalfVanishingField:
    """A * max(0, n.(x - x0) - delta)^alpha: zero on at least half of any ball centred at x0."""

    x0: np.ndarray
    normal: np.ndarray
    delta: float
    alpha: float
    amplitude: float

    def __call__(self, x):
        s = (np.asarray(x) - self.x0) @ self.normal - self.delta
        return self.amplitude * np.maximum(s, 0.0) ** self.alpha


def poincare_fields(n: int, seed: int, x0=(0.5, 0.5), r: float = 0.3) -> list[HalfVanishingField]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        ang = rng.uniform(0, 2 * np.pi)
        out.append(
            HalfVanishingField(
                np.asarray(x0, float),
                np.array([np.cos(ang), np.sin(ang)]),
                float(rng.uniform(0, r / 4)),
                float(rng.choice([1.0, 1.5, 2.0, 3.0])),
                float(rng.uniform(0.5, 2.0)),
            )
        )
    return out


def poincare_refinement(
    fields, p_norm: float, h: float = 1 / 64, center=(0.5, 0.5), r: float = 0.3
) -> list[tuple[float, float]]:
    """Implied constants of the half-vanishing Poincare check at h and h/2 for each field."""
    coarse = build_domain("rectangle", h)
    fine = build_domain("rectangle", h / 2)
    out = []
    for fn in fields:
        a = check_poincare_half(ScalarField.from_function(coarse, fn), center, r, p_norm).implied_constant
        b = check_poincare_half(ScalarField.from_function(fine, fn), center, r, p_norm).implied_constant
        out.append((a, b))
    return out
