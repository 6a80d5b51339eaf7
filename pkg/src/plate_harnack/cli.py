"""Batch front-end: one JSON experiment config per invocation.

    plate-harnack --config exp.json --out results/ [--strict] [--threads N] [--seed S]

Checker violations are counted in summary.json and only change the exit
status under --strict.  Exit codes: 0 ok, 1 violations under --strict,
2 invalid config, 3 numerical or geometric failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import reports
from .exponents import ExponentError, default_exponents, derive_exponents, grid_survey, validate_exponents
from .geometry import GeometryError, build_domain, domain_from_spec
from .levelset import CheckReport
from .linalg import SolverError
from .plate import ScalarField, energy_report, solve_plate_stats
from .positivity import decompose_source, exhaustion, gamma0_both, partition_of_unity_error, scan_gamma, superposition_check
from .suites import (
    calibrate_degiorgi,
    calibrate_degiorgi_display,
    calibrate_harnack,
    poincare_fields,
    poincare_refinement,
)

ENERGY_TOL = 1e-6
POINCARE_DRIFT = 0.2
SUPERPOSITION_TOL = 1e-8
PARTITION_TOL = 1e-12


class ConfigError(ValueError):
    pass


def load_schema() -> dict:
    return json.loads(resources.files("plate_harnack").joinpath("config.schema.json").read_text(encoding="utf-8"))


def parse_config(text: str) -> dict:
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    validator = jsonschema.Draft202012Validator(load_schema())
    err = jsonschema.exceptions.best_match(validator.iter_errors(cfg))
    if err is not None:
        pointer = "/" + "/".join(str(p) for p in err.absolute_path)
        raise ConfigError(f"invalid config at {pointer}: {err.message}")
    return cfg


def make_source(spec: dict | None):
    """Vectorized f(x) from a source spec; defaults to f = 1."""
    spec = spec or {"kind": "constant", "value": 1.0}
    kind = spec["kind"]
    if kind == "constant":
        value = float(spec["value"])
        return lambda x: np.full(len(x), value)
    if kind == "gaussian_bumps":
        centers = np.asarray(spec["centers"], float)
        widths = np.asarray(spec["widths"], float)
        if widths.size == 1:
            widths = np.full(len(centers), widths[0])
        amps = np.asarray(spec.get("amplitudes", [1.0] * len(centers)), float)
        if not len(widths) == len(amps) == len(centers):
            raise ConfigError("gaussian_bumps: centers, widths and amplitudes must have equal length")

        def bumps(x):
            out = np.zeros(len(x))
            for c, w, a in zip(centers, widths, amps):
                out += a * np.exp(-((x - c) ** 2).sum(axis=1) / (2 * w**2))
            return out

        return bumps
    lo = np.asarray(spec["lower"], float)
    hi = np.asarray(spec["upper"], float)
    value = float(spec.get("value", 1.0))
    return lambda x: value * np.all((x >= lo) & (x <= hi), axis=1)


def _exponents(cfg: dict):
    N = cfg.get("N", cfg.get("domain", {}).get("dim", 2))
    if any(k in cfg for k in ("t", "p", "q")):
        base = default_exponents(N)
        return derive_exponents(N, cfg.get("t", base.t), cfg.get("p", base.p), cfg.get("q", base.q))
    return default_exponents(N)


def _calibration_mask(cfg: dict):
    if "domain" in cfg:
        return domain_from_spec(cfg["domain"])
    N = cfg.get("N", 2)
    # unit square/cube; the cube is coarser to keep the 3D suite at desk scale
    return build_domain("rectangle", 1 / 64 if N == 2 else 1 / 20, dim=N)


def resolve_threads(flag: int | None) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get("PLATE_HARNACK_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"PLATE_HARNACK_THREADS must be an integer, got {env!r}") from None
    return 1


class OutputDir:
    """Output directory bookkeeping for one command."""

    def __init__(self, out: Path, cfg: dict):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.cfg = cfg
        self.files: list[Path] = []

    def path(self, name: str) -> Path:
        return self.out / name

    def add(self, *paths):
        self.files.extend(Path(p) for p in paths)

    def field(self, name: str, u: ScalarField, header: dict | None = None, title: str = ""):
        self.add(*reports.write_field(self.path(f"{name}.csv"), u, header))
        if self.cfg.get("svg", True):
            self.add(reports.svg_heatmap(self.path(f"{name}.svg"), u, title or name))

    def finish(self, summary: dict) -> dict:
        summary = {"command": self.cfg["command"], "config": self.cfg, **summary}
        summary["outputs"] = sorted(p.name for p in self.files)
        self.add(reports.write_json(self.path("summary.json"), summary))
        reports.write_manifest(self.out, self.files)
        return summary


def _energy_row(mask, gamma, u, f) -> tuple[dict, bool]:
    rep = energy_report(mask, gamma, u, f)
    ok = rep.identity_residual <= ENERGY_TOL * abs(rep.work)
    return {"bend": rep.bend, "stretch": rep.stretch, "work": rep.work, "identity_residual": rep.identity_residual}, ok


def cmd_solve(cfg, run: OutputDir, threads: int, seed: int) -> dict:
    mask = domain_from_spec(cfg["domain"])
    gamma = float(cfg.get("gamma", 0.0))
    f = ScalarField.from_function(mask, make_source(cfg.get("source")))
    u, stats = solve_plate_stats(mask, gamma, f, cfg.get("tol", 1e-10))
    energy, ok = _energy_row(mask, gamma, u, f)
    tol_pos = cfg.get("tol_pos", 1e-8)
    lo, hi = float(u.values.min()), float(u.values.max())
    run.field("u", u, {"gamma": gamma, "iterations": stats.iterations, "residual": stats.final_residual})
    return {
        "gamma": gamma,
        "min_u": lo,
        "max_u": hi,
        "positive": bool(lo >= -tol_pos * hi),
        "iterations": stats.iterations,
        "residual": stats.final_residual,
        "energy": energy,
        "violations": int(not ok),
    }


def auto_gamma_grid(gamma0: float) -> list[float]:
    """{0, 1, 2, 4, ...} below 2*gamma0, then 2*gamma0 itself."""
    top = 2 * gamma0
    grid = [0.0]
    g = 1.0
    while g < top:
        grid.append(g)
        g *= 2
    if top > 0:
        grid.append(top)
    return grid


def cmd_scan(cfg, run: OutputDir, threads: int, seed: int) -> dict:
    mask = domain_from_spec(cfg["domain"])
    e = _exponents(cfg)
    f = ScalarField.from_function(mask, make_source(cfg.get("source")))
    if "c" in cfg:
        c, provenance = float(cfg["c"]), {"source": "config"}
    else:
        cal = calibrate_harnack(e, seed=seed, n_fields=cfg.get("n_fields", 50), mask=_calibration_mask({"N": e.N}))
        c, provenance = cal.constant, {"source": "harnack calibration", **cal.summary()}
    g0 = gamma0_both(f.integral(), mask.diameter, e, c)
    grid = cfg.get("gamma_grid", "auto")
    if grid == "auto":
        grid = auto_gamma_grid(g0["two_eta"])
    grid = sorted(set(float(g) for g in grid))
    res = scan_gamma(mask, f, grid, e, c, cfg.get("tol_pos", 1e-8), cfg.get("tol", 1e-10), threads)
    rows, violations = [], 0
    prev = math.inf
    for pt in res.points:
        ok_energy = pt.converged and pt.identity_residual <= ENERGY_TOL * abs(pt.energy)
        ok_decrease = pt.converged and pt.energy < prev
        # a positive work integral forces a positive maximum
        ok_max = pt.converged and not (pt.energy > 0 and pt.max_u <= 0)
        violations += (not ok_energy) + (not ok_decrease) + (not ok_max)
        prev = pt.energy if pt.converged else prev
        rows.append({**vars(pt), "energy_identity_ok": ok_energy, "energy_decreasing": ok_decrease})
    run.add(reports.write_rows_csv(run.path("scan.csv"), rows))
    summary = res.summary()
    summary["exponents"] = e.as_dict()
    summary["calibration"] = provenance
    run.add(reports.write_json(run.path("scan.json"), summary))
    return {**summary, "gammas": res.gammas, "min_u": res.min_u, "violations": violations}


def _report_rows(reports_list: list[CheckReport], c: float) -> list[dict]:
    return [{**rep.row(), "passes": rep.passes(c)} for rep in reports_list]


def cmd_degiorgi(cfg, run: OutputDir, threads: int, seed: int) -> dict:
    e = _exponents(cfg)
    mask = _calibration_mask(cfg)
    n = cfg.get("n_fields", 50)
    it = calibrate_degiorgi(e, seed=seed, n_fields=n, mask=mask)
    disp = calibrate_degiorgi_display(e, seed=seed, n_fields=n, mask=mask)
    rows = []
    for cal in (it, disp):
        for split, vals in (("calibration", cal.calibration_values), ("heldout", cal.heldout_values)):
            rows.extend({"check": cal.name, "split": split, "index": i, "implied_constant": v} for i, v in enumerate(vals))
    run.add(reports.write_rows_csv(run.path("degiorgi_checks.csv"), rows))
    return {"iteration": it.summary(), "display": disp.summary(), "violations": it.violations + disp.violations}


def cmd_harnack(cfg, run: OutputDir, threads: int, seed: int) -> dict:
    e = _exponents(cfg)
    cal = calibrate_harnack(e, seed=seed, n_fields=cfg.get("n_fields", 50), mask=_calibration_mask(cfg))
    rows = []
    for split, vals in (("calibration", cal.calibration_values), ("heldout", cal.heldout_values)):
        rows.extend(
            {"check": "harnack", "split": split, "index": i, "implied_constant": v, "passes": v <= cal.constant}
            for i, v in enumerate(vals)
        )
    run.add(reports.write_rows_csv(run.path("harnack_checks.csv"), rows))
    return {"harnack": cal.summary(), "violations": cal.violations}


def cmd_poincare(cfg, run: OutputDir, threads: int, seed: int) -> dict:
    h = cfg.get("domain", {}).get("h", 1 / 64)
    fields = poincare_fields(cfg.get("n_fields", 20), seed)
    rows, violations, worst = [], 0, {}
    for p in cfg.get("p_norms", [2.0, 4.0]):
        drifts = []
        for i, (a, b) in enumerate(poincare_refinement(fields, p, h=h)):
            drift = abs(b - a) / a if a > 0 and math.isfinite(a) else math.inf
            ok = math.isfinite(a) and math.isfinite(b) and drift < POINCARE_DRIFT
            violations += not ok
            drifts.append(drift)
            rows.append({"p": p, "index": i, "implied_h": a, "implied_h_half": b, "relative_drift": drift, "ok": ok})
        worst[reports.fmt(p)] = max(drifts)
    run.add(reports.write_rows_csv(run.path("poincare_checks.csv"), rows))
    return {"max_relative_drift": worst, "violations": violations}


def cmd_exponents(cfg, run: OutputDir, threads: int, seed: int) -> dict:
    e = _exponents(cfg)
    res = validate_exponents(e)
    out = {"exponents": e.as_dict(), "residuals": vars(res)}
    violations = int(not res.theta_gt_one) + int(not res.a_lt_one)
    if "survey" in cfg:
        survey = grid_survey(e.N, cfg["survey"])
        out["survey"] = survey
        violations += survey["theta_violations"] + survey["a_violations"]
    run.add(reports.write_json(run.path("exponents.json"), out))
    return {**out, "violations": violations}


def cmd_decompose(cfg, run: OutputDir, threads: int, seed: int) -> dict:
    mask = domain_from_spec(cfg["domain"])
    gamma = float(cfg.get("gamma", 0.0))
    f = ScalarField.from_function(mask, make_source(cfg.get("source")))
    omegas = exhaustion(mask, cfg.get("levels", 3))
    dec = decompose_source(f, omegas)
    pou = partition_of_unity_error(dec)
    sum_err = float(np.abs(dec.total().values - f.values).max() / np.abs(f.values).max())
    sup = superposition_check(mask, gamma, dec, cfg.get("tol", 1e-10))
    rows = [
        {
            "m": m,
            "omega_cells": int(om.sum()),
            "part_integral": g.integral(),
            "part_solution_min": mn,
            "running_gap": gap,
        }
        for m, (om, g, mn, gap) in enumerate(zip(dec.omegas, dec.parts, sup.part_minima, sup.partial_gaps), start=1)
    ]
    run.add(reports.write_rows_csv(run.path("decomposition.csv"), rows))
    violations = int(pou > PARTITION_TOL) + int(sum_err > PARTITION_TOL) + int(sup.relative_gap > SUPERPOSITION_TOL)
    return {
        "gamma": gamma,
        "levels": len(omegas),
        "partition_of_unity_error": pou,
        "source_sum_relative_error": sum_err,
        "superposition_relative_gap": sup.relative_gap,
        "violations": violations,
    }


def cmd_report(cfg, run: OutputDir, threads: int, seed: int) -> dict:
    entries, rows = [], []
    for d in cfg.get("inputs", []):
        summ = json.loads((Path(d) / "summary.json").read_text(encoding="utf-8"))
        bad = reports.verify_manifest(Path(d))
        entries.append({"input": d, "command": summ["command"], "violations": summ["violations"], "manifest_mismatches": bad})
        rows.append({"input": d, "command": summ["command"], "violations": summ["violations"], "manifest_ok": not bad})
    run.add(reports.write_rows_csv(run.path("report.csv"), rows, ["input", "command", "violations", "manifest_ok"]))
    total = sum(e["violations"] for e in entries)
    return {"entries": entries, "violations": total + sum(bool(e["manifest_mismatches"]) for e in entries)}


COMMANDS = {
    "solve": cmd_solve,
    "scan": cmd_scan,
    "degiorgi": cmd_degiorgi,
    "harnack": cmd_harnack,
    "poincare": cmd_poincare,
    "exponents": cmd_exponents,
    "decompose": cmd_decompose,
    "report": cmd_report,
}

NEEDS_DOMAIN = {"solve", "scan", "decompose"}


def run(cfg: dict, out: Path, threads: int = 1, seed: int | None = None) -> dict:
    """Execute one validated config and return its summary (also written to out/summary.json)."""
    cfg = dict(cfg)
    if seed is not None:
        cfg["seed"] = seed
    cfg.setdefault("seed", 0)
    if cfg["command"] in NEEDS_DOMAIN and "domain" not in cfg:
        raise ConfigError(f"invalid config at /: command {cfg['command']!r} requires 'domain'")
    r = OutputDir(out, cfg)
    summary = COMMANDS[cfg["command"]](cfg, r, threads, cfg["seed"])
    return r.finish(summary)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="plate-harnack", description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True, help="experiment config (JSON)")
    ap.add_argument("--out", help="output directory (overrides the config's 'out'; default ./out)")
    ap.add_argument("--strict", action="store_true", help="exit 1 when any check is violated")
    ap.add_argument("--threads", type=int, default=None, help="worker threads (fallback: PLATE_HARNACK_THREADS)")
    ap.add_argument("--seed", type=int, default=None, help="seed for randomized suites (overrides config)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(text)
        threads = resolve_threads(args.threads)
        out = Path(args.out or cfg.get("out", "out"))
        summary = run(cfg, out, threads, args.seed)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, GeometryError, ExponentError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    print(f"{summary['command']}: {summary['violations']} violation(s); outputs in {out}")
    return 1 if (args.strict and summary["violations"]) else 0


if __name__ == "__main__":
    sys.exit(main())
