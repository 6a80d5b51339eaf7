"""Deterministic writers for fields, check tables, summaries, heatmaps and the manifest.

Floats are written with 17 significant digits so every double round-trips.
Nothing time- or host-dependent is ever written.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .plate import ScalarField


def fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _plain(obj):
    """Convert numpy scalars/arrays and tuples into JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        # JSON has no inf/nan; keep them readable as strings
        return x if math.isfinite(x) else fmt(x)
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n"


def write_json(path: Path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj), encoding="utf-8")
    return path


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    if isinstance(v, (list, tuple, dict, np.ndarray)):
        return json.dumps(_plain(v), sort_keys=True)
    if v is None:
        return ""
    return str(v)


def write_rows_csv(path: Path, rows: list[dict], columns: list[str] | None = None) -> Path:
    """One row per dict; columns default to first-seen key order across rows."""
    path = Path(path)
    if columns is None:
        columns = []
        for row in rows:
            columns.extend(k for k in row if k not in columns)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row.get(k)) for k in columns])
    return path


def write_field(path: Path, u: ScalarField, header: dict | None = None) -> tuple[Path, Path]:
    """Field CSV (coordinates and value per interior node) plus a JSON header beside it."""
    path = Path(path)
    mask = u.mask
    axes = ["x", "y", "z"][: mask.dim]
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(axes + ["u"])
        for x, v in zip(mask.coords, u.values):
            w.writerow([fmt(c) for c in x] + [fmt(v)])
    meta = {
        "mask": mask.metadata(),
        "n_values": int(mask.n_interior),
        "min": float(u.values.min()),
        "max": float(u.values.max()),
        "integral": u.integral(),
        **(header or {}),
    }
    hpath = write_json(path.with_suffix(".json"), meta)
    return path, hpath


def read_field_csv(path: Path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, :-1], data[:, -1]


def _color(t: float) -> str:
    # linear blue -> white -> red
    t = min(max(t, 0.0), 1.0)
    if t < 0.5:
        s = t / 0.5
        rgb = (int(round(40 + 215 * s)), int(round(80 + 175 * s)), 255)
    else:
        s = (t - 0.5) / 0.5
        rgb = (255, int(round(255 - 195 * s)), int(round(255 - 215 * s)))
    return "#%02x%02x%02x" % rgb


def svg_heatmap(path: Path, u: ScalarField, title: str = "", cell_px: float | None = None) -> Path:
    """Static heatmap of a 2D field, or of the middle slice of a 3D one, with min/max annotated."""
    mask = u.mask
    grid = u.grid
    inside = mask.interior
    if mask.dim == 3:
        mid = grid.shape[2] // 2
        grid, inside = grid[:, :, mid], inside[:, :, mid]
    nx, ny = grid.shape
    if cell_px is None:
        cell_px = max(1.0, min(8.0, 640.0 / max(nx, ny)))
    lo, hi = float(u.values.min()), float(u.values.max())
    span = hi - lo if hi > lo else 1.0
    width, height = nx * cell_px, ny * cell_px + 40
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.1f}" height="{height:.1f}" '
        f'viewBox="0 0 {width:.1f} {height:.1f}">',
        f'<rect width="{width:.1f}" height="{height:.1f}" fill="#ffffff"/>',
    ]
    for i in range(nx):
        for j in range(ny):
            if not inside[i, j]:
                continue
            # y axis points up
            x0, y0 = i * cell_px, (ny - 1 - j) * cell_px
            out.append(
                f'<rect x="{x0:.2f}" y="{y0:.2f}" width="{cell_px:.2f}" height="{cell_px:.2f}" '
                f'fill="{_color((grid[i, j] - lo) / span)}"/>'
            )
    label = f"{title} min={fmt(lo)} max={fmt(hi)}".strip()
    out.append(f'<text x="4" y="{ny * cell_px + 24:.1f}" font-family="monospace" font-size="12">{label}</text>')
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n", encoding="utf-8")
    return path


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir: Path, files) -> Path:
    """MANIFEST.json with the sha256 and size of every produced file, keyed by relative path."""
    out_dir = Path(out_dir)
    entries = {}
    for f in sorted({Path(f).resolve() for f in files}):
        rel = f.relative_to(out_dir.resolve()).as_posix()
        entries[rel] = {"sha256": sha256_file(f), "bytes": f.stat().st_size}
    return write_json(out_dir / "MANIFEST.json", {"files": entries})


def verify_manifest(out_dir: Path) -> list[str]:
    """Relative paths whose current hash disagrees with the manifest."""
    out_dir = Path(out_dir)
    entries = json.loads((out_dir / "MANIFEST.json").read_text())["files"]
    bad = []
    for rel, meta in entries.items():
        f = out_dir / rel
        if not f.exists() or sha256_file(f) != meta["sha256"]:
            bad.append(rel)
    return bad
