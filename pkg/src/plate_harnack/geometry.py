"""Masked Cartesian grids for bounded open sets in two and three dimensions.

A domain is represented by the nodes ``origin + i*h`` of a padded bounding
box.  A node is *interior* when it lies strictly inside the analytic region;
every other node carries the homogeneous Dirichlet data of the clamped plate.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree

SHAPES = ("rectangle", "disk", "annulus", "l_shape", "dumbbell", "custom")

# padding in nodes around the region; the biharmonic stencil reaches two nodes
MARGIN = 3


class GeometryError(ValueError):
    pass


def unit_ball_volume(dim: int) -> float:
    """Volume omega_N of the unit ball in R^N."""
    return math.pi ** (dim / 2) / math.gamma(dim / 2 + 1)


@dataclass(eq=False)
class DomainMask:
    dim: int
    h: float
    origin: np.ndarray
    interior: np.ndarray
    shape_tag: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float)
        self.interior = np.asarray(self.interior, dtype=bool)
        if self.dim not in (2, 3):
            raise GeometryError(f"dimension must be 2 or 3, got {self.dim}")
        if self.interior.ndim != self.dim:
            raise GeometryError("interior array rank does not match dimension")
        if not self.interior.any():
            raise GeometryError("degenerate domain: no interior cells")
        border = np.ones_like(self.interior)
        border[(slice(1, -1),) * self.dim] = False
        if (self.interior & border).any():
            raise GeometryError("interior cells must keep a one-cell margin to the bounding box")

    @property
    def extents(self) -> tuple[int, ...]:
        return self.interior.shape

    @cached_property
    def interior_index(self) -> np.ndarray:
        """Flat grid indices of interior nodes, in C order."""
        return np.flatnonzero(self.interior.ravel())

    @property
    def n_interior(self) -> int:
        return int(self.interior_index.size)

    @cached_property
    def numbering(self) -> np.ndarray:
        """Grid array mapping each node to its unknown number, -1 off the domain."""
        num = np.full(self.interior.size, -1, dtype=np.int64)
        num[self.interior_index] = np.arange(self.n_interior)
        return num.reshape(self.interior.shape)

    @cached_property
    def interior_multi_index(self) -> np.ndarray:
        return np.stack(np.unravel_index(self.interior_index, self.extents), axis=1)

    @cached_property
    def coords(self) -> np.ndarray:
        """Coordinates of interior nodes, shape (n_interior, dim)."""
        return self.origin + self.h * self.interior_multi_index

    def node_coords(self, multi_index) -> np.ndarray:
        return self.origin + self.h * np.asarray(multi_index)

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @property
    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        lo = self.origin
        hi = self.origin + self.h * (np.array(self.extents) - 1)
        return lo, hi

    @cached_property
    def _exterior_tree(self) -> cKDTree:
        idx = np.flatnonzero(~self.interior.ravel())
        pts = self.origin + self.h * np.stack(np.unravel_index(idx, self.extents), axis=1)
        return cKDTree(pts)

    @cached_property
    def boundary_nodes(self) -> np.ndarray:
        """Multi-indices of non-interior nodes that are axis neighbours of interior nodes."""
        grown = np.zeros_like(self.interior)
        for ax in range(self.dim):
            grown |= np.roll(self.interior, 1, axis=ax) | np.roll(self.interior, -1, axis=ax)
        return np.argwhere(grown & ~self.interior)

    @cached_property
    def diameter(self) -> float:
        """Diameter of the closed discrete domain: interior nodes plus their boundary nodes."""
        pts = np.concatenate([self.interior_multi_index, self.boundary_nodes]).astype(float)
        return self.h * _point_set_diameter(pts)

    @cached_property
    def node_diameter(self) -> float:
        return self.h * _point_set_diameter(self.interior_multi_index.astype(float))

    @cached_property
    def cell_distance(self) -> np.ndarray:
        """interior_distance evaluated at every interior node (conservative)."""
        return self.distance(self.coords)

    @cached_property
    def boundary_adjacent(self) -> np.ndarray:
        """Boolean per interior node: some axis neighbour is off the domain."""
        out = np.zeros(self.n_interior, dtype=bool)
        mi = self.interior_multi_index
        for ax in range(self.dim):
            for step in (-1, 1):
                nb = mi.copy()
                nb[:, ax] += step
                out |= ~self.interior[tuple(nb.T)]
        return out

    def distance(self, points, conservative: bool = True) -> np.ndarray:
        """Distance to the nearest non-interior node, minus h/2 when conservative."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lo, hi = self.bbox
        if np.any(pts < lo - 1e-12) or np.any(pts > hi + 1e-12):
            raise GeometryError("point out of range")
        dist, _ = self._exterior_tree.query(pts)
        if conservative:
            dist = np.maximum(dist - 0.5 * self.h, 0.0)
        return dist

    def to_grid(self, values, fill: float = 0.0) -> np.ndarray:
        grid = np.full(self.interior.size, fill, dtype=float)
        grid[self.interior_index] = values
        return grid.reshape(self.extents)

    def scaled(self, factor: float) -> "DomainMask":
        """The same node set with all lengths multiplied by ``factor``."""
        return DomainMask(
            self.dim,
            self.h * factor,
            self.origin * factor,
            self.interior.copy(),
            self.shape_tag,
            {**self.params, "scale": self.params.get("scale", 1.0) * factor},
        )

    def submask(self, keep) -> "DomainMask":
        """Restrict the interior to the interior nodes flagged in ``keep``."""
        keep = np.asarray(keep, dtype=bool)
        interior = np.zeros(self.interior.size, dtype=bool)
        interior[self.interior_index[keep]] = True
        return DomainMask(self.dim, self.h, self.origin, interior.reshape(self.extents), "custom", dict(self.params))

    def metadata(self) -> dict:
        return {
            "dim": self.dim,
            "h": self.h,
            "extents": list(self.extents),
            "origin": [float(v) for v in self.origin],
            "shape_tag": self.shape_tag,
            "params": self.params,
            "n_interior": self.n_interior,
            "diameter": self.diameter,
        }


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise GeometryError("ball radius must be positive")


@dataclass
class ChainReport:
    centers: np.ndarray
    radius: float
    h: int
    straight: bool = True


def _point_set_diameter(pts: np.ndarray) -> float:
    if len(pts) < 2:
        return 0.0
    cand = pts
    if len(pts) > pts.shape[1] + 1:
        try:
            cand = pts[ConvexHull(pts).vertices]
        except QhullError:
            cand = pts
    if len(cand) > 4000:
        # flat hull on a huge degenerate set; extremes along axes suffice
        cand = pts[np.unique(np.concatenate([np.argmin(pts, 0), np.argmax(pts, 0)]))]
    diff = cand[:, None, :] - cand[None, :, :]
    return float(np.sqrt((diff**2).sum(-1)).max())


def _rectangle(lower, upper):
    lower = np.asarray(lower, float)
    upper = np.asarray(upper, float)

    def inside(x):
        return np.all((x > lower) & (x < upper), axis=-1)

    return inside, lower, upper, float(np.min(upper - lower))


def _disk(center, radius):
    c = np.asarray(center, float)

    def inside(x):
        return ((x - c) ** 2).sum(-1) < radius**2

    return inside, c - radius, c + radius, 2.0 * radius


def _annulus(center, inner, outer):
    c = np.asarray(center, float)

    def inside(x):
        r2 = ((x - c) ** 2).sum(-1)
        return (r2 > inner**2) & (r2 < outer**2)

    return inside, c - outer, c + outer, outer - inner


def _l_shape(size):
    half = size / 2

    def inside(x):
        in_square = np.all((x > 0) & (x < size), axis=-1)
        notch = (x[..., 0] >= half) & (x[..., 1] >= half)
        return in_square & ~notch

    return inside, np.zeros(2), np.full(2, float(size)), half


def _dumbbell(radius, separation, corridor):
    # two disks centred at (+-separation/2, 0) joined by a corridor of half-width ``corridor``
    cl = np.array([-separation / 2, 0.0])
    cr = np.array([separation / 2, 0.0])

    def inside(x):
        a = ((x - cl) ** 2).sum(-1) < radius**2
        b = ((x - cr) ** 2).sum(-1) < radius**2
        bar = (np.abs(x[..., 0]) < separation / 2) & (np.abs(x[..., 1]) < corridor)
        return a | b | bar

    lo = np.array([-separation / 2 - radius, -radius])
    hi = np.array([separation / 2 + radius, radius])
    return inside, lo, hi, 2.0 * corridor


def build_domain(shape_tag: str, h: float, dim: int = 2, **params) -> DomainMask:
    """Discretize an analytic region with node spacing ``h``.

    Supported shapes and their parameters:

    rectangle  lower, upper (corner tuples; default unit cube)
    disk       radius, center (a ball when dim == 3)
    annulus    inner, outer, center
    l_shape    size: the square [0,size]^2 minus its upper-right quarter
    dumbbell   radius, separation, corridor (half-width)
    custom     inside (vectorized predicate), lower, upper, feature
    """
    if not h > 0:
        raise GeometryError("h must be positive")
    if shape_tag == "rectangle":
        lower = params.get("lower", (0.0,) * dim)
        upper = params.get("upper", (1.0,) * dim)
        if len(lower) != dim or len(upper) != dim:
            raise GeometryError("rectangle corners do not match dimension")
        inside, lo, hi, feature = _rectangle(lower, upper)
    elif shape_tag == "disk":
        inside, lo, hi, feature = _disk(params.get("center", (0.0,) * dim), params.get("radius", 1.0))
    elif shape_tag == "annulus":
        inside, lo, hi, feature = _annulus(
            params.get("center", (0.0,) * dim), params.get("inner", 0.5), params.get("outer", 1.0)
        )
    elif shape_tag in ("l_shape", "dumbbell"):
        if dim != 2:
            raise GeometryError(f"{shape_tag} is only defined in two dimensions")
        if shape_tag == "l_shape":
            inside, lo, hi, feature = _l_shape(params.get("size", 1.0))
        else:
            inside, lo, hi, feature = _dumbbell(
                params.get("radius", 0.5), params.get("separation", 2.0), params.get("corridor", 0.15)
            )
    elif shape_tag == "custom":
        inside = params.pop("inside")
        lo = np.asarray(params["lower"], float)
        hi = np.asarray(params["upper"], float)
        feature = params.get("feature", float(np.min(hi - lo)))
    else:
        raise GeometryError(f"unknown shape {shape_tag!r}; expected one of {SHAPES}")
    if len(lo) != dim:
        raise GeometryError("shape parameters do not match dimension")
    if h > feature:
        raise GeometryError(f"resolution too coarse: h={h} exceeds thinnest feature {feature}")

    # node grid aligned with the lower corner so grid-aligned rectangles put nodes on the boundary
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    counts = np.ceil((hi - lo) / h - 1e-9).astype(int) + 1 + 2 * MARGIN
    origin = lo - MARGIN * h
    axes = [origin[a] + h * np.arange(counts[a]) for a in range(dim)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    # nudge away from the analytic boundary so nodes sitting on it count as exterior
    interior = inside(pts) & _clear_of_boundary(inside, pts, 1e-9 * h)
    if not interior.any():
        raise GeometryError("degenerate domain: no interior cells")
    stored = {k: (list(v) if isinstance(v, (tuple, list, np.ndarray)) else v) for k, v in params.items()}
    return DomainMask(dim, float(h), origin, interior, shape_tag, stored)


def _clear_of_boundary(inside: Callable, pts: np.ndarray, eps: float) -> np.ndarray:
    ok = np.ones(pts.shape[:-1], dtype=bool)
    for ax in range(pts.shape[-1]):
        for sgn in (-1.0, 1.0):
            shifted = pts.copy()
            shifted[..., ax] += sgn * eps
            ok &= inside(shifted)
    return ok


def interior_distance(mask: DomainMask, x) -> float:
    """Conservative distance from ``x`` to the complement of the discrete domain."""
    return float(mask.distance(np.asarray(x, float)[None, :])[0])


def ball_cells(mask: DomainMask, ball: Ball) -> np.ndarray:
    """Unknown numbers of interior nodes inside the closed ball, ascending."""
    c = np.asarray(ball.center, float)
    lo = np.floor((c - ball.radius - mask.origin) / mask.h).astype(int)
    hi = np.ceil((c + ball.radius - mask.origin) / mask.h).astype(int) + 1
    lo = np.clip(lo, 0, np.array(mask.extents))
    hi = np.clip(hi, 0, np.array(mask.extents))
    if np.any(hi <= lo):
        return np.empty(0, dtype=np.int64)
    box = tuple(slice(a, b) for a, b in zip(lo, hi))
    num = mask.numbering[box]
    axes = [mask.origin[a] + mask.h * np.arange(lo[a], hi[a]) for a in range(mask.dim)]
    grids = np.meshgrid(*axes, indexing="ij")
    r2 = sum((g - c[a]) ** 2 for a, g in enumerate(grids))
    sel = (num >= 0) & (r2 <= ball.radius**2 * (1 + 1e-12))
    return np.sort(num[sel])


def chain_of_balls(mask: DomainMask, x_start, x_end, r: float) -> ChainReport:
    """Centers x_0..x_h joining two points with overlapping half-balls of radius r/2."""
    a = np.asarray(x_start, float)
    b = np.asarray(x_end, float)
    if not r > mask.h:
        raise GeometryError("chain radius must exceed the grid spacing")
    for p in (a, b):
        if interior_distance(mask, p) <= r:
            raise GeometryError("chain not constructible at this radius: endpoint too close to the boundary")
    step = r - mask.h
    if np.allclose(a, b):
        return ChainReport(a[None, :].copy(), r, 0)

    length = float(np.linalg.norm(b - a))
    n_probe = max(2, int(math.ceil(length / (0.5 * mask.h))) + 1)
    probe = a + np.linspace(0.0, 1.0, n_probe)[:, None] * (b - a)
    if np.all(mask.distance(probe) > r):
        n = int(math.ceil(length / step))
        centers = a + np.linspace(0.0, 1.0, n + 1)[:, None] * (b - a)
        return ChainReport(centers, r, n)

    path = _safe_path(mask, a, b, r)
    centers = [a]
    pos = 0
    while np.linalg.norm(path[-1] - centers[-1]) >= step:
        j = pos
        while j + 1 < len(path) and np.linalg.norm(path[j + 1] - centers[-1]) < step:
            j += 1
        if j == pos:
            raise GeometryError("chain not constructible at this radius")
        centers.append(path[j])
        pos = j
    if not np.allclose(centers[-1], b):
        centers.append(b)
    return ChainReport(np.array(centers), r, len(centers) - 1, straight=False)


def _safe_path(mask: DomainMask, a: np.ndarray, b: np.ndarray, r: float) -> np.ndarray:
    """Breadth-first path of node coordinates through {interior_distance > r}, from a to b."""
    safe_cells = np.flatnonzero(mask.cell_distance > r)
    if safe_cells.size == 0:
        raise GeometryError("chain not constructible at this radius")
    safe = np.zeros(mask.interior.shape, dtype=bool)
    mi = mask.interior_multi_index[safe_cells]
    safe[tuple(mi.T)] = True
    pts = mask.coords[safe_cells]
    tree = cKDTree(pts)
    step = r - mask.h
    da, ia = tree.query(a)
    db, ib = tree.query(b)
    if da >= step or db >= step:
        raise GeometryError("chain not constructible at this radius")
    start = tuple(mi[ia])
    goal = tuple(mi[ib])
    offsets = [o for o in np.ndindex(*(3,) * mask.dim) if any(v != 1 for v in o)]
    offsets = [tuple(v - 1 for v in o) for o in offsets]
    prev = {start: None}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        if cur == goal:
            break
        for off in offsets:
            nxt = tuple(c + o for c, o in zip(cur, off))
            if nxt not in prev and safe[nxt]:
                prev[nxt] = cur
                queue.append(nxt)
    if goal not in prev:
        raise GeometryError("chain not constructible at this radius: no safe path")
    nodes = []
    cur = goal
    while cur is not None:
        nodes.append(cur)
        cur = prev[cur]
    nodes.reverse()
    return np.concatenate([mask.node_coords(np.array(nodes)), b[None, :]])


def interior_sphere_defects(mask: DomainMask, r0: float) -> np.ndarray:
    """Boundary-adjacent interior nodes not covered by any deep ball, with a one-cell tolerance.

    A node is covered when it lies within ``r0 + h`` of an interior node whose
    distance to the boundary is at least ``r0 - h``.  Convex corners are never
    covered for r0 much larger than h; reentrant corners are.
    """
    if not r0 > 0:
        raise GeometryError("r0 must be positive")
    edge = np.flatnonzero(mask.boundary_adjacent)
    deep = mask.cell_distance >= r0 - mask.h
    if not deep.any():
        return edge
    dist, _ = cKDTree(mask.coords[deep]).query(mask.coords[edge])
    return edge[dist > r0 + mask.h]


def check_interior_sphere(mask: DomainMask, r0: float) -> bool:
    """Discrete interior sphere condition: no boundary-adjacent node is a defect."""
    return interior_sphere_defects(mask, r0).size == 0


def domain_from_spec(spec: dict) -> DomainMask:
    """Build a mask from a JSON-style dict such as {"shape": "disk", "radius": 1.0, "h": 1/64}."""
    spec = dict(spec)
    shape = spec.pop("shape")
    h = spec.pop("h")
    dim = spec.pop("dim", 2)
    return build_domain(shape, h, dim=dim, **spec)

