from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plate_harnack.geometry import (
    Ball,
    GeometryError,
    ball_cells,
    build_domain,
    chain_of_balls,
    check_interior_sphere,
    domain_from_spec,
    interior_distance,
    interior_sphere_defects,
    unit_ball_volume,
)


def test_smallest_rectangle_has_one_cell():
    m = build_domain("rectangle", 0.5)
    assert m.n_interior == 1
    np.testing.assert_allclose(m.coords[0], [0.5, 0.5])
    assert m.diameter <= math.sqrt(2)


def test_disk_area_quadrature():
    m = build_domain("disk", 1 / 64, radius=1.0)
    assert abs(m.n_interior * m.cell_volume - math.pi) / math.pi < 0.05
    # the oracle: count of nodes strictly inside x^2 + y^2 < 1 on the same lattice
    x = m.origin[0] + m.h * np.arange(m.extents[0])
    X, Y = np.meshgrid(x, x, indexing="ij")
    assert m.n_interior == int((X**2 + Y**2 < 1 - 1e-12).sum())


def test_disk_volume_two_resolutions():
    for dim, R in ((2, 1.0), (3, 1.0)):
        for h in ((1 / 32, 1 / 64) if dim == 2 else (1 / 32,)):
            m = build_domain("disk", h, dim=dim, radius=R)
            exact = unit_ball_volume(dim) * R**dim
            assert abs(m.n_interior * m.cell_volume - exact) / exact < 0.05


def test_rectangle_diameter_close_to_diagonal():
    h = 1 / 32
    m = build_domain("rectangle", h, lower=(0, 0), upper=(4, 1))
    assert abs(m.diameter - math.sqrt(17)) <= h


@pytest.mark.parametrize(
    "shape,params",
    [("disk", {"radius": 1.0}), ("annulus", {"inner": 0.4, "outer": 1.0}), ("l_shape", {}), ("rectangle", {"upper": (4, 1)})],
)
def test_diameter_brackets_node_diameter(shape, params):
    # the closure diameter sits between the interior node diameter and that plus two cells
    h = 1 / 32
    m = build_domain(shape, h, **params)
    assert m.node_diameter - 1e-12 <= m.diameter <= m.node_diameter + 2 * h


def test_interior_has_margin():
    m = build_domain("disk", 1 / 16, radius=1.0)
    g = m.interior
    assert not g[0].any() and not g[-1].any() and not g[:, 0].any() and not g[:, -1].any()


def test_errors():
    with pytest.raises(GeometryError, match="resolution too coarse"):
        build_domain("rectangle", 2.0)
    with pytest.raises(GeometryError, match="resolution too coarse"):
        build_domain("dumbbell", 0.5, corridor=0.1)
    with pytest.raises(GeometryError, match="degenerate domain"):
        build_domain("custom", 0.1, inside=lambda x: np.zeros(x.shape[:-1], bool), lower=(0, 0), upper=(1, 1))
    with pytest.raises(GeometryError, match="unknown shape"):
        build_domain("hexagon", 0.1)


def test_interior_distance_examples():
    h = 1 / 64
    sq = build_domain("rectangle", h)
    assert abs(interior_distance(sq, (0.5, 0.5)) - 0.5) <= h
    assert interior_distance(sq, (0.0, 0.5)) == 0.0
    disk = build_domain("disk", h, radius=1.0)
    assert abs(interior_distance(disk, (0.0, 0.0)) - 1.0) <= h
    with pytest.raises(GeometryError, match="point out of range"):
        interior_distance(sq, (5.0, 0.5))


def test_interior_distance_lipschitz(rng):
    m = build_domain("l_shape", 1 / 32)
    pts = m.coords[rng.choice(m.n_interior, size=400)]
    d = m.distance(pts)
    for i in range(0, 400, 2):
        gap = abs(d[i] - d[i + 1])
        assert gap <= np.linalg.norm(pts[i] - pts[i + 1]) + m.h + 1e-12


def test_ball_cells_examples():
    h = 1 / 64
    m = build_domain("rectangle", h, lower=(0, 0), upper=(2, 2))
    c = m.coords[100]
    cells = ball_cells(m, Ball(tuple(c), 0.4 * h))
    assert list(cells) == [100]
    R = 16 * h
    big = ball_cells(m, Ball((1.0, 1.0), R))
    assert abs(big.size * m.cell_volume - math.pi * R**2) / (math.pi * R**2) < 0.05
    assert ball_cells(m, Ball((10.0, 10.0), 0.5)).size == 0
    assert np.all(np.diff(big) > 0)


@settings(max_examples=30, deadline=None)
@given(r1=st.floats(0.01, 0.4), r2=st.floats(0.01, 0.4), cx=st.floats(0.2, 0.8), cy=st.floats(0.2, 0.8))
def test_ball_cells_monotone(r1, r2, cx, cy):
    m = build_domain("rectangle", 1 / 32)
    lo, hi = sorted((r1, r2))
    small = set(ball_cells(m, Ball((cx, cy), lo)).tolist())
    large = set(ball_cells(m, Ball((cx, cy), hi)).tolist())
    assert small <= large


def _assert_chain_valid(m, rep):
    c = rep.centers
    for a, b in zip(c[:-1], c[1:]):
        assert np.linalg.norm(a - b) < rep.radius
    for x in c:
        assert interior_distance(m, x) > rep.radius


def test_chain_examples():
    m = build_domain("rectangle", 1 / 64)
    same = chain_of_balls(m, (0.5, 0.5), (0.5, 0.5), 0.2)
    assert same.h == 0 and len(same.centers) == 1
    rep = chain_of_balls(m, (0.25, 0.5), (0.75, 0.5), 0.2)
    assert rep.h <= math.ceil(0.5 / (0.2 * 0.99)) + 1
    assert rep.straight
    _assert_chain_valid(m, rep)


def test_chain_bfs_around_reentrant_corner():
    m = build_domain("l_shape", 1 / 64)
    rep = chain_of_balls(m, (0.25, 0.8), (0.8, 0.25), 0.1)
    assert not rep.straight
    _assert_chain_valid(m, rep)
    for a, b in zip(rep.centers[:-1], rep.centers[1:]):
        assert np.linalg.norm(a - b) <= rep.radius * (1 - m.h / rep.radius) + 1e-12


def test_chain_dumbbell_corridor_too_narrow():
    m = build_domain("dumbbell", 1 / 64, radius=0.5, separation=2.0, corridor=0.1)
    with pytest.raises(GeometryError, match="chain not constructible"):
        chain_of_balls(m, (-1.0, 0.0), (1.0, 0.0), 0.2)


def test_interior_sphere_examples():
    disk = build_domain("disk", 1 / 64, radius=1.0)
    assert check_interior_sphere(disk, 0.25)
    assert not check_interior_sphere(disk, 1.2)


def test_interior_sphere_lshape_reentrant_corner_is_touchable():
    # the reentrant corner is covered; the only defects are at the five convex corners,
    # which no interior ball of radius r0 >> h can touch
    ell = build_domain("l_shape", 1 / 64)
    r0 = 0.25
    bad = ell.coords[interior_sphere_defects(ell, r0)]
    convex = np.array([[0, 0], [1, 0], [1, 0.5], [0.5, 1], [0, 1]], float)
    nearest = np.min(np.linalg.norm(bad[:, None, :] - convex[None], axis=2), axis=1)
    assert np.all(nearest < r0)
    reentrant = np.linalg.norm(ell.coords[ell.boundary_adjacent] - [0.5, 0.5], axis=1) < r0 / 2
    assert reentrant.any()
    assert not np.any(np.linalg.norm(bad - [0.5, 0.5], axis=1) < r0 / 2)
    assert not check_interior_sphere(ell, r0)
    assert not check_interior_sphere(build_domain("rectangle", 1 / 64), r0)


def test_domain_from_spec_and_metadata():
    m = domain_from_spec({"shape": "disk", "radius": 1.0, "h": 0.0625})
    meta = m.metadata()
    assert meta["shape_tag"] == "disk" and meta["h"] == 0.0625 and meta["n_interior"] == m.n_interior


def test_scaled_mask_preserves_nodes():
    m = build_domain("rectangle", 1 / 16, upper=(2, 1))
    s = m.scaled(0.5)
    np.testing.assert_allclose(s.coords, 0.5 * m.coords)
    assert s.h == m.h / 2
