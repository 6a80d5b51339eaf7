from __future__ import annotations

import math

import numpy as np
import pytest
import sympy as sp

from plate_harnack.geometry import build_domain, interior_distance
from plate_harnack.linalg import spmv
from plate_harnack.plate import (
    ScalarField,
    assemble_plate,
    biharmonic,
    biharmonic_stencil,
    energy_report,
    gradient_constant,
    gradient_lt_norm,
    neg_laplacian,
    solve_plate,
    solve_plate_stats,
)


def _row(A, i):
    lo, hi = A.row_offsets[i], A.row_offsets[i + 1]
    return dict(zip(A.col_indices[lo:hi].tolist(), A.values[lo:hi].tolist()))


def _far_interior_node(mask):
    mid = np.array(mask.extents) // 2
    return int(mask.numbering[tuple(mid)]), mid


def test_beam_stencil_1d():
    st = {tuple(o): c for o, c in biharmonic_stencil(1)}
    assert st == {(-2,): 1.0, (-1,): -4.0, (0,): 6.0, (1,): -4.0, (2,): 1.0}


@pytest.mark.parametrize(
    "dim,expected",
    [
        (2, {0: 20.0, 1: -8.0, 2: 2.0, 4: 1.0}),  # keyed by squared offset length
        (3, {0: 42.0, 1: -12.0, 2: 2.0, 4: 1.0}),
    ],
)
def test_far_interior_biharmonic_row(dim, expected):
    h = 1 / 16
    m = build_domain("rectangle", h, dim=dim)
    B = biharmonic(m)
    i, mid = _far_interior_node(m)
    row = _row(B, i)
    assert len(row) == (13 if dim == 2 else 25)
    for j, v in row.items():
        off = m.interior_multi_index[j] - mid
        assert v * h**4 == pytest.approx(expected[int(off @ off)], abs=1e-9)
    # constants are annihilated away from the boundary
    assert abs(sum(row.values())) * h**4 < 1e-9
    L = neg_laplacian(m)
    assert abs(sum(_row(L, i).values())) * h**2 < 1e-12
    assert len(_row(L, i)) == 2 * dim + 1


def test_plate_matrix_is_b_plus_gamma_l():
    m = build_domain("disk", 1 / 16, radius=1.0)
    g = 3.5
    A = assemble_plate(m, g).to_dense()
    np.testing.assert_allclose(A, biharmonic(m).to_dense() + g * neg_laplacian(m).to_dense(), rtol=1e-14, atol=1e-9)


@pytest.mark.parametrize("shape,params", [("disk", {"radius": 1.0}), ("l_shape", {}), ("annulus", {})])
def test_symmetric_positive_definite(shape, params, rng):
    m = build_domain(shape, 1 / 16, **params)
    A = assemble_plate(m, 2.0)
    np.testing.assert_array_equal(A.to_dense(), A.to_dense().T)
    assert A.check_symmetric()
    for _ in range(100):
        x, y = rng.standard_normal((2, m.n_interior))
        ax, ay = spmv(A, x), spmv(A, y)
        assert abs(ax @ y - x @ ay) <= 1e-12 * np.linalg.norm(ax) * np.linalg.norm(y)
        assert x @ ax > 0


def test_coarse_and_negative_gamma_rejected():
    m = build_domain("rectangle", 0.25)
    with pytest.raises(ValueError, match="grid too coarse for biharmonic stencil"):
        assemble_plate(m, 0.0)
    with pytest.raises(ValueError, match="gamma"):
        assemble_plate(build_domain("rectangle", 1 / 8), -1.0)


def test_zero_source_zero_solution():
    m = build_domain("disk", 1 / 16, radius=1.0)
    u = solve_plate(m, 1.0, ScalarField.zeros(m))
    assert np.all(u.values == 0)
    rep = energy_report(m, 1.0, u, ScalarField.zeros(m))
    assert (rep.bend, rep.stretch, rep.work, rep.identity_residual) == (0.0, 0.0, 0.0, 0.0)


@pytest.mark.parametrize("gamma", [0.0, 4.0])
def test_manufactured_disk(gamma):
    h = 1 / 32
    m = build_domain("disk", h, radius=1.0)
    r2 = (m.coords**2).sum(axis=1)
    f = ScalarField(m, 64 + gamma * (8 - 16 * r2))
    u, stats = solve_plate_stats(m, gamma, f)
    assert stats.converged and stats.final_residual <= 1e-10
    exact = (1 - r2) ** 2
    # first-order staircase boundary: O(h) error
    assert np.abs(u.values - exact).max() < 2.0 * h
    rep = energy_report(m, gamma, u, f)
    assert rep.identity_residual <= 1e-6
    assert rep.bend >= 0 and rep.stretch >= 0


def test_manufactured_energy_against_analytic():
    m = build_domain("disk", 1 / 64, radius=1.0)
    f = ScalarField(m, np.full(m.n_interior, 64.0))
    u = solve_plate(m, 0.0, f)
    rep = energy_report(m, 0.0, u, f)
    assert abs(rep.bend - rep.work) <= 1e-6 * rep.work
    assert abs(rep.work - 64 * math.pi / 3) / (64 * math.pi / 3) < 0.05


def test_rectangle_second_order():
    x, y, g = sp.symbols("x y g")
    ue = (x * (1 - x) * y * (1 - y)) ** 2
    lap = sp.diff(ue, x, 2) + sp.diff(ue, y, 2)
    fe = sp.lambdify((x, y, g), sp.diff(lap, x, 2) + sp.diff(lap, y, 2) - g * lap, "numpy")
    uf = sp.lambdify((x, y), ue, "numpy")
    errs = []
    for h in (1 / 16, 1 / 32):
        m = build_domain("rectangle", h)
        c = m.coords
        u = solve_plate(m, 2.0, ScalarField(m, fe(c[:, 0], c[:, 1], 2.0)), tol=1e-12)
        errs.append(np.abs(u.values - uf(c[:, 0], c[:, 1])).max())
    assert 3.2 <= errs[0] / errs[1] <= 4.8


def test_positive_source_positive_work_and_max():
    m = build_domain("l_shape", 1 / 32)
    f = ScalarField.from_function(m, lambda p: np.exp(-((p - 0.25) ** 2).sum(axis=1) / 0.01))
    for gamma in (0.0, 5.0):
        u = solve_plate(m, gamma, f)
        rep = energy_report(m, gamma, u, f)
        assert rep.work > 0 and u.values.max() > 0
        assert rep.identity_residual <= 1e-6


def test_energy_nonincreasing_in_gamma():
    m = build_domain("rectangle", 1 / 32, upper=(2, 1))
    f = ScalarField.from_function(m, lambda p: 1.0 + p[:, 0])
    works = [energy_report(m, g, solve_plate(m, g, f), f).work for g in (0, 0.5, 1, 5, 20, 100, 1000)]
    assert all(b <= a for a, b in zip(works, works[1:]))


def test_three_dimensional_solve():
    m = build_domain("disk", 1 / 8, dim=3, radius=1.0)
    f = ScalarField(m, np.ones(m.n_interior))
    u, stats = solve_plate_stats(m, 1.0, f)
    assert stats.converged
    assert energy_report(m, 1.0, u, f).identity_residual <= 1e-6
    # the ball is symmetric under x <-> -x
    mirrored = m.numbering[tuple((np.array(m.extents) - 1 - m.interior_multi_index).T)]
    np.testing.assert_allclose(u.values[mirrored], u.values, rtol=1e-7)


def test_gradient_norms():
    m = build_domain("rectangle", 1 / 64)
    assert gradient_lt_norm(ScalarField.zeros(m), 2) == 0.0
    a = 3.0
    ramp = ScalarField.from_function(m, lambda p: a * p[:, 0])
    assert gradient_lt_norm(ramp, 2) == pytest.approx(a * 1.0, rel=0.02)
    with pytest.raises(ValueError):
        gradient_lt_norm(ramp, 0.5)


def test_gradient_constant_does_not_grow_with_gamma():
    for h in (1 / 32, 1 / 64):
        m = build_domain("disk", h, radius=1.0)
        f = ScalarField(m, np.full(m.n_interior, 64.0))
        cs = [gradient_constant(solve_plate(m, g, f), f, 6) for g in (0, 1, 10, 100)]
        assert all(np.isfinite(cs)) and cs[0] > 0
        assert max(cs) <= 1.1 * cs[0]


def test_gradient_constant_refinement_stable():
    vals = []
    for h in (1 / 32, 1 / 64):
        m = build_domain("disk", h, radius=1.0)
        f = ScalarField(m, np.full(m.n_interior, 64.0))
        vals.append(gradient_constant(solve_plate(m, 0.0, f), f, 6))
    assert abs(vals[1] - vals[0]) / vals[0] < 0.05


def test_field_arithmetic_and_integral():
    m = build_domain("disk", 1 / 32, radius=1.0)
    one = ScalarField(m, np.ones(m.n_interior))
    assert ScalarField.zeros(m).integral() == 0.0
    assert (one + one * 2).integral() == pytest.approx(3 * m.n_interior * m.cell_volume)
    assert (-one).values.min() == -1
    with pytest.raises(ValueError):
        ScalarField(m, np.full(m.n_interior, np.nan))
    assert interior_distance(m, (0, 0)) > 0.9
