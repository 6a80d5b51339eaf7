from __future__ import annotations

import numpy as np
import pytest

from plate_harnack.geometry import build_domain
from plate_harnack.plate import ScalarField, solve_plate
from plate_harnack.positivity import (
    compute_gamma0,
    decompose_source,
    dilate,
    exhaustion,
    gamma0_both,
    interpolation_scan,
    is_positive,
    partition_of_unity_error,
    scan_gamma,
    superposition_check,
)


def test_gamma0_examples(e2):
    assert compute_gamma0(0.0, 2.0, e2, 1.5) == 0.0
    for v in ("two_eta", "four_eta"):
        assert compute_gamma0(1.0, 1.0, e2, 1.0, v) == 1.0
    with pytest.raises(ValueError):
        compute_gamma0(1.0, 1.0, e2, 1.0, "six_eta")
    with pytest.raises(ValueError):
        compute_gamma0(1.0, 0.0, e2, 1.0)


def test_gamma0_monotone(e2):
    fs = [0.1, 0.5, 1.0, 3.0]
    ds = [0.5, 1.0, 4.0]
    for v in ("two_eta", "four_eta"):
        g = [compute_gamma0(f, 1.0, e2, 1.3, v) for f in fs]
        assert all(b > a for a, b in zip(g, g[1:]))
        g = [compute_gamma0(1.0, d, e2, 1.3, v) for d in ds]
        assert all(b > a for a, b in zip(g, g[1:]))


def test_gamma0_variant_ordering(e2):
    big = gamma0_both(2.0, 3.0, e2, 1.5)
    assert big["four_eta"] >= big["two_eta"]
    small = gamma0_both(0.2, 0.5, e2, 0.7)
    assert small["four_eta"] <= small["two_eta"]
    # four_eta is the square of two_eta because every exponent doubles
    assert big["four_eta"] == pytest.approx(big["two_eta"] ** 2, rel=1e-12)


def test_scan_disk_boggio_and_energy(e2):
    m = build_domain("disk", 1 / 32, radius=1.0)
    f = ScalarField(m, np.ones(m.n_interior))
    grid = [0.0, 1.0, 4.0, 16.0, 64.0]
    res = scan_gamma(m, f, grid, e2, 1.5)
    assert res.gammas == grid
    assert res.points[0].min_u >= -1e-8 * res.points[0].max_u
    assert res.gamma_star_empirical == 0.0
    assert all(b <= a for a, b in zip(res.energies, res.energies[1:]))
    for p in res.points:
        assert p.energy > 0 and p.max_u > 0
        assert p.identity_residual <= 1e-6
    summ = res.summary()
    assert set(summ["gamma0"]) == {"two_eta", "four_eta"} and summ["constant"] == 1.5


def test_scan_threads_match_serial(e2):
    m = build_domain("disk", 1 / 16, radius=1.0)
    f = ScalarField(m, np.ones(m.n_interior))
    a = scan_gamma(m, f, [0, 1, 2], e2, 1.0, threads=1)
    b = scan_gamma(m, f, [0, 1, 2], e2, 1.0, threads=3)
    assert a.min_u == b.min_u and a.energies == b.energies


def test_scan_rejects_bad_input(e2):
    m = build_domain("disk", 1 / 16, radius=1.0)
    f = ScalarField(m, np.ones(m.n_interior))
    with pytest.raises(ValueError, match="strictly increasing"):
        scan_gamma(m, f, [1.0, 0.0], e2, 1.0)
    with pytest.raises(ValueError, match="nonnegative"):
        scan_gamma(m, -f, [0.0], e2, 1.0)


def test_exhaustion_nested():
    m = build_domain("disk", 1 / 32, radius=1.0)
    sets = exhaustion(m, 3)
    assert len(sets) == 3 and sets[-1].all()
    for a, b in zip(sets, sets[1:]):
        assert not np.any(a & ~b) and a.sum() < b.sum()


def test_decompose_examples():
    m = build_domain("disk", 1 / 16, radius=1.0)
    f = ScalarField(m, np.ones(m.n_interior))
    one = decompose_source(f, [np.ones(m.n_interior, bool)])
    np.testing.assert_array_equal(one.parts[0].values, f.values)
    inner = m.cell_distance > 0.5
    two = decompose_source(f, [inner, np.ones(m.n_interior, bool)])
    np.testing.assert_allclose(two.weights[inner], 1.25)
    np.testing.assert_allclose(two.parts[0].values[inner], 0.8)
    np.testing.assert_allclose(two.parts[1].values[inner], 0.2)
    np.testing.assert_allclose(two.parts[1].values[~inner], 1.0)
    np.testing.assert_allclose(two.total().values, f.values, rtol=1e-15)
    zero = decompose_source(ScalarField.zeros(m), [inner, np.ones(m.n_interior, bool)])
    assert all(np.all(g.values == 0) for g in zero.parts)


def test_decompose_invariants_and_errors():
    m = build_domain("disk", 1 / 32, radius=1.0)
    f = ScalarField.from_function(m, lambda x: 1 + x[:, 0] ** 2)
    dec = decompose_source(f, exhaustion(m, 3))
    assert partition_of_unity_error(dec) <= 1e-12
    assert np.abs(dec.total().values - f.values).max() <= 1e-12 * np.abs(f.values).max()
    for om, g in zip(dec.omegas, dec.parts):
        assert np.all(g.values[~om] == 0) and np.all(g.values >= 0)
    inner = exhaustion(m, 3)[:2]
    with pytest.raises(ValueError, match="source escapes exhaustion"):
        decompose_source(f, inner)
    with pytest.raises(ValueError, match="nested"):
        decompose_source(f, inner[::-1])


def test_superposition():
    m = build_domain("disk", 1 / 32, radius=1.0)
    f = ScalarField(m, np.ones(m.n_interior))
    single = superposition_check(m, 1.0, decompose_source(f, [np.ones(m.n_interior, bool)]))
    assert single.relative_gap <= 1e-10
    res = superposition_check(m, 1.0, decompose_source(f, exhaustion(m, 3)))
    assert res.relative_gap <= 1e-8
    assert all(b <= a for a, b in zip(res.partial_gaps, res.partial_gaps[1:]))


def test_interpolation_disk_positive():
    m = build_domain("disk", 1 / 32, radius=1.0)
    f = ScalarField(m, np.ones(m.n_interior))
    res = interpolation_scan(m, f, 10.0, n_tau=6)
    assert res.verdict == "positive throughout"
    assert res.taus[0] == 0.0 and res.taus[-1] == 1.0 and res.gamma_taus[-1] == 10.0
    assert res.min_w[0] == float(solve_plate(m, 0.0, f).values.min())
    assert res.min_w[-1] == float(solve_plate(m, 10.0, f).values.min())


def test_interpolation_endpoint_failure_reported():
    # the rectangle's corners carry a small negative lobe at gamma = 0
    m = build_domain("rectangle", 1 / 32, upper=(4, 1))
    f = ScalarField.from_function(
        m, lambda x: sum(np.exp(-((x - c) ** 2).sum(axis=1) / 0.02) for c in ((1.0, 0.5), (3.0, 0.5)))
    )
    res = interpolation_scan(m, f, 5.0, n_tau=3)
    assert res.min_w[0] < 0
    assert res.verdict == "endpoint hypothesis fails"
    assert len(res.min_w) == 3


def test_dilation_reproduces_solution():
    m = build_domain("rectangle", 1 / 32, upper=(2, 1))
    fn = lambda x: 1.0 + x[:, 0]  # noqa: E731
    gamma, s = 3.0, 2.0
    u = solve_plate(m, gamma, ScalarField.from_function(m, fn), tol=1e-12)
    small, g, gs = dilate(m, fn, gamma, s)
    v = solve_plate(small, gs, g, tol=1e-12)
    assert small.h == m.h / s and gs == gamma * s**2
    np.testing.assert_allclose(small.coords * s, m.coords)
    assert np.abs(v.values - u.values).max() <= 1e-9 * np.abs(u.values).max()


def test_is_positive():
    m = build_domain("disk", 1 / 16, radius=1.0)
    assert is_positive(ScalarField(m, np.ones(m.n_interior)))
    vals = np.ones(m.n_interior)
    vals[0] = -1e-3
    assert not is_positive(ScalarField(m, vals))


def test_inverse_dilation_scaling_does_not_reproduce():
    # source s^-4 f and gamma / s^2 describe u(y / s) on the dilated domain, not u(s y)
    m = build_domain("rectangle", 1 / 32, upper=(2, 1))
    fn = lambda x: 1.0 + x[:, 0]  # noqa: E731
    gamma, s = 3.0, 2.0
    u = solve_plate(m, gamma, ScalarField.from_function(m, fn))
    small = m.scaled(1 / s)
    v = solve_plate(small, gamma / s**2, ScalarField.from_function(small, lambda y: s**-4 * fn(s * y)))
    assert np.abs(v.values - u.values).max() > 0.5 * np.abs(u.values).max()
