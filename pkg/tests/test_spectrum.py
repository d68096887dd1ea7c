import numpy as np
import pytest
from scipy.optimize import brentq

from lvbif.spectrum import (EigenPair, assemble_neumann_laplacian, ball_volume,
                            bessel_oracle, build_grid, count_sign_changes,
                            eigenpairs, export_eigenpairs_csv)


def test_grid_invariants():
    for dim, vol in ((2, np.pi), (3, 4 * np.pi / 3)):
        grid = build_grid(dim, 256)
        assert np.all(np.diff(grid.r) > 0)
        assert grid.r[0] == pytest.approx(grid.h / 2)
        assert grid.r[-1] == 1.0
        assert np.all(grid.weights > 0)
        assert grid.weights.sum() == pytest.approx(vol, rel=1e-10)
        assert ball_volume(dim) == pytest.approx(vol, rel=1e-14)


def test_grid_rejects_small_n():
    with pytest.raises(ValueError, match="n >= 16"):
        build_grid(2, 8)


def test_operator_annihilates_constants(op256, grid256):
    out = op256.apply(np.ones(grid256.n))
    assert np.max(np.abs(out)) < 1e-12


def test_operator_symmetric_in_weighted_inner_product(op256, grid256):
    rng = np.random.default_rng(0)
    for _ in range(5):
        u = rng.uniform(-1, 1, grid256.n)
        v = rng.uniform(-1, 1, grid256.n)
        lhs = grid256.inner(op256.apply(u), v)
        rhs = grid256.inner(u, op256.apply(v))
        assert abs(lhs - rhs) < 1e-12 * max(abs(lhs), 1.0)


def test_operator_on_quadratic_matches_laplacian(op256, grid256):
    # Lap r^2 = 2N, so -Lap gives -4 in N=2; the boundary node is excluded
    # because r^2 violates the Neumann condition there
    out = op256.apply(grid256.r ** 2)
    assert np.max(np.abs(out[:-1] + 4.0)) < 1e-8


def test_eigenpairs_mode_zero(pairs256):
    p0 = pairs256[0]
    assert abs(p0.lam) < 1e-8
    assert np.max(np.abs(p0.f - 1.0)) < 1e-8
    assert p0.f[0] > 0


def test_eigenpairs_simple_increasing_and_nodal(pairs256):
    lams = [q.lam for q in pairs256]
    assert all(l2 > l1 for l1, l2 in zip(lams, lams[1:]))
    for q in pairs256:
        assert count_sign_changes(q.f) == q.j
        assert q.f[0] > 0
        assert np.max(np.abs(q.f)) == pytest.approx(1.0, abs=1e-14)


def test_eigenpairs_orthogonality(pairs256, grid256):
    for i, qi in enumerate(pairs256):
        for qj in pairs256[i + 1:]:
            ip = grid256.inner(qi.f, qj.f)
            ni = np.sqrt(grid256.inner(qi.f, qi.f))
            nj = np.sqrt(grid256.inner(qj.f, qj.f))
            assert abs(ip) / (ni * nj) < 1e-8


@pytest.mark.parametrize("dim,expected", [
    (2, [14.68197064, 49.2184563, 103.4994539]),
    (3, [20.1907286, 59.6795159, 118.8998692]),
])
def test_bessel_oracle_reference_values(dim, expected):
    assert bessel_oracle(dim, 0) == 0.0
    for j, val in enumerate(expected, start=1):
        assert bessel_oracle(dim, j) == pytest.approx(val, rel=1e-9)


def test_bessel_oracle_squares_of_zeros():
    assert bessel_oracle(2, 1) == pytest.approx(3.83170597 ** 2, rel=1e-8)
    assert bessel_oracle(2, 2) == pytest.approx(7.01558667 ** 2, rel=1e-8)
    assert bessel_oracle(3, 1) == pytest.approx(4.49340946 ** 2, rel=1e-8)


def test_n3_oracle_matches_tan_root():
    # independent route: for N=3 the Neumann condition reduces to tan x = x
    x1 = brentq(lambda x: np.tan(x) - x, np.pi + 1e-9, 1.5 * np.pi - 1e-9,
                xtol=1e-14)
    assert bessel_oracle(3, 1) == pytest.approx(x1 ** 2, rel=1e-10)


@pytest.mark.parametrize("dim", [2, 3])
def test_grid_convergence_second_order(dim):
    errs = {}
    for n in (128, 256, 512):
        grid = build_grid(dim, n)
        op = assemble_neumann_laplacian(grid)
        pairs = eigenpairs(op, grid, 3)
        errs[n] = [abs(pairs[j].lam - bessel_oracle(dim, j)) for j in range(1, 4)]
    for j in range(3):
        p1 = np.log2(errs[128][j] / errs[256][j])
        p2 = np.log2(errs[256][j] / errs[512][j])
        assert 1.8 <= p1 <= 2.2
        assert 1.8 <= p2 <= 2.2


def test_eigen_residuals_reported(op256, grid256, pairs256):
    for q in pairs256:
        res = np.max(np.abs(op256.apply(q.f) - q.lam * q.f))
        assert res < 1e-8 * max(q.lam, 1.0)


def test_csv_export_roundtrip(tmp_path, pairs256, grid256):
    path = tmp_path / "eig.csv"
    export_eigenpairs_csv(path, pairs256, grid256, params_line="params={}")
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# dim=2 n=256")
    assert lines[1].startswith("j,lambda,")
    assert len(lines) == 2 + len(pairs256)
    first = lines[2].split(",")
    assert int(first[0]) == 0
    assert float(first[1]) == pairs256[0].lam
