import numpy as np
import pytest

from boxswarm import _kernels_py, kernels
from boxswarm.registration import box_pair_cost

compiled = kernels.compiled()
needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled extension not built")


def _random_corners(rng, n):
    base = rng.uniform(0, 1000, size=(n, 1, 2))
    return base + rng.uniform(0, 80, size=(n, 4, 2))


def test_backend_reported():
    assert kernels.BACKEND in ("python", "cython")


@needs_compiled
def test_lsa_backends_agree():
    rng = np.random.default_rng(0)
    for _ in range(300):
        m = rng.integers(1, 9)
        n = rng.integers(m, 12)
        c = rng.normal(size=(m, n))
        assert np.array_equal(compiled.lsa(c), _kernels_py.lsa(c))


@needs_compiled
def test_box_cost_backends_agree_bitwise():
    rng = np.random.default_rng(1)
    for _ in range(50):
        a = _random_corners(rng, rng.integers(1, 8))
        b = _random_corners(rng, rng.integers(1, 8))
        c1, m1 = compiled.box_cost_matrix(a, b)
        c2, m2 = _kernels_py.box_cost_matrix(a, b)
        assert np.array_equal(c1, c2)
        assert np.array_equal(m1, m2)


def test_box_cost_matches_per_pair_assignment():
    rng = np.random.default_rng(2)
    a = _random_corners(rng, 4)
    b = _random_corners(rng, 5)
    cost, match = kernels.box_cost_matrix(a, b)
    for i in range(4):
        for j in range(5):
            total, perm = box_pair_cost(a[i], b[j])
            assert cost[i, j] == pytest.approx(total, rel=1e-12)
            d = np.linalg.norm(a[i][:, None] - b[j][None], axis=2)
            assert d[np.arange(4), match[i, j]].sum() == pytest.approx(total, rel=1e-12)


def test_identical_boxes_match_corner_to_corner():
    a = _random_corners(np.random.default_rng(3), 3)
    cost, match = kernels.box_cost_matrix(a, a)
    assert np.all(np.diag(cost) == 0)
    assert all(list(match[i, i]) == [0, 1, 2, 3] for i in range(3))


def test_use_backend_switches_and_restores():
    before = kernels.BACKEND
    with kernels.use_backend("python"):
        assert kernels.BACKEND == "python"
        assert kernels.lsa is _kernels_py.lsa
    assert kernels.BACKEND == before
