import math

import numpy as np
import pytest

from boxswarm.gnn.losses import (
    hard_assignment,
    loss_ce,
    loss_ce_grad,
    loss_diversity,
    loss_diversity_grad,
    loss_total,
    loss_total_grad,
    loss_validity,
    loss_validity_grad,
)


def _soft(rng, shape):
    z = rng.normal(size=shape)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _fd(f, A, h=1e-6):
    g = np.zeros_like(A)
    for idx in np.ndindex(A.shape):
        a, b = A.copy(), A.copy()
        a[idx] += h
        b[idx] -= h
        g[idx] = (np.sum(f(a)) - np.sum(f(b))) / (2 * h)
    return g


def test_validity_values():
    assert loss_validity(np.eye(5)[[3, 1, 0, 4, 2]]) == 0.0
    assert loss_validity(np.array([[1.0, 0.0], [1.0, 0.0]])) == pytest.approx(math.sqrt(2))
    U = np.full((3, 4), 0.25)
    # column sums 0.75 -> first term ||0.25 * 1_4|| = 0.5; rows norm 0.5 -> ||0.5 * 1_3||
    assert loss_validity(U) == pytest.approx(0.5 + 0.5 * math.sqrt(3))


def test_diversity_values():
    assert loss_diversity(np.eye(4)[:3]) == 0.0
    assert loss_diversity(np.array([[0.0, 1.0], [0.0, 1.0]])) == pytest.approx(1.0)
    assert loss_diversity(np.full((3, 4), 0.25)) == pytest.approx(3.0)


def test_ce_values():
    Y = np.eye(5)[[1, 0, 4, 3, 2]]
    assert loss_ce(Y, Y, eps=1e-8) <= 1e-6
    A = np.full((5, 10), 0.1)
    Y10 = np.zeros((5, 10))
    Y10[np.arange(5), np.arange(5)] = 1
    pos = -0.9 * 5 * math.log(0.1 + 1e-8) / 50
    neg = -0.1 * 45 * math.log(0.9 + 1e-8) / 50
    assert loss_ce(A, Y10) == pytest.approx(pos + neg)
    assert math.isfinite(loss_ce(np.zeros((2, 2)), np.eye(2)))


def test_total_blend_edges():
    rng = np.random.default_rng(0)
    A = _soft(rng, (4, 6))
    Y = np.eye(6)[:4]
    H = hard_assignment(A)
    assert loss_total(A, H, Y, alpha=0.0) == pytest.approx(loss_ce(A, Y))
    assert loss_total(A, H, Y, alpha=1.0) == pytest.approx(loss_validity(H) + loss_diversity(H))
    P = np.eye(5)[[2, 0, 1, 4, 3]]
    assert loss_total(P, P, P) <= 1e-6
    # with more goals than agents the column term keeps the unclaimed goals' deficit
    assert loss_total(Y, Y, Y, alpha=1.0) == pytest.approx(math.sqrt(2))
    with pytest.raises(ValueError):
        loss_total(A, H, Y, alpha=1.5)


def test_hard_assignment_ties_go_low():
    H = hard_assignment(np.array([[0.5, 0.5, 0.0], [0.1, 0.2, 0.7]]))
    assert H.tolist() == [[1, 0, 0], [0, 0, 1]]


def test_batched_matches_single():
    rng = np.random.default_rng(1)
    A = _soft(rng, (3, 5, 7))
    Y = np.zeros_like(A)
    Y[:, np.arange(5), np.arange(5)] = 1
    for f in (loss_validity, loss_diversity):
        assert np.allclose(f(A), [f(a) for a in A])
    assert np.allclose(loss_ce(A, Y), [loss_ce(a, y) for a, y in zip(A, Y)])


@pytest.mark.parametrize("fn,grad", [
    (loss_validity, loss_validity_grad),
    (loss_diversity, loss_diversity_grad),
])
def test_structural_gradients(fn, grad):
    A = _soft(np.random.default_rng(2), (5, 10))
    _, g = grad(A)
    assert np.allclose(g, _fd(fn, A), rtol=1e-5, atol=1e-8)


def test_ce_and_total_gradients():
    rng = np.random.default_rng(3)
    A = _soft(rng, (2, 5, 10))
    Y = np.zeros_like(A)
    Y[:, np.arange(5), rng.permutation(10)[:5]] = 1
    _, g = loss_ce_grad(A, Y)
    assert np.allclose(g, _fd(lambda a: loss_ce(a, Y), A), rtol=1e-5, atol=1e-8)
    _, g = loss_total_grad(A, Y, ce_scale=7.0)

    def total(a):
        return 0.5 * (loss_validity(a) + loss_diversity(a)) + 0.5 * 7.0 * loss_ce(a, Y)

    assert np.allclose(g, _fd(total, A), rtol=1e-5, atol=1e-8)
