"""Assignment losses and their gradients with respect to the soft assignment.

Every function accepts a single ``(n_a, n_g)`` matrix or a batch
``(B, n_a, n_g)``; batched inputs return one value per graph.  The ``*_grad``
variants return ``(value, dvalue/dA)`` for training.
"""

import numpy as np

EPS = 1e-8
ALPHA = 0.5
POS_WEIGHT = 0.9
NEG_WEIGHT = 0.1


def loss_validity(A):
    """``||1 - sum_i A_i||_2 + ||1 - ||A_i||_2||_2``.

    The first norm runs over goals (column sums), the second over agents
    (per-row deviation of the Euclidean row norm from one).
    """
    A = np.asarray(A, dtype=np.float64)
    col = 1.0 - A.sum(axis=-2)
    row = 1.0 - np.sqrt(np.sum(A * A, axis=-1))
    return np.sqrt(np.sum(col * col, axis=-1)) + np.sqrt(np.sum(row * row, axis=-1))


def loss_validity_grad(A):
    A = np.asarray(A, dtype=np.float64)
    col = 1.0 - A.sum(axis=-2)
    t1 = np.sqrt(np.sum(col * col, axis=-1))
    q = np.sqrt(np.sum(A * A, axis=-1))
    row = 1.0 - q
    t2 = np.sqrt(np.sum(row * row, axis=-1))
    with np.errstate(invalid="ignore", divide="ignore"):
        g1 = np.where(t1[..., None] > 0, -col / t1[..., None], 0.0)
        coef = np.where(t2[..., None] > 0, -row / t2[..., None], 0.0)
        coef = np.where(q > 0, coef / q, 0.0)
    grad = g1[..., None, :] + coef[..., None] * A
    return t1 + t2, grad


def loss_diversity(A, eps=EPS):
    """Sum over agent pairs ``i < j`` of the cosine similarity of their rows."""
    A = np.asarray(A, dtype=np.float64)
    n = np.maximum(np.sqrt(np.sum(A * A, axis=-1)), eps)
    U = A / n[..., None]
    tot = U.sum(axis=-2)
    return 0.5 * (np.sum(tot * tot, axis=-1) - np.sum(U * U, axis=(-2, -1)))


def loss_diversity_grad(A, eps=EPS):
    A = np.asarray(A, dtype=np.float64)
    q = np.sqrt(np.sum(A * A, axis=-1))
    n = np.maximum(q, eps)
    U = A / n[..., None]
    tot = U.sum(axis=-2)
    value = 0.5 * (np.sum(tot * tot, axis=-1) - np.sum(U * U, axis=(-2, -1)))
    g = tot[..., None, :] - U  # d value / dU_i = sum_{j != i} U_j
    radial = np.sum(U * g, axis=-1, keepdims=True)
    clipped = (q <= eps)[..., None]
    grad = np.where(clipped, g / n[..., None], (g - U * radial) / n[..., None])
    return value, grad


def loss_ce(A, Y, eps=EPS):
    """Weighted binary cross-entropy, expectations taken over all matrix entries."""
    A = np.asarray(A, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    pos = -POS_WEIGHT * np.mean(Y * np.log(A + eps), axis=(-2, -1))
    neg = -NEG_WEIGHT * np.mean((1.0 - Y) * np.log(1.0 - A + eps), axis=(-2, -1))
    return pos + neg


def loss_ce_grad(A, Y, eps=EPS):
    A = np.asarray(A, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    size = A.shape[-1] * A.shape[-2]
    value = loss_ce(A, Y, eps)
    grad = (-POS_WEIGHT * Y / (A + eps) + NEG_WEIGHT * (1.0 - Y) / (1.0 - A + eps)) / size
    return value, grad


def loss_total(A, A_hard, Y, alpha=ALPHA, eps=EPS):
    """``alpha * (validity + diversity) + (1 - alpha) * cross-entropy``.

    The structural terms are evaluated on ``A_hard``; pass the soft matrix
    there for the differentiable training objective.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    structural = loss_validity(A_hard) + loss_diversity(A_hard, eps)
    return alpha * structural + (1.0 - alpha) * loss_ce(A, Y, eps)


def loss_total_grad(A, Y, alpha=ALPHA, eps=EPS, ce_scale=1.0):
    """Training objective on the soft assignment and its gradient.

    ``ce_scale`` multiplies the cross-entropy term (1.0 is the plain blend).
    """
    v1, g1 = loss_validity_grad(A)
    v2, g2 = loss_diversity_grad(A, eps)
    v3, g3 = loss_ce_grad(A, Y, eps)
    w = (1.0 - alpha) * ce_scale
    return alpha * (v1 + v2) + w * v3, alpha * (g1 + g2) + w * g3


def hard_assignment(A):
    """Row-wise one-hot of the argmax (lowest index wins ties)."""
    A = np.asarray(A)
    out = np.zeros_like(A, dtype=np.float64)
    idx = np.argmax(A, axis=-1)
    np.put_along_axis(out, idx[..., None], 1.0, axis=-1)
    return out
