"""Matrix norms, the hybrid norm and coherence measures."""

import numpy as np

from ._validation import as_matrix, check_alpha
from .exceptions import BadExponentError, DimensionMismatchError, TooFewColumnsError


def lpq_norm(M, p=2.0, q=2.0):
    """Entrywise ``L_{p,q}`` norm.

    The inner ``p``-sum runs along each row, the outer ``q``-sum over rows:
    ``(sum_i (sum_j |m_ij|^p)^(q/p))^(1/q)``. ``(2, 2)`` is the Frobenius
    norm and ``(1, 1)`` the sum of absolute entries.
    """
    A = as_matrix(M)
    p, q = float(p), float(q)
    if not (p >= 1.0 and q >= 1.0):
        raise BadExponentError(f"p and q must be >= 1, got p={p}, q={q}")
    absA = np.abs(A)
    if p == 2.0 and q == 2.0:
        return float(np.sqrt(np.sum(absA * absA)))
    if p == 1.0 and q == 1.0:
        return float(np.sum(absA))
    scale = absA.max()
    if scale == 0.0:
        return 0.0
    # scaling keeps large exponents from overflowing
    rows = np.sum((absA / scale) ** p, axis=1) ** (1.0 / p)
    return float(scale * np.sum(rows**q) ** (1.0 / q))


def hybrid_norm(M, alpha):
    """``alpha * ||M||_F^2 + (1 - alpha) * ||M||_{1,1}``; the Frobenius term is squared."""
    alpha = check_alpha(alpha)
    A = as_matrix(M)
    return float(alpha * np.sum(A * A) + (1.0 - alpha) * np.sum(np.abs(A)))


def gram(M):
    """Inner products of the columns of ``M``, symmetric by construction."""
    A = as_matrix(M)
    G = A.T @ A
    return 0.5 * (G + G.T)


def _offdiag_abs(M):
    A = as_matrix(M)
    n = A.shape[1]
    if n < 2:
        raise TooFewColumnsError(f"need at least 2 columns, got {n}")
    G = np.abs(gram(A))
    iu = np.triu_indices(n, k=1)
    return G[iu]


def mutual_coherence(M):
    """Largest ``|<m_i, m_j>|`` over distinct columns.

    Columns are not normalised here; normalise first to get a value in [0, 1].
    """
    return float(np.max(_offdiag_abs(M)))


def avg_mutual_coherence(M):
    """Mean of ``|<m_i, m_j>|`` over the ``n(n-1)/2`` unordered column pairs."""
    return float(np.mean(_offdiag_abs(M)))


def cross_block_coherence(Dk, Dj):
    """``||Dk^T Dj||_F^2``, the incoherence penalty between two blocks."""
    A = as_matrix(Dk, "Dk")
    B = as_matrix(Dj, "Dj")
    if A.shape[0] != B.shape[0]:
        raise DimensionMismatchError(
            f"blocks have different row counts: {A.shape[0]} vs {B.shape[0]}"
        )
    C = A.T @ B
    return float(np.sum(C * C))
