"""Sparse coding against a fixed dictionary.

Two coders are provided:

* :func:`sparse_code_hybrid` minimises
  ``alpha*||y - Dx||_2^2 + (1-alpha)*||y - Dx||_1 + gamma*||x||_1`` by cyclic
  coordinate descent with exact one-dimensional steps. With ``alpha=1`` this
  is the penalised LASSO.
* :func:`sparse_code_omp` is orthogonal matching pursuit, the Gaussian-noise
  baseline.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._validation import as_matrix, as_vector, check_alpha, check_nonnegative, check_rows
from .exceptions import ConfigError, DimensionMismatchError, ZeroAtomError, ZeroColumnError


@dataclass(frozen=True)
class CoderStop:
    """Stopping rule for the hybrid coder.

    The coder stops as soon as the l2 residual drops to
    ``residual_threshold``, the relative objective decrease over a sweep
    falls below ``objective_rel_tol``, or ``max_sweeps`` sweeps have run.
    """

    residual_threshold: float = 0.01
    max_sweeps: int = 200
    objective_rel_tol: float = 1e-6

    def __post_init__(self):
        if not self.residual_threshold >= 0.0:
            raise ConfigError("residual_threshold must be >= 0")
        if int(self.max_sweeps) != self.max_sweeps or self.max_sweeps < 1:
            raise ConfigError("max_sweeps must be a positive integer")
        if not self.objective_rel_tol >= 0.0:
            raise ConfigError("objective_rel_tol must be >= 0")


@dataclass(frozen=True)
class SparseCode:
    coef: np.ndarray
    residual_norm: float
    objective: float = float("nan")
    n_iter: int = 0
    trace: np.ndarray = field(default=None, repr=False)

    @property
    def support(self):
        return np.flatnonzero(self.coef)

    def __len__(self):
        return self.coef.shape[0]


def _check_dictionary(D, m=None):
    D = as_matrix(D, "D")
    if m is not None:
        check_rows(m, D)
    norms = np.sqrt(np.sum(D * D, axis=0))
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ZeroColumnError(int(zero[0]), f"dictionary column {zero[0]} is identically zero")
    # column-major: the kernels walk one atom at a time
    return np.asfortranarray(D)


def hybrid_objective(y, D, x, alpha, gamma):
    r = np.asarray(y, dtype=float) - np.asarray(D, dtype=float) @ np.asarray(x, dtype=float)
    return float(alpha * np.sum(r * r) + (1.0 - alpha) * np.sum(np.abs(r)) + gamma * np.sum(np.abs(x)))


def solve_scalar_subproblem(residual, atom, alpha, gamma):
    """Exact minimiser over ``s`` of
    ``alpha*||residual - s*atom||_2^2 + (1-alpha)*||residual - s*atom||_1 + gamma*|s|``.
    """
    r = as_vector(residual, "residual")
    a = as_vector(atom, "atom")
    if r.shape != a.shape:
        raise DimensionMismatchError(f"residual has length {r.size}, atom has length {a.size}")
    if not np.any(a):
        raise ZeroAtomError("atom is identically zero")
    alpha = check_alpha(alpha)
    gamma = check_nonnegative(gamma, "gamma")
    return float(_kernels.scalar_argmin(r, a, alpha, gamma))


def sparse_code_hybrid(y, D, alpha, gamma, stop=None, x0=None):
    """Code one signal with the hybrid-norm objective.

    Coordinates are visited in ascending order; each is set to the exact
    minimiser of the objective with the others fixed. Pure coordinate
    descent can stall where the l1 loss has kinks in several residual
    entries at once; at such points an active-set step (a direction on the
    current linear piece plus an exact line search) is taken before sweeping
    resumes. Every step is an exact minimisation along a line, so the
    objective never increases.

    Parameters
    ----------
    y : array_like of shape (m,)
    D : array_like of shape (m, L)
    alpha : float in [0, 1]
    gamma : float >= 0
    stop : CoderStop, optional
    x0 : array_like of shape (L,), optional
        Warm start; defaults to zero.

    Returns
    -------
    SparseCode
        ``trace`` holds the objective before the first sweep followed by the
        objective after every sweep.
    """
    y = as_vector(y, "y")
    D = _check_dictionary(D, y.shape[0])
    alpha = check_alpha(alpha)
    gamma = check_nonnegative(gamma, "gamma")
    stop = stop or CoderStop()
    x = np.zeros(D.shape[1]) if x0 is None else as_vector(x0, "x0").copy()
    if x.shape[0] != D.shape[1]:
        raise DimensionMismatchError(f"x0 has length {x.shape[0]}, expected {D.shape[1]}")
    trace = np.empty(stop.max_sweeps + 1)
    sweeps, obj, rnorm = _kernels.cd_hybrid(
        y, D, alpha, gamma, x,
        float(stop.residual_threshold), int(stop.max_sweeps), float(stop.objective_rel_tol), trace,
    )
    return SparseCode(x, float(rnorm), float(obj), int(sweeps), trace[: sweeps + 1].copy())


def sparse_code_hybrid_batch(Y, D, alpha, gamma, stop=None, X0=None):
    """Code every column of ``Y``; column ``k`` of the result equals
    ``sparse_code_hybrid(Y[:, k], D, ..., x0=X0[:, k]).coef`` exactly.

    Returns ``(X, objective, residual_norm, sweeps)``.
    """
    Y = as_matrix(Y, "Y", allow_empty=True)
    D = _check_dictionary(D, Y.shape[0])
    alpha = check_alpha(alpha)
    gamma = check_nonnegative(gamma, "gamma")
    stop = stop or CoderStop()
    if X0 is None:
        X = np.zeros((D.shape[1], Y.shape[1]))
    else:
        X = np.array(X0, dtype=np.float64, order="C")
        if X.shape != (D.shape[1], Y.shape[1]):
            raise DimensionMismatchError(f"X0 has shape {X.shape}, expected {(D.shape[1], Y.shape[1])}")
    sweeps, obj, rnorm = _kernels.cd_hybrid_batch(
        np.ascontiguousarray(Y), D, alpha, gamma, X,
        float(stop.residual_threshold), int(stop.max_sweeps), float(stop.objective_rel_tol),
    )
    return X, obj, rnorm, sweeps


def sparse_code_omp(y, D, residual_tol=0.01, max_atoms=None):
    """Orthogonal matching pursuit.

    Atoms are added by largest absolute correlation with the residual and
    all active coefficients are refit by least squares after each addition.
    An atom lying (numerically) in the span of the active set would make the
    refit singular; it is skipped and never reconsidered.

    ``D`` is expected to have unit-norm columns.
    """
    y = as_vector(y, "y")
    D = _check_dictionary(D, y.shape[0])
    m, L = D.shape
    max_atoms = min(L, m) if max_atoms is None else int(max_atoms)
    if max_atoms < 1:
        raise ConfigError("max_atoms must be a positive integer")
    residual_tol = check_nonnegative(residual_tol, "residual_tol")

    r = y.copy()
    rnorm = float(np.sqrt(r @ r))
    trace = [rnorm]
    active = []
    available = np.ones(L, dtype=bool)
    Q = np.empty((m, 0))
    R = np.empty((0, 0))
    qty = np.empty(0)
    y_scale = max(rnorm, 1.0)
    while rnorm > residual_tol and len(active) < max_atoms and available.any():
        corr = np.abs(D.T @ r)
        corr[~available] = -1.0
        j = int(np.argmax(corr))
        if corr[j] <= 1e-14 * y_scale:
            break
        available[j] = False
        d = D[:, j]
        # two passes of Gram-Schmidt keep Q orthonormal to working precision
        h = Q.T @ d
        u = d - Q @ h
        h2 = Q.T @ u
        u -= Q @ h2
        h += h2
        un = float(np.sqrt(u @ u))
        if un <= 1e-10 * float(np.sqrt(d @ d)):
            continue
        q = u / un
        k = len(active)
        R_new = np.zeros((k + 1, k + 1))
        R_new[:k, :k] = R
        R_new[:k, k] = h
        R_new[k, k] = un
        R = R_new
        Q = np.column_stack([Q, q])
        qty = np.append(qty, q @ y)
        active.append(j)
        r = y - Q @ qty
        r -= Q @ (Q.T @ r)
        rnorm = float(np.sqrt(r @ r))
        trace.append(rnorm)

    x = np.zeros(L)
    if active:
        from scipy.linalg import solve_triangular

        x[active] = solve_triangular(R, qty)
    return SparseCode(x, rnorm, float("nan"), len(active), np.asarray(trace))
