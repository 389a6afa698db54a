"""Incoherence-penalised hybrid-norm dictionary learning.

The learned model minimises, over per-label dictionaries ``D_k`` with
columns in the unit ball and codes ``X_k``::

    sum_k  alpha*||P_k - D_k X_k||_F^2 + (1-alpha)*||P_k - D_k X_k||_{1,1}
           + gamma*||X_k||_{1,1} + eta * sum_{j != k} ||D_k^T D_j||_F^2

where ``P_k`` holds the (unit-norm) training columns of label ``k``. Each
iteration codes every training column against its own label's block, then
refreshes the dictionary one column at a time (Gauss-Seidel order) with a
derivative-free random search.

Indices are zero-based throughout: labels ``0..K-1``, atoms ``0..L_k-1``.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._validation import as_matrix, check_alpha, check_nonnegative
from .coding import CoderStop, sparse_code_hybrid_batch
from .exceptions import (
    ConfigError,
    DimensionMismatchError,
    IndexOutOfRangeError,
    InsufficientDataError,
    NonFiniteObjectiveError,
    ZeroColumnError,
)
from .norms import cross_block_coherence
from .rng import SeededGenerator

STREAM_INIT = 1
STREAM_SEARCH = 2

UNIT_BALL_SLACK = 1e-9


@dataclass(frozen=True)
class RandomSearchParams:
    candidates_per_round: int = 50
    rounds: int = 40
    initial_sigma: float = 0.1
    sigma_decay: float = 0.5
    min_sigma: float = 1e-4

    def __post_init__(self):
        if self.candidates_per_round < 1 or self.rounds < 1:
            raise ConfigError("candidates_per_round and rounds must be positive")
        if not self.initial_sigma > 0 or not self.min_sigma > 0:
            raise ConfigError("initial_sigma and min_sigma must be positive")
        if not 0.0 < self.sigma_decay < 1.0:
            raise ConfigError("sigma_decay must lie in (0, 1)")


@dataclass(frozen=True)
class LearnParams:
    alpha: float = 0.7
    gamma: float = 0.5
    eta: float = 1.0
    t_max: int = 20
    rs: RandomSearchParams = field(default_factory=RandomSearchParams)
    seed: int = 0
    objective_rel_tol: float = 1e-4
    stop: CoderStop = field(default_factory=CoderStop)

    def __post_init__(self):
        check_alpha(self.alpha)
        check_nonnegative(self.gamma, "gamma")
        check_nonnegative(self.eta, "eta")
        if int(self.t_max) != self.t_max or self.t_max < 1:
            raise ConfigError("t_max must be a positive integer")
        check_nonnegative(self.objective_rel_tol, "objective_rel_tol")


@dataclass(frozen=True)
class Dictionary:
    """Per-label atom blocks ``D_k`` of shape ``(m, L_k)``."""

    blocks: tuple

    def __post_init__(self):
        blocks = tuple(np.ascontiguousarray(as_matrix(B, f"D_{k}")) for k, B in enumerate(self.blocks))
        if not blocks:
            raise DimensionMismatchError("a dictionary needs at least one block")
        m = blocks[0].shape[0]
        for k, B in enumerate(blocks):
            if B.shape[0] != m:
                raise DimensionMismatchError(f"block {k} has {B.shape[0]} rows, expected {m}")
        object.__setattr__(self, "blocks", blocks)

    @property
    def m(self):
        return self.blocks[0].shape[0]

    @property
    def n_labels(self):
        return len(self.blocks)

    @property
    def sizes(self):
        return tuple(B.shape[1] for B in self.blocks)

    @property
    def matrix(self):
        return np.hstack(self.blocks)

    @property
    def partition(self):
        """Label index of every column of :attr:`matrix`."""
        return np.repeat(np.arange(self.n_labels), self.sizes)

    def block_slices(self):
        edges = np.concatenate([[0], np.cumsum(self.sizes)])
        return [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]

    def max_column_norm(self):
        return max(float(np.sqrt(np.max(np.sum(B * B, axis=0)))) for B in self.blocks)


@dataclass
class LearnTrace:
    objective: list = field(default_factory=list)
    coherence: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    max_column_norm: list = field(default_factory=list)

    def __len__(self):
        return len(self.objective)

    def to_lines(self):
        """One ``iteration objective coherence seconds`` record per line."""
        return [
            f"{t + 1} {o!r} {c!r} {s:.6f}"
            for t, (o, c, s) in enumerate(zip(self.objective, self.coherence, self.seconds))
        ]


def _check_training_set(train):
    blocks = [np.ascontiguousarray(as_matrix(P, f"Psi_{k}")) for k, P in enumerate(train)]
    if not blocks:
        raise DimensionMismatchError("training set has no labels")
    m = blocks[0].shape[0]
    for k, P in enumerate(blocks):
        if P.shape[0] != m:
            raise DimensionMismatchError(f"label {k} has {P.shape[0]} rows, expected {m}")
    return blocks


def mean_cross_block_coherence(D):
    """Mean of ``||D_k^T D_j||_F^2`` over unordered label pairs (0 for one label)."""
    K = D.n_labels
    vals = [cross_block_coherence(D.blocks[k], D.blocks[j]) for k in range(K) for j in range(k + 1, K)]
    return float(np.mean(vals)) if vals else 0.0


def init_dictionary(train, sizes, seed):
    """Start each block from ``L_k`` training columns drawn without replacement.

    Label ``k`` draws from the stream ``(seed, STREAM_INIT, k)`` with
    :meth:`SeededGenerator.sample_without_replacement`; the drawn columns are
    rescaled to unit norm.
    """
    train = _check_training_set(train)
    sizes = _check_sizes(sizes, train)
    blocks = []
    for k, (P, L) in enumerate(zip(train, sizes)):
        idx = SeededGenerator(seed, STREAM_INIT, k).sample_without_replacement(P.shape[1], L)
        B = P[:, idx].copy()
        norms = np.sqrt(np.sum(B * B, axis=0))
        bad = np.flatnonzero(norms == 0.0)
        if bad.size:
            raise ZeroColumnError(int(idx[bad[0]]), f"label {k}: sampled column {idx[bad[0]]} is zero")
        blocks.append(B / norms)
    return Dictionary(tuple(blocks))


def _check_sizes(sizes, train):
    if np.isscalar(sizes):
        sizes = [int(sizes)] * len(train)
    sizes = [int(L) for L in sizes]
    if len(sizes) != len(train):
        raise DimensionMismatchError(f"got {len(sizes)} block sizes for {len(train)} labels")
    for k, (L, P) in enumerate(zip(sizes, train)):
        if L < 1:
            raise ConfigError(f"label {k}: block size must be >= 1")
        if L > P.shape[1]:
            raise InsufficientDataError(f"label {k}: block size {L} exceeds {P.shape[1]} training columns")
    return sizes


def _column_objectives(P, D, X, alpha, gamma):
    E = P - D @ X
    return alpha * np.sum(E * E, axis=0) + (1 - alpha) * np.sum(np.abs(E), axis=0) + gamma * np.sum(np.abs(X), axis=0)


def update_codes(train, D, params, X_prev=None):
    """Step 1: code every training column against its own label's block.

    With ``X_prev`` the coder is warm-started from the previous codes and a
    column keeps its previous code unless the new one has a strictly lower
    objective, so this step never increases the learning objective.
    """
    train = _check_training_set(train)
    if len(train) != D.n_labels:
        raise DimensionMismatchError("training set and dictionary have different label counts")
    out = []
    for k, (P, B) in enumerate(zip(train, D.blocks)):
        X0 = None if X_prev is None else X_prev[k]
        X, _, _, _ = sparse_code_hybrid_batch(P, B, params.alpha, params.gamma, params.stop, X0)
        if X0 is not None:
            new = _column_objectives(P, B, X, params.alpha, params.gamma)
            old = _column_objectives(P, B, X0, params.alpha, params.gamma)
            keep = ~(new < old)
            X[:, keep] = X0[:, keep]
        out.append(X)
    return out


def column_residual(Psi_k, Dk_new, Dk_old, Xk, l):
    """Residual of label ``k`` with atom ``l`` removed.

    Atoms ``j < l`` come from ``Dk_new`` (already refreshed this iteration),
    atoms ``j > l`` from ``Dk_old``.
    """
    P = as_matrix(Psi_k, "Psi_k")
    Dn = as_matrix(Dk_new, "Dk_new")
    Do = as_matrix(Dk_old, "Dk_old")
    Xk = as_matrix(Xk, "Xk")
    L = Do.shape[1]
    if not 0 <= l < L:
        raise IndexOutOfRangeError(f"atom index {l} outside 0..{L - 1}")
    R = P.copy()
    if l > 0:
        R -= Dn[:, :l] @ Xk[:l]
    if l + 1 < L:
        R -= Do[:, l + 1 :] @ Xk[l + 1 :]
    return R


def column_objective(d, residual, x_row, other_blocks, alpha, eta):
    """Dense evaluation of the single-atom objective

    ``alpha*||R - d x||_F^2 + (1-alpha)*||R - d x||_{1,1} + eta*sum_j ||d^T D_j||_2^2``.
    """
    d = np.asarray(d, dtype=float)
    R = np.asarray(residual, dtype=float)
    x = np.asarray(x_row, dtype=float)
    if R.shape != (d.shape[0], x.shape[0]):
        raise DimensionMismatchError(f"residual shape {R.shape} does not match atom {d.shape} and row {x.shape}")
    E = R - np.outer(d, x)
    value = alpha * np.sum(E * E) + (1.0 - alpha) * np.sum(np.abs(E))
    for B in other_blocks:
        if B.shape[0] != d.shape[0]:
            raise DimensionMismatchError("other block row count differs from atom length")
        c = d @ B
        value += eta * np.sum(c * c)
    return float(value)


class ColumnObjective:
    """Fast evaluator of :func:`column_objective` for a fixed residual.

    The quadratic parts reduce to inner products with precomputed
    quantities and the l1 part separates over rows into one-dimensional
    piecewise-linear functions tabulated once. Accepts one atom of shape
    ``(m,)`` or a batch of shape ``(c, m)``.
    """

    def __init__(self, residual, x_row, other_blocks, alpha, eta):
        R = np.ascontiguousarray(residual, dtype=float)
        x = np.ascontiguousarray(x_row, dtype=float)
        self.alpha = float(alpha)
        self.eta = float(eta)
        self.xx = float(x @ x)
        self.p = R @ x
        self.RR = float(np.sum(R * R))
        m = R.shape[0]
        self.M = np.zeros((m, m))
        for B in other_blocks:
            self.M += B @ B.T
        self.tables = _kernels.l1_row_tables(R, x)

    def __call__(self, d):
        d = np.asarray(d, dtype=float)
        V = np.ascontiguousarray(np.atleast_2d(d))
        quad = self.RR - 2.0 * V @ self.p + np.sum(V * V, axis=1) * self.xx
        l1 = _kernels.l1_rows_eval(*self.tables, V)
        inc = np.sum((V @ self.M) * V, axis=1)
        out = self.alpha * quad + (1.0 - self.alpha) * l1 + self.eta * inc
        return float(out[0]) if d.ndim == 1 else out


def _project_unit_ball(C):
    norms = np.sqrt(np.sum(C * C, axis=-1, keepdims=True))
    return np.where(norms > 1.0, C / np.maximum(norms, 1e-300), C)


def random_search_min(objective, init, rs=None, seed=0, vectorized=False):
    """Improvement-only random search over the unit ball.

    Each round draws ``rs.candidates_per_round`` points ``x + sigma*g`` with
    standard normal ``g`` around the best point so far, projects those
    outside the ball onto the unit sphere, and moves to the best candidate
    if it strictly lowers the objective. Rounds without a move shrink sigma
    by ``rs.sigma_decay``; the search ends after ``rs.rounds`` rounds or
    once sigma drops below ``rs.min_sigma``.

    ``seed`` is an integer or a :class:`SeededGenerator`. With
    ``vectorized=True`` the objective receives a ``(c, m)`` batch and
    returns ``c`` values.

    Returns ``(x, value)``.
    """
    rs = rs or RandomSearchParams()
    gen = seed if isinstance(seed, SeededGenerator) else SeededGenerator(seed)
    x = np.asarray(init, dtype=float).copy()
    f = float(objective(x[None, :])[0]) if vectorized else float(objective(x))
    if not np.isfinite(f):
        raise NonFiniteObjectiveError("objective is not finite at the initial point")
    sigma = rs.initial_sigma
    for _ in range(rs.rounds):
        if sigma < rs.min_sigma:
            break
        C = _project_unit_ball(x + sigma * gen.normal((rs.candidates_per_round, x.shape[0])))
        vals = objective(C) if vectorized else np.array([objective(c) for c in C])
        if not np.all(np.isfinite(vals)):
            raise NonFiniteObjectiveError("objective returned NaN or Inf")
        b = int(np.argmin(vals))
        if vals[b] < f:
            x, f = C[b].copy(), float(vals[b])
        else:
            sigma *= rs.sigma_decay
    return x, f


def update_dictionary(train, D_prev, X, params, t=1):
    """Step 2: refresh every atom in Gauss-Seidel order.

    Labels are visited in order and atoms within a label in order; the
    incoherence term of label ``k`` uses the already refreshed blocks
    ``j < k`` and the previous blocks ``j > k``. Each atom is searched with
    :func:`random_search_min` on its column objective, seeded from
    ``(params.seed, STREAM_SEARCH, t, k, l)``.

    The learning objective counts each label pair twice (once per label),
    so the change it sees from one atom is the column objective with weight
    ``2*eta``. A searched atom is installed only if that quantity strictly
    decreases, which keeps the learning objective monotone.
    """
    train = _check_training_set(train)
    K = D_prev.n_labels
    if len(train) != K or len(X) != K:
        raise DimensionMismatchError("training set, dictionary and codes disagree on label count")
    blocks = [B.copy() for B in D_prev.blocks]
    for k in range(K):
        P, Xk, Bk = train[k], X[k], blocks[k]
        others = [blocks[j] for j in range(K) if j != k]
        E = P - Bk @ Xk
        obj = None
        for l in range(Bk.shape[1]):
            x_row = Xk[l]
            d_old = Bk[:, l].copy()
            R = E + np.outer(d_old, x_row)
            if params.eta == 0.0 and not np.any(x_row):
                continue
            obj = ColumnObjective(R, x_row, others, params.alpha, params.eta)
            gen = SeededGenerator(params.seed, STREAM_SEARCH, t, k, l)
            d_new, _ = random_search_min(obj, d_old, params.rs, gen, vectorized=True)
            if np.array_equal(d_new, d_old):
                continue
            before = column_objective(d_old, R, x_row, others, params.alpha, 2.0 * params.eta)
            after = column_objective(d_new, R, x_row, others, params.alpha, 2.0 * params.eta)
            if after < before - 1e-12 * max(1.0, abs(before)):
                Bk[:, l] = d_new
                E = R - np.outer(d_new, x_row)
    return Dictionary(tuple(blocks))


def objective_value(train, D, X, params):
    """Full learning objective, with the incoherence sum over ordered label pairs."""
    train = _check_training_set(train)
    K = D.n_labels
    if len(train) != K or len(X) != K:
        raise DimensionMismatchError("training set, dictionary and codes disagree on label count")
    total = 0.0
    for k in range(K):
        Bk = D.blocks[k]
        if X[k].shape != (Bk.shape[1], train[k].shape[1]):
            raise DimensionMismatchError(f"codes of label {k} have shape {X[k].shape}")
        E = train[k] - Bk @ X[k]
        total += params.alpha * np.sum(E * E) + (1.0 - params.alpha) * np.sum(np.abs(E))
        total += params.gamma * np.sum(np.abs(X[k]))
        for j in range(K):
            if j != k:
                total += params.eta * cross_block_coherence(Bk, D.blocks[j])
    return float(total)


def learn(train, sizes, params):
    """Alternate code and dictionary updates for up to ``params.t_max`` iterations.

    Returns ``(dictionary, codes, trace)``. Iteration stops early once the
    relative decrease of the objective falls below ``params.objective_rel_tol``.
    """
    train = _check_training_set(train)
    D = init_dictionary(train, sizes, params.seed)
    X = None
    trace = LearnTrace()
    for t in range(1, params.t_max + 1):
        start = time.perf_counter()
        X = update_codes(train, D, params, X)
        D = update_dictionary(train, D, X, params, t)
        f = objective_value(train, D, X, params)
        trace.seconds.append(time.perf_counter() - start)
        trace.objective.append(f)
        trace.coherence.append(mean_cross_block_coherence(D))
        trace.max_column_norm.append(D.max_column_norm())
        if t > 1:
            prev = trace.objective[-2]
            if prev - f < params.objective_rel_tol * abs(prev):
                break
    return D, X, trace
