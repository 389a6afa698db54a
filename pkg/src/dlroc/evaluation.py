"""Replicated train/test evaluation, grid-search cross-validation and timing.

Every replicate draws its own group split and per-label subsamples from
seeds derived from one master seed, so a report is a pure function of
``(data, protocol, seed)``. Wall-clock timings are collected alongside but
kept out of the deterministic part of the report.
"""

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .classifier import classify, classify_batch, fit_model
from .coding import CoderStop
from .exceptions import (
    ConfigError,
    DLROCError,
    EmptyMeasurementError,
    InsufficientGroupsError,
)
from .data import choose_groups, split_by_group, subsample_per_label
from .learning import LearnParams
from .metrics import confusion, prf_scores
from .rng import SeededGenerator, derive_key

STREAM_SPLIT = 30
STREAM_TRAIN = 31
STREAM_TEST = 32
STREAM_LEARN = 33
STREAM_FOLDS = 34


@dataclass(frozen=True)
class MethodConfig:
    """One classifier configuration evaluated by the harness.

    ``sizes`` is the number of atoms per label when a dictionary is learned.
    ``classify_gamma`` and ``stop`` default to the learning parameters.
    """

    name: str
    coder_kind: str = "hybrid"
    sizes: object = 8
    params: LearnParams = field(default_factory=LearnParams)
    learn_dictionary: bool = None
    classify_gamma: float = None
    stop: CoderStop = None

    def fit(self, train, seed):
        """Return ``(model, trace)``; ``trace`` is None without learning."""
        params = replace(self.params, seed=seed)
        return fit_model(
            train, self.sizes, params, self.coder_kind, self.learn_dictionary,
            self.classify_gamma, self.stop,
        )


def default_methods(alpha=0.7, gamma=0.5, eta=1.0, t_max=20, sizes=8, residual_tol=0.01):
    """DL-ROC (learned dictionary, hybrid coder) and SRC(OMP) on raw data."""
    stop = CoderStop(residual_threshold=residual_tol)
    params = LearnParams(alpha=alpha, gamma=gamma, eta=eta, t_max=t_max, stop=stop)
    return (
        MethodConfig("DL-ROC", "hybrid", sizes, params),
        MethodConfig("SRC(OMP)", "omp", sizes, params),
    )


@dataclass(frozen=True)
class Protocol:
    n_replicates: int = 20
    train_groups: int = 7
    per_label_train: int = 400
    per_label_test: int = 200
    methods: tuple = field(default_factory=default_methods)

    def __post_init__(self):
        if int(self.n_replicates) < 1:
            raise ConfigError("n_replicates must be positive")
        if not self.methods:
            raise ConfigError("at least one method is required")
        names = [m.name for m in self.methods]
        if len(set(names)) != len(names):
            raise ConfigError("method names must be distinct")


@dataclass
class MethodReport:
    """Per-replicate metrics of one method.

    ``precision``, ``recall`` and ``f_score`` have one row per completed
    replicate and one column per label. ``traces`` holds the learning trace
    of every completed replicate that learned a dictionary.
    """

    name: str
    label_names: tuple
    precision: list = field(default_factory=list)
    recall: list = field(default_factory=list)
    f_score: list = field(default_factory=list)
    confusion: np.ndarray = None
    unclassified: int = 0
    failures: list = field(default_factory=list)
    sample_seconds: list = field(default_factory=list)
    traces: list = field(default_factory=list)

    @property
    def n_completed(self):
        return len(self.f_score)

    def _stat(self, rows):
        A = np.asarray(rows, dtype=np.float64)
        if A.size == 0:
            return np.full(len(self.label_names), np.nan), np.full(len(self.label_names), np.nan)
        sd = A.std(axis=0, ddof=1) if A.shape[0] > 1 else np.zeros(A.shape[1])
        return A.mean(axis=0), sd

    def per_label(self):
        """``{metric: (mean, std)}`` over replicates, per label."""
        return {
            "precision": self._stat(self.precision),
            "recall": self._stat(self.recall),
            "f_score": self._stat(self.f_score),
        }

    def macro(self):
        """``{metric: (mean, std)}`` of the per-replicate macro averages."""
        out = {}
        for key, rows in (("precision", self.precision), ("recall", self.recall), ("f_score", self.f_score)):
            per_rep = np.asarray(rows, dtype=np.float64).mean(axis=1) if rows else np.empty(0)
            mean = float(per_rep.mean()) if per_rep.size else float("nan")
            sd = float(per_rep.std(ddof=1)) if per_rep.size > 1 else 0.0
            out[key] = (mean, sd)
        return out

    def macro_f_by_replicate(self):
        return [float(np.mean(r)) for r in self.f_score]

    def timing(self):
        """Per-sample classification seconds: ``(mean, median)``."""
        s = np.asarray(self.sample_seconds)
        if s.size == 0:
            return float("nan"), float("nan")
        return float(s.mean()), float(np.median(s))


def _fit_and_score(method, train, test, seed):
    model, trace = method.fit(train, seed)
    results = classify_batch(test.samples, model)
    predicted = [r.label for r in results]
    cm = confusion(test.labels, predicted, test.n_labels)
    return cm, [r.elapsed for r in results], sum(r.label is None for r in results), trace


def run_replicates(data, protocol=None, seed=0):
    """Evaluate every method of ``protocol`` on seeded replicate splits.

    Each replicate draws ``train_groups`` groups for training, then
    subsamples ``per_label_train`` / ``per_label_test`` columns per label
    from the two sides. All methods see the same split. A method failing on
    one replicate is recorded in its ``failures`` and skipped for that
    replicate only.

    Returns
    -------
    dict
        Method name to :class:`MethodReport`, in protocol order.
    """
    protocol = protocol or Protocol()
    K = data.n_labels
    reports = {m.name: MethodReport(m.name, tuple(data.label_names)) for m in protocol.methods}
    for rep in reports.values():
        rep.confusion = np.zeros((K, K + 1), dtype=np.int64)
    for r in range(int(protocol.n_replicates)):
        groups = choose_groups(data.groups, protocol.train_groups, derive_key(seed, STREAM_SPLIT, r))
        train, test = split_by_group(data, groups)
        train = subsample_per_label(train, protocol.per_label_train, derive_key(seed, STREAM_TRAIN, r))
        test = subsample_per_label(test, protocol.per_label_test, derive_key(seed, STREAM_TEST, r))
        learn_seed = derive_key(seed, STREAM_LEARN, r)
        for method in protocol.methods:
            rep = reports[method.name]
            try:
                cm, seconds, unclassified, trace = _fit_and_score(method, train, test, learn_seed)
            except DLROCError as exc:
                rep.failures.append((r, f"{type(exc).__name__}: {exc}"))
                continue
            prf = prf_scores(cm)
            rep.precision.append(prf.precision)
            rep.recall.append(prf.recall)
            rep.f_score.append(prf.f_score)
            rep.confusion += cm
            rep.unclassified += unclassified
            rep.sample_seconds.extend(seconds)
            if trace is not None:
                rep.traces.append(trace)
    return reports


def _fmt(mean, sd):
    return f"{mean:.4f}({sd:.4f})"


def report_table(reports, timing=False):
    """Human-readable summary in ``mean(std)`` style: F-score, recall, precision."""
    lines = []
    for rep in reports.values():
        lines.append(f"== {rep.name}  ({rep.n_completed} replicates, {len(rep.failures)} failed)")
        per = rep.per_label()
        lines.append(f"{'label':>10}  {'F-score':>16}  {'recall':>16}  {'precision':>16}")
        for k, name in enumerate(rep.label_names):
            cells = [_fmt(per[key][0][k], per[key][1][k]) for key in ("f_score", "recall", "precision")]
            lines.append(f"{name:>10}  {cells[0]:>16}  {cells[1]:>16}  {cells[2]:>16}")
        mac = rep.macro()
        cells = [_fmt(*mac[key]) for key in ("f_score", "recall", "precision")]
        lines.append(f"{'mean':>10}  {cells[0]:>16}  {cells[1]:>16}  {cells[2]:>16}")
        if rep.unclassified:
            lines.append(f"unclassified samples: {rep.unclassified}")
        for r, msg in rep.failures:
            lines.append(f"replicate {r} failed: {msg}")
        if timing:
            mean, median = rep.timing()
            lines.append(f"seconds/sample: mean {mean:.6f} median {median:.6f}")
    return "\n".join(lines)


def report_records(reports, timing=False):
    """Machine-readable records, one dict per method (JSON-serialisable)."""
    out = []
    for rep in reports.values():
        per = rep.per_label()
        rec = {
            "method": rep.name,
            "replicates": rep.n_completed,
            "failures": [[r, msg] for r, msg in rep.failures],
            "labels": list(rep.label_names),
            "macro": {k: list(v) for k, v in rep.macro().items()},
            "per_label": {k: {"mean": v[0].tolist(), "std": v[1].tolist()} for k, v in per.items()},
            "macro_f_by_replicate": rep.macro_f_by_replicate(),
            "confusion": rep.confusion.tolist(),
            "unclassified": rep.unclassified,
        }
        if timing:
            mean, median = rep.timing()
            rec["seconds_per_sample"] = {"mean": mean, "median": median}
        out.append(rec)
    return out


@dataclass(frozen=True)
class CVResult:
    best_index: int
    best: dict
    grid: tuple
    scores: np.ndarray

    @property
    def mean_scores(self):
        return self.scores.mean(axis=1)


def group_folds(groups, folds, seed):
    """Assign every sample to a fold so that no group spans two folds.

    The distinct groups are shuffled by the seeded generator and dealt
    round-robin to the folds.
    """
    groups = np.asarray(groups)
    pool = np.unique(groups)
    folds = int(folds)
    if folds < 2:
        raise ConfigError("folds must be at least 2")
    if pool.size < folds:
        raise InsufficientGroupsError(f"{pool.size} groups cannot fill {folds} folds")
    order = pool[SeededGenerator(seed, STREAM_FOLDS).permutation(pool.size)]
    fold_of_group = {int(g): i % folds for i, g in enumerate(order)}
    return np.array([fold_of_group[int(g)] for g in groups], dtype=np.int64)


def cross_validate(train, grid, folds=5, seed=0, method=None):
    """Group-aware k-fold grid search over ``alpha``, ``gamma`` and ``eta``.

    Parameters
    ----------
    train : Dataset
    grid : sequence of dict
        Each entry may set ``alpha``, ``gamma`` and ``eta``; missing keys keep
        the base method's values.
    folds : int
    seed : int
    method : MethodConfig, optional
        Base configuration; defaults to the DL-ROC method.

    Returns
    -------
    CVResult
        ``scores[i, f]`` is the macro F-score of grid point ``i`` on fold
        ``f``. The best point maximises the mean; ties go to the lowest index.
    """
    grid = tuple(dict(g) for g in grid)
    if not grid:
        raise ConfigError("the parameter grid is empty")
    for g in grid:
        unknown = set(g) - {"alpha", "gamma", "eta"}
        if unknown:
            raise ConfigError(f"unknown grid keys: {sorted(unknown)}")
    method = method or default_methods()[0]
    fold = group_folds(train.groups, folds, seed)
    scores = np.zeros((len(grid), int(folds)))
    for i, point in enumerate(grid):
        m = replace(method, params=replace(method.params, **point))
        if "gamma" in point and m.classify_gamma is not None:
            m = replace(m, classify_gamma=point["gamma"])
        for f in range(int(folds)):
            tr = train.subset(np.flatnonzero(fold != f))
            te = train.subset(np.flatnonzero(fold == f))
            try:
                cm, _, _, _ = _fit_and_score(m, tr, te, derive_key(seed, STREAM_LEARN, f))
                scores[i, f] = prf_scores(cm).macro[2]
            except DLROCError:
                scores[i, f] = 0.0
    means = scores.mean(axis=1)
    best = int(np.argmax(means))
    return CVResult(best, grid[best], grid, scores)


@dataclass(frozen=True)
class TimingStats:
    mean: float
    median: float
    p95: float
    n: int


def benchmark_timing(model, test, warmup=10, classify_fn=None):
    """Per-sample wall-clock seconds of single-signal classification.

    The first ``warmup`` samples are classified but not measured.
    """
    Y = np.asarray(getattr(test, "samples", test), dtype=np.float64)
    warmup = int(warmup)
    n = Y.shape[1]
    if warmup >= n:
        raise EmptyMeasurementError(f"warmup of {warmup} leaves nothing to measure among {n} samples")
    classify_fn = classify_fn or classify
    times = np.empty(n - warmup)
    for j in range(n):
        y = Y[:, j]
        start = time.perf_counter()
        classify_fn(y, model)
        elapsed = time.perf_counter() - start
        if j >= warmup:
            times[j - warmup] = elapsed
    return TimingStats(float(times.mean()), float(np.median(times)), float(np.percentile(times, 95)), int(times.size))
