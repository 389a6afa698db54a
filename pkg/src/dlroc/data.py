"""Datasets: synthetic generation, participant-group splits and CSV I/O.

A :class:`Dataset` stores samples column-wise (``m x N``) with a label index
(``0..K-1``) and a group id per column. Groups play the role of study
participants: train/test splits never share a group.

CSV layout: header ``group,label,c1,...,cm``, one sample per row. The
``label`` field holds the label *name*; on load, names are ordered
numerically when they all parse as integers and lexicographically
otherwise. Files ending in ``.gz`` are gzip-compressed.
"""

import csv
import gzip
import io
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    BadSpecError,
    DimensionMismatchError,
    EmptySplitError,
    InsufficientDataError,
    LengthMismatchError,
    NonFiniteInputError,
    ParseError,
    SchemaError,
)
from .rng import SeededGenerator

STREAM_BASIS = 10
STREAM_COEF = 11
STREAM_NOISE = 12
STREAM_OUTLIER = 13
STREAM_SUBSAMPLE = 20

N_GROUPS = 10


@dataclass(frozen=True)
class Dataset:
    samples: np.ndarray
    labels: np.ndarray
    groups: np.ndarray
    label_names: tuple = None

    def __post_init__(self):
        X = np.asarray(self.samples, dtype=np.float64)
        if X.ndim != 2:
            raise DimensionMismatchError("samples must be an m x N matrix")
        if not np.all(np.isfinite(X)):
            raise NonFiniteInputError("samples contain NaN or Inf")
        y = np.asarray(self.labels, dtype=np.int64)
        g = np.asarray(self.groups, dtype=np.int64)
        if y.shape != (X.shape[1],) or g.shape != (X.shape[1],):
            raise LengthMismatchError(
                f"{X.shape[1]} samples but {y.size} labels and {g.size} groups"
            )
        names = self.label_names
        if names is None:
            K = int(y.max()) + 1 if y.size else 0
            names = tuple(str(k + 1) for k in range(K))
        names = tuple(str(n) for n in names)
        if y.size and (y.min() < 0 or y.max() >= len(names)):
            raise DimensionMismatchError("label index outside the label name table")
        object.__setattr__(self, "samples", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "groups", g)
        object.__setattr__(self, "label_names", names)

    @property
    def m(self):
        return self.samples.shape[0]

    @property
    def n_samples(self):
        return self.samples.shape[1]

    @property
    def n_labels(self):
        return len(self.label_names)

    def counts(self):
        return np.bincount(self.labels, minlength=self.n_labels)

    def subset(self, index):
        index = np.asarray(index)
        return Dataset(self.samples[:, index], self.labels[index], self.groups[index], self.label_names)

    def by_label(self):
        """Per-label sample matrices, in label order."""
        return [self.samples[:, self.labels == k] for k in range(self.n_labels)]


@dataclass(frozen=True)
class SynthSpec:
    m: int = 32
    K: int = 4
    atoms_per_label: int = 8
    samples_per_label: int = 1000
    sparsity: int = 3
    gaussian_sigma: float = 0.01
    outlier_fraction: float = 0.1
    outlier_magnitude: float = 5.0
    seed: int = 0

    def validate(self):
        for name in ("m", "K", "atoms_per_label", "samples_per_label", "sparsity"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise BadSpecError(f"{name} must be a positive integer, got {value}")
        if self.sparsity > self.atoms_per_label:
            raise BadSpecError("sparsity cannot exceed atoms_per_label")
        if not 0.0 <= self.outlier_fraction < 1.0:
            raise BadSpecError("outlier_fraction must lie in [0, 1)")
        if not self.outlier_magnitude > 0.0:
            raise BadSpecError("outlier_magnitude must be positive")
        if not self.gaussian_sigma >= 0.0:
            raise BadSpecError("gaussian_sigma must be non-negative")
        return self


def synthetic_bases(spec):
    """The unit-norm generating basis of every label."""
    bases = []
    for k in range(spec.K):
        B = SeededGenerator(spec.seed, STREAM_BASIS, k).normal((spec.m, spec.atoms_per_label))
        bases.append(B / np.sqrt(np.sum(B * B, axis=0)))
    return bases


def generate_synthetic(spec):
    """Union-of-subspaces data with Gaussian noise and entrywise gross outliers.

    Label ``k`` draws an ``m x atoms_per_label`` basis with unit columns.
    Every sample combines ``sparsity`` basis atoms with coefficients of
    magnitude uniform in [0.5, 1.5] and random sign, plus N(0, sigma^2)
    noise. Each entry of the result is then, independently with probability
    ``outlier_fraction``, replaced by a value uniform in
    ``[-outlier_magnitude, outlier_magnitude]``. Samples of each label are
    assigned round-robin to groups 1..10.
    """
    spec.validate()
    bases = synthetic_bases(spec)
    n = spec.samples_per_label
    cols, labels, groups = [], [], []
    for k, B in enumerate(bases):
        gen = SeededGenerator(spec.seed, STREAM_COEF, k)
        C = np.zeros((spec.atoms_per_label, n))
        for i in range(n):
            support = gen.sample_without_replacement(spec.atoms_per_label, spec.sparsity)
            mags = 0.5 + gen.uniform(spec.sparsity)
            signs = np.where(gen.uniform(spec.sparsity) < 0.5, -1.0, 1.0)
            C[support, i] = mags * signs
        cols.append(B @ C)
        labels.append(np.full(n, k))
        groups.append(np.arange(n) % N_GROUPS + 1)
    X = np.hstack(cols)
    N = X.shape[1]
    if spec.gaussian_sigma > 0:
        X = X + spec.gaussian_sigma * SeededGenerator(spec.seed, STREAM_NOISE).normal((spec.m, N))
    if spec.outlier_fraction > 0:
        gen = SeededGenerator(spec.seed, STREAM_OUTLIER)
        hit = gen.uniform((spec.m, N)) < spec.outlier_fraction
        values = spec.outlier_magnitude * (2.0 * gen.uniform((spec.m, N)) - 1.0)
        X = np.where(hit, values, X)
    return Dataset(X, np.concatenate(labels), np.concatenate(groups),
                   tuple(str(k + 1) for k in range(spec.K)))


def split_by_group(data, train_groups):
    """Partition samples into (train, test) by group membership."""
    train_groups = set(int(g) for g in train_groups)
    in_train = np.isin(data.groups, sorted(train_groups))
    if not in_train.any() or in_train.all():
        raise EmptySplitError(
            f"group split leaves {int(in_train.sum())} training and "
            f"{int((~in_train).sum())} test samples"
        )
    return data.subset(np.flatnonzero(in_train)), data.subset(np.flatnonzero(~in_train))


def choose_groups(groups, n_train, seed):
    """Draw ``n_train`` distinct group ids from ``groups`` (sorted first)."""
    pool = np.unique(np.asarray(groups))
    if not 0 < n_train < pool.size:
        raise InsufficientDataError(f"cannot take {n_train} of {pool.size} groups for training")
    pick = SeededGenerator(seed).sample_without_replacement(pool.size, n_train)
    return set(int(g) for g in pool[pick])


def subsample_per_label(data, per_label, seed):
    """Draw ``per_label`` samples of every label without replacement.

    Label ``k`` uses the stream ``(seed, STREAM_SUBSAMPLE, k)``; the result
    is ordered label by label, in draw order.
    """
    per_label = int(per_label)
    picks = []
    for k in range(data.n_labels):
        idx = np.flatnonzero(data.labels == k)
        if idx.size < per_label:
            raise InsufficientDataError(
                f"label {data.label_names[k]!r} has {idx.size} samples, need {per_label}"
            )
        sel = SeededGenerator(seed, STREAM_SUBSAMPLE, k).sample_without_replacement(idx.size, per_label)
        picks.append(idx[sel])
    return data.subset(np.concatenate(picks))


def _open(path, mode):
    path = str(path)
    if path.endswith(".gz"):
        return gzip.open(path, mode + "t", encoding="utf-8", newline="")
    return open(path, mode, encoding="utf-8", newline="")


def save_csv(data, path):
    with _open(path, "w") as fh:
        write_csv(data, fh)


def write_csv(data, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["group", "label"] + [f"c{i + 1}" for i in range(data.m)])
    for j in range(data.n_samples):
        w.writerow(
            [str(int(data.groups[j])), data.label_names[data.labels[j]]]
            + [format(v, ".17g") for v in data.samples[:, j]]
        )


def load_csv(path):
    with _open(path, "r") as fh:
        return read_csv(fh)


def _label_order(names):
    try:
        return sorted(names, key=int)
    except ValueError:
        return sorted(names)


def read_csv(fh):
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty file", line=1) from None
    header = [h.strip() for h in header]
    channels = [h for h in header if h.startswith("c") and h[1:].isdigit()]
    m = max((int(h[1:]) for h in channels), default=0)
    expected = ["group", "label"] + [f"c{i + 1}" for i in range(max(m, 1))]
    missing = [h for h in expected if h not in header]
    if missing:
        raise SchemaError(missing)
    pos = {h: header.index(h) for h in expected}
    groups, names, rows = [], [], []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not f.strip() for f in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(row)}", line=lineno)
        try:
            groups.append(int(row[pos["group"]]))
        except ValueError:
            raise ParseError(f"group {row[pos['group']]!r} is not an integer", line=lineno) from None
        names.append(row[pos["label"]].strip())
        try:
            rows.append([float(row[pos[f"c{i + 1}"]]) for i in range(m)])
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
    if not rows:
        raise ParseError("no samples", line=2)
    order = _label_order(set(names))
    index = {n: i for i, n in enumerate(order)}
    X = np.array(rows, dtype=np.float64).T
    return Dataset(X, np.array([index[n] for n in names]), np.array(groups), tuple(order))


def dataset_to_string(data):
    buf = io.StringIO()
    write_csv(data, buf)
    return buf.getvalue()
