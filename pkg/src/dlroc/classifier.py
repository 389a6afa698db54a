"""Sparse-representation classification.

A model is a dictionary made of one block of atoms per label. A signal is
coded against the whole dictionary and assigned to the label whose block
carries the largest share of the code's energy::

    label = argmax_k ||x_k||_2^2 / ||x||_2^2

Two model kinds are supported: ``hybrid`` (learned incoherent dictionary,
hybrid-norm coder) and ``omp`` (normalised raw training data as the
dictionary, orthogonal matching pursuit as the coder).
"""

import json
import struct
import time
from dataclasses import dataclass, field

import numpy as np

from ._validation import as_matrix, as_vector, check_alpha, check_nonnegative
from .coding import CoderStop, SparseCode, sparse_code_hybrid, sparse_code_omp
from .data import Dataset
from .exceptions import (
    ConfigError,
    DimensionMismatchError,
    DLROCError,
    ModelFormatError,
    ZeroCodeError,
    ZeroColumnError,
)
from .learning import Dictionary, LearnParams, learn

CODERS = ("hybrid", "omp")

MAGIC = b"DLROCMDL"
FORMAT_VERSION = 1


def normalize_columns(M):
    """Scale every column of ``M`` to unit l2 norm.

    Raises
    ------
    ZeroColumnError
        If a column is identically zero; ``index`` names the first one.
    """
    M = as_matrix(M, "M")
    norms = np.sqrt(np.sum(M * M, axis=0))
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ZeroColumnError(int(zero[0]), f"column {zero[0]} has zero norm")
    return M / norms


@dataclass(frozen=True)
class ClassifierModel:
    """A fitted classifier. Immutable; safe to share between threads.

    Parameters
    ----------
    dictionary : Dictionary
        One block per label; its column partition defines the labels.
    coder_kind : {"hybrid", "omp"}
    alpha, gamma : float
        Hybrid coder parameters (ignored by OMP).
    stop : CoderStop
        ``stop.residual_threshold`` is also the OMP residual tolerance.
    label_names : tuple of str, optional
        Defaults to ``"1".."K"``.
    normalize_input : bool
        Scale each signal to unit norm before coding (default).
    """

    dictionary: Dictionary
    coder_kind: str = "hybrid"
    alpha: float = 0.7
    gamma: float = 0.5
    stop: CoderStop = field(default_factory=CoderStop)
    label_names: tuple = None
    normalize_input: bool = True

    def __post_init__(self):
        if not isinstance(self.dictionary, Dictionary):
            object.__setattr__(self, "dictionary", Dictionary(tuple(self.dictionary)))
        if self.coder_kind not in CODERS:
            raise ConfigError(f"coder_kind must be one of {CODERS}, got {self.coder_kind!r}")
        object.__setattr__(self, "alpha", check_alpha(self.alpha))
        object.__setattr__(self, "gamma", check_nonnegative(self.gamma, "gamma"))
        K = self.dictionary.n_labels
        names = self.label_names
        names = tuple(str(k + 1) for k in range(K)) if names is None else tuple(str(n) for n in names)
        if len(names) != K:
            raise DimensionMismatchError(f"{len(names)} label names for {K} dictionary blocks")
        object.__setattr__(self, "label_names", names)
        for k, B in enumerate(self.dictionary.blocks):
            if np.any(np.sum(B * B, axis=0) == 0.0):
                raise ZeroColumnError(k, f"block {k} has a zero atom")
        # cached contiguous copies used by every classify call
        object.__setattr__(self, "_D", np.asfortranarray(self.dictionary.matrix))
        object.__setattr__(self, "_partition", self.dictionary.partition)

    @property
    def m(self):
        return self.dictionary.m

    @property
    def n_labels(self):
        return self.dictionary.n_labels


@dataclass(frozen=True)
class ClassificationResult:
    """Outcome of classifying one signal.

    ``label`` is a zero-based label index, or ``None`` when the signal is
    unclassifiable (zero code) or coding failed; ``error`` then holds the
    exception.
    """

    label: object
    code: SparseCode
    energy_ratios: np.ndarray
    residual_norm: float
    elapsed: float
    error: Exception = None

    @property
    def classified(self):
        return self.label is not None


def _training_blocks(train):
    if isinstance(train, Dataset):
        return train.by_label(), tuple(train.label_names)
    return [as_matrix(P, f"Psi_{k}") for k, P in enumerate(train)], None


def fit_model(train, sizes=None, params=None, coder_kind="hybrid", learn_dictionary=None,
              classify_gamma=None, stop=None, normalize_input=True):
    """Build a classifier from raw training data.

    Parameters
    ----------
    train : Dataset or sequence of (m, n_k) arrays
        Raw training columns grouped by label. Columns are normalised here.
    sizes : int or sequence of int, optional
        Atoms per label for the learned dictionary.
    params : LearnParams, optional
    coder_kind : {"hybrid", "omp"}
    learn_dictionary : bool, optional
        Defaults to True for ``hybrid`` and False for ``omp``. Without
        learning the normalised training data is the dictionary.
    classify_gamma : float, optional
        Sparsity weight used when classifying; defaults to ``params.gamma``.
    stop : CoderStop, optional
        Stopping rule used when classifying; defaults to ``params.stop``.

    Returns
    -------
    model : ClassifierModel
    trace : LearnTrace or None
    """
    if coder_kind not in CODERS:
        raise ConfigError(f"coder_kind must be one of {CODERS}, got {coder_kind!r}")
    params = params or LearnParams()
    blocks, names = _training_blocks(train)
    blocks = [normalize_columns(P) for P in blocks]
    if learn_dictionary is None:
        learn_dictionary = coder_kind == "hybrid"
    trace = None
    if learn_dictionary:
        if sizes is None:
            raise ConfigError("sizes are required when learning a dictionary")
        D, _, trace = learn(blocks, sizes, params)
    else:
        D = Dictionary(tuple(blocks))
    model = ClassifierModel(
        D, coder_kind, params.alpha,
        params.gamma if classify_gamma is None else classify_gamma,
        stop or params.stop, names, normalize_input,
    )
    return model, trace


def energy_ratios(x, partition, n_labels=None):
    """Share of ``||x||_2^2`` carried by each label's block.

    ``partition[j]`` is the label of coefficient ``j``. Block energies are
    accumulated in coefficient order and the total is their sum in label
    order.

    Raises
    ------
    ZeroCodeError
        If ``x`` is identically zero.
    """
    x = np.asarray(getattr(x, "coef", x), dtype=np.float64)
    partition = np.asarray(partition, dtype=np.int64)
    if x.shape != partition.shape:
        raise DimensionMismatchError(f"code has length {x.size}, partition has length {partition.size}")
    K = int(partition.max()) + 1 if n_labels is None else int(n_labels)
    energy = np.bincount(partition, weights=x * x, minlength=K)
    total = 0.0
    for e in energy:
        total += e
    if total == 0.0:
        raise ZeroCodeError("the code is identically zero; no label can be selected")
    return energy / total


def _code(model, y):
    if model.coder_kind == "hybrid":
        return sparse_code_hybrid(y, model._D, model.alpha, model.gamma, model.stop)
    return sparse_code_omp(y, model._D, model.stop.residual_threshold)


def classify(y, model):
    """Classify one signal.

    A zero code makes the signal unclassifiable: the result has
    ``label=None`` and ``error`` set to the :class:`ZeroCodeError`.
    """
    start = time.perf_counter()
    y = as_vector(y, "y")
    if y.shape[0] != model.m:
        raise DimensionMismatchError(f"signal has dimension {y.shape[0]}, model expects {model.m}")
    if model.normalize_input:
        norm = float(np.sqrt(y @ y))
        if norm > 0.0:
            y = y / norm
    code = _code(model, y)
    try:
        ratios = energy_ratios(code.coef, model._partition, model.n_labels)
        label, error = int(np.argmax(ratios)), None
    except ZeroCodeError as exc:
        ratios, label, error = None, None, exc
    return ClassificationResult(label, code, ratios, code.residual_norm, time.perf_counter() - start, error)


def classify_batch(Y, model):
    """Classify every column of ``Y``.

    Errors are collected per column rather than raised; a failed column
    yields a result with ``label=None`` and the exception in ``error``.
    """
    Y = as_matrix(Y, "Y", allow_empty=True)
    if Y.shape[0] != model.m and Y.shape[1] > 0:
        raise DimensionMismatchError(f"signals have dimension {Y.shape[0]}, model expects {model.m}")
    out = []
    for j in range(Y.shape[1]):
        try:
            out.append(classify(Y[:, j], model))
        except DLROCError as exc:
            out.append(ClassificationResult(None, None, None, float("nan"), 0.0, exc))
    return out


def save_model(model, path):
    """Write ``model`` to ``path`` in a self-describing binary container.

    Layout: 8-byte magic, version byte, little-endian uint32 header length,
    UTF-8 JSON header, then every block's atoms as little-endian float64 in
    column-major order.
    """
    with open(path, "wb") as fh:
        fh.write(model_to_bytes(model))


def model_to_bytes(model):
    header = {
        "m": model.m,
        "K": model.n_labels,
        "sizes": list(model.dictionary.sizes),
        "label_names": list(model.label_names),
        "coder_kind": model.coder_kind,
        "alpha": model.alpha,
        "gamma": model.gamma,
        "stop": {
            "residual_threshold": float(model.stop.residual_threshold),
            "max_sweeps": int(model.stop.max_sweeps),
            "objective_rel_tol": float(model.stop.objective_rel_tol),
        },
        "normalize_input": bool(model.normalize_input),
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    parts = [MAGIC, bytes([FORMAT_VERSION]), struct.pack("<I", len(head)), head]
    for B in model.dictionary.blocks:
        parts.append(np.asarray(B, dtype="<f8").tobytes(order="F"))
    return b"".join(parts)


def load_model(path):
    with open(path, "rb") as fh:
        return model_from_bytes(fh.read())


def model_from_bytes(buf):
    n = len(MAGIC)
    if buf[:n] != MAGIC:
        raise ModelFormatError("not a model file (bad magic)")
    if len(buf) < n + 5:
        raise ModelFormatError("truncated model header")
    if buf[n] != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {buf[n]}")
    (hlen,) = struct.unpack("<I", buf[n + 1 : n + 5])
    pos = n + 5 + hlen
    try:
        header = json.loads(buf[n + 5 : pos].decode("utf-8"))
        m = int(header["m"])
        sizes = [int(s) for s in header["sizes"]]
        stop = CoderStop(**header["stop"])
    except (ValueError, KeyError, TypeError) as exc:
        raise ModelFormatError(f"corrupt model header: {exc}") from exc
    blocks = []
    for L in sizes:
        nbytes = 8 * m * L
        if len(buf) < pos + nbytes:
            raise ModelFormatError("truncated atom data")
        flat = np.frombuffer(buf, dtype="<f8", count=m * L, offset=pos)
        blocks.append(flat.reshape((m, L), order="F").astype(np.float64))
        pos += nbytes
    if pos != len(buf):
        raise ModelFormatError("trailing bytes after atom data")
    return ClassifierModel(
        Dictionary(tuple(blocks)), header["coder_kind"], header["alpha"], header["gamma"],
        stop, tuple(header["label_names"]), header["normalize_input"],
    )
