"""Robust sparse-representation classification with incoherent, hybrid-norm
dictionary learning (DL-ROC), an OMP-based SRC baseline, a synthetic data
generator and an evaluation harness."""

__version__ = "0.1.0"

from .classifier import (
    ClassificationResult,
    ClassifierModel,
    classify,
    classify_batch,
    energy_ratios,
    fit_model,
    load_model,
    normalize_columns,
    save_model,
)
from .coding import (
    CoderStop,
    SparseCode,
    solve_scalar_subproblem,
    sparse_code_hybrid,
    sparse_code_hybrid_batch,
    sparse_code_omp,
)
from .data import (
    Dataset,
    SynthSpec,
    generate_synthetic,
    load_csv,
    save_csv,
    split_by_group,
    subsample_per_label,
)
from .estimator import DLROCClassifier
from .evaluation import (
    MethodConfig,
    Protocol,
    benchmark_timing,
    cross_validate,
    run_replicates,
)
from .exceptions import ConfigError, DataError, DLROCError
from .learning import (
    Dictionary,
    LearnParams,
    LearnTrace,
    RandomSearchParams,
    learn,
    objective_value,
)
from .metrics import confusion, prf_scores
from .norms import (
    avg_mutual_coherence,
    cross_block_coherence,
    gram,
    hybrid_norm,
    lpq_norm,
    mutual_coherence,
)
from .rng import SeededGenerator
