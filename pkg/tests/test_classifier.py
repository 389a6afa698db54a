import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dlroc.classifier import (
    ClassifierModel,
    classify,
    classify_batch,
    energy_ratios,
    fit_model,
    load_model,
    model_from_bytes,
    model_to_bytes,
    normalize_columns,
    save_model,
)
from dlroc.coding import CoderStop
from dlroc.data import SynthSpec, generate_synthetic, synthetic_bases
from dlroc.exceptions import ConfigError, DimensionMismatchError, ModelFormatError, ZeroCodeError, ZeroColumnError
from dlroc.learning import Dictionary, LearnParams, learn

from oracles import block_ls_residuals, energy_ratios_by_hand


def orthogonal_blocks(m=6, sizes=(2, 2, 2), seed=0):
    Q, _ = np.linalg.qr(np.random.default_rng(seed).normal(size=(m, m)))
    edges = np.cumsum((0,) + sizes)
    return Dictionary(tuple(Q[:, a:b] for a, b in zip(edges[:-1], edges[1:])))


# ------------------------------------------------------------ normalisation

def test_normalize_examples():
    assert normalize_columns([[3.0], [4.0]]).ravel().tolist() == [0.6, 0.8]
    U = np.linalg.qr(np.random.default_rng(1).normal(size=(5, 5)))[0]
    assert np.max(np.abs(normalize_columns(U) - U)) <= 1e-15
    with pytest.raises(ZeroColumnError) as err:
        normalize_columns([[1.0, 0.0], [1.0, 0.0]])
    assert err.value.index == 1


@given(st.integers(0, 1000), st.floats(1e-3, 1e3))
def test_normalize_scale_invariance(seed, c):
    M = np.random.default_rng(seed).normal(size=(4, 3))
    assert np.allclose(normalize_columns(c * M), normalize_columns(M), rtol=1e-14, atol=1e-15)


# ------------------------------------------------------------ energy ratios

def test_energy_ratio_examples():
    part = [0, 0, 1, 1, 2, 2]
    assert energy_ratios([0, 0, 1, 2, 0, 0], part).tolist() == [0.0, 1.0, 0.0]
    assert energy_ratios([1, 0, 2, 0, 0, 2], part) == pytest.approx([1 / 9, 4 / 9, 4 / 9], abs=1e-15)
    assert energy_ratios([1, 0, 0, -1, 1, 0], part) == pytest.approx([1 / 3] * 3, abs=1e-15)
    with pytest.raises(ZeroCodeError):
        energy_ratios(np.zeros(6), part)
    with pytest.raises(DimensionMismatchError):
        energy_ratios(np.ones(5), part)


@given(st.integers(0, 10_000), st.floats(1e-3, 1e3))
def test_energy_ratios_brute_force_and_scale(seed, c):
    rng = np.random.default_rng(seed)
    sizes = [int(s) for s in rng.integers(1, 5, size=int(rng.integers(1, 5)))]
    x = rng.normal(size=sum(sizes))
    part = np.repeat(np.arange(len(sizes)), sizes)
    ratios = energy_ratios(x, part)
    ref, _ = energy_ratios_by_hand(x.tolist(), sizes)
    assert ratios.tolist() == ref
    assert np.sum(ratios) == pytest.approx(1.0, abs=1e-12)
    # exact invariance for power-of-two scales, 1 ulp-level otherwise
    assert energy_ratios(4.0 * x, part).tolist() == ratios.tolist()
    assert np.allclose(energy_ratios(c * x, part), ratios, rtol=1e-13, atol=1e-15)


# ------------------------------------------------------------ classify

def test_single_label_model_always_answers_it():
    D = Dictionary((normalize_columns(np.random.default_rng(2).normal(size=(4, 3))),))
    model = ClassifierModel(D)
    for y in np.random.default_rng(3).normal(size=(5, 4)):
        assert classify(y, model).label == 0


def test_self_atom_and_orthogonal_blocks():
    D = orthogonal_blocks()
    model = ClassifierModel(D, alpha=1.0, gamma=1e-6)
    for k, B in enumerate(D.blocks):
        assert classify(B[:, 1], model).label == k
        res = classify(B @ np.array([0.7, -0.4]), model)
        assert res.label == k
        assert res.energy_ratios == pytest.approx(np.eye(3)[k], abs=1e-12)


def test_tie_goes_to_lower_label():
    D = orthogonal_blocks()
    model = ClassifierModel(D, alpha=1.0, gamma=0.0, stop=CoderStop(residual_threshold=0.0))
    y = D.blocks[1][:, 0] + D.blocks[2][:, 1]
    res = classify(y, model)
    assert res.energy_ratios[1] == pytest.approx(res.energy_ratios[2], abs=1e-12)
    # force an exact tie through the ratio function itself
    assert int(np.argmax(energy_ratios([0, 0, 1, 0, 1, 0], [0, 0, 1, 1, 2, 2]))) == 1


def test_outlier_signal_recovers_planted_label():
    spec = SynthSpec(m=64, K=3, atoms_per_label=4, samples_per_label=10, sparsity=2,
                     gaussian_sigma=0.0, outlier_fraction=0.0, seed=6)
    bases = synthetic_bases(spec)
    model = ClassifierModel(Dictionary(tuple(bases)), alpha=0.7, gamma=0.05,
                            stop=CoderStop(residual_threshold=0.0))
    rng = np.random.default_rng(7)
    for t in range(30):
        k = t % 3
        y = bases[k] @ (rng.choice([-1, 1], 4) * rng.uniform(0.5, 1.5, 4))
        assert int(np.argmin(block_ls_residuals(y, bases))) == k
        hit = rng.random(64) < 0.1
        res = classify(np.where(hit, rng.uniform(-5, 5, size=64), y), model)
        assert res.label == k
        assert res.energy_ratios[k] > 0.5


def test_zero_signal_is_unclassifiable():
    model = ClassifierModel(orthogonal_blocks())
    res = classify(np.zeros(6), model)
    assert res.label is None and not res.classified
    assert isinstance(res.error, ZeroCodeError)
    with pytest.raises(DimensionMismatchError):
        classify(np.ones(5), model)


def test_classify_is_repeatable_and_leaves_model_alone():
    model = ClassifierModel(orthogonal_blocks(seed=4))
    before = model_to_bytes(model)
    y = np.random.default_rng(8).normal(size=6)
    a, b = classify(y, model), classify(y, model)
    assert a.label == b.label
    assert np.array_equal(a.code.coef, b.code.coef)
    assert np.array_equal(a.energy_ratios, b.energy_ratios)
    assert model_to_bytes(model) == before


def test_batch_matches_sequential():
    data = generate_synthetic(SynthSpec(m=12, K=3, atoms_per_label=4, samples_per_label=40, seed=9))
    model, _ = fit_model(data, 4, LearnParams(t_max=2))
    Y = data.samples[:, :100]
    batch = classify_batch(Y, model)
    assert [r.label for r in batch] == [classify(Y[:, j], model).label for j in range(100)]
    assert classify_batch(np.zeros((12, 0)), model) == []
    one = classify_batch(Y[:, :1], model)[0]
    assert np.array_equal(one.code.coef, classify(Y[:, 0], model).code.coef)


def test_batch_collects_errors():
    model = ClassifierModel(orthogonal_blocks())
    Y = np.column_stack([np.ones(6), np.zeros(6), np.ones(6)])
    out = classify_batch(Y, model)
    assert [r.classified for r in out] == [True, False, True]


# ------------------------------------------------------------ fitting

def test_fit_equals_learn_block_for_block():
    data = generate_synthetic(SynthSpec(m=10, K=3, atoms_per_label=3, samples_per_label=20, seed=10))
    params = LearnParams(t_max=3, seed=4)
    model, trace = fit_model(data, 5, params)
    D, _, ref_trace = learn([normalize_columns(P) for P in data.by_label()], 5, params)
    assert all(np.array_equal(a, b) for a, b in zip(model.dictionary.blocks, D.blocks))
    assert trace.objective == ref_trace.objective
    assert model.label_names == ("1", "2", "3")


def test_fit_minimal_and_raw_dictionary():
    data = generate_synthetic(SynthSpec(m=8, K=2, atoms_per_label=3, samples_per_label=10, seed=11))
    _, trace = fit_model(data, 10, LearnParams(t_max=1))
    assert len(trace) == 1
    model, trace = fit_model(data, coder_kind="omp")
    assert trace is None
    assert model.dictionary.sizes == (10, 10)
    assert np.allclose(np.linalg.norm(model.dictionary.matrix, axis=0), 1.0)
    with pytest.raises(ConfigError):
        fit_model(data, coder_kind="svm")
    with pytest.raises(ConfigError):
        fit_model(data)


def test_omp_model_classifies():
    data = generate_synthetic(SynthSpec(m=32, K=3, atoms_per_label=3, samples_per_label=30, sparsity=2, gaussian_sigma=0.0,
                                        outlier_fraction=0.0, seed=12))
    model, _ = fit_model(data.subset(np.flatnonzero(data.groups <= 7)), coder_kind="omp")
    test = data.subset(np.flatnonzero(data.groups > 7))
    labels = [r.label for r in classify_batch(test.samples, model)]
    assert np.mean(np.array(labels) == test.labels) > 0.9


# ------------------------------------------------------------ serialisation

def test_model_round_trip(tmp_path):
    data = generate_synthetic(SynthSpec(m=8, K=2, atoms_per_label=3, samples_per_label=10, seed=13))
    model, _ = fit_model(data, 3, LearnParams(t_max=1), stop=CoderStop(0.02, 50, 1e-5))
    path = tmp_path / "m.bin"
    save_model(model, path)
    back = load_model(path)
    assert all(np.array_equal(a, b) for a, b in zip(back.dictionary.blocks, model.dictionary.blocks))
    assert (back.coder_kind, back.alpha, back.gamma, back.stop, back.label_names) == (
        model.coder_kind, model.alpha, model.gamma, model.stop, model.label_names)
    assert model_to_bytes(back) == path.read_bytes()


def test_model_format_errors():
    good = model_to_bytes(ClassifierModel(orthogonal_blocks()))
    for bad in (b"NOTAMODEL" + good[9:], good[:-3], good + b"\0", good[:8] + b"\x09" + good[9:], good[:10]):
        with pytest.raises(ModelFormatError):
            model_from_bytes(bad)
