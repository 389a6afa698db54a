import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.model_selection import cross_val_score

from dlroc.data import SynthSpec, generate_synthetic
from dlroc.estimator import DLROCClassifier


@pytest.fixture(scope="module")
def xy():
    data = generate_synthetic(SynthSpec(m=16, K=3, atoms_per_label=3, samples_per_label=40, sparsity=2,
                                        outlier_fraction=0.0, seed=31))
    names = np.array(["run", "sit", "walk"])
    return data.samples.T, names[data.labels]


def test_params_round_trip():
    est = DLROCClassifier(n_atoms=5, gamma=0.2)
    params = est.get_params()
    assert params["n_atoms"] == 5 and params["gamma"] == 0.2
    twin = clone(est).set_params(alpha=0.4)
    assert twin.alpha == 0.4 and est.alpha == 0.7


def test_fit_predict_with_string_labels(xy):
    X, y = xy
    est = DLROCClassifier(n_atoms=4, t_max=3).fit(X, y)
    assert est.classes_.tolist() == ["run", "sit", "walk"]
    assert est.n_features_in_ == 16
    P = est.predict_proba(X)
    assert P.shape == (120, 3)
    assert np.allclose(P.sum(axis=1), 1.0)
    assert np.array_equal(est.predict(X), est.classes_[np.argmax(P, axis=1)])
    assert est.score(X, y) > 0.8


def test_omp_variant_and_cross_validation(xy):
    X, y = xy
    scores = cross_val_score(DLROCClassifier(coder="omp"), X, y, cv=3)
    assert scores.shape == (3,) and np.all(scores > 0.5)


def test_unclassifiable_rows_are_uniform(xy):
    X, y = xy
    est = DLROCClassifier(n_atoms=3, t_max=1).fit(X, y)
    P = est.predict_proba(np.zeros((2, 16)))
    assert np.array_equal(P, np.full((2, 3), 1 / 3))
    assert est.predict(np.zeros((1, 16))).tolist() == ["run"]


def test_errors(xy):
    X, y = xy
    with pytest.raises(NotFittedError):
        DLROCClassifier().predict(X)
    est = DLROCClassifier(n_atoms=3, t_max=1).fit(X, y)
    with pytest.raises(ValueError):
        est.predict(X[:, :5])
