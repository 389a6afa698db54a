"""scikit-learn wrapper around :mod:`dlroc.classifier`.

Unlike the rest of the package, which stores samples as columns, the
estimator follows the scikit-learn convention: ``X`` has one sample per row.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .classifier import classify_batch, fit_model
from .coding import CoderStop
from .learning import LearnParams


class DLROCClassifier(ClassifierMixin, BaseEstimator):
    """Sparse-representation classifier with a learned incoherent dictionary.

    Parameters
    ----------
    n_atoms : int, default=8
        Atoms learned per class (ignored when ``coder="omp"``, which uses the
        normalised training samples as the dictionary).
    alpha : float, default=0.7
        Weight of the squared error in the hybrid loss; ``1 - alpha`` goes to
        the absolute error.
    gamma : float, default=0.5
        Sparsity weight used for learning and classification.
    eta : float, default=1.0
        Weight of the cross-class incoherence penalty.
    t_max : int, default=20
        Maximum learning iterations.
    coder : {"hybrid", "omp"}, default="hybrid"
    residual_tol : float, default=0.01
        Coding stops once the residual norm reaches this value.
    random_state : int, default=0

    Attributes
    ----------
    classes_ : ndarray of shape (n_classes,)
    model_ : ClassifierModel
    trace_ : LearnTrace or None
    n_features_in_ : int
    """

    def __init__(self, n_atoms=8, alpha=0.7, gamma=0.5, eta=1.0, t_max=20, coder="hybrid",
                 residual_tol=0.01, random_state=0):
        self.n_atoms = n_atoms
        self.alpha = alpha
        self.gamma = gamma
        self.eta = eta
        self.t_max = t_max
        self.coder = coder
        self.residual_tol = residual_tol
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        check_classification_targets(y)
        self.classes_, index = np.unique(y, return_inverse=True)
        blocks = [X[index == k].T for k in range(self.classes_.size)]
        params = LearnParams(
            alpha=self.alpha, gamma=self.gamma, eta=self.eta, t_max=self.t_max,
            seed=int(self.random_state), stop=CoderStop(residual_threshold=self.residual_tol),
        )
        self.model_, self.trace_ = fit_model(blocks, self.n_atoms, params, self.coder)
        self.n_features_in_ = X.shape[1]
        return self

    def _ratios(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, the model expects {self.n_features_in_}")
        K = self.classes_.size
        P = np.full((X.shape[0], K), 1.0 / K)
        for i, res in enumerate(classify_batch(X.T, self.model_)):
            if res.label is not None:
                P[i] = res.energy_ratios
        return P

    def predict_proba(self, X):
        """Per-class energy ratios of each sample's code.

        These are shares of code energy, not calibrated probabilities. A
        sample whose code is zero gets a uniform row.
        """
        return self._ratios(X)

    def predict(self, X):
        """Class with the largest energy ratio; ties go to the first class.

        Unclassifiable samples (zero code) therefore get ``classes_[0]``.
        """
        P = self._ratios(X)
        return self.classes_[np.argmax(P, axis=1)]
