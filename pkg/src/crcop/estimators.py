"""scikit-learn style wrappers around the fitting routines.

``X`` is the covariate matrix and ``y`` holds the observed ``(t, delta)``
pairs, either as an ``(n, 2)`` array or as a tuple of two arrays.
"""
import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import structural
from .data import Dataset
from .estimation.fitting import fit_cox_csh, fit_structural
from .estimation.partial_likelihood import restructure, structural_partial_loglik
from .structural import StructuralParams

__all__ = ["check_survival_y", "StructuralCompetingRisks", "CauseSpecificCox"]


def check_survival_y(y, n_samples=None):
    """Split ``y`` into float times and integer causes, validating both."""
    if isinstance(y, tuple) and len(y) == 2:
        t, delta = (np.asarray(a) for a in y)
    else:
        y = check_array(y, ensure_2d=True, dtype=float)
        if y.shape[1] != 2:
            raise ValueError(f"y must have two columns (t, delta), got {y.shape[1]}")
        t, delta = y[:, 0], y[:, 1]
    t = np.asarray(t, dtype=float).ravel()
    delta_f = np.asarray(delta, dtype=float).ravel()
    if t.shape != delta_f.shape:
        raise ValueError("t and delta must have the same length")
    if n_samples is not None and t.shape[0] != n_samples:
        raise ValueError(f"y has {t.shape[0]} rows but X has {n_samples}")
    if not np.all(np.isin(delta_f, (0.0, 1.0, 2.0))):
        raise ValueError("delta must take values in {0, 1, 2}")
    return t, delta_f.astype(np.int64)


def _dataset(X, y):
    X = check_array(X, ensure_2d=True, dtype=float)
    t, delta = check_survival_y(y, X.shape[0])
    return Dataset(t, delta, X)


class StructuralCompetingRisks(BaseEstimator):
    """Gumbel-copula competing risks model fitted by partial likelihood.

    After ``fit``: ``theta_``, ``tau_``, ``gamma_``, ``varsigma_``,
    ``coef_`` (shape ``(2, n_features)``, rows are risks) and ``result_``,
    the full :class:`~crcop.estimation.FitResult`.
    """

    def __init__(self, max_iter=2000, restart=True, fix_theta=None):
        self.max_iter = max_iter
        self.restart = restart
        self.fix_theta = fix_theta

    def fit(self, X, y):
        data = _dataset(X, y)
        res = fit_structural(data, max_iter=self.max_iter, restart=self.restart,
                             fix_theta=self.fix_theta)
        p = data.p
        est = res.estimates
        self.result_ = res
        self.n_features_in_ = p
        self.theta_ = float(est[0])
        self.tau_ = float(est[1])
        self.gamma_ = float(est[2])
        self.varsigma_ = float(est[3])
        self.coef_ = np.vstack([est[4 : 4 + p], est[4 + p : 4 + 2 * p]])
        return self

    @property
    def params_(self):
        check_is_fitted(self, "result_")
        return StructuralParams(self.theta_, self.gamma_, self.coef_[0], self.coef_[1])

    def _check_X(self, X):
        check_is_fitted(self, "result_")
        X = check_array(X, ensure_2d=True, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X

    def predict_proba(self, X):
        """``P(delta = j | z)`` for ``j = 1, 2``, one row per sample."""
        X = self._check_X(X)
        z = X[:, 0] if X.shape[1] == 1 else X
        p1 = np.atleast_1d(structural.incidence_probability(self.params_, 1, z))
        return np.column_stack([p1, 1.0 - p1])

    def predict(self, X):
        """Most likely failure type (1 or 2)."""
        return np.argmax(self.predict_proba(X), axis=1) + 1

    def score(self, X, y):
        """Structural log partial likelihood per observation."""
        self._check_X(X)
        rd = restructure(_dataset(X, y))
        ll = structural_partial_loglik(self.theta_, self.gamma_, self.coef_[0], self.coef_[1], rd)
        return ll / (len(rd) // 2)


class CauseSpecificCox(BaseEstimator):
    """Cox proportional hazards model for the cause-specific hazard of ``risk``."""

    def __init__(self, risk=1):
        self.risk = risk

    def fit(self, X, y):
        data = _dataset(X, y)
        self.result_ = fit_cox_csh(data, self.risk)
        self.n_features_in_ = data.p
        self.coef_ = np.asarray(self.result_.estimates, dtype=float)
        return self

    def predict(self, X):
        """Linear predictor ``z alpha``."""
        check_is_fitted(self, "result_")
        X = check_array(X, ensure_2d=True, dtype=float)
        return X @ self.coef_

    def predict_hazard_ratio(self, X):
        return np.exp(self.predict(X))
