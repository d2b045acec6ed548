"""Restructured (duplicated) data and the partial likelihoods evaluated on it.

Each subject appears twice, once per failure type ``J``. Row ``J`` carries a
failure indicator that is 1 only when the subject failed from risk ``J``. On
this doubled sample a single-risk partial likelihood whose rows have
risk-specific linear predictors recovers the structural parameters.

Risk sets are left-continuous (``t_s >= t``) and ties use Breslow's
approximation.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .._linpred import linear_predictor
from ..data import Dataset
from ..exceptions import DomainError, NonFiniteError

__all__ = [
    "RestructuredDataset",
    "RiskSets",
    "restructure",
    "unrestructure",
    "structural_partial_loglik",
    "structural_linear_predictor",
    "restructured_design",
    "cox_partial_loglik",
    "cox_score_information",
]


class RiskSets:
    """Precomputed ordering for ``log sum_{s: t_s >= t_i} exp(eta_s)``."""

    def __init__(self, t):
        t = np.asarray(t, dtype=float)
        self.order = np.argsort(-t, kind="mergesort")
        t_desc = t[self.order]
        n_at_risk = t.size - np.searchsorted(t_desc[::-1], t_desc, side="left")
        self.last = n_at_risk - 1

    def log_sums(self, eta):
        eta = np.asarray(eta, dtype=float)
        cum = np.logaddexp.accumulate(eta[self.order])
        out = np.empty_like(eta)
        out[self.order] = cum[self.last]
        return out

    def sums(self, weights):
        """Risk-set sums of ``weights`` (any trailing shape)."""
        w = np.asarray(weights, dtype=float)
        cum = np.cumsum(w[self.order], axis=0)
        out = np.empty_like(cum)
        out[self.order] = cum[self.last]
        return out


@dataclass(frozen=True)
class RestructuredDataset:
    orig_index: np.ndarray
    risk: np.ndarray
    tilde_delta: np.ndarray
    t: np.ndarray
    z: np.ndarray
    covariate_names: tuple

    def __len__(self):
        return self.t.shape[0]

    @property
    def p(self):
        return self.z.shape[1]

    @cached_property
    def risk_sets(self):
        return RiskSets(self.t)

    @cached_property
    def failures(self):
        return np.flatnonzero(self.tilde_delta == 1)

    @cached_property
    def is_risk2(self):
        return self.risk == 2


def restructure(data):
    """Duplicate every subject into a ``J = 1`` row and a ``J = 2`` row."""
    n = len(data)
    orig = np.repeat(np.arange(n), 2)
    risk = np.tile(np.array([1, 2]), n)
    delta = np.repeat(data.delta, 2)
    return RestructuredDataset(
        orig_index=orig,
        risk=risk,
        tilde_delta=(delta == risk).astype(np.int64),
        t=np.repeat(data.t, 2),
        z=np.repeat(data.z, 2, axis=0),
        covariate_names=data.covariate_names,
    )


def unrestructure(rd):
    """Inverse of :func:`restructure` (up to row order of the input)."""
    first = rd.risk == 1
    idx = rd.orig_index[first]
    order = np.argsort(idx, kind="mergesort")
    delta = np.zeros(idx.size, dtype=np.int64)
    for j in (1, 2):
        rows = (rd.risk == j) & (rd.tilde_delta == 1)
        delta[np.searchsorted(idx[order], rd.orig_index[rows])] = j
    return Dataset(rd.t[first][order], delta, rd.z[first][order], rd.covariate_names)


def _lp(z, coef):
    return linear_predictor(z[:, 0] if z.shape[1] == 1 else z, coef)


def structural_linear_predictor(theta, gamma, beta11, beta12, rd):
    """Per-row ``gamma_J + z beta*_1J + log A(z)`` on restructured data."""
    lp1 = _lp(rd.z, beta11)
    lp2 = _lp(rd.z, beta12)
    log_a = (1.0 / theta - 1.0) * np.logaddexp(0.0, gamma + theta * (lp2 - lp1))
    # beta*_12 = beta11 (1 - theta) + beta12 theta
    risk2 = gamma + (1.0 - theta) * lp1 + theta * lp2
    return np.where(rd.is_risk2, risk2, lp1) + log_a


def structural_partial_loglik(theta, gamma, beta11, beta12, rd):
    """Log partial likelihood of the structural parameters.

    Depends on the event times only through their ranks.
    """
    if rd.failures.size == 0:
        raise DomainError("partial likelihood needs at least one failure")
    fail = rd.failures
    with np.errstate(invalid="ignore", over="ignore"):
        eta = structural_linear_predictor(theta, gamma, beta11, beta12, rd)
        value = float(np.sum(eta[fail] - rd.risk_sets.log_sums(eta)[fail]))
    if not np.isfinite(value):
        raise NonFiniteError(
            f"non-finite partial likelihood at theta={theta}, gamma={gamma}, "
            f"beta11={np.ravel(beta11).tolist()}, beta12={np.ravel(beta12).tolist()}"
        )
    return value


def restructured_design(rd):
    """Design matrix for an ordinary Cox model on restructured data.

    Columns: risk-2 indicator, ``z`` on risk-1 rows, ``z`` on risk-2 rows,
    so the coefficients are ``(gamma, beta11, beta12)`` when ``theta = 1``.
    """
    r2 = rd.is_risk2.astype(float)[:, None]
    return np.hstack([r2, rd.z * (1.0 - r2), rd.z * r2])


def cox_partial_loglik(beta, t, event, X, risk_sets=None):
    """Breslow log partial likelihood of a Cox model with design ``X``."""
    X = np.asarray(X, dtype=float)
    rs = risk_sets if risk_sets is not None else RiskSets(t)
    eta = X @ np.asarray(beta, dtype=float)
    fail = np.flatnonzero(np.asarray(event) == 1)
    return float(np.sum(eta[fail] - rs.log_sums(eta)[fail]))


def cox_score_information(beta, t, event, X, risk_sets=None):
    """Log partial likelihood, score and observed information (Breslow)."""
    X = np.asarray(X, dtype=float)
    rs = risk_sets if risk_sets is not None else RiskSets(t)
    eta = X @ np.asarray(beta, dtype=float)
    fail = np.flatnonzero(np.asarray(event) == 1)
    w = np.exp(eta - eta.max())
    s0 = rs.sums(w)[fail]
    s1 = rs.sums(w[:, None] * X)[fail]
    s2 = rs.sums(w[:, None, None] * X[:, :, None] * X[:, None, :])[fail]
    # extreme coefficients can underflow s0; the caller rejects non-finite steps
    with np.errstate(divide="ignore", invalid="ignore"):
        xbar = s1 / s0[:, None]
        loglik = float(np.sum(eta[fail] - eta.max() - np.log(s0)))
        score = np.sum(X[fail] - xbar, axis=0)
        info = np.sum(s2 / s0[:, None, None] - xbar[:, :, None] * xbar[:, None, :], axis=0)
    return loglik, score, info
