"""Gumbel-copula competing-risks model with proportional-hazards marginals.

Latent durations ``T1, T2`` have PH marginals ``lambda_j(t|z) = lambda_0j(t)
exp(z beta_1j)`` joined by a Gumbel copula with parameter ``theta``. The two
marginal baselines are proportional, ``Lambda_02 = exp(varsigma) Lambda_01``,
and ``gamma = varsigma * theta`` is the log-ratio of the implied cause-specific
baselines. Under these restrictions the implied cause-specific hazards are
proportional in ``z`` while the subdistribution hazards are not.

Everything is computed from log cumulative hazards so that large linear
predictors do not overflow.
"""
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.special import expit

from . import hazards
from ._linpred import linear_predictor
from .copulas import CopulaSpec, copula_cdf, copula_partial, gumbel_theta_from_tau
from .exceptions import DomainError, NonFiniteError, ParameterError

__all__ = [
    "StructuralParams",
    "ReducedFormParams",
    "joint_survival",
    "overall_survival",
    "subdensity",
    "log_subdensity",
    "incidence_probability",
    "cumulative_incidence",
    "implied_csh",
    "implied_csh_separable",
    "csh_baseline_hazard",
    "csh_cumulative_baseline",
    "map_structural_to_reduced",
    "local_lhr",
    "average_lhr",
    "predicted_reduced_form",
    "implied_csh_copula",
    "implied_csh_clayton",
    "implied_sdh",
    "hazard_ratio",
    "relative_spread",
    "full_loglik",
]


@dataclass(frozen=True)
class StructuralParams:
    """Complete description of the data generating process.

    ``varsigma`` and the risk-2 baseline rate are derived, never set.
    """

    theta: float
    gamma: float
    beta11: np.ndarray
    beta12: np.ndarray
    beta01: float = 1.0
    baseline: str = "exponential"
    shape: float = 1.0

    def __post_init__(self):
        if not float(self.theta) >= 1.0:
            raise ParameterError(f"theta must be >= 1, got {self.theta}")
        if not np.isfinite(self.gamma):
            raise ParameterError("gamma must be finite")
        b11 = np.atleast_1d(np.asarray(self.beta11, dtype=float))
        b12 = np.atleast_1d(np.asarray(self.beta12, dtype=float))
        if b11.shape != b12.shape:
            raise ParameterError("beta11 and beta12 must have the same length")
        object.__setattr__(self, "theta", float(self.theta))
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "beta11", b11)
        object.__setattr__(self, "beta12", b12)
        # validates baseline/rate/shape
        self.marginal(1)

    @classmethod
    def reference(cls, theta=2.0, **overrides):
        """Simulation design used throughout the package: gamma=0.5, beta01=1,
        beta11=1, beta12=2, one covariate."""
        kw = dict(theta=theta, gamma=0.5, beta11=1.0, beta12=2.0, beta01=1.0)
        kw.update(overrides)
        return cls(**kw)

    @classmethod
    def from_tau(cls, tau, **overrides):
        return cls.reference(theta=gumbel_theta_from_tau(tau), **overrides)

    @property
    def varsigma(self):
        return self.gamma / self.theta

    @property
    def tau(self):
        return 1.0 - 1.0 / self.theta

    @property
    def beta02(self):
        """Risk-2 baseline rate, chosen so that ``Lambda_02 = e^varsigma Lambda_01``."""
        return self.beta01 * np.exp(self.varsigma / self.shape)

    @property
    def p(self):
        return self.beta11.size

    @property
    def copula(self):
        return CopulaSpec.gumbel(self.theta)

    def marginal(self, j):
        rate, coef = (self.beta01, self.beta11) if j == 1 else (self.beta02, self.beta12)
        if j not in (1, 2):
            raise ValueError("risk index must be 1 or 2")
        return hazards.MarginalHazardSpec(self.baseline, rate, self.shape, coef)

    def marginals(self):
        return self.marginal(1), self.marginal(2)

    def replace(self, **changes):
        kw = dict(
            theta=self.theta, gamma=self.gamma, beta11=self.beta11, beta12=self.beta12,
            beta01=self.beta01, baseline=self.baseline, shape=self.shape,
        )
        kw.update(changes)
        return StructuralParams(**kw)


@dataclass(frozen=True)
class ReducedFormParams:
    """Cause-specific Cox parameters: covariate log-hazard ratios and the
    log-ratio of the two baseline CSHs."""

    alpha11: np.ndarray
    alpha12: np.ndarray
    gamma: float = field(default=0.0)


def _out(x):
    x = np.asarray(x, dtype=float)
    return x.item() if x.ndim == 0 else x


def _check_risk(j):
    if j not in (1, 2):
        raise ValueError("risk index must be 1 or 2")


def _log_cumhaz(p, t, z):
    m1, m2 = p.marginals()
    return (
        np.asarray(hazards.log_cumulative_hazard(m1, t, z)),
        np.asarray(hazards.log_cumulative_hazard(m2, t, z)),
    )


def _log_hazard(spec, t, z):
    t = np.asarray(t, dtype=float)
    k = spec.shape
    return np.log(k * spec.rate) + (k - 1.0) * np.log(spec.rate * t) + linear_predictor(z, spec.coef)


def _log_k(p, log_l1, log_l2):
    # log(Lambda_1^theta + Lambda_2^theta)
    return np.logaddexp(p.theta * log_l1, p.theta * log_l2)


def joint_survival(p, t1, t2, z):
    """``P(T1 > t1, T2 > t2 | z)``."""
    m1, m2 = p.marginals()
    l1 = np.asarray(hazards.log_cumulative_hazard(m1, t1, z))
    l2 = np.asarray(hazards.log_cumulative_hazard(m2, t2, z))
    return _out(np.exp(-np.exp(_log_k(p, l1, l2) / p.theta)))


def overall_survival(p, t, z):
    """``S(t|z) = P(T > t | z)`` with ``T = min(T1, T2)``."""
    l1, l2 = _log_cumhaz(p, t, z)
    return _out(np.exp(-np.exp(_log_k(p, l1, l2) / p.theta)))


def log_subdensity(p, j, t, z):
    _check_risk(j)
    l1, l2 = _log_cumhaz(p, t, z)
    log_k = _log_k(p, l1, l2)
    lj = l1 if j == 1 else l2
    log_lam = _log_hazard(p.marginal(j), t, z)
    th = p.theta
    with np.errstate(over="ignore"):
        return _out(log_lam + (th - 1.0) * lj + (1.0 / th - 1.0) * log_k - np.exp(log_k / th))


def subdensity(p, j, t, z):
    """Density of observing a type-``j`` failure at ``t``."""
    return _out(np.exp(log_subdensity(p, j, t, z)))


def _log_eta_theta(p, j, z):
    # theta * log(Lambda_other / Lambda_j), constant in t under risk proportionality
    lp1 = linear_predictor(z, p.beta11)
    lp2 = linear_predictor(z, p.beta12)
    x = p.gamma + p.theta * (lp2 - lp1)
    return x if j == 1 else -x


def incidence_probability(p, j, z):
    """``P(delta = j | z)``."""
    _check_risk(j)
    return _out(expit(-_log_eta_theta(p, j, z)))


def cumulative_incidence(p, j, t, z):
    """``P(T <= t, delta = j | z)``.

    Under risk proportionality the failure type is independent of ``T`` given
    ``z``, so this factorizes as ``P(delta=j|z) * (1 - S(t|z))``.
    """
    _check_risk(j)
    return _out(
        np.asarray(incidence_probability(p, j, z)) * -np.expm1(np.log(overall_survival(p, t, z)))
    )


def implied_csh(p, j, t, z):
    """Cause-specific hazard implied by the structural model, ``f_j / S``."""
    _check_risk(j)
    l1, l2 = _log_cumhaz(p, t, z)
    lj = l1 if j == 1 else l2
    th = p.theta
    log_h = _log_hazard(p.marginal(j), t, z) + (th - 1.0) * lj + (1.0 / th - 1.0) * _log_k(p, l1, l2)
    return _out(np.exp(log_h))


def csh_baseline_hazard(p, j, t):
    """Baseline factor ``h_0j(t)`` of the separable implied CSH."""
    _check_risk(j)
    mj = p.marginal(j)
    m1 = p.marginal(1)
    log_ratio = np.log(hazards.baseline_cumulative_hazard(mj, t)) - np.log(
        hazards.baseline_cumulative_hazard(m1, t)
    )
    return _out(np.asarray(hazards.baseline_hazard(mj, t)) * np.exp((p.theta - 1.0) * log_ratio))


def csh_cumulative_baseline(p, j, t):
    """Closed-form cumulative baseline CSH: ``H_01 = Lambda_01`` and
    ``H_02 = exp(gamma (1 - 1/theta)) Lambda_02``."""
    _check_risk(j)
    lam0 = np.asarray(hazards.baseline_cumulative_hazard(p.marginal(j), t))
    if j == 1:
        return _out(lam0)
    return _out(np.exp(p.gamma * (1.0 - 1.0 / p.theta)) * lam0)


def _log_psi_star(p, z):
    th = p.theta
    lp1 = linear_predictor(z, p.beta11)
    lp2 = linear_predictor(z, p.beta12)
    return np.logaddexp(th * lp1, th * p.varsigma + th * lp2) / th


def implied_csh_separable(p, j, t, z):
    """Implied CSH assembled as baseline(t) x covariate(z) factors.

    Computed independently of :func:`implied_csh`; the two agree exactly when
    the marginals are proportional across risks.
    """
    _check_risk(j)
    th = p.theta
    lpj = linear_predictor(z, p.beta11 if j == 1 else p.beta12)
    cov = np.exp((1.0 - th) * _log_psi_star(p, z) + th * lpj)
    base = np.asarray(csh_baseline_hazard(p, j, t))
    return _out(base * cov)


def map_structural_to_reduced(p, z):
    """Implied CSH covariate functions ``(psi_1(z), psi_2(z))``."""
    th = p.theta
    lp1 = linear_predictor(z, p.beta11)
    lp2 = linear_predictor(z, p.beta12)
    log_a = (1.0 / th - 1.0) * np.logaddexp(0.0, p.gamma + th * (lp2 - lp1))
    psi1 = np.exp(lp1 + log_a)
    psi2 = np.exp((1.0 - th) * lp1 + th * lp2 + log_a)
    return _out(psi1), _out(psi2)


def _scalar_covariate(p):
    if p.p != 1:
        raise ParameterError("log hazard ratios are defined for a scalar covariate")
    return p.beta11[0], p.beta12[0]


def local_lhr(p, j, z):
    """``d log psi_j(z) / dz`` for a scalar covariate."""
    _check_risk(j)
    b11, b12 = _scalar_covariate(p)
    z = np.asarray(z, dtype=float)
    diff = b12 - b11
    share = expit(p.gamma + z * diff * p.theta)
    lhr1 = b11 - (p.theta - 1.0) * diff * share
    return _out(lhr1 if j == 1 else lhr1 + p.theta * diff)


def average_lhr(p, j, z_mean=0.0, z_sd=2.0, n_quadrature=64):
    """Average of :func:`local_lhr` over ``z ~ N(z_mean, z_sd^2)``.

    Gauss-Hermite quadrature with ``n_quadrature`` nodes.
    """
    if n_quadrature < 8:
        raise ValueError("n_quadrature must be >= 8")
    if not z_sd > 0:
        raise ParameterError("z_sd must be > 0")
    nodes, weights = hermegauss(n_quadrature)
    weights = weights / np.sqrt(2.0 * np.pi)
    return float(np.sum(weights * np.asarray(local_lhr(p, j, z_mean + z_sd * nodes))))


def predicted_reduced_form(p, z_mean=0.0, z_sd=2.0, n_quadrature=64):
    return ReducedFormParams(
        alpha11=np.array([average_lhr(p, 1, z_mean, z_sd, n_quadrature)]),
        alpha12=np.array([average_lhr(p, 2, z_mean, z_sd, n_quadrature)]),
        gamma=p.gamma,
    )


def implied_csh_copula(copula, m1, m2, j, t, z):
    """Implied CSH for an arbitrary copula, ``dC/du_j(S1,S2) S_j lambda_j / S``."""
    _check_risk(j)
    s1 = np.asarray(hazards.survival(m1, t, z))
    s2 = np.asarray(hazards.survival(m2, t, z))
    mj, sj = (m1, s1) if j == 1 else (m2, s2)
    dc = np.asarray(copula_partial(copula, s1, s2, arg=j))
    return _out(dc * sj * np.asarray(hazards.hazard(mj, t, z)) / np.asarray(copula_cdf(copula, s1, s2)))


def implied_csh_clayton(theta, m1, m2, j, t, z):
    """Implied CSH under a Clayton copula, ``S^theta S_j^-theta lambda_j``.

    ``theta == 0`` is independence, where the CSH equals the marginal hazard.
    """
    _check_risk(j)
    if not theta >= 0:
        raise ParameterError("Clayton theta must be >= 0")
    lam = np.asarray(hazards.hazard(m1 if j == 1 else m2, t, z))
    if theta == 0:
        return _out(lam)
    c1 = np.asarray(hazards.cumulative_hazard(m1, t, z))
    c2 = np.asarray(hazards.cumulative_hazard(m2, t, z))
    cj = c1 if j == 1 else c2
    # log S = -(1/theta) log(e^{theta c1} + e^{theta c2} - 1)
    a, b = theta * c1, theta * c2
    hi = np.maximum(a, b)
    log_base = hi + np.log(np.exp(a - hi) + np.exp(b - hi) - np.exp(-hi))
    log_s = -log_base / theta
    return _out(np.exp(theta * (log_s + cj)) * lam)


def implied_sdh(p, j, t, z):
    """Subdistribution hazard ``f_j / (1 - F_j)`` implied by the structural model.

    Closed form under risk proportionality: with ``eta`` the (constant) ratio
    of the other risk's cumulative hazard to risk ``j``'s and
    ``phi = (1 + eta^theta)^(1/theta)``,
    ``d_j = lambda_j phi / (1 + eta^theta exp(Lambda_j phi))``.
    Risk 2 is the mirror image of risk 1 (``varsigma -> -varsigma``).
    """
    _check_risk(j)
    th = p.theta
    log_eta_th = np.asarray(_log_eta_theta(p, j, z))
    log_phi = np.logaddexp(0.0, log_eta_th) / th
    l1, l2 = _log_cumhaz(p, t, z)
    lj = l1 if j == 1 else l2
    log_lam = _log_hazard(p.marginal(j), t, z)
    x = np.exp(lj + log_phi)
    return _out(np.exp(log_lam + log_phi - np.logaddexp(0.0, log_eta_th + x)))


def hazard_ratio(fn, p, j, t, z1, z2):
    """``fn(p, j, t, z1) / fn(p, j, t, z2)`` on a grid of ``t``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return _out(np.asarray(fn(p, j, t, z1)) / np.asarray(fn(p, j, t, z2)))


def relative_spread(values):
    """``max / min - 1``; zero for a constant positive series."""
    values = np.asarray(values, dtype=float)
    return float(values.max() / values.min() - 1.0)


def full_loglik(p, data):
    """Sum of ``log f_{delta_i}(t_i | z_i)`` over an uncensored dataset."""
    if len(data) == 0:
        return 0.0
    if np.any(data.delta == 0):
        raise DomainError("full_loglik requires uncensored data (delta in {1, 2})")
    z = data.z if p.p > 1 else data.z[:, 0]
    lf1 = np.asarray(log_subdensity(p, 1, data.t, z))
    lf2 = np.asarray(log_subdensity(p, 2, data.t, z))
    contrib = np.where(data.delta == 1, lf1, lf2)
    bad = np.flatnonzero(~np.isfinite(contrib))
    if bad.size:
        raise NonFiniteError(f"non-finite log-density at observation index {int(bad[0])}")
    return float(contrib.sum())
