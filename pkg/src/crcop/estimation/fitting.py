"""Estimators: structural partial likelihood, full parametric MLE and Cox CSH.

The structural fits optimize on an unconstrained scale,
``xi = log(theta - 1)``, with Nelder-Mead. Standard errors come from a
central finite-difference Hessian in ``theta`` (well defined at the
``theta = 1`` boundary, unlike the ``xi`` scale) and are mapped to Kendall's
``tau = 1 - 1/theta`` and ``varsigma = gamma / theta`` by the delta method.
"""
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.stats import norm

from .. import structural
from ..exceptions import DomainError, NonFiniteError
from .partial_likelihood import (
    RiskSets,
    cox_score_information,
    restructure,
    structural_partial_loglik,
)

__all__ = [
    "FitResult",
    "numeric_hessian",
    "fit_structural",
    "fit_full_mle",
    "fit_cox",
    "fit_cox_csh",
    "THETA_EPS",
]

logger = logging.getLogger(__name__)

THETA_EPS = 1e-6
# fits with theta - 1 below this are treated as lying on the boundary
BOUNDARY_TOL = 1e-4


@dataclass
class FitResult:
    """Point estimates with covariance and optimizer diagnostics.

    ``names``/``estimates``/``cov`` cover every reported quantity, derived
    ones included; ``cov`` is ``None`` when the Hessian was not negative
    definite at the optimum. ``x`` and ``cov_x`` are the optimizer-scale
    counterparts.
    """

    model: str
    names: tuple
    estimates: np.ndarray
    cov: np.ndarray
    loglik: float
    converged: bool
    n_iter: int
    n_obs: int
    x: np.ndarray = None
    cov_x: np.ndarray = None
    message: str = ""
    diagnostics: dict = field(default_factory=dict)

    def index(self, name):
        return self.names.index(name)

    def __getitem__(self, name):
        return float(self.estimates[self.index(name)])

    @property
    def se(self):
        if self.cov is None:
            return np.full(len(self.names), np.nan)
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))

    def std_error(self, name):
        return float(self.se[self.index(name)])

    def conf_int(self, name, level=0.95):
        k = norm.ppf(0.5 + level / 2.0)
        est, se = self[name], self.std_error(name)
        return est - k * se, est + k * se

    def as_dict(self):
        return dict(zip(self.names, self.estimates.tolist()))

    def table(self, level=0.95):
        """Rows of ``(name, coef, se, t, exp(coef), lower, upper)``."""
        k = norm.ppf(0.5 + level / 2.0)
        rows = []
        for name, est, se in zip(self.names, self.estimates, self.se):
            with np.errstate(divide="ignore", invalid="ignore"):
                tstat = est / se
            rows.append((name, est, se, tstat, np.exp(est), est - k * se, est + k * se))
        return rows


def numeric_hessian(f, x, rel_step=1e-4, min_step=1e-4):
    """Central finite-difference Hessian with steps ``max(min_step, rel_step*|x|)``."""
    x = np.asarray(x, dtype=float)
    k = x.size
    h = np.maximum(min_step, rel_step * np.abs(x))
    f0 = f(x)
    hess = np.empty((k, k))
    ei = np.eye(k)
    for i in range(k):
        di = h[i] * ei[i]
        hess[i, i] = (f(x + di) - 2.0 * f0 + f(x - di)) / h[i] ** 2
        for j in range(i):
            dj = h[j] * ei[j]
            val = (f(x + di + dj) - f(x + di - dj) - f(x - di + dj) + f(x - di - dj)) / (
                4.0 * h[i] * h[j]
            )
            hess[i, j] = hess[j, i] = val
    return hess


def _covariance_from_loglik_hessian(hess):
    """Inverse of the observed information, or ``None`` if it is not PD."""
    info = -0.5 * (hess + hess.T)
    if not np.all(np.isfinite(info)):
        return None, "non-finite Hessian"
    eig = np.linalg.eigvalsh(info)
    if eig.min() <= 0:
        return None, f"information not positive definite (min eigenvalue {eig.min():.3g})"
    cov = np.linalg.inv(info)
    return 0.5 * (cov + cov.T), ""


def _nelder_mead(objective, x0, max_iter, xatol, frtol, restart):
    """Minimize with Nelder-Mead, then restart once from a perturbed optimum."""
    f0 = objective(np.asarray(x0, dtype=float))
    fatol = frtol * max(1.0, abs(f0))
    opts = dict(maxiter=max_iter, maxfev=4 * max_iter, xatol=xatol, fatol=fatol)
    total = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = minimize(objective, x0, method="Nelder-Mead", options=opts)
        total += res.nit
        converged = bool(res.success)
        if restart:
            x1 = res.x * 1.1 + np.where(np.abs(res.x) < 1e-3, 0.1, 0.0)
            res2 = minimize(objective, x1, method="Nelder-Mead", options=opts)
            total += res2.nit
            converged = bool(res2.success)
            if res2.fun <= res.fun:
                res = res2
    return res, converged, total


def _guarded(f):
    def wrapped(x):
        try:
            val = f(x)
        except (NonFiniteError, FloatingPointError, OverflowError):
            return np.inf
        return val if np.isfinite(val) else np.inf

    return wrapped


def _theta_of(xi):
    return 1.0 + np.exp(xi)


def _xi_of(theta):
    return np.log(theta - 1.0 + THETA_EPS)


def _coef_names(prefix, names):
    if len(names) == 1:
        return [prefix]
    return [f"{prefix}[{nm}]" for nm in names]


def _check_events(data, risks=(1, 2)):
    counts = data.event_counts()
    missing = [j for j in risks if counts[j] == 0]
    if missing:
        raise DomainError(f"no observed failures of risk {missing}; model is not estimable")


def fit_structural(data, *, max_iter=2000, restart=True, x0=None, fix_theta=None,
                   xatol=1e-8, frtol=1e-10):
    """Maximize the structural partial likelihood.

    Parameters are ``(theta, gamma, beta11, beta12)``; ``fix_theta`` holds
    ``theta`` at a given value (e.g. 1 for independent risks). Reported names
    are ``theta, tau, gamma, varsigma, beta11..., beta12...``.
    """
    _check_events(data)
    rd = restructure(data)
    p = data.p
    free_theta = fix_theta is None

    def unpack(x):
        if free_theta:
            theta, rest = _theta_of(x[0]), x[1:]
        else:
            theta, rest = float(fix_theta), x
        return theta, rest[0], rest[1 : 1 + p], rest[1 + p : 1 + 2 * p]

    def negll(x):
        return -structural_partial_loglik(*unpack(x), rd)

    k = 1 + 2 * p + (1 if free_theta else 0)
    start = np.zeros(k) if x0 is None else np.asarray(x0, dtype=float)
    res, converged, n_iter = _nelder_mead(_guarded(negll), start, max_iter, xatol, frtol, restart)
    x = res.x
    theta, gamma, b11, b12 = unpack(x)

    # Hessian on the natural theta scale: the likelihood is smooth through
    # theta = 1, whereas on the xi scale it flattens and becomes singular there.
    nat = np.concatenate([[theta] if free_theta else [], [gamma], b11, b12])

    def nat_ll(v):
        if free_theta:
            th, rest = v[0], v[1:]
        else:
            th, rest = float(fix_theta), v
        return structural_partial_loglik(th, rest[0], rest[1 : 1 + p], rest[1 + p :], rd)

    hess = numeric_hessian(nat_ll, nat)
    cov_nat, why = _covariance_from_loglik_hessian(hess)

    names = ["theta", "tau", "gamma", "varsigma"] + _coef_names("beta11", data.covariate_names) \
        + _coef_names("beta12", data.covariate_names)
    est = np.concatenate([[theta, 1.0 - 1.0 / theta, gamma, gamma / theta], b11, b12])
    # Jacobian of reported quantities wrt (theta, gamma, beta11, beta12)
    jac = np.zeros((len(names), k))
    off = 1 if free_theta else 0
    if free_theta:
        jac[0, 0] = 1.0
        jac[1, 0] = 1.0 / theta ** 2
        jac[3, 0] = -gamma / theta ** 2
    jac[2, off] = 1.0
    jac[3, off] = 1.0 / theta
    for i in range(2 * p):
        jac[4 + i, off + 1 + i] = 1.0
    cov = None if cov_nat is None else jac @ cov_nat @ jac.T
    cov_x = None
    boundary = free_theta and theta - 1.0 < BOUNDARY_TOL
    if cov_nat is not None:
        to_x = np.ones(k)
        if free_theta:
            to_x[0] = 1.0 / np.exp(x[0])
        cov_x = cov_nat * np.outer(to_x, to_x)
    elif boundary:
        # theta sits on the independence boundary with the likelihood still
        # rising towards theta < 1; (gamma, beta) remain regular given theta = 1
        sub, why_sub = _covariance_from_loglik_hessian(hess[1:, 1:])
        if sub is not None:
            cov = np.full((len(names), len(names)), np.nan)
            rows = [2] + list(range(4, 4 + 2 * p))
            cov[np.ix_(rows, rows)] = sub
            why = "theta on the boundary theta = 1; no standard errors for theta, tau, varsigma"

    if not converged:
        logger.warning("structural fit did not converge after %d iterations", n_iter)
    return FitResult(
        model="structural",
        names=tuple(names),
        estimates=est,
        cov=cov,
        loglik=-float(res.fun),
        converged=converged,
        n_iter=n_iter,
        n_obs=len(data),
        x=x,
        cov_x=cov_x,
        message=why or str(res.message),
        diagnostics={"hessian": hess, "fixed_theta": fix_theta, "boundary": boundary},
    )


def _full_loglik_arrays(theta, gamma, log_b01, b11, b12, t, delta, z, shape):
    """Vectorized ``full_loglik`` for the optimizer (exponential/Weibull baselines)."""
    lp1 = z @ b11
    lp2 = z @ b12
    log_rate1 = log_b01
    log_rate2 = log_b01 + gamma / theta / shape
    log_t = np.log(t)
    l1 = shape * (log_rate1 + log_t) + lp1
    l2 = shape * (log_rate2 + log_t) + lp2
    log_k = np.logaddexp(theta * l1, theta * l2)
    # log lambda_j = log(shape) + log rate_j + (shape - 1) log(rate_j t) + lp_j
    log_lam1 = np.log(shape) + log_rate1 + (shape - 1.0) * (log_rate1 + log_t) + lp1
    log_lam2 = np.log(shape) + log_rate2 + (shape - 1.0) * (log_rate2 + log_t) + lp2
    common = (1.0 / theta - 1.0) * log_k - np.exp(log_k / theta)
    lf = np.where(delta == 1, log_lam1 + (theta - 1.0) * l1, log_lam2 + (theta - 1.0) * l2) + common
    return float(np.sum(lf))


def fit_full_mle(data, *, shape=1.0, max_iter=4000, restart=True, x0=None,
                 xatol=1e-8, frtol=1e-10):
    """Full parametric MLE of ``(theta, gamma, beta01, beta11, beta12)``.

    Exponential (``shape=1``) or Weibull baselines with known shape; the
    risk-2 baseline follows from risk proportionality. Only uncensored data
    are accepted.
    """
    if np.any(data.delta == 0):
        raise DomainError("fit_full_mle requires uncensored data")
    _check_events(data)
    p = data.p
    t, delta, z = data.t, data.delta, data.z

    def unpack(x):
        return _theta_of(x[0]), x[1], x[2], x[3 : 3 + p], x[3 + p : 3 + 2 * p]

    def negll(x):
        val = _full_loglik_arrays(*unpack(x), t, delta, z, shape)
        if not np.isfinite(val):
            raise NonFiniteError("non-finite log-likelihood")
        return -val

    k = 3 + 2 * p
    start = np.zeros(k) if x0 is None else np.asarray(x0, dtype=float)
    res, converged, n_iter = _nelder_mead(_guarded(negll), start, max_iter, xatol, frtol, restart)
    x = res.x
    theta, gamma, log_b01, b11, b12 = unpack(x)

    def nat_ll(v):
        return _full_loglik_arrays(v[0], v[1], v[2], v[3 : 3 + p], v[3 + p :], t, delta, z, shape)

    nat = np.concatenate([[theta, gamma, log_b01], b11, b12])
    hess = numeric_hessian(nat_ll, nat)
    cov_nat, why = _covariance_from_loglik_hessian(hess)

    names = ["theta", "tau", "gamma", "varsigma", "beta01"] \
        + _coef_names("beta11", data.covariate_names) + _coef_names("beta12", data.covariate_names)
    est = np.concatenate(
        [[theta, 1.0 - 1.0 / theta, gamma, gamma / theta, np.exp(log_b01)], b11, b12]
    )
    jac = np.zeros((len(names), k))
    jac[0, 0] = 1.0
    jac[1, 0] = 1.0 / theta ** 2
    jac[3, 0] = -gamma / theta ** 2
    jac[2, 1] = 1.0
    jac[3, 1] = 1.0 / theta
    jac[4, 2] = np.exp(log_b01)
    for i in range(2 * p):
        jac[5 + i, 3 + i] = 1.0
    cov = None if cov_nat is None else jac @ cov_nat @ jac.T
    cov_x = None
    if cov_nat is not None:
        to_x = np.ones(k)
        to_x[0] = 1.0 / np.exp(x[0])
        cov_x = cov_nat * np.outer(to_x, to_x)
    return FitResult(
        model="full_mle",
        names=tuple(names),
        estimates=est,
        cov=cov,
        loglik=-float(res.fun),
        converged=converged,
        n_iter=n_iter,
        n_obs=len(data),
        x=x,
        cov_x=cov_x,
        message=why or str(res.message),
        diagnostics={"hessian": hess},
    )


def fit_cox(t, event, X, *, names=None, max_iter=100, tol=1e-10, model="cox"):
    """Newton-Raphson fit of a Breslow Cox model with step halving.

    Divergence of the coefficients (monotone likelihood, e.g. separation) is
    reported through ``converged=False`` rather than raised.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    event = np.asarray(event)
    if not np.any(event == 1):
        raise DomainError("Cox model needs at least one event")
    rs = RiskSets(t)
    k = X.shape[1]
    beta = np.zeros(k)
    ll, score, info = cox_score_information(beta, t, event, X, rs)
    converged = False
    n_iter = 0
    message = ""
    for n_iter in range(1, max_iter + 1):
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            message = "singular information matrix"
            break
        accepted = False
        for _ in range(30):
            cand = beta + step
            ll_new, score_new, info_new = cox_score_information(cand, t, event, X, rs)
            if np.isfinite(ll_new) and ll_new >= ll - 1e-12 * max(1.0, abs(ll)):
                accepted = True
                break
            step = step / 2.0
        if not accepted:
            message = "line search failed (possible separation)"
            break
        beta, ll, score, info = cand, ll_new, score_new, info_new
        # a vanishing score alone is not enough: under monotone likelihood
        # (separation) the score decays while Newton keeps taking unit steps
        if np.max(np.abs(step)) < max(tol, 1e-6 * (np.max(np.abs(score)) < tol)):
            converged = True
            break
        if np.max(np.abs(beta)) > 1e3:
            message = "coefficients diverging (possible separation)"
            break
    cov, why = _covariance_from_loglik_hessian(-info)
    if names is None:
        names = [f"x{i + 1}" for i in range(k)]
    return FitResult(
        model=model,
        names=tuple(names),
        estimates=beta,
        cov=cov,
        loglik=ll,
        converged=converged,
        n_iter=n_iter,
        n_obs=X.shape[0],
        x=beta.copy(),
        cov_x=cov,
        message=message or why,
        diagnostics={"score": score},
    )


def fit_cox_csh(data, j):
    """Cause-specific Cox model for risk ``j``; the other risk counts as censoring."""
    if j not in (1, 2):
        raise ValueError("risk index must be 1 or 2")
    _check_events(data, risks=(j,))
    names = _coef_names(f"alpha1{j}", data.covariate_names)
    return fit_cox(data.t, (data.delta == j).astype(int), data.z, names=names,
                   model=f"cox_csh_{j}")


def predicted_alphas(params, z_mean, z_sd):
    """Reduced-form log hazard ratios implied by averaging the local LHR."""
    return (
        structural.average_lhr(params, 1, z_mean, z_sd),
        structural.average_lhr(params, 2, z_mean, z_sd),
    )
