"""Proportional-hazards marginals with exponential or Weibull baselines.

The baseline cumulative hazard is ``(rate * t) ** shape``; ``shape == 1`` is the
exponential case. Covariates enter through ``exp(z . coef)``.
"""
from dataclasses import dataclass, field

import numpy as np

from ._linpred import linear_predictor
from .exceptions import DomainError, ParameterError

__all__ = [
    "MarginalHazardSpec",
    "baseline_hazard",
    "baseline_cumulative_hazard",
    "covariate_function",
    "hazard",
    "cumulative_hazard",
    "log_cumulative_hazard",
    "survival",
    "inverse_survival",
    "inverse_cumulative_hazard",
]

BASELINES = ("exponential", "weibull")


@dataclass(frozen=True)
class MarginalHazardSpec:
    baseline: str = "exponential"
    rate: float = 1.0
    shape: float = 1.0
    coef: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        if self.baseline not in BASELINES:
            raise ParameterError(f"unknown baseline {self.baseline!r}")
        if not self.rate > 0:
            raise ParameterError(f"rate must be > 0, got {self.rate}")
        if not self.shape > 0:
            raise ParameterError(f"shape must be > 0, got {self.shape}")
        if self.baseline == "exponential" and self.shape != 1.0:
            raise ParameterError("exponential baseline has shape 1")
        coef = np.atleast_1d(np.asarray(self.coef, dtype=float))
        if not np.all(np.isfinite(coef)):
            raise ParameterError("coefficients must be finite")
        object.__setattr__(self, "coef", coef)
        object.__setattr__(self, "rate", float(self.rate))
        object.__setattr__(self, "shape", float(self.shape))

    @classmethod
    def exponential(cls, rate, coef):
        return cls("exponential", rate, 1.0, coef)

    @classmethod
    def weibull(cls, rate, shape, coef):
        return cls("weibull", rate, shape, coef)


def _positive_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise DomainError("t must be > 0")
    return t


def _out(x):
    x = np.asarray(x, dtype=float)
    return x.item() if x.ndim == 0 else x


def baseline_hazard(spec, t):
    t = _positive_time(t)
    k = spec.shape
    return _out(k * spec.rate * (spec.rate * t) ** (k - 1.0))


def baseline_cumulative_hazard(spec, t):
    t = _positive_time(t)
    return _out((spec.rate * t) ** spec.shape)


def covariate_function(spec, z):
    return _out(np.exp(linear_predictor(z, spec.coef)))


def hazard(spec, t, z):
    t = _positive_time(t)
    lp = linear_predictor(z, spec.coef)
    k = spec.shape
    return _out(k * spec.rate * (spec.rate * t) ** (k - 1.0) * np.exp(lp))


def log_cumulative_hazard(spec, t, z):
    """``log Lambda(t | z)``, finite even when the hazard itself would overflow."""
    t = _positive_time(t)
    return _out(spec.shape * np.log(spec.rate * t) + linear_predictor(z, spec.coef))


def cumulative_hazard(spec, t, z):
    return _out(np.exp(log_cumulative_hazard(spec, t, z)))


def survival(spec, t, z):
    return _out(np.exp(-np.asarray(cumulative_hazard(spec, t, z))))


def inverse_cumulative_hazard(spec, h, z):
    """Time at which the cumulative hazard reaches ``h > 0``."""
    h = np.asarray(h, dtype=float)
    if np.any(~(h > 0)):
        raise DomainError("cumulative hazard must be > 0")
    lp = linear_predictor(z, spec.coef)
    return _out(np.exp((np.log(h) - lp) / spec.shape) / spec.rate)


def inverse_survival(spec, s, z):
    s = np.asarray(s, dtype=float)
    if np.any(~(s > 0) | ~(s < 1)):
        raise DomainError("s must lie in (0, 1)")
    return inverse_cumulative_hazard(spec, -np.log(s), z)
