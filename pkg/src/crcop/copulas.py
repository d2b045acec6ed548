"""Bivariate copulas used by the structural competing-risks model.

Four families are supported: Gumbel, Clayton (restricted to ``theta >= 0``,
``theta == 0`` meaning independence), independence and the Frechet-Hoeffding
upper bound ``min(u, v)``. All functions are vectorized over ``u`` and ``v``.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .exceptions import ConvergenceError, DomainError, ParameterError

__all__ = [
    "Family",
    "CopulaSpec",
    "copula_cdf",
    "copula_partial",
    "conditional_cdf",
    "conditional_quantile",
    "kendall_tau",
    "gumbel_theta_from_tau",
]


class Family(str, Enum):
    GUMBEL = "gumbel"
    CLAYTON = "clayton"
    INDEPENDENCE = "independence"
    FRECHET_UPPER = "frechet_upper"


@dataclass(frozen=True)
class CopulaSpec:
    """Copula family plus its dependence parameter.

    ``theta`` is ignored for the independence and upper-bound families.
    """

    family: Family
    theta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        theta = float(self.theta)
        object.__setattr__(self, "theta", theta)
        if self.family is Family.GUMBEL and not theta >= 1.0:
            raise ParameterError(f"Gumbel theta must be >= 1, got {theta}")
        if self.family is Family.CLAYTON and not theta >= 0.0:
            raise ParameterError(f"Clayton theta must be >= 0, got {theta}")

    @classmethod
    def gumbel(cls, theta):
        return cls(Family.GUMBEL, theta)

    @classmethod
    def clayton(cls, theta):
        return cls(Family.CLAYTON, theta)

    @classmethod
    def independence(cls):
        return cls(Family.INDEPENDENCE)

    @classmethod
    def frechet_upper(cls):
        return cls(Family.FRECHET_UPPER)

    @property
    def is_independent(self):
        return (
            self.family is Family.INDEPENDENCE
            or (self.family is Family.GUMBEL and self.theta == 1.0)
            or (self.family is Family.CLAYTON and self.theta == 0.0)
        )


def _closed_unit(x, name):
    x = np.asarray(x, dtype=float)
    if np.any(~(x >= 0.0) | ~(x <= 1.0)):
        raise DomainError(f"{name} must lie in [0, 1]")
    return x


def _open_unit(x, name):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0.0) | ~(x < 1.0)):
        raise DomainError(f"{name} must lie in the open interval (0, 1)")
    return x


def _scalar_or_array(x):
    return x.item() if np.ndim(x) == 0 else x


def copula_cdf(spec, u, v):
    """Evaluate ``C(u, v)``."""
    u = _closed_unit(u, "u")
    v = _closed_unit(v, "v")
    fam = spec.family
    if spec.is_independent:
        out = u * v
    elif fam is Family.FRECHET_UPPER:
        out = np.minimum(u, v)
    elif fam is Family.GUMBEL:
        with np.errstate(divide="ignore"):
            x = -np.log(u)
            y = -np.log(v)
        # (x^th + y^th)^(1/th) via logs keeps large theta finite
        th = spec.theta
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.exp(np.logaddexp(th * np.log(x), th * np.log(y)) / th)
        s = np.where((x == 0) | (y == 0), x + y, s)
        out = np.exp(-s)
    else:
        th = spec.theta
        with np.errstate(divide="ignore", over="ignore"):
            base = u ** -th + v ** -th - 1.0
            out = np.where((u == 0) | (v == 0), 0.0, base ** (-1.0 / th))
    return _scalar_or_array(np.asarray(out, dtype=float))


def copula_partial(spec, u, v, arg=1):
    """Partial derivative of ``C`` in its first (``arg=1``) or second argument.

    Defined on the open unit square; the boundary raises :class:`DomainError`.
    """
    if arg not in (1, 2):
        raise ValueError("arg must be 1 or 2")
    u = _open_unit(u, "u")
    v = _open_unit(v, "v")
    if arg == 2:
        u, v = v, u
    fam = spec.family
    if spec.is_independent:
        out = v * np.ones_like(u)
    elif fam is Family.FRECHET_UPPER:
        out = np.where(u < v, 1.0, 0.0)
    elif fam is Family.GUMBEL:
        th = spec.theta
        lx = np.log(-np.log(u))
        ly = np.log(-np.log(v))
        log_k = np.logaddexp(th * lx, th * ly)
        s = np.exp(log_k / th)
        log_out = -s + (1.0 / th - 1.0) * log_k + (th - 1.0) * lx - np.log(u)
        out = np.exp(log_out)
    else:
        th = spec.theta
        base = u ** -th + v ** -th - 1.0
        out = u ** (-th - 1.0) * base ** (-1.0 / th - 1.0)
    return _scalar_or_array(np.asarray(out, dtype=float))


def conditional_cdf(spec, u, v):
    """``P(V <= v | U = u)``, i.e. ``dC/du`` viewed as a function of ``v``.

    Accepts ``v`` in the closed interval; the endpoints map to 0 and 1.
    """
    u = _open_unit(u, "u")
    v = _closed_unit(v, "v")
    interior = (v > 0) & (v < 1)
    vv = np.where(interior, v, 0.5)
    out = np.asarray(copula_partial(spec, u, vv, arg=1), dtype=float)
    out = np.where(interior, out, np.where(v >= 1, 1.0, 0.0))
    return _scalar_or_array(out)


def conditional_quantile(spec, u, p, *, tol=1e-10, max_iter=200):
    """Solve ``conditional_cdf(spec, u, v) = p`` for ``v``.

    Closed forms are used for independence, Clayton and the upper bound. The
    Gumbel family is solved by vectorized bisection on ``[0, 1]``, run until the
    bracket is narrower than ``tol`` times a safety factor of 100 (so the
    bracketing width ends well below the requested absolute tolerance).
    """
    u = _open_unit(u, "u")
    p = _open_unit(p, "p")
    u, p = np.broadcast_arrays(u, p)
    fam = spec.family
    if spec.is_independent:
        return _scalar_or_array(p.astype(float).copy())
    if fam is Family.FRECHET_UPPER:
        return _scalar_or_array(u.astype(float).copy())
    if fam is Family.CLAYTON:
        th = spec.theta
        v = ((p ** (-th / (1.0 + th)) - 1.0) * u ** -th + 1.0) ** (-1.0 / th)
        return _scalar_or_array(v)

    lo = np.zeros(u.shape)
    hi = np.ones(u.shape)
    width_tol = tol * 1e-2
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        below = np.asarray(conditional_cdf(spec, u, mid)) < p
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= width_tol):
            break
    else:
        raise ConvergenceError(
            f"bisection did not converge: max bracket width {np.max(hi - lo):.3g}"
        )
    return _scalar_or_array(0.5 * (lo + hi))


def kendall_tau(spec):
    fam = spec.family
    if fam is Family.INDEPENDENCE:
        return 0.0
    if fam is Family.FRECHET_UPPER:
        return 1.0
    if fam is Family.GUMBEL:
        return 1.0 - 1.0 / spec.theta
    return spec.theta / (spec.theta + 2.0)


def gumbel_theta_from_tau(tau):
    if not 0.0 <= tau < 1.0:
        raise ParameterError(f"Gumbel Kendall's tau must lie in [0, 1), got {tau}")
    return 1.0 / (1.0 - tau)
