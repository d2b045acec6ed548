"""Simulation of competing-risks data from the structural model.

Gumbel pairs are drawn with the positive-stable frailty construction: if
``V`` is positive stable with Laplace transform ``exp(-s^(1/theta))`` and
``E_1, E_2`` are unit exponentials, then ``(E_j / V)^(1/theta)`` are the
latent cumulative hazards ``Lambda_j(T_j|z)``. Working with cumulative
hazards instead of survival probabilities keeps the extreme tails exact.
A second, slower path inverts the conditional copula distribution and is
kept for cross-validating the first.
"""
import logging
from dataclasses import dataclass, replace

import numpy as np

from . import hazards
from .copulas import CopulaSpec, conditional_quantile
from .data import Dataset
from .exceptions import ParameterError
from .structural import StructuralParams

__all__ = [
    "DgpConfig",
    "positive_stable",
    "sample_gumbel_uniforms",
    "sample_latent_pair",
    "sample_dataset",
    "replication_seed",
]

logger = logging.getLogger(__name__)

METHODS = ("frailty", "conditional")


@dataclass(frozen=True)
class DgpConfig:
    params: StructuralParams
    n: int
    z_mean: float = 0.0
    z_sd: float = 2.0
    censoring_rate: float = None
    seed: int = 0
    method: str = "frailty"

    def __post_init__(self):
        if int(self.n) < 1:
            raise ParameterError("n must be >= 1")
        if not self.z_sd > 0:
            raise ParameterError("z_sd must be > 0")
        if self.censoring_rate is not None and not (
            self.censoring_rate > 0 and np.isfinite(self.censoring_rate)
        ):
            raise ParameterError("censoring_rate must be finite and > 0")
        if self.method not in METHODS:
            raise ParameterError(f"method must be one of {METHODS}")
        object.__setattr__(self, "n", int(self.n))

    def with_seed(self, seed):
        return replace(self, seed=int(seed))


def replication_seed(base_seed, *keys):
    """64-bit seed for replication ``keys`` that does not depend on run order."""
    state = np.random.SeedSequence(int(base_seed), spawn_key=tuple(int(k) for k in keys))
    lo, hi = state.generate_state(2, dtype=np.uint32)
    return int(hi) << 32 | int(lo)


def positive_stable(alpha, size, rng):
    """Draws with Laplace transform ``exp(-s^alpha)``, ``0 < alpha <= 1``.

    Chambers-Mallows-Stuck (Kanter) representation.
    """
    if not 0 < alpha <= 1:
        raise ParameterError("alpha must lie in (0, 1]")
    if alpha == 1.0:
        return np.ones(size)
    w = rng.uniform(0.0, np.pi, size)
    e = rng.exponential(size=size)
    return (
        np.sin(alpha * w) / np.sin(w) ** (1.0 / alpha)
        * (np.sin((1.0 - alpha) * w) / e) ** ((1.0 - alpha) / alpha)
    )


def _gumbel_cumhaz_frailty(theta, size, rng):
    v = positive_stable(1.0 / theta, size, rng)
    e = rng.exponential(size=(2, size))
    return (e / v) ** (1.0 / theta)


def _gumbel_cumhaz_conditional(theta, size, rng):
    u = rng.uniform(size=(2, size))
    # guard the open interval required by the quantile solver
    u = np.clip(u, 1e-300, 1.0 - 1e-16)
    v = conditional_quantile(CopulaSpec.gumbel(theta), u[0], u[1])
    v = np.clip(np.atleast_1d(v), 1e-300, 1.0 - 1e-16)
    return np.stack([-np.log(u[0]), -np.log(v)])


def sample_gumbel_uniforms(theta, size, rng, method="frailty"):
    """``(2, size)`` array of Gumbel-copula uniforms."""
    if method == "frailty":
        return np.exp(-_gumbel_cumhaz_frailty(theta, size, rng))
    return np.exp(-_gumbel_cumhaz_conditional(theta, size, rng))


def _latent_times(params, z, rng, method):
    size = np.shape(z)[0]
    draw = _gumbel_cumhaz_frailty if method == "frailty" else _gumbel_cumhaz_conditional
    cumhaz = draw(params.theta, size, rng)
    m1, m2 = params.marginals()
    t1 = np.asarray(hazards.inverse_cumulative_hazard(m1, cumhaz[0], z), dtype=float)
    t2 = np.asarray(hazards.inverse_cumulative_hazard(m2, cumhaz[1], z), dtype=float)
    return np.atleast_1d(t1), np.atleast_1d(t2)


def sample_latent_pair(params, z, rng, method="frailty"):
    """Latent ``(T1, T2)`` for each covariate row in ``z``.

    ``z`` is a scalar, a vector of scalar covariates, or an ``(n, p)`` matrix.
    Returns two arrays (or two floats for a single scalar ``z``).
    """
    scalar = np.ndim(z) == 0
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if params.p > 1 and z.ndim == 1:
        z = z.reshape(1, -1)
    t1, t2 = _latent_times(params, z, rng, method)
    if scalar:
        return float(t1[0]), float(t2[0])
    return t1, t2


def sample_dataset(cfg):
    """Draw ``cfg.n`` observations ``(T, delta, Z)``; deterministic in ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    p = cfg.params
    n = cfg.n
    z = rng.normal(cfg.z_mean, cfg.z_sd, size=(n, p.p))
    zz = z[:, 0] if p.p == 1 else z
    t1, t2 = _latent_times(p, zz, rng, cfg.method)

    ties = t1 == t2
    redraws = 0
    while np.any(ties):
        idx = np.flatnonzero(ties)
        redraws += idx.size
        a, b = _latent_times(p, zz[idx], rng, cfg.method)
        t1[idx], t2[idx] = a, b
        ties = t1 == t2
    if redraws:
        logger.warning("re-drew %d latent pairs with T1 == T2", redraws)

    t = np.minimum(t1, t2)
    delta = np.where(t1 < t2, 1, 2)
    if cfg.censoring_rate is not None:
        c = rng.exponential(scale=1.0 / cfg.censoring_rate, size=n)
        censored = c < t
        t = np.where(censored, c, t)
        delta = np.where(censored, 0, delta)
    # cumulative hazards are > 0 almost surely; guard against underflow to 0
    t = np.maximum(t, np.finfo(float).tiny)
    return Dataset(t, delta, z)
