"""Monte Carlo harnesses: estimator coverage studies and reduced-form sweeps.

Replication ``r`` of a study seeded with ``s`` draws its data from
``replication_seed(s, r)``, so results do not depend on scheduling and runs
are bit-identical for a given configuration.
"""
import io
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from joblib import Parallel, delayed

from .. import structural
from ..data import format_float
from ..exceptions import CrcopError
from ..sampler import DgpConfig, replication_seed, sample_dataset
from .fitting import fit_cox_csh, fit_full_mle, fit_structural

__all__ = [
    "STUDY_PARAMETERS",
    "ParameterSummary",
    "StudyReport",
    "coverage_study",
    "summarize",
    "SweepPoint",
    "alpha_sweep",
    "sweep_grid",
]

logger = logging.getLogger(__name__)

STUDY_PARAMETERS = ("tau", "gamma", "beta11", "beta12")
ESTIMATORS = {"structural": fit_structural, "full_mle": fit_full_mle}
REPORT_COLUMNS = ("parameter", "truth", "sb", "var", "mse", "cp", "n_converged")


@dataclass(frozen=True)
class ParameterSummary:
    parameter: str
    truth: float
    sb: float
    var: float
    mse: float
    cp: float
    n_converged: int


@dataclass
class StudyReport:
    estimator: str
    n: int
    reps: int
    truth: dict
    rows: list
    n_failed: int
    n_nonconverged: int
    estimates: np.ndarray = field(repr=False, default=None)
    covered: np.ndarray = field(repr=False, default=None)

    def row(self, parameter):
        for r in self.rows:
            if r.parameter == parameter:
                return r
        raise KeyError(parameter)

    def to_csv(self, path_or_buf=None):
        lines = [",".join(REPORT_COLUMNS)]
        for r in self.rows:
            vals = [r.parameter, format_float(r.truth)]
            vals += [_fmt_na(v) for v in (r.sb, r.var, r.mse, r.cp)]
            vals.append(str(r.n_converged))
            lines.append(",".join(vals))
        text = "\n".join(lines) + "\n"
        if path_or_buf is None:
            return text
        if isinstance(path_or_buf, io.TextIOBase):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        return text

    def to_text(self):
        out = [
            f"estimator={self.estimator} n={self.n} reps={self.reps} "
            f"failed={self.n_failed} nonconverged={self.n_nonconverged}",
            f"{'':6}" + "".join(f"{r.parameter:>12}" for r in self.rows),
        ]
        for stat in ("sb", "var", "mse", "cp"):
            cells = []
            for r in self.rows:
                v = getattr(r, stat)
                cells.append(f"{'NA':>12}" if not np.isfinite(v)
                             else f"{v:>12.2f}" if stat == "cp" else f"{v:>12.1e}")
            out.append(f"{stat.upper():6}" + "".join(cells))
        return "\n".join(out)


def _fmt_na(v):
    return "NA" if not np.isfinite(v) else format_float(v)


def summarize(estimates, covered, truth, names=STUDY_PARAMETERS):
    """Squared bias, variance, MSE and coverage per parameter.

    ``estimates`` and ``covered`` hold one row per usable replication; the
    variance uses the ``1/R`` normalization so that ``SB + VAR = MSE``.
    With a single replication VAR is undefined (NaN).
    """
    estimates = np.asarray(estimates, dtype=float).reshape(-1, len(names))
    covered = np.asarray(covered, dtype=bool).reshape(-1, len(names))
    rows = []
    count = estimates.shape[0]
    for k, name in enumerate(names):
        x = estimates[:, k]
        tr = float(truth[name])
        if count >= 1:
            mean = x.mean()
            sb = (mean - tr) ** 2
            mse = np.mean((x - tr) ** 2)
            # a single replication says nothing about the spread
            var = np.mean((x - mean) ** 2) if count >= 2 else np.nan
        else:
            sb = var = mse = np.nan
        cp = covered[:, k].mean() if count >= 1 else np.nan
        rows.append(ParameterSummary(name, tr, float(sb), float(var), float(mse), float(cp), count))
    return rows


def _truth(params):
    return {"tau": params.tau, "gamma": params.gamma,
            "beta11": float(params.beta11[0]), "beta12": float(params.beta12[0])}


def _one_replication(cfg, rep, estimator, level):
    data = sample_dataset(cfg.with_seed(replication_seed(cfg.seed, rep)))
    try:
        fit = ESTIMATORS[estimator](data)
    except CrcopError as exc:
        return None, None, False, str(exc)
    truth = _truth(cfg.params)
    est = np.array([fit[name] for name in STUDY_PARAMETERS])
    cover = []
    for name in STUDY_PARAMETERS:
        lo, hi = fit.conf_int(name, level)
        # a missing covariance leaves NaN limits, counted as not covering
        cover.append(bool(lo <= truth[name] <= hi))
    return est, np.array(cover), fit.converged, ""


def coverage_study(cfg, reps, estimator="structural", *, n_jobs=1, level=0.95):
    """Repeat ``sample -> fit`` ``reps`` times and summarize the estimates.

    Replications whose fit raised or did not converge are excluded from the
    summary and counted in ``n_failed`` / ``n_nonconverged``.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if estimator not in ESTIMATORS:
        raise ValueError(f"estimator must be one of {sorted(ESTIMATORS)}")
    if cfg.params.p != 1:
        raise ValueError("coverage studies use a single covariate")
    results = Parallel(n_jobs=n_jobs)(
        delayed(_one_replication)(cfg, r, estimator, level) for r in range(reps)
    )
    est_rows, cov_rows = [], []
    n_failed = n_nonconv = 0
    all_est = np.full((reps, len(STUDY_PARAMETERS)), np.nan)
    for r, (est, cover, converged, msg) in enumerate(results):
        if est is None:
            n_failed += 1
            logger.info("replication %d failed: %s", r, msg)
            continue
        all_est[r] = est
        if not converged:
            n_nonconv += 1
            continue
        est_rows.append(est)
        cov_rows.append(cover)
    truth = _truth(cfg.params)
    rows = summarize(np.array(est_rows), np.array(cov_rows), truth)
    covered = np.array(cov_rows) if cov_rows else np.empty((0, len(STUDY_PARAMETERS)), bool)
    return StudyReport(estimator, cfg.n, reps, truth, rows, n_failed, n_nonconv, all_est, covered)


SWEEP_VARIABLES = ("sigma_z", "beta12", "gamma")


@dataclass(frozen=True)
class SweepPoint:
    value: float
    alpha1_mean: float
    alpha1_p5: float
    alpha1_p95: float
    alpha1_se: float
    alpha2_mean: float
    alpha2_p5: float
    alpha2_p95: float
    alpha2_se: float
    alpha1_pred: float
    alpha2_pred: float
    n_ok: int


def sweep_grid(start, stop, step):
    """Inclusive grid ``start, start+step, ..., stop`` free of float drift."""
    if not step > 0 or not start < stop:
        raise ValueError("sweep grid needs step > 0 and start < stop")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(count), 10)


def _sweep_cfg(params, variable, value, n, z_mean, z_sd):
    if variable == "sigma_z":
        return DgpConfig(params, n, z_mean=z_mean, z_sd=value)
    if variable == "beta12":
        return DgpConfig(params.replace(beta12=value), n, z_mean=z_mean, z_sd=z_sd)
    if variable == "gamma":
        return DgpConfig(params.replace(gamma=value), n, z_mean=z_mean, z_sd=z_sd)
    raise ValueError(f"sweep variable must be one of {SWEEP_VARIABLES}")


def _sweep_point(cfg, seed, point, reps):
    a = np.full((reps, 2), np.nan)
    for r in range(reps):
        data = sample_dataset(cfg.with_seed(replication_seed(seed, point, r)))
        for j in (1, 2):
            try:
                fit = fit_cox_csh(data, j)
            except CrcopError:
                continue
            if fit.converged:
                a[r, j - 1] = fit.estimates[0]
    return a


def alpha_sweep(params, variable, values, *, reps=100, n=5000, z_mean=0.0, z_sd=2.0,
                seed=0, n_jobs=1):
    """Cause-specific Cox estimates as one structural input varies.

    For each grid value, ``reps`` datasets of size ``n`` are simulated and
    both risks' cause-specific Cox coefficients are fitted. Each point also
    reports the average local log hazard ratio for comparison.
    """
    if variable not in SWEEP_VARIABLES:
        raise ValueError(f"sweep variable must be one of {SWEEP_VARIABLES}")
    cfgs = [_sweep_cfg(params, variable, float(v), n, z_mean, z_sd) for v in values]
    draws = Parallel(n_jobs=n_jobs)(
        delayed(_sweep_point)(cfg, seed, i, reps) for i, cfg in enumerate(cfgs)
    )
    points = []
    for v, cfg, a in zip(values, cfgs, draws):
        ok = np.all(np.isfinite(a), axis=1)
        good = a[ok]
        stats = []
        for j in range(2):
            col = good[:, j]
            if col.size:
                se = col.std(ddof=1) / np.sqrt(col.size) if col.size > 1 else np.nan
                stats += [col.mean(), *np.percentile(col, [5, 95]), se]
            else:
                stats += [np.nan] * 4
        pred1 = structural.average_lhr(cfg.params, 1, cfg.z_mean, cfg.z_sd)
        pred2 = structural.average_lhr(cfg.params, 2, cfg.z_mean, cfg.z_sd)
        points.append(SweepPoint(float(v), *map(float, stats), pred1, pred2, int(ok.sum())))
    return points


def sweep_to_csv(points, variable):
    cols = [variable] + [f for f in SweepPoint.__dataclass_fields__ if f != "value"]
    lines = [",".join(cols)]
    for pt in points:
        vals = [format_float(pt.value)]
        for f in cols[1:]:
            v = getattr(pt, f)
            vals.append(str(v) if isinstance(v, int) else _fmt_na(v))
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"
