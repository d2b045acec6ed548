"""``crcop`` command line: simulate, study, sweep and fit.

Settings come from an optional JSON config file; command-line flags
override it. Example config::

    {
      "seed": 7, "out": "results", "n_jobs": 4,
      "dgp": {"tau": 0.5, "gamma": 0.5, "beta11": 1, "beta12": 2, "z_sd": 2},
      "study": {"reps": 100, "sizes": [100, 200, 400], "taus": [0.1, 0.5, 0.9]},
      "sweep": {"variable": "sigma_z", "from": 0.2, "to": 14, "step": 0.2},
      "fit": {"input": "data.csv", "model": "structural"}
    }

Exit codes: 0 success, 2 bad arguments or config, 3 unreadable input data,
4 the fit failed or did not converge.
"""
import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .data import format_float, read_dataset, write_dataset
from .estimation.fitting import fit_cox_csh, fit_structural
from .estimation.study import (
    STUDY_PARAMETERS,
    alpha_sweep,
    coverage_study,
    sweep_grid,
    sweep_to_csv,
)
from .exceptions import CrcopError, DataFormatError
from .sampler import DgpConfig, replication_seed, sample_dataset
from .structural import StructuralParams

logger = logging.getLogger("crcop")

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_FIT = 4

DEFAULTS = {
    "seed": 0,
    "out": ".",
    "full": False,
    "n_jobs": 1,
    "dgp": {
        "theta": None, "tau": 0.5, "gamma": 0.5, "beta01": 1.0, "beta11": 1.0, "beta12": 2.0,
        "z_mean": 0.0, "z_sd": 2.0, "censoring_rate": None, "method": "frailty",
    },
    "simulate": {"n": 400, "file": "data.csv"},
    "study": {
        "reps": None, "sizes": [100, 200, 400], "taus": [0.1, 0.5, 0.9],
        "estimator": "structural", "level": 0.95,
    },
    "sweep": {
        "variable": "sigma_z", "from": None, "to": None, "step": 0.2,
        "reps_per_point": None, "n_per_rep": None,
    },
    "fit": {"input": None, "model": "structural"},
}

# (reduced, --full)
STUDY_REPS = (100, 500)
SWEEP_REPS = (100, 100)
SWEEP_N = 5000
SWEEP_RANGES = {"sigma_z": (0.2, 14.0), "beta12": (-4.0, 4.0), "gamma": (-4.0, 4.0)}


class ConfigError(CrcopError, ValueError):
    pass


def _merge(base, update, where="config"):
    out = dict(base)
    for key, val in update.items():
        if key not in base:
            raise ConfigError(f"unknown key {where}.{key}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{where}.{key} must be an object")
            out[key] = _merge(base[key], val, f"{where}.{key}")
        else:
            out[key] = val
    return out


def load_config(path=None):
    cfg = json.loads(json.dumps(DEFAULTS))
    if path is None:
        return cfg
    try:
        with open(path, encoding="utf-8") as fh:
            user = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(user, dict):
        raise ConfigError("config must be a JSON object")
    return _merge(cfg, user)


def _apply_flags(cfg, args):
    flag_map = {
        "seed": ("seed",), "out": ("out",), "n_jobs": ("n_jobs",),
        "n": ("simulate", "n"), "file": ("simulate", "file"),
        "reps": (args.command, "reps") if args.command == "study" else ("sweep", "reps_per_point"),
        "sizes": ("study", "sizes"), "taus": ("study", "taus"),
        "estimator": ("study", "estimator"),
        "variable": ("sweep", "variable"), "start": ("sweep", "from"),
        "stop": ("sweep", "to"), "step": ("sweep", "step"), "n_per_rep": ("sweep", "n_per_rep"),
        "input": ("fit", "input"), "model": ("fit", "model"),
        "tau": ("dgp", "tau"), "theta": ("dgp", "theta"),
    }
    for attr, path in flag_map.items():
        val = getattr(args, attr, None)
        if val is None:
            continue
        node = cfg
        for key in path[:-1]:
            node = node[key]
        node[path[-1]] = val
    if args.command in ("study", "sweep") and getattr(args, "full", False):
        cfg["full"] = True
    if args.tau is not None and args.theta is None:
        cfg["dgp"]["theta"] = None
    return cfg


def _check_seed(seed):
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        raise ConfigError(f"seed must be an integer in [0, 2^64), got {seed!r}")
    return seed


def _params(dgp, tau=None):
    common = dict(gamma=float(dgp["gamma"]), beta01=float(dgp["beta01"]),
                  beta11=dgp["beta11"], beta12=dgp["beta12"])
    if tau is not None:
        return StructuralParams.from_tau(float(tau), **common)
    if dgp["theta"] is not None:
        return StructuralParams(theta=float(dgp["theta"]), **common)
    return StructuralParams.from_tau(float(dgp["tau"]), **common)


def _dgp_config(dgp, params, n, seed):
    return DgpConfig(params, int(n), z_mean=float(dgp["z_mean"]), z_sd=float(dgp["z_sd"]),
                     censoring_rate=dgp["censoring_rate"], seed=seed, method=dgp["method"])


def _out_dir(cfg):
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    logger.info("wrote %s", path)


def cmd_simulate(cfg):
    seed = _check_seed(cfg["seed"])
    dgp = cfg["dgp"]
    data = sample_dataset(_dgp_config(dgp, _params(dgp), cfg["simulate"]["n"], seed))
    path = _out_dir(cfg) / cfg["simulate"]["file"]
    write_dataset(data, path)
    counts = data.event_counts()
    print(f"wrote {len(data)} rows to {path} (delta=1: {counts[1]}, delta=2: {counts[2]}, "
          f"censored: {counts[0]})")
    return 0


def _cell_name(tau, n):
    return f"study_tau{format_float(float(tau))}_n{int(n)}.csv"


def combined_table(reports, taus, sizes):
    """Text table per tau mirroring the usual SB/VAR/MSE/CP simulation layout."""
    blocks = []
    for tau in taus:
        reps = [reports[(tau, n)] for n in sizes]
        width = 10
        lines = [f"tau = {format_float(float(tau))}"]
        for pair in (STUDY_PARAMETERS[:2], STUDY_PARAMETERS[2:]):
            head = f"{'n':6}" + "".join(
                "".join(f"{n:>{width}}" for n in sizes) + " " * 4 for _ in pair
            )
            lines.append(head)
            lines.append(f"{'':6}" + "".join(
                f"{name:^{width * len(sizes)}}" + " " * 4 for name in pair
            ))
            for stat in ("sb", "var", "mse", "cp"):
                cells = []
                for name in pair:
                    for r in reps:
                        v = getattr(r.row(name), stat)
                        if not np.isfinite(v):
                            cells.append(f"{'NA':>{width}}")
                        elif stat == "cp":
                            cells.append(f"{v:>{width}.2f}")
                        else:
                            cells.append(f"{v:>{width}.1e}")
                    cells.append(" " * 4)
                lines.append(f"{stat.upper():6}" + "".join(cells))
        blocks.append("\n".join(line.rstrip() for line in lines))
    return "\n\n".join(blocks) + "\n"


def combined_csv(reports, taus, sizes):
    lines = ["tau,statistic,parameter," + ",".join(f"n{n}" for n in sizes)]
    for tau in taus:
        for stat in ("sb", "var", "mse", "cp"):
            for name in STUDY_PARAMETERS:
                vals = []
                for n in sizes:
                    v = getattr(reports[(tau, n)].row(name), stat)
                    vals.append(format_float(v) if np.isfinite(v) else "NA")
                lines.append(f"{format_float(float(tau))},{stat},{name}," + ",".join(vals))
    return "\n".join(lines) + "\n"


def cmd_study(cfg):
    seed = _check_seed(cfg["seed"])
    st = cfg["study"]
    reps = st["reps"] if st["reps"] is not None else STUDY_REPS[bool(cfg["full"])]
    if int(reps) < 1:
        raise ConfigError("study.reps must be >= 1")
    taus = [float(x) for x in st["taus"]]
    sizes = [int(x) for x in st["sizes"]]
    if not taus or not sizes:
        raise ConfigError("study.taus and study.sizes must be non-empty")
    out = _out_dir(cfg)
    reports = {}
    for tau in taus:
        params = _params(cfg["dgp"], tau)
        for n in sizes:
            # cell seeds depend on (tau, n) only, not on the rest of the grid
            cell_seed = replication_seed(seed, round(tau * 1e6), n)
            dcfg = _dgp_config(cfg["dgp"], params, n, cell_seed)
            logger.info("study cell tau=%s n=%d reps=%d", tau, n, reps)
            rep = coverage_study(dcfg, int(reps), st["estimator"], n_jobs=cfg["n_jobs"],
                                 level=float(st["level"]))
            reports[(tau, n)] = rep
            _write(out / _cell_name(tau, n), rep.to_csv())
            if rep.n_failed or rep.n_nonconverged:
                logger.warning("tau=%s n=%d: %d failed, %d not converged", tau, n,
                               rep.n_failed, rep.n_nonconverged)
    table = combined_table(reports, taus, sizes)
    _write(out / "study_table.txt", table)
    _write(out / "study_table.csv", combined_csv(reports, taus, sizes))
    sys.stdout.write(table)
    return 0


def cmd_sweep(cfg):
    seed = _check_seed(cfg["seed"])
    sw = cfg["sweep"]
    variable = sw["variable"]
    if variable not in SWEEP_RANGES:
        raise ConfigError(f"sweep.variable must be one of {sorted(SWEEP_RANGES)}")
    lo, hi = SWEEP_RANGES[variable]
    start = lo if sw["from"] is None else float(sw["from"])
    stop = hi if sw["to"] is None else float(sw["to"])
    try:
        grid = sweep_grid(start, stop, float(sw["step"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    reps = sw["reps_per_point"] if sw["reps_per_point"] is not None else SWEEP_REPS[bool(cfg["full"])]
    n = sw["n_per_rep"] if sw["n_per_rep"] is not None else SWEEP_N
    dgp = cfg["dgp"]
    points = alpha_sweep(_params(dgp), variable, grid, reps=int(reps), n=int(n),
                         z_mean=float(dgp["z_mean"]), z_sd=float(dgp["z_sd"]), seed=seed,
                         n_jobs=cfg["n_jobs"])
    text = sweep_to_csv(points, variable)
    _write(_out_dir(cfg) / f"sweep_{variable}.csv", text)
    sys.stdout.write(text)
    return 0


def _fmt(v, spec):
    width = spec.split(".")[0]
    return format("NA", ">" + width) if not np.isfinite(v) else format(v, spec)


def _fit_rows(res, ratio_names):
    rows = []
    for name, est, se, tstat, hr, lo, hi in res.table():
        if not any(name.startswith(p) for p in ratio_names):
            hr = np.nan
        rows.append((name, est, se, tstat, hr, lo, hi))
    return rows


def format_fit_table(rows, title):
    lines = [title, f"{'':16}{'coef':>10}{'s.e.':>10}{'t':>9}{'h.r.':>10}"
                    f"{'95% lower':>11}{'95% upper':>11}"]
    for name, est, se, tstat, hr, lo, hi in rows:
        lines.append(f"{name:16}{_fmt(est, '10.4f')}{_fmt(se, '10.4f')}{_fmt(tstat, '9.2f')}"
                     f"{_fmt(hr, '10.4f')}{_fmt(lo, '11.4f')}{_fmt(hi, '11.4f')}")
    return "\n".join(lines)


def cmd_fit(cfg):
    fc = cfg["fit"]
    if fc["input"] is None:
        raise ConfigError("fit needs an input CSV (--input or fit.input)")
    path = Path(fc["input"])
    if not path.is_file():
        raise ConfigError(f"input file {path} does not exist")
    data = read_dataset(path)
    model = fc["model"]
    if model == "structural":
        fits = [(fit_structural(data), ("beta",), "structural partial likelihood")]
    elif model == "cox-csh":
        fits = [(fit_cox_csh(data, j), ("alpha",), f"cause-specific Cox, risk {j}")
                for j in (1, 2)]
    else:
        raise ConfigError("fit.model must be 'structural' or 'cox-csh'")
    blocks = []
    csv_lines = ["model,parameter,coef,se,t,hr,lower,upper"]
    status = 0
    for res, ratio, title in fits:
        rows = _fit_rows(res, ratio)
        head = f"{title}: n={res.n_obs} loglik={res.loglik:.4f} converged={res.converged}"
        if res.message and (not res.converged or not np.all(np.isfinite(res.se))):
            head += f" ({res.message})"
        blocks.append(format_fit_table(rows, head))
        for row in rows:
            csv_lines.append(res.model + "," + row[0] + ","
                             + ",".join(format_float(v) if np.isfinite(v) else "NA"
                                        for v in row[1:]))
        if not res.converged:
            status = EXIT_FIT
        elif not np.all(np.isfinite(res.se)):
            logger.warning("%s: standard errors unavailable (%s)", title, res.message)
    text = "\n\n".join(blocks) + "\n"
    sys.stdout.write(text)
    if cfg["out"] != ".":
        out = _out_dir(cfg)
        _write(out / "fit.txt", text)
        _write(out / "fit.csv", "\n".join(csv_lines) + "\n")
    if status:
        print("error: optimizer did not converge", file=sys.stderr)
    return status


COMMANDS = {"simulate": cmd_simulate, "study": cmd_study, "sweep": cmd_sweep, "fit": cmd_fit}


def _csv_list(kind):
    def parse(text):
        try:
            return [kind(x) for x in text.split(",") if x.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc
    return parse


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="base seed (unsigned 64-bit)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--n-jobs", dest="n_jobs", type=int, help="parallel workers")
    common.add_argument("--tau", type=float, help="Kendall's tau of the DGP")
    common.add_argument("--theta", type=float, help="Gumbel theta of the DGP (overrides tau)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="crcop", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="write a simulated dataset")
    p.add_argument("--n", type=int, help="sample size")
    p.add_argument("--file", help="output file name inside --out")

    p = sub.add_parser("study", parents=[common], help="Monte Carlo coverage study")
    p.add_argument("--reps", type=int, help="replications per cell")
    p.add_argument("--sizes", type=_csv_list(int), help="comma-separated sample sizes")
    p.add_argument("--taus", type=_csv_list(float), help="comma-separated Kendall's tau values")
    p.add_argument("--estimator", choices=("structural", "full_mle"))
    p.add_argument("--full", action="store_true", help="500 replications per cell instead of 100")

    p = sub.add_parser("sweep", parents=[common], help="cause-specific Cox estimates over a grid")
    p.add_argument("--variable", choices=sorted(SWEEP_RANGES))
    p.add_argument("--from", dest="start", type=float)
    p.add_argument("--to", dest="stop", type=float)
    p.add_argument("--step", type=float)
    p.add_argument("--reps", type=int, help="replications per grid point")
    p.add_argument("--n", dest="n_per_rep", type=int, help="sample size per replication")
    p.add_argument("--full", action="store_true",
                   help="full-scale run (sweeps already default to 100 reps of n=5000)")

    p = sub.add_parser("fit", parents=[common], help="fit a model to a CSV dataset")
    p.add_argument("input", nargs="?", help="dataset CSV (t,delta,z1,...)")
    p.add_argument("--model", choices=("structural", "cox-csh"))
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = _apply_flags(load_config(args.config), args)
        return COMMANDS[args.command](cfg)
    except DataFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CrcopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FIT if args.command == "fit" else EXIT_USAGE
    except (ValueError, TypeError) as exc:
        # bad values in the config surface here, e.g. from the parameter classes
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
