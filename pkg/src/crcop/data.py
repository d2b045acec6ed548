"""Observed competing-risks data and its CSV representation.

The CSV layout is a header ``t,delta,z1[,z2,...]`` followed by one row per
subject; ``delta`` is 1 or 2 for the observed failure type and 0 for a
censored record.
"""
import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import DataFormatError

__all__ = ["Dataset", "read_dataset", "write_dataset", "format_float"]


@dataclass(frozen=True)
class Dataset:
    t: np.ndarray
    delta: np.ndarray
    z: np.ndarray
    covariate_names: tuple = field(default=None)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float).reshape(-1)
        delta = np.asarray(self.delta).reshape(-1)
        z = np.asarray(self.z, dtype=float)
        if z.ndim == 1:
            z = z.reshape(-1, 1)
        if z.ndim != 2:
            raise ValueError("z must be a vector or an (n, p) matrix")
        n = t.shape[0]
        if delta.shape[0] != n or z.shape[0] != n:
            raise ValueError(
                f"length mismatch: t={n}, delta={delta.shape[0]}, z={z.shape[0]}"
            )
        if n and np.any(~(t > 0) | ~np.isfinite(t)):
            raise ValueError("event times must be finite and > 0")
        if not np.all(np.isin(delta, (0, 1, 2))):
            raise ValueError("delta must take values in {0, 1, 2}")
        if not np.all(np.isfinite(z)):
            raise ValueError("covariates must be finite")
        names = self.covariate_names
        if names is None:
            names = tuple(f"z{k + 1}" for k in range(z.shape[1]))
        names = tuple(names)
        if len(names) != z.shape[1]:
            raise ValueError("covariate_names does not match the covariate dimension")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "delta", delta.astype(np.int64))
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "covariate_names", names)

    def __len__(self):
        return self.t.shape[0]

    @property
    def n(self):
        return len(self)

    @property
    def p(self):
        return self.z.shape[1]

    def event_counts(self):
        return {k: int(np.sum(self.delta == k)) for k in (0, 1, 2)}

    def subset(self, index):
        return Dataset(self.t[index], self.delta[index], self.z[index], self.covariate_names)

    def equals(self, other):
        return (
            self.covariate_names == other.covariate_names
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.delta, other.delta)
            and np.array_equal(self.z, other.z)
        )


def format_float(x):
    """Shortest repr that round-trips, so written files re-read bit-identically."""
    return repr(float(x))


def write_dataset(data, path_or_buf):
    lines = [",".join(("t", "delta") + data.covariate_names)]
    for ti, di, zi in zip(data.t, data.delta, data.z):
        lines.append(",".join([format_float(ti), str(int(di))] + [format_float(v) for v in zi]))
    text = "\n".join(lines) + "\n"
    if isinstance(path_or_buf, (str, Path)):
        with open(path_or_buf, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        path_or_buf.write(text)


def read_dataset(path_or_buf):
    """Parse a dataset CSV; any malformed content raises :class:`DataFormatError`."""
    if isinstance(path_or_buf, (str, Path)):
        with open(path_or_buf, encoding="utf-8", newline="") as fh:
            text = fh.read()
    else:
        text = path_or_buf.read()
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataFormatError("empty file, expected header 't,delta,z1,...'", line=1)
    header = [h.strip() for h in header]
    if len(header) < 3 or header[0] != "t" or header[1] != "delta":
        raise DataFormatError(f"bad header {','.join(header)!r}; expected 't,delta,z1,...'", line=1)
    names = tuple(header[2:])
    if len(set(names)) != len(names) or any(not nm for nm in names):
        raise DataFormatError("covariate names must be unique and non-empty", line=1)

    t, delta, z = [], [], []
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataFormatError(f"expected {len(header)} fields, found {len(row)}", line=line)
        try:
            ti = float(row[0])
            zi = [float(c) for c in row[2:]]
        except ValueError as exc:
            raise DataFormatError(f"non-numeric field ({exc})", line=line) from None
        d = row[1].strip()
        if d not in ("0", "1", "2"):
            raise DataFormatError(f"delta must be 0, 1 or 2, found {d!r}", line=line)
        if not (np.isfinite(ti) and ti > 0):
            raise DataFormatError(f"t must be finite and > 0, found {row[0]!r}", line=line)
        if not all(np.isfinite(zi)):
            raise DataFormatError("covariates must be finite", line=line)
        t.append(ti)
        delta.append(int(d))
        z.append(zi)
    if not t:
        raise DataFormatError("no data rows", line=reader.line_num or 1)
    return Dataset(np.array(t), np.array(delta), np.array(z, dtype=float), names)
