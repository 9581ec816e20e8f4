"""CSV writing: '#' comment header, comma separated, 17 significant digits."""

from __future__ import annotations

import csv
import io
import sys
from typing import Iterable, Sequence

import numpy as np

from . import __version__

__all__ = ["fmt", "write_csv", "driver_trace", "exponent_trace", "drift_trace"]


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % value
    return str(value)


def version_string() -> str:
    return f"superexp {__version__}"


def render_csv(comments: Sequence[str], header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(f"# {version_string()}\n")
    for line in comments:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, comments, header, rows) -> None:
    text = render_csv(comments, header, rows)
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def csv_body(text: str) -> str:
    """Everything except the '#' comment lines."""
    return "".join(line for line in text.splitlines(keepends=True) if not line.startswith("#"))


# ------------------------------------------------------------------ traces --


def driver_trace(driver):
    header = ["path_index", "i", "t_i"] + [f"W_{j + 1}" for j in range(driver.d)]
    w = driver.values
    times = driver.grid.times

    def rows():
        for k, p in enumerate(driver.path_indices):
            for i, t in enumerate(times):
                yield [p, i, t, *w[i, k]]

    return header, rows()


def exponent_trace(driver, exp, y_euler):
    header = ["path_index", "i", "t_i", "logZ", "A", "Y", "Y_euler"]
    times = driver.grid.times

    def rows():
        for k, p in enumerate(driver.path_indices):
            for i, t in enumerate(times):
                yield [p, i, t, exp.log_z[i, k], exp.area[i, k], exp.Y[i, k], y_euler[i, k]]

    return header, rows()


def drift_trace(driver, ds):
    d = driver.d
    header = (
        ["path_index", "i", "t_i"]
        + [f"Xp_{j + 1}" for j in range(d)]
        + [f"B_{j + 1}" for j in range(d)]
        + ["M", "exploded"]
    )
    times = driver.grid.times

    def rows():
        for k, p in enumerate(driver.path_indices):
            for i, t in enumerate(times):
                yield [p, i, t, *ds.x_prime[i, k], *ds.drift[i, k], ds.m[i, k], bool(ds.tau[k] <= i)]

    return header, rows()
