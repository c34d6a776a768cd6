"""CSV emission: fixed column order, '.' decimals, 17 significant digits."""

from __future__ import annotations

import csv
import io
import math
import sys

import numpy as np


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return "" if math.isnan(value) else "%.17g" % value
    return str(value)


def rows_to_csv(columns, rows) -> str:
    """``rows`` are mappings keyed by column name."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(path, columns, rows):
    text = rows_to_csv(columns, rows)
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


SCHEDULE_COLUMNS = ["t", "beta", "alpha", "alpha_bar", "eta", "sigma2"]


def schedule_rows(schedule, design):
    for i in range(schedule.T):
        yield {
            "t": i + 1,
            "beta": schedule.beta[i],
            "alpha": schedule.alpha[i],
            "alpha_bar": schedule.alpha_bar[i],
            "eta": design.eta[i],
            "sigma2": design.sigma2[i],
        }


def trajectory_rows(result):
    """Rows (trajectory_id, t, coord_0..coord_{d-1}) of a recorded reverse run."""
    traj = result.trajectory
    steps = result.trajectory_steps
    for j in range(traj.shape[1]):
        for i, t in enumerate(steps):
            row = {"trajectory_id": j, "t": int(t)}
            row.update({f"coord_{c}": traj[i, j, c] for c in range(traj.shape[2])})
            yield row


def trajectory_columns(d):
    return ["trajectory_id", "t"] + [f"coord_{c}" for c in range(d)]


def read_points_csv(path) -> np.ndarray:
    """One point per row; blank lines, '#' comments and a header row are skipped."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                if rows:
                    raise
    return np.array(rows, dtype=np.float64)
