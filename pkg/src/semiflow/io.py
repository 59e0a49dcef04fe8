"""CSV and key-value report writers.

Floats are written with ``repr``-level precision (``.17g``) so that two
runs with the same inputs produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if v is None:
        return ""
    return str(v)


def csv_text(header: Iterable[str], rows: Iterable[Iterable]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(header))
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header: Iterable[str], rows: Iterable[Iterable]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(header, rows))
    return path


def _number(v: str) -> float:
    if v in ("true", "false"):
        return float(v == "true")
    try:
        return float(v)
    except ValueError:
        return float("nan")


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Header and numeric body; ``true``/``false`` map to 1/0, other text to nan."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if not body:
        return header, np.empty((0, len(header)))
    return header, np.array([[_number(v) for v in r] for r in body])


def trajectory_rows(times, states):
    states = np.asarray(states, dtype=float)
    return [[t, *s] for t, s in zip(times, states.reshape(len(times), -1))]


def trajectory_header(dim: int) -> list[str]:
    return ["t"] + [f"c{i}" for i in range(dim)]


def write_trajectory(path, times, states) -> Path:
    states = np.asarray(states, dtype=float)
    return write_csv(path, trajectory_header(states.reshape(len(times), -1).shape[1]), trajectory_rows(times, states))


def report_text(entries: Mapping[str, object]) -> str:
    return "".join(f"{k}: {fmt(v)}\n" for k, v in entries.items())


def write_report(path, entries: Mapping[str, object]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report_text(entries))
    return path
