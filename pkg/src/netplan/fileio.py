"""Scenario/moment CSV files, solution JSON and atomic writes."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .ambiguity import MomentInfo


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return "nan"
    out = f"{v:.6f}"
    return "0.000000" if out == "-0.000000" else out


def atomic_write(path, text: str):
    """Write to a temporary file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(columns, rows, comments=()) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        values = [row.get(c) for c in columns] if isinstance(row, dict) else list(row)
        w.writerow([fmt(v) for v in values])
    return buf.getvalue()


def _data_lines(text: str):
    return [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]


def read_scenarios(path) -> tuple[list[str], np.ndarray]:
    """Read ``scenario_id,d_1,...,d_K``; returns (ids, n x K array)."""
    text = Path(path).read_text(encoding="utf-8")
    rows = list(csv.reader(_data_lines(text)))
    if not rows or rows[0][0].strip() != "scenario_id":
        raise ValueError(f"{path}: expected a header starting with scenario_id")
    k = len(rows[0]) - 1
    if k < 1:
        raise ValueError(f"{path}: no demand columns")
    ids, data = [], []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != k + 1:
            raise ValueError(f"{path}: row {i} has {len(row)} fields, expected {k + 1}")
        ids.append(row[0].strip())
        try:
            data.append([float(v) for v in row[1:]])
        except ValueError:
            raise ValueError(f"{path}: row {i} has a non-numeric demand") from None
    if not data:
        raise ValueError(f"{path}: no scenarios")
    arr = np.asarray(data, dtype=float)
    if not np.isfinite(arr).all() or (arr < 0).any():
        raise ValueError(f"{path}: demands must be finite and nonnegative")
    return ids, arr


def scenarios_text(scenarios, ids=None, comments=()) -> str:
    scenarios = np.asarray(scenarios, dtype=float)
    k = scenarios.shape[1]
    ids = ids if ids is not None else [str(i + 1) for i in range(len(scenarios))]
    cols = ["scenario_id"] + [f"d_{j + 1}" for j in range(k)]
    return csv_text(cols, [[sid, *row] for sid, row in zip(ids, scenarios)], comments)


def read_moments(path) -> list[MomentInfo]:
    """Read ``commodity,mean,variance`` rows in commodity order."""
    text = Path(path).read_text(encoding="utf-8")
    rows = list(csv.reader(_data_lines(text)))
    if not rows or [c.strip() for c in rows[0]] != ["commodity", "mean", "variance"]:
        raise ValueError(f"{path}: expected header commodity,mean,variance")
    out = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise ValueError(f"{path}: row {i} needs 3 fields")
        try:
            out.append(MomentInfo(float(row[1]), float(row[2])))
        except ValueError as exc:
            raise ValueError(f"{path}: row {i}: {exc}") from None
    if not out:
        raise ValueError(f"{path}: no moments")
    return out


def moments_text(moments, ids=None) -> str:
    ids = ids if ids is not None else [str(i + 1) for i in range(len(moments))]
    return csv_text(["commodity", "mean", "variance"],
                    [[cid, repr(m.mean), repr(m.variance)] for cid, m in zip(ids, moments)])


SOLUTION_FIELDS = ("model", "x", "d_tilde", "capacity_cost", "outsourcing_value", "objective")


def read_solution(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            sol = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON ({exc})") from None
    missing = [f for f in SOLUTION_FIELDS if f not in sol]
    if missing:
        raise ValueError(f"{path}: missing field(s) {', '.join(missing)}")
    if not isinstance(sol["x"], dict):
        raise ValueError(f"{path}: x must map arc ids to values")
    return sol


def solution_text(sol: dict) -> str:
    return json.dumps(sol, indent=2, sort_keys=False) + "\n"
