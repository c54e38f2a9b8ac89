"""CSV and JSON input/output.

Floats are written with Python's shortest round-trip representation, so a
value read back with ``float()`` is bit-identical to the one written.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable

from .errors import DataError
from .simulate import Trajectory

__all__ = ["format_float", "ingest_csv", "write_json", "write_table", "write_trajectory_csv"]


def format_float(v: float) -> str:
    return repr(float(v))


def ingest_csv(path) -> Trajectory:
    """Read a single-column numeric CSV (optional ``value`` header).

    Raises
    ------
    DataError
        For an empty file, a non-numeric or non-finite cell, or more than one
        column. ``row`` is the 1-based line number in the file.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    lines = path.read_text().splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    values = []
    for row, raw in enumerate(lines, start=1):
        cell = raw.strip()
        if row == 1 and cell == "value":
            continue
        if "," in cell:
            raise DataError("expected a single column", row)
        try:
            v = float(cell)
        except ValueError:
            raise DataError(f"non-numeric cell {cell!r}", row) from None
        if not math.isfinite(v):
            raise DataError(f"non-finite cell {cell!r}", row)
        values.append(v)
    if not values:
        raise DataError(f"{path} contains no data")
    return Trajectory(values, {"source": str(path)})


def write_trajectory_csv(traj: Trajectory, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("value\n")
        for v in traj.values.tolist():
            fh.write(format_float(v) + "\n")


def _clean(obj: Any) -> Any:
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):
        return _clean(obj.item())
    return obj


def write_json(obj: Any, path) -> None:
    """Deterministic JSON (insertion order, 2-space indent, no NaN/inf)."""
    with open(path, "w", newline="\n") as fh:
        json.dump(_clean(obj), fh, indent=2, allow_nan=False)
        fh.write("\n")


def write_table(rows: Iterable[Iterable[Any]], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in rows:
            writer.writerow(
                (format_float(c) if math.isfinite(c) else "") if isinstance(c, float) else c for c in row
            )
