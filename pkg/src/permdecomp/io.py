"""Deterministic CSV/JSON writers shared by the library and the runner."""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence


def fmt(value) -> str:
    if isinstance(value, (bool, str)) or value is None:
        return "" if value is None else str(value)
    if isinstance(value, int):
        return str(value)
    return format(float(value), ".17g")


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], comments: Sequence[str] = ()
              ) -> Path:
    """Write ``rows`` under ``header``; ``comments`` become leading ``#`` lines."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def _jsonable(obj):
    import numpy as np

    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if v == v and abs(v) != float("inf") else str(v)
    return obj


def write_json(path, payload) -> Path:
    """Stable JSON: sorted keys, fixed indentation, NaN/Inf stored as strings."""
    path = Path(path)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
    return path
