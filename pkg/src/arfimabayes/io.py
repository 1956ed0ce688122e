"""CSV ingestion and emission, the GNP log-return transform, JSON envelopes."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ._out import open_output
from .draws import fmt17
from .errors import InputError
from .model import Series

VERSION = "0.1.0"


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_column(path, column: Optional[Union[str, int]] = None) -> np.ndarray:
    """Numeric values of one CSV column, header dropped if present.

    ``column`` is a header name or a 0-based index; by default the last
    column is used (so a ``date,value`` file reads its values).
    """
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(cell.strip() for cell in r)]
    except FileNotFoundError as exc:
        raise InputError(f"no such file: {path}") from exc
    if not rows:
        raise InputError(f"{path}: fewer than 2 observations")
    has_header = not all(_is_number(cell) for cell in rows[0] if cell.strip())
    header = [h.strip() for h in rows[0]] if has_header else None
    body = rows[1:] if has_header else rows
    first_line = 2 if has_header else 1

    if column is None:
        idx = len(rows[0]) - 1
    elif isinstance(column, int) or (isinstance(column, str) and column.isdigit() and
                                     (header is None or column not in header)):
        idx = int(column)
    else:
        if header is None or column not in header:
            raise InputError(f"{path}: no column named {column!r}")
        idx = header.index(column)

    values = np.empty(len(body))
    for k, row in enumerate(body):
        line = first_line + k
        if idx >= len(row):
            raise InputError(f"{path}:{line}: missing column {idx}")
        cell = row[idx].strip()
        try:
            values[k] = float(cell)
        except ValueError:
            raise InputError(f"{path}:{line}: non-numeric value {cell!r}") from None
        if not math.isfinite(values[k]):
            raise InputError(f"{path}:{line}: non-finite value {cell!r}")
    return values


def ingest_csv(path, column: Optional[Union[str, int]] = None, demean: bool = True) -> Series:
    """Load one column as a demeaned :class:`Series`."""
    values = read_column(path, column)
    if values.size < 2:
        raise InputError(f"{path}: fewer than 2 observations")
    return Series.from_values(values, demean=demean)


def gnp_transform(levels) -> np.ndarray:
    """Quarterly log-returns in percent, ``100 (log x_t - log x_{t-1})``, demeaned."""
    x = np.asarray(levels, dtype=float)
    if x.size < 2:
        raise InputError("need at least 2 levels to form a return")
    bad = np.flatnonzero(~(x > 0))
    if bad.size:
        raise InputError(f"level at row {bad[0] + 1} is not positive ({x[bad[0]]!r})")
    r = 100.0 * np.diff(np.log(x))
    return r - r.mean()


def write_series_csv(path, values, column: str = "value") -> None:
    with open_output(path) as fh:
        w = csv.writer(fh)
        w.writerow([column])
        for v in np.asarray(values, dtype=float):
            w.writerow([fmt17(v)])


def write_table_csv(path, header, rows) -> None:
    with open_output(path) as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt17(v) if isinstance(v, (float, np.floating)) else v for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (str, int, bool)) or obj is None:
        return obj
    if hasattr(obj, "__dataclass_fields__"):
        return _jsonable({k: getattr(obj, k) for k in obj.__dataclass_fields__})
    return str(obj)


def envelope(kind: str, payload, seed=None, config: Optional[dict] = None) -> dict:
    """``{"meta": {seed, config, version}, kind: payload}``."""
    return {"meta": {"seed": seed, "config": _jsonable(config or {}), "version": VERSION},
            kind: _jsonable(payload)}


def write_json(path, obj) -> None:
    text = json.dumps(obj, indent=2)
    if path is None or str(path) == "-":
        print(text)
    else:
        Path(path).write_text(text + "\n")
