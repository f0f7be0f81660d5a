"""Atomic CSV/JSON writers and number formatting for reports."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

DEFAULT_DIGITS = 6
OUTPUT_ENV = "DRIFTBOUNDS_OUT"


def output_dir(explicit=None) -> Path:
    """``explicit`` if given, else ``$DRIFTBOUNDS_OUT``, else the working directory."""
    base = explicit or os.environ.get(OUTPUT_ENV) or "."
    path = Path(base)
    path.mkdir(parents=True, exist_ok=True)
    return path


def fmt(value, digits=DEFAULT_DIGITS) -> str:
    """Render a number with ``digits`` significant digits (``None`` = full precision)."""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if not math.isfinite(v):
        return str(v)
    return repr(v) if digits is None else f"{v:.{digits}g}"


def to_jsonable(obj, digits=None):
    """Convert numpy scalars/arrays and tuples to plain JSON types, rounding floats if asked."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [to_jsonable(v, digits) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if digits is not None and math.isfinite(v):
            v = float(f"{v:.{digits}g}")
        return v
    return obj


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], digits=DEFAULT_DIGITS) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v, digits) for v in row])
    return atomic_write_text(path, buf.getvalue())


def write_json(path, payload, digits=None) -> Path:
    text = json.dumps(to_jsonable(payload, digits), indent=2, sort_keys=True)
    return atomic_write_text(path, text + "\n")
