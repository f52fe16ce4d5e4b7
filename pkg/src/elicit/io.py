"""File helpers: headerless point CSVs and atomic text writes."""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np


def atomic_write_text(path, text: str) -> Path:
    """Write via a temp file in the destination directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def read_points(path) -> np.ndarray:
    """Headerless CSV, one point per row, one column per coordinate."""
    data = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    if data.size == 0:
        raise ValueError(f"{path}: no points")
    return data


def points_to_csv(points) -> str:
    x = np.atleast_2d(np.asarray(points, dtype=float))
    return "".join(",".join(repr(float(v)) for v in row) + "\n" for row in x)
