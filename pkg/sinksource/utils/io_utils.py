"""
File helpers shared by the CLI and the artifact export.
"""
import csv
import json
import logging
import os
from typing import Any, Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)


def ensure_dir(path: str) -> str:
    """Create ``path`` (and parents) if needed."""
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create output directory {path}: {e}") from e
    return path


def to_builtin(value: Any) -> Any:
    """Recursively convert numpy scalars and arrays so json can encode them."""
    if isinstance(value, dict):
        return {str(k): to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_builtin(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else None
    return value


def write_json(path: str, payload: Any) -> str:
    with open(path, 'w') as f:
        json.dump(to_builtin(payload), f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """Write rows with floats in round-trip repr."""
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def read_vector(path: str) -> np.ndarray:
    """
    Read a vector from .npy, .json (list) or a text file with one value per line.

    A text file may carry a single header line, which is skipped.
    """
    ext = os.path.splitext(path)[1].lower()
    if ext == '.npy':
        return np.asarray(np.load(path), dtype=float).ravel()
    if ext == '.json':
        with open(path, 'r') as f:
            return np.asarray(json.load(f), dtype=float).ravel()
    with open(path, 'r') as f:
        lines = [line.strip() for line in f if line.strip() and not line.startswith('#')]
    try:
        return np.asarray([float(v.split(',')[-1]) for v in lines], dtype=float)
    except ValueError:
        return np.asarray([float(v.split(',')[-1]) for v in lines[1:]], dtype=float)
