"""Input coercion shared by the estimator front end."""
from __future__ import annotations

from typing import List

import numpy as np

from .geometry import PathParam


def _as_path(item, where: str) -> PathParam:
    if isinstance(item, PathParam):
        return item
    row = np.asarray(item).reshape(-1)
    if row.size not in (2, 3):
        raise ValueError(f"{where}: a path is (aoa, toa) or (aoa, toa, gain), got {row.size} values")
    if np.iscomplexobj(row[:2]) and np.any(np.imag(row[:2]) != 0):
        raise ValueError(f"{where}: aoa and toa must be real")
    gain = complex(row[2]) if row.size == 3 else None
    return PathParam(float(np.real(row[0])), float(np.real(row[1])), gain)


def check_path_sets(X, *, allow_empty: bool = False) -> List[List[PathParam]]:
    """Normalize a batch of observations to lists of :class:`PathParam`.

    Each sample may be a sequence of ``PathParam`` or an array with one row
    per path holding ``aoa, toa`` and optionally a complex ``gain``.
    """
    if isinstance(X, np.ndarray) and X.ndim == 2 and X.shape[1] in (2, 3):
        raise ValueError("X looks like a single path set; wrap it in a list")
    try:
        samples = list(X)
    except TypeError:
        raise ValueError("X must be an iterable of path sets") from None
    if not samples:
        raise ValueError("X contains no samples")
    out = []
    for i, sample in enumerate(samples):
        paths = [_as_path(p, f"X[{i}][{j}]") for j, p in enumerate(sample)]
        if not paths and not allow_empty:
            raise ValueError(f"X[{i}] has no paths")
        out.append(paths)
    return out


def check_locations(y, n_samples: int) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 2 or y.shape[1] != 2:
        raise ValueError(f"y must have shape (n_samples, 2), got {y.shape}")
    if len(y) != n_samples:
        raise ValueError(f"X has {n_samples} samples but y has {len(y)}")
    if not np.all(np.isfinite(y)):
        raise ValueError("y contains non-finite values")
    return y
