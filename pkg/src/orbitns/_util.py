"""Shared helpers: source-cube enumeration, ordered parallel map, atomic writes."""

from __future__ import annotations

import os
import tempfile
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def box_source_points(k, N) -> np.ndarray:
    """Integer points p with p and k - p both inside the truncation cube,
    excluding p = 0 and p = k; rows come out in lexicographic order.

    These are exactly the admissible sources of target k, so the row count
    equals the per-target triad count.
    """
    axes = [np.arange(max(-N, c - N), min(N, c + N) + 1) for c in k]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=1)
    karr = np.asarray(k)
    keep = np.any(pts != 0, axis=1) & np.any(pts != karr, axis=1)
    return pts[keep]


def parallel_map(fn, items, workers=1) -> list:
    """Map preserving item order.

    Each item is computed independently with its own fixed-order reductions,
    so results are bit-identical for any worker count.
    """
    items = list(items)
    if workers is None:
        workers = os.cpu_count() or 1
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def atomic_write_text(path, text) -> None:
    """Write via temp file + rename so a failed run leaves no partial output."""
    path = os.path.abspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path), suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
