"""Exact k-nearest-neighbour search and Local Outlier Factor scores.

Neighbourhoods are tie-inclusive: every point within a row's k-distance is
a neighbour, so a neighbourhood can hold more than ``k`` rows.  Distances are
computed from coordinate differences (not the expanded dot-product form) so
that duplicate points sit at exactly zero distance.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .tabular import EncodedMatrix

# rows x columns x dims elements handled per distance block
_BLOCK_ELEMENTS = 4_000_000


class OutlierError(ValueError):
    pass


@dataclass(frozen=True)
class LofConfig:
    k: int = 5

    def __post_init__(self):
        if self.k < 1:
            raise OutlierError("k must be a positive integer")


@dataclass(frozen=True, eq=False)
class LofScores:
    scores: np.ndarray
    kdist: np.ndarray
    neighbors: tuple
    lrd: np.ndarray


def _as_points(m) -> np.ndarray:
    x = m.values if isinstance(m, EncodedMatrix) else m
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if not np.isfinite(x).all():
        raise OutlierError("points contain non-finite values")
    return x


def _distance_rows(x: np.ndarray, rows: slice) -> np.ndarray:
    diff = x[rows, None, :] - x[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def knn(m, k: int) -> tuple[np.ndarray, tuple]:
    """k-distance and tie-inclusive neighbour index set of every row.

    The k-distance of a row is the distance to its k-th nearest other row
    (duplicates count individually).  Neighbour index arrays are ascending.
    """
    x = _as_points(m)
    n = len(x)
    if not 1 <= k <= n - 1:
        raise OutlierError(f"k={k} out of range for {n} points (need 1 <= k <= n-1)")
    block = max(1, _BLOCK_ELEMENTS // max(1, n * x.shape[1]))
    kdist = np.empty(n)
    neighbors = []
    for start in range(0, n, block):
        stop = min(n, start + block)
        d = _distance_rows(x, slice(start, stop))
        rows = np.arange(stop - start)
        d[rows, rows + start] = np.inf
        kd = np.partition(d, k - 1, axis=1)[:, k - 1]
        kdist[start:stop] = kd
        for i in rows:
            neighbors.append(np.flatnonzero(d[i] <= kd[i]))
    return kdist, tuple(neighbors)


def lof_scores(m, cfg: LofConfig | int = LofConfig()) -> LofScores:
    """Local Outlier Factor of every row.

    A row whose reachability distances are all zero (it sits on at least k
    duplicates) has infinite local reachability density; if the row and all
    its neighbours are in that state its LOF is defined as 1.
    """
    k = cfg.k if isinstance(cfg, LofConfig) else int(cfg)
    x = _as_points(m)
    kdist, neighbors = knn(x, k)
    n = len(x)
    lrd = np.empty(n)
    for p in range(n):
        nb = neighbors[p]
        d = np.sqrt(((x[nb] - x[p]) ** 2).sum(axis=1))
        reach = np.maximum(kdist[nb], d)
        mean_reach = _ordered_mean(reach)
        lrd[p] = math.inf if mean_reach == 0 else 1.0 / mean_reach
    scores = np.empty(n)
    for p in range(n):
        nb = neighbors[p]
        if math.isinf(lrd[p]):
            # all neighbours of an infinite-density row are duplicates of it
            scores[p] = 1.0
        else:
            scores[p] = _ordered_mean(lrd[nb]) / lrd[p]
    return LofScores(scores, kdist, neighbors, lrd)


def _ordered_mean(v: np.ndarray) -> float:
    # fixed left-to-right summation in ascending neighbour order
    total = 0.0
    for x in v.tolist():
        total += x
    return total / len(v)


def top_outliers(s: LofScores | Sequence[float], count: int) -> list[int]:
    """Row indices of the ``count`` largest scores, ties by ascending index."""
    scores = s.scores if isinstance(s, LofScores) else np.asarray(s, dtype=float)
    if not 0 <= count <= len(scores):
        raise OutlierError(f"count {count} out of range")
    order = np.lexsort((np.arange(len(scores)), -scores))
    return [int(i) for i in order[:count]]


def write_scores(s: LofScores, path, top: int | None = None) -> None:
    """CSV (row_index, lof, kdist); all rows in index order unless ``top`` is set."""
    rows = range(len(s.scores)) if top is None else top_outliers(s, min(top, len(s.scores)))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row_index", "lof", "kdist"])
        for i in rows:
            w.writerow([i, repr(float(s.scores[i])), repr(float(s.kdist[i]))])
