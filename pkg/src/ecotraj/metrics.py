"""Clustering quality (modularity) and temporal stability (NMI)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

DEFAULT_DIST_FLOOR = 1e-3


@numba.njit(cache=True)
def _row_sums(x, y, floor):
    """Per-point similarity to every other point, and the total over unordered pairs."""
    n = x.shape[0]
    rows = np.zeros(n)
    total = 0.0
    for i in range(n):
        xi = x[i]
        yi = y[i]
        acc = 0.0
        for j in range(i + 1, n):
            d = math.sqrt((xi - x[j]) ** 2 + (yi - y[j]) ** 2)
            s = 1.0 / (d if d > floor else floor)
            acc += s
            rows[j] += s
        rows[i] += acc
        total += acc
    return rows, total


@numba.njit(cache=True)
def _sim(x, y, i, j, floor):
    d = math.sqrt((x[i] - x[j]) ** 2 + (y[i] - y[j]) ** 2)
    return 1.0 / (d if d > floor else floor)


@numba.njit(cache=True)
def _cluster_sums(x, y, labels, n_clusters, rows, floor):
    """Intra- and inter-cluster similarity per cluster for one labeling.

    The inter part is recovered from the row sums: a member's similarity to
    all other clustered points, summed over a cluster, double-counts its
    intra pairs and counts its inter pairs once.
    """
    n = x.shape[0]
    intra = np.zeros(n_clusters)
    reach = np.zeros(n_clusters)
    order = np.argsort(labels, kind="mergesort")
    n_out = 0
    while n_out < n and labels[order[n_out]] < 0:
        n_out += 1
    n_in = n - n_out
    if n_out <= n_in // 2:
        for a in range(n_out, n):
            i = order[a]
            r = rows[i]
            for b in range(n_out):
                r -= _sim(x, y, i, order[b], floor)
            reach[labels[i]] += r
    else:
        for a in range(n_out, n):
            i = order[a]
            for b in range(a + 1, n):
                j = order[b]
                s = _sim(x, y, i, j, floor)
                reach[labels[i]] += s
                reach[labels[j]] += s
    start = n_out
    while start < n:
        c = labels[order[start]]
        stop = start
        while stop < n and labels[order[stop]] == c:
            stop += 1
        acc = 0.0
        for a in range(start, stop):
            i = order[a]
            for b in range(a + 1, stop):
                acc += _sim(x, y, i, order[b], floor)
        intra[c] = acc
        start = stop
    inter = reach - 2.0 * intra
    for c in range(n_clusters):
        if inter[c] < 0.0:
            inter[c] = 0.0
    return intra, inter


@dataclass(frozen=True)
class PairSums:
    """Labeling-independent part of modularity for one point set."""

    x: np.ndarray
    y: np.ndarray
    rows: np.ndarray
    total: float
    floor: float


def pair_sums(xy: np.ndarray, dist_floor: float = DEFAULT_DIST_FLOOR) -> PairSums:
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    if len(xy) < 2:
        raise ValueError("modularity needs at least two objects")
    x = np.ascontiguousarray(xy[:, 0])
    y = np.ascontiguousarray(xy[:, 1])
    rows, total = _row_sums(x, y, float(dist_floor))
    return PairSums(x, y, rows, total, float(dist_floor))


def modularity_many(
    xy: np.ndarray | None,
    label_sets: Sequence[np.ndarray],
    dist_floor: float = DEFAULT_DIST_FLOOR,
    *,
    sums: PairSums | None = None,
) -> np.ndarray:
    """Modularity of several labelings of the same points, sharing one all-pairs pass.

    Labels must be ``0..K-1`` for clusters and ``-1`` for outliers. Similarity
    is ``1 / max(distance, dist_floor)``; pairs touching an outlier count only
    toward the total. Pass ``sums`` to reuse the all-pairs pass across calls
    (``xy`` and ``dist_floor`` are then ignored).
    """
    if sums is None:
        sums = pair_sums(xy, dist_floor)
    out = np.empty(len(label_sets))
    for p, labels in enumerate(label_sets):
        labels = np.ascontiguousarray(labels, dtype=np.int64)
        k = int(labels.max()) + 1 if len(labels) else 0
        if k == 0:
            out[p] = 0.0
            continue
        intra, inter = _cluster_sums(sums.x, sums.y, labels, k, sums.rows, sums.floor)
        out[p] = (intra / sums.total).sum() - ((inter / sums.total) ** 2).sum()
    return out


def modularity(clustering, dist_floor: float = DEFAULT_DIST_FLOOR) -> float:
    return float(modularity_many(clustering.xy, [clustering.assignment], dist_floor)[0])


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi_labels(a: Sequence, b: Sequence) -> float:
    """Geometric-mean NMI between two labelings of the same objects (natural log).

    When either side has zero entropy the result is 1 for identical
    partitions and 0 otherwise.
    """
    _, ia = np.unique(np.asarray(a), return_inverse=True)
    _, ib = np.unique(np.asarray(b), return_inverse=True)
    ia, ib = ia.ravel(), ib.ravel()
    if len(ia) == 0:
        raise ValueError("NMI of empty labelings")
    table = np.zeros((ia.max() + 1, ib.max() + 1))
    np.add.at(table, (ia, ib), 1.0)
    ha, hb = _entropy(table.sum(axis=1)), _entropy(table.sum(axis=0))
    if ha == 0.0 or hb == 0.0:
        # a zero-entropy side is one block; identical only if the other is too
        return 1.0 if table.shape == (1, 1) else 0.0
    n = table.sum()
    pij = table / n
    outer = np.outer(table.sum(axis=1), table.sum(axis=0)) / (n * n)
    nz = pij > 0
    mi = float((pij[nz] * np.log(pij[nz] / outer[nz])).sum())
    return min(max(mi / math.sqrt(ha * hb), 0.0), 1.0)


def nmi(prev, cur) -> float | None:
    """NMI of two clusterings over the objects present in both; None if there are none.

    All outliers of a step share one noise label.
    """
    prev_of = prev.label_map()
    cur_of = cur.label_map()
    common = [oid for oid in cur_of if oid in prev_of]
    if not common:
        return None
    # -1 already acts as the shared noise label
    return nmi_labels([prev_of[o] for o in common], [cur_of[o] for o in common])


@dataclass(frozen=True)
class StepMetrics:
    qs: float | None
    nmi_with_prev: float | None
    processing_seconds: float
    objects: int
    clusters: int
    outliers: int
    smoothed: int


def mean_of(values: Sequence[float | None]) -> float | None:
    """Arithmetic mean over defined per-step values."""
    vals = [v for v in values if v is not None]
    return sum(vals) / len(vals) if vals else None
