"""Uniform grid with cell diagonal equal to eps, for range queries up to eps.

Cells are half-open squares of width ``eps / sqrt(2)``, keyed sparsely by
integer ``(i, j)``. Besides single-point queries the index can enumerate all
point pairs within ``h`` in one vectorized pass, which is what the clustering
and group code use on large snapshots.
"""

from __future__ import annotations

import math
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import ParameterError
from .geo import ObjectId, PlanarPoint, canonical_order


class CellId(NamedTuple):
    i: int
    j: int


_BLOCK_3 = tuple((di, dj) for di in (-1, 0, 1) for dj in (-1, 0, 1))
_BLOCK_21 = tuple(
    (di, dj)
    for di in range(-2, 3)
    for dj in range(-2, 3)
    if not (abs(di) == 2 and abs(dj) == 2)
)


def stencil(h: float, eps: float) -> tuple[tuple[int, int], ...]:
    if not 0 < h <= eps * (1 + 1e-12):
        raise ParameterError(f"query radius {h} must lie in (0, eps={eps}]")
    return _BLOCK_3 if h < eps / math.sqrt(2) else _BLOCK_21


def h_close_cells(g: tuple[int, int], h: float, eps: float) -> set[CellId]:
    """Cells whose boundary distance to ``g`` can be at most ``h``.

    A 3x3 block when ``h < eps/sqrt(2)``, otherwise the 5x5 block without
    its four corners.
    """
    i, j = g
    return {CellId(i + di, j + dj) for di, dj in stencil(h, eps)}


def _cell_coords(xy: np.ndarray, width: float) -> tuple[np.ndarray, np.ndarray]:
    ci = np.floor(xy[:, 0] / width).astype(np.int64)
    cj = np.floor(xy[:, 1] / width).astype(np.int64)
    # floor(x / w) can land one cell off when x sits within an ulp of a boundary
    for c, col in ((ci, 0), (cj, 1)):
        v = xy[:, col]
        c[v < c * width] -= 1
        c[v >= (c + 1) * width] += 1
    return ci, cj


class GridIndex:
    """Sparse grid over a fixed point set.

    Points are kept in the order given (callers pass canonical id order);
    positional indices into ``ids``/``xy`` are used by the bulk methods.
    """

    def __init__(self, ids: Sequence[ObjectId], xy: np.ndarray, eps: float):
        if not eps > 0:
            raise ParameterError(f"eps must be positive, got {eps}")
        self.eps = float(eps)
        self.cell_width = self.eps / math.sqrt(2)
        self.ids = list(ids)
        self.xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        if len(self.ids) != len(self.xy):
            raise ValueError("ids and xy differ in length")
        self.position = {oid: n for n, oid in enumerate(self.ids)}
        self.ci, self.cj = _cell_coords(self.xy, self.cell_width)

        n = len(self.ids)
        if n:
            self._imin = int(self.ci.min())
            self._jmin = int(self.cj.min())
            self.span = int(self.cj.max()) - self._jmin + 5
        else:
            self._imin = self._jmin = 0
            self.span = 5
        self.key = (self.ci - self._imin + 2) * self.span + (self.cj - self._jmin + 2)
        self.order = np.argsort(self.key, kind="stable")
        sorted_keys = self.key[self.order]
        self.cell_keys, self.cell_start, self.cell_count = np.unique(
            sorted_keys, return_index=True, return_counts=True
        )
        # population of each point's own cell
        self.cell_pop = np.empty(n, dtype=np.int64)
        self.cell_pop[self.order] = np.repeat(self.cell_count, self.cell_count)
        self._members: dict[CellId, np.ndarray] | None = None

    def __len__(self):
        return len(self.ids)

    # ------------------------------------------------------------------ views
    def _cell_members(self) -> dict[CellId, np.ndarray]:
        if self._members is None:
            members = {}
            for key, start, count in zip(self.cell_keys, self.cell_start, self.cell_count):
                idx = self.order[start:start + count]
                first = idx[0]
                members[CellId(int(self.ci[first]), int(self.cj[first]))] = idx
            self._members = members
        return self._members

    @property
    def cells(self) -> dict[CellId, list[ObjectId]]:
        return {g: [self.ids[n] for n in idx] for g, idx in self._cell_members().items()}

    @property
    def point_of(self) -> dict[ObjectId, PlanarPoint]:
        return {oid: PlanarPoint(float(x), float(y)) for oid, (x, y) in zip(self.ids, self.xy)}

    def cell_of(self, p: Sequence[float]) -> CellId:
        ci, cj = _cell_coords(np.array([p], dtype=float), self.cell_width)
        return CellId(int(ci[0]), int(cj[0]))

    # ---------------------------------------------------------------- queries
    def candidates(self, p: Sequence[float], h: float) -> np.ndarray:
        """Positions of points in the h-close cells of ``p``'s cell."""
        members = self._cell_members()
        chunks = [members[g] for g in h_close_cells(self.cell_of(p), h, self.eps) if g in members]
        if not chunks:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(chunks)

    def query(self, p: Sequence[float], h: float) -> np.ndarray:
        """Sorted positions of all indexed points within distance ``h`` of ``p``."""
        cand = self.candidates(p, h)
        d2 = (self.xy[cand, 0] - p[0]) ** 2 + (self.xy[cand, 1] - p[1]) ** 2
        return np.sort(cand[d2 <= h * h])

    def neighbors_within(self, p: Sequence[float], h: float) -> set[ObjectId]:
        return {self.ids[n] for n in self.query(p, h)}

    def pairs_within(self, h: float, *, skip_cells: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        """All unordered pairs ``(a, b)``, ``a != b``, with distance ``<= h``.

        Returns two position arrays. Candidates come only from h-close cells.
        ``skip_cells`` is a boolean mask over ``cell_keys``; pairs lying inside
        one flagged cell are omitted (the caller already knows they are within
        eps of each other).
        """
        offsets = stencil(h, self.eps)
        keys, start, count = self.cell_keys, self.cell_start, self.cell_count
        out_a, out_b = [], []
        h2 = h * h
        ncell = len(keys)
        if ncell == 0:
            empty = np.empty(0, dtype=np.int64)
            return empty, empty
        for di, dj in offsets:
            if (di, dj) < (0, 0):
                continue  # each unordered cell pair is visited once
            if (di, dj) == (0, 0):
                a = np.arange(ncell)
                if skip_cells is not None:
                    a = a[~skip_cells]
                b = a
            else:
                target = keys + di * self.span + dj
                pos = np.searchsorted(keys, target)
                pos[pos == ncell] = 0
                hit = keys[pos] == target
                a = np.nonzero(hit)[0]
                b = pos[hit]
            if len(a) == 0:
                continue
            na, nb = count[a], count[b]
            tot = na * nb
            total = int(tot.sum())
            if total == 0:
                continue
            pair = np.repeat(np.arange(len(a)), tot)
            offs = np.arange(total) - np.repeat(np.cumsum(tot) - tot, tot)
            ia = start[a][pair] + offs // nb[pair]
            ib = start[b][pair] + offs % nb[pair]
            if (di, dj) == (0, 0):
                keep = ia < ib
                ia, ib = ia[keep], ib[keep]
            pa, pb = self.order[ia], self.order[ib]
            d2 = (self.xy[pa, 0] - self.xy[pb, 0]) ** 2 + (self.xy[pa, 1] - self.xy[pb, 1]) ** 2
            close = d2 <= h2
            out_a.append(pa[close])
            out_b.append(pb[close])
        if not out_a:
            empty = np.empty(0, dtype=np.int64)
            return empty, empty
        return np.concatenate(out_a), np.concatenate(out_b)


def build(points: Mapping[ObjectId, Sequence[float]], eps: float) -> GridIndex:
    """Index a mapping of id -> point, storing ids in canonical order."""
    ids = canonical_order(points)
    xy = np.array([points[i] for i in ids], dtype=float).reshape(-1, 2)
    return GridIndex(ids, xy, eps)


def neighbors_within(p: Sequence[float], h: float, idx: GridIndex) -> set[ObjectId]:
    return idx.neighbors_within(p, h)


def min_cell_distance(g: Iterable[int], g2: Iterable[int], width: float) -> float:
    """Smallest distance between the boundaries of two cells."""
    (i, j), (i2, j2) = tuple(g), tuple(g2)
    gx = max(abs(i - i2) - 1, 0) * width
    gy = max(abs(j - j2) - 1, 0) * width
    return math.hypot(gx, gy)
