"""Grid-accelerated DBSCAN, once-per-step eps adaptation, and cluster lineage."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .geo import ObjectId
from .grid import GridIndex
from .groups import GroupSet
from .metrics import DEFAULT_DIST_FLOOR, PairSums, modularity_many, pair_sums

log = logging.getLogger(__name__)

OUTLIER, BORDER, CORE = 0, 1, 2
ROLE_NAMES = {OUTLIER: "outlier", BORDER: "border", CORE: "core"}


@dataclass
class Clustering:
    """Partition of one snapshot.

    ``assignment[n]`` is the cluster of ``ids[n]`` (``-1`` for outliers) and
    ``role[n]`` one of ``OUTLIER``/``BORDER``/``CORE``. Cluster ids run from 0
    in discovery order, i.e. by the smallest core member in id order.
    """

    k: int
    eps_used: float
    ids: list
    xy: np.ndarray
    assignment: np.ndarray
    role: np.ndarray
    shortcut_core: np.ndarray | None = None

    @classmethod
    def empty(cls, k: int = 0, eps_used: float = math.nan) -> "Clustering":
        return cls(k, eps_used, [], np.empty((0, 2)), np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int8))

    @classmethod
    def from_labels(cls, ids, xy, labels, k: int = 0, eps_used: float = math.nan) -> "Clustering":
        """Wrap external labels (``-1`` = outlier); clustered objects are marked core."""
        labels = np.asarray(labels, dtype=np.int64)
        _, compact = np.unique(labels[labels >= 0], return_inverse=True)
        assignment = np.full(len(labels), -1, dtype=np.int64)
        assignment[labels >= 0] = compact.ravel()
        role = np.where(assignment >= 0, CORE, OUTLIER).astype(np.int8)
        return cls(k, eps_used, list(ids), np.asarray(xy, dtype=float).reshape(-1, 2), assignment, role)

    def __len__(self):
        return len(self.ids)

    @property
    def n_clusters(self) -> int:
        return int(self.assignment.max()) + 1 if len(self.assignment) else 0

    @property
    def clusters(self) -> dict[int, frozenset]:
        out: dict[int, list] = {c: [] for c in range(self.n_clusters)}
        for oid, c in zip(self.ids, self.assignment.tolist()):
            if c >= 0:
                out[c].append(oid)
        return {c: frozenset(m) for c, m in out.items()}

    def members(self) -> dict[int, list]:
        """Cluster members in id order."""
        out: dict[int, list] = {c: [] for c in range(self.n_clusters)}
        for oid, c in zip(self.ids, self.assignment.tolist()):
            if c >= 0:
                out[c].append(oid)
        return out

    @property
    def labels(self) -> dict[ObjectId, str]:
        return {oid: ROLE_NAMES[r] for oid, r in zip(self.ids, self.role.tolist())}

    def label_map(self) -> dict[ObjectId, int]:
        return dict(zip(self.ids, self.assignment.tolist()))

    @property
    def outliers(self) -> list:
        return [oid for oid, c in zip(self.ids, self.assignment.tolist()) if c < 0]

    def core_partition(self) -> set[frozenset]:
        """Clusters restricted to their core members."""
        out: dict[int, list] = {}
        for oid, c, r in zip(self.ids, self.assignment.tolist(), self.role.tolist()):
            if r == CORE:
                out.setdefault(c, []).append(oid)
        return {frozenset(v) for v in out.values()}


def cluster(idx: GridIndex, min_pts: int, groups: GroupSet | None = None, k: int = 0) -> Clustering:
    """DBSCAN over the points of ``idx`` with ``eps = idx.eps``.

    The eps-neighbourhood counts the point itself. Two shortcuts mark cores
    without a neighbour count: every member of a cell holding at least
    ``min_pts`` points, and every seed of ``groups`` (built over the same
    points) whose group has at least ``min_pts`` members. Borders join the
    earliest-discovered cluster among their core neighbours.
    """
    n = len(idx)
    eps = idx.eps
    if n == 0:
        return Clustering.empty(k, eps)

    dense_cell = idx.cell_count >= min_pts
    shortcut = idx.cell_pop >= min_pts
    if groups is not None:
        for seed_id, g in groups.groups.items():
            if len(g.member_ids) >= min_pts and seed_id in idx.position:
                shortcut[idx.position[seed_id]] = True

    a, b = idx.pairs_within(eps, skip_cells=dense_cell)
    counts = 1 + np.bincount(a, minlength=n) + np.bincount(b, minlength=n)
    core = shortcut | (counts >= min_pts)

    # core-core links: every close pair plus a chain through each dense cell
    both = core[a] & core[b]
    src, dst = [a[both]], [b[both]]
    for start, count in zip(idx.cell_start[dense_cell], idx.cell_count[dense_cell]):
        members = idx.order[start:start + count]
        src.append(members[:-1])
        dst.append(members[1:])
    src, dst = np.concatenate(src), np.concatenate(dst)
    graph = coo_matrix((np.ones(len(src), dtype=np.int8), (src, dst)), shape=(n, n))
    _, comp = connected_components(graph, directed=False)

    assignment = np.full(n, -1, dtype=np.int64)
    core_pos = np.nonzero(core)[0]
    if len(core_pos):
        # rank components by their first core position (positions follow id order)
        first = np.full(n, n, dtype=np.int64)
        np.minimum.at(first, comp[core_pos], core_pos)
        used = np.unique(comp[core_pos])
        rank = np.empty(n, dtype=np.int64)
        rank[used[np.argsort(first[used], kind="stable")]] = np.arange(len(used))
        assignment[core_pos] = rank[comp[core_pos]]

        # borders: smallest cluster id among adjacent cores
        fb = ~core[a] & core[b]
        ba = core[a] & ~core[b]
        tgt = np.concatenate([a[fb], b[ba]])
        via = np.concatenate([assignment[b[fb]], assignment[a[ba]]])
        best = np.full(n, np.iinfo(np.int64).max, dtype=np.int64)
        np.minimum.at(best, tgt, via)
        border = ~core & (best < np.iinfo(np.int64).max)
        assignment[border] = best[border]

    role = np.full(n, OUTLIER, dtype=np.int8)
    role[assignment >= 0] = BORDER
    role[core] = CORE
    return Clustering(k, eps, list(idx.ids), idx.xy, assignment, role, shortcut)


def dbscan(ids: Sequence[ObjectId], xy: np.ndarray, eps: float, min_pts: int, k: int = 0) -> Clustering:
    """Convenience wrapper: index the points and cluster them."""
    return cluster(GridIndex(ids, xy, eps), min_pts, k=k)


# ----------------------------------------------------------------- eps adaptation
@dataclass(frozen=True)
class EpsilonProbe:
    eps: float
    eps_next: float
    qs_low: float | None
    qs_mid: float | None
    qs_high: float | None
    flagged: bool = False


def choose_epsilon(eps: float, delta_eps: float, qs_high: float, qs_low: float, qs_mid: float) -> float:
    """Step eps toward whichever neighbouring value strictly maximizes modularity."""
    if qs_high > qs_low and qs_high > qs_mid:
        return eps + delta_eps
    if qs_low > qs_high and qs_low > qs_mid:
        return eps - delta_eps
    return eps


def probe_epsilon(
    idx: GridIndex,
    current: Clustering,
    delta_eps: float,
    min_pts: int,
    dist_floor: float = DEFAULT_DIST_FLOOR,
    *,
    sums: PairSums | None = None,
) -> EpsilonProbe:
    """Compare modularity at eps, eps + delta_eps and eps - delta_eps (one step only).

    ``sums`` may carry a precomputed all-pairs pass over ``idx.xy``.
    """
    eps = idx.eps
    if len(idx) < 2:
        return EpsilonProbe(eps, eps, None, None, None, True)
    if sums is None:
        sums = pair_sums(idx.xy, dist_floor)
    if eps - delta_eps <= 0:
        log.warning("eps %.3f cannot shrink by %.3f; keeping it", eps, delta_eps)
        qs_mid = float(modularity_many(None, [current.assignment], sums=sums)[0])
        return EpsilonProbe(eps, eps, None, qs_mid, None, True)
    high = cluster(GridIndex(idx.ids, idx.xy, eps + delta_eps), min_pts)
    low = cluster(GridIndex(idx.ids, idx.xy, eps - delta_eps), min_pts)
    qs_mid, qs_high, qs_low = (
        float(q) for q in modularity_many(None, [current.assignment, high.assignment, low.assignment], sums=sums)
    )
    return EpsilonProbe(eps, choose_epsilon(eps, delta_eps, qs_high, qs_low, qs_mid), qs_low, qs_mid, qs_high)


def adapt_epsilon(
    idx: GridIndex,
    current: Clustering,
    delta_eps: float,
    min_pts: int,
    dist_floor: float = DEFAULT_DIST_FLOOR,
) -> float:
    return probe_epsilon(idx, current, delta_eps, min_pts, dist_floor).eps_next


def initial_epsilon(
    ids: Sequence[ObjectId],
    xy: np.ndarray,
    eps0: float,
    delta_eps: float,
    min_pts: int,
    max_iters: int = 10,
    dist_floor: float = DEFAULT_DIST_FLOOR,
    *,
    sums: PairSums | None = None,
) -> float:
    """Hill-climb eps from ``eps0`` until modularity stops improving or ``max_iters`` rounds."""
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    eps = eps0
    if sums is None and len(ids) >= 2:
        sums = pair_sums(xy, dist_floor)
    for _ in range(max_iters):
        idx = GridIndex(ids, xy, eps)
        probe = probe_epsilon(idx, cluster(idx, min_pts), delta_eps, min_pts, dist_floor, sums=sums)
        if probe.eps_next == eps:
            break
        eps = probe.eps_next
    return eps


# ------------------------------------------------------------------------ lineage
class EventKind(str, Enum):
    EVOLVE = "evolve"
    FORM = "form"
    DISSOLVE = "dissolve"


@dataclass(frozen=True)
class ClusterEvent:
    kind: EventKind
    cur_cluster_id: int | None
    prev_cluster_id: int | None


def map_clusters(prev: Clustering | None, cur: Clustering) -> list[ClusterEvent]:
    """Link current clusters to previous ones by member overlap.

    A current cluster evolves from the previous cluster it shares the most
    members with (smaller id on ties) when the overlap covers at least half
    of the smaller of the two. A previous cluster feeds at most one current
    cluster (largest overlap wins); the rest form, and unclaimed previous
    clusters dissolve.
    """
    cur_members = cur.clusters
    prev_members = prev.clusters if prev is not None else {}
    prev_of = prev.label_map() if prev is not None else {}

    proposals: dict[int, list[tuple[int, int]]] = {}
    for c in sorted(cur_members):
        overlap: dict[int, int] = {}
        for oid in cur_members[c]:
            p = prev_of.get(oid, -1)
            if p >= 0:
                overlap[p] = overlap.get(p, 0) + 1
        if not overlap:
            continue
        p, size = min(overlap.items(), key=lambda kv: (-kv[1], kv[0]))
        if size >= 0.5 * min(len(cur_members[c]), len(prev_members[p])):
            proposals.setdefault(p, []).append((size, c))

    evolves_from: dict[int, int] = {}
    for p, bids in proposals.items():
        _, winner = min(bids, key=lambda sc: (-sc[0], sc[1]))
        evolves_from[winner] = p

    events = []
    for c in sorted(cur_members):
        if c in evolves_from:
            events.append(ClusterEvent(EventKind.EVOLVE, c, evolves_from[c]))
        else:
            events.append(ClusterEvent(EventKind.FORM, c, None))
    claimed = set(evolves_from.values())
    for p in sorted(prev_members):
        if p not in claimed:
            events.append(ClusterEvent(EventKind.DISSOLVE, None, p))
    return events
