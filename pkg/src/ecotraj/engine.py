"""Per-step pipeline and the state carried between steps."""

from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .dbscan import Clustering, ClusterEvent, cluster, initial_epsilon, map_clusters, probe_epsilon
from .errors import OrderingError, SequencingError
from .geo import ObjectId, Params, PlanarRecord, Snapshot, TrackedObject, build_snapshot, discretize_timestamp
from .grid import GridIndex
from .groups import GroupSet, generate
from .metrics import StepMetrics, modularity_many, nmi, pair_sums
from .smoothing import Adjustment, smooth_snapshot

log = logging.getLogger(__name__)


@dataclass
class EngineState:
    """What one step hands to the next. ``k`` is the last processed step (None before the first)."""

    eps_k: float
    k: int | None = None
    tracked: dict[ObjectId, TrackedObject] = field(default_factory=dict)
    prev_groups: GroupSet | None = None
    prev_clustering: Clustering | None = None
    eps_initialized: bool = False

    @classmethod
    def initial(cls, params: Params) -> "EngineState":
        return cls(eps_k=params.eps0)


@dataclass
class StepResult:
    k: int
    eps: float
    eps_next: float
    clustering: Clustering
    events: list[ClusterEvent]
    adjustments: dict[ObjectId, Adjustment]
    metrics: StepMetrics
    t_start: float = math.nan


def step(
    state: EngineState,
    snapshot: Snapshot,
    params: Params,
    *,
    gap_steps: int = 1,
    smoothing: bool = True,
    init_max_iters: int = 10,
    t_start: float = math.nan,
) -> tuple[EngineState, StepResult]:
    """Smooth, group, cluster, adapt eps and link clusters for one snapshot."""
    if state.k is not None and snapshot.k != state.k + 1:
        raise SequencingError(f"expected step {state.k + 1}, got {snapshot.k}")
    started = time.perf_counter()
    k = snapshot.k
    eps = state.eps_k

    if not snapshot.entries:
        result = StepResult(
            k, eps, eps, Clustering.empty(k, eps), [], {},
            StepMetrics(None, None, time.perf_counter() - started, 0, 0, 0, 0), t_start,
        )
        return EngineState(eps, k, state.tracked, state.prev_groups, state.prev_clustering, state.eps_initialized), result

    delta = params.delta
    if delta > eps:
        log.warning("delta %.3f exceeds eps %.3f at step %d; clamping delta to eps", delta, eps, k)
        delta = eps

    if smoothing and state.prev_groups is not None:
        adjustments = smooth_snapshot(snapshot, state.prev_groups, state.tracked, params, gap_steps=gap_steps, delta=delta)
    else:
        adjustments = {oid: Adjustment.identity(oid, loc) for oid, (loc, _) in snapshot.entries.items()}

    ids = snapshot.ids()
    xy = np.array([adjustments[o].r_opt for o in ids], dtype=float).reshape(-1, 2)
    idx = GridIndex(ids, xy, eps)
    groups = generate(idx, delta, params.rho, k)
    clustering = cluster(idx, params.min_pts, groups, k)

    n = len(ids)
    qs = None
    eps_next = eps
    initialized = state.eps_initialized
    sums = pair_sums(xy, params.dist_floor) if n >= 2 else None
    if n >= max(params.min_pts, 2):
        if not initialized:
            eps_next = initial_epsilon(
                ids, xy, eps, params.delta_eps, params.min_pts, init_max_iters, params.dist_floor, sums=sums
            )
            initialized = True
        else:
            probe = probe_epsilon(idx, clustering, params.delta_eps, params.min_pts, params.dist_floor, sums=sums)
            eps_next, qs = probe.eps_next, probe.qs_mid
    if qs is None and sums is not None:
        qs = float(modularity_many(None, [clustering.assignment], sums=sums)[0])

    events = map_clusters(state.prev_clustering, clustering)
    stability = nmi(state.prev_clustering, clustering) if state.prev_clustering is not None else None

    tracked = dict(state.tracked)
    for oid in ids:
        loc, t = snapshot.entries[oid]
        old = tracked.get(oid)
        tracked[oid] = TrackedObject(
            oid,
            adjustments[oid].r_opt,
            t,
            old.cur_loc if old is not None else None,
            old.cur_time if old is not None else None,
            groups.member_of[oid],
            k,
        )

    moved = sum(1 for a in adjustments.values() if a.moved)
    metrics = StepMetrics(
        qs, stability, time.perf_counter() - started, n, clustering.n_clusters, len(clustering.outliers), moved
    )
    new_state = EngineState(eps_next, k, tracked, groups, clustering, initialized)
    return new_state, StepResult(k, eps, eps_next, clustering, events, adjustments, metrics, t_start)


def snapshots(
    records: Iterable[PlanarRecord],
    delta_t: float,
    origin: float = 0.0,
    *,
    strict: bool = False,
    skipped: list | None = None,
) -> Iterator[Snapshot]:
    """Group a time-ordered record stream into consecutive snapshots, filling gaps with empty ones.

    Records that belong to an already emitted step are dropped (and appended
    to ``skipped``) unless ``strict``, in which case they raise.
    """
    current: int | None = None
    buffer: list[PlanarRecord] = []
    for rec in records:
        k = discretize_timestamp(rec.timestamp, origin, delta_t)
        if current is None:
            current = k
        if k < current:
            if strict:
                raise OrderingError(f"record of {rec.object_id!r} at t={rec.timestamp} arrived after step {k} closed")
            if skipped is not None:
                skipped.append(rec)
            continue
        if k > current:
            yield build_snapshot(buffer, current)
            for gap in range(current + 1, k):
                yield Snapshot(gap)
            current, buffer = k, []
        buffer.append(rec)
    if current is not None:
        yield build_snapshot(buffer, current)


def run(
    records: Iterable[PlanarRecord],
    params: Params,
    *,
    origin: float | None = None,
    gap_steps: int = 1,
    smoothing: bool = True,
    init_max_iters: int = 10,
    strict: bool = False,
) -> Iterator[StepResult]:
    """Fold ``step`` over the snapshots of a record stream.

    ``origin`` defaults to the first record's timestamp.
    """
    records = iter(records)
    first = next(records, None)
    if first is None:
        return
    if origin is None:
        origin = first.timestamp
    records = itertools.chain([first], records)
    state = EngineState.initial(params)
    for snap in snapshots(records, params.delta_t, origin, strict=strict):
        t0 = origin + snap.k * params.delta_t
        state, result = step(
            state, snap, params, gap_steps=gap_steps, smoothing=smoothing, init_max_iters=init_max_iters, t_start=t0
        )
        yield result


def raw_clustering(snapshot: Snapshot, eps: float, min_pts: int) -> Clustering:
    """Plain DBSCAN of a snapshot's raw locations."""
    ids, xy, _ = snapshot.arrays()
    return cluster(GridIndex(ids, xy, eps), min_pts, k=snapshot.k)
