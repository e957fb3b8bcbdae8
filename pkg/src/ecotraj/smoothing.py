"""Temporal smoothing of object locations within previous minimal groups.

Each object that belonged to an active group at the previous step is pulled
toward a pivot member of that group. For a single object the trade-off

    f(b) = (D - b*delta)**2 + alpha * (delta*(b - 1))**2

between staying at its observed location (``D`` is its distance to the pivot)
and staying ``b`` closeness-rings from the pivot is minimized over a small
discrete set of ``b`` values, then repaired to respect the speed limit. The
pivot of every group is re-elected each step as the member whose use as a
pivot costs the least.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import _smooth_kernel as _kernel
from .errors import ParameterError, PreconditionError
from .geo import ObjectId, Params, PlanarPoint, Snapshot, TrackedObject, canonical_order, id_sort_key
from .groups import GroupSet

SPEED_TOL = 1e-9


# --------------------------------------------------------------------------- geometry
def _dist(p, q) -> float:
    return math.hypot(p[0] - q[0], p[1] - q[1])


def _toward(origin, target, length) -> PlanarPoint:
    """Point at ``length`` from ``origin`` along the ray to ``target``."""
    d = _dist(origin, target)
    return PlanarPoint(origin[0] + (target[0] - origin[0]) * length / d,
                       origin[1] + (target[1] - origin[1]) * length / d)


def _circle_intersections(c1, r1: float, c2, r2: float) -> list[PlanarPoint]:
    d = _dist(c1, c2)
    if d == 0.0:
        return []
    a = (r1 * r1 - r2 * r2 + d * d) / (2.0 * d)
    h2 = r1 * r1 - a * a
    # tangency produces a tiny negative h2 through rounding
    h = math.sqrt(h2) if h2 > 0.0 else 0.0
    ux, uy = (c2[0] - c1[0]) / d, (c2[1] - c1[1]) / d
    mx, my = c1[0] + a * ux, c1[1] + a * uy
    if h == 0.0:
        return [PlanarPoint(mx, my)]
    return [PlanarPoint(mx - h * uy, my + h * ux), PlanarPoint(mx + h * uy, my - h * ux)]


def _nearest(points: Sequence[PlanarPoint], target) -> PlanarPoint:
    return min(points, key=lambda p: (_dist(p, target), p[0], p[1]))


def _into_disk(p: PlanarPoint, center, radius: float) -> PlanarPoint:
    """Undo rounding that leaves ``p`` a hair outside the disk."""
    d = _dist(p, center)
    if d <= radius:
        return p
    return _toward(center, p, radius) if d > 0 else p


# --------------------------------------------------------------------- pre-processing
def preprocess_pivot(raw, prev, dt: float, mu: float) -> PlanarPoint:
    """Closest point to ``raw`` within ``mu * dt`` of ``prev``."""
    if dt < 0:
        raise ParameterError(f"elapsed time must be non-negative, got {dt}")
    radius = mu * dt
    raw = PlanarPoint(*raw)
    if _dist(raw, prev) <= radius:
        return raw
    return _into_disk(_toward(prev, raw, radius), prev, radius)


def preprocess_member(raw, prev, dt: float, mu: float, pivot_loc) -> PlanarPoint:
    """Speed-feasible point whose distance to the pivot is as close as possible to raw's.

    Among feasible points at that best distance, the one nearest ``raw`` is
    returned (lexicographically smaller on a tie).
    """
    if dt < 0:
        raise ParameterError(f"elapsed time must be non-negative, got {dt}")
    radius = mu * dt
    raw = PlanarPoint(*raw)
    if _dist(raw, prev) <= radius:
        return raw
    pivot_loc = PlanarPoint(*pivot_loc)
    c = _dist(pivot_loc, prev)
    target = min(max(_dist(raw, pivot_loc), max(0.0, c - radius)), c + radius)
    if target == 0.0:
        return pivot_loc
    if c == 0.0:
        # circles are concentric; every point at `target` is feasible
        return _into_disk(_toward(pivot_loc, raw, target), prev, radius)
    if raw == pivot_loc:
        direction = prev
    else:
        direction = raw
    radial = _toward(pivot_loc, direction, target)
    if _dist(radial, prev) <= radius:
        return radial
    hits = _circle_intersections(pivot_loc, target, prev, radius)
    if not hits:
        return _into_disk(radial, prev, radius)
    return _into_disk(_nearest(hits, raw), prev, radius)


# ----------------------------------------------------------------------------- solver
@dataclass(frozen=True)
class SolverCandidates:
    """Discrete search space of the per-object solver.

    ``candidates`` holds the integers in ``[max(lambda1, 1), lambda2]`` plus
    ``lambda2`` itself, in ascending order.
    """

    lambda1: float
    lambda2: float
    int_lo: int
    int_hi: int
    b_opt_prime: float
    b_opt: float

    @property
    def candidates(self) -> tuple[float, ...]:
        ints = tuple(float(b) for b in range(self.int_lo, self.int_hi + 1))
        return ints if ints and ints[-1] == self.lambda2 else ints + (self.lambda2,)


@dataclass(frozen=True, slots=True)
class Adjustment:
    """Adjusted location of one object at one step.

    ``source_loc`` is the location the solver started from (after speed
    pre-processing); ``raw_loc`` is the observation. Costs are unnormalized.
    """

    object_id: ObjectId
    r_opt: PlanarPoint
    raw_loc: PlanarPoint
    source_loc: PlanarPoint
    snapshot_cost: float = 0.0
    historical_cost: float = 0.0
    pivot_loc: PlanarPoint | None = None
    smoothed: bool = False

    @property
    def moved(self) -> bool:
        return self.r_opt != self.raw_loc

    def cost(self, alpha: float) -> float:
        return self.snapshot_cost + alpha * self.historical_cost

    @classmethod
    def identity(cls, object_id, loc) -> "Adjustment":
        loc = PlanarPoint(*loc)
        return cls(object_id, loc, loc, loc)


def pair_cost(distance: float, b: float, delta: float, alpha: float) -> float:
    """Solver objective for an adjustment ``b * delta`` away from the pivot."""
    return (distance - b * delta) ** 2 + alpha * (delta * (b - 1.0)) ** 2


def _argmin_b(distance, lo_int, hi_int, lam2, delta, alpha) -> float:
    options = [lam2]
    if lo_int <= hi_int:
        # f is a convex quadratic in b, so the best integer neighbours its vertex
        vertex = (distance / delta + alpha) / (1.0 + alpha)
        for b in (math.floor(vertex), math.ceil(vertex), lo_int, hi_int):
            options.append(float(min(max(b, lo_int), hi_int)))
    return min(sorted(set(options)), key=lambda b: pair_cost(distance, b, delta, alpha))


def solve_adjustment(
    o: TrackedObject, pivot_loc, delta: float, alpha: float, mu: float
) -> tuple[Adjustment, SolverCandidates]:
    """Optimal speed-feasible adjustment of ``o.cur_loc`` toward ``pivot_loc``.

    ``o.cur_loc`` must already satisfy the speed limit relative to ``o.prev_loc``.
    """
    if o.prev_loc is None or o.prev_time is None:
        raise PreconditionError(f"object {o.object_id!r} has no previous location to smooth from")
    cur, prev = PlanarPoint(*o.cur_loc), PlanarPoint(*o.prev_loc)
    pivot_loc = PlanarPoint(*pivot_loc)
    radius = mu * (o.cur_time - o.prev_time)
    if _dist(cur, prev) > radius * (1 + 1e-9) + SPEED_TOL:
        raise PreconditionError(f"object {o.object_id!r} violates the speed limit; pre-process it first")

    distance = _dist(cur, pivot_loc)
    c = _dist(pivot_loc, prev)
    lam1 = (c - radius) / delta
    lam2 = distance / delta
    if distance <= delta:
        cands = SolverCandidates(lam1, lam2, 1, 0, lam2, lam2)
        return Adjustment(o.object_id, cur, cur, cur, 0.0, 0.0, pivot_loc, True), cands

    lo_int = math.ceil(max(lam1, 1.0))
    hi_int = math.floor(lam2)
    b_prime = _argmin_b(distance, lo_int, hi_int, lam2, delta, alpha)

    # b is feasible when some point at b*delta from the pivot lies in the speed disk
    tol = 1e-9 * max(1.0, c + radius)
    feas_lo = max(0.0, c - radius) - tol
    feas_hi = c + radius + tol

    def feasible(b):
        return feas_lo <= b * delta <= feas_hi

    if feasible(b_prime):
        b_opt = b_prime
    else:
        options = [lam2]
        first = max(lo_int, math.ceil(feas_lo / delta))
        last = min(hi_int, math.floor(feas_hi / delta))
        for b in (first, last, math.floor(b_prime), math.ceil(b_prime)):
            if first <= b <= last:
                options.append(float(b))
        options = [b for b in sorted(set(options)) if feasible(b)]
        b_opt = min(options, key=lambda b: abs(b - b_prime))

    ring = b_opt * delta
    r = _toward(pivot_loc, cur, ring)
    if _dist(r, prev) > radius + SPEED_TOL:
        hits = _circle_intersections(pivot_loc, ring, prev, radius)
        r = _nearest(hits, cur) if hits else r
        r = _into_disk(r, prev, radius)
    if b_opt == lam2:
        r = cur
    adj = Adjustment(
        o.object_id,
        r,
        cur,
        cur,
        _dist(r, cur) ** 2,
        (delta * (b_opt - 1.0)) ** 2,
        pivot_loc,
        True,
    )
    return adj, SolverCandidates(lam1, lam2, lo_int, hi_int, b_prime, b_opt)


# ------------------------------------------------------------------------ group level
@dataclass
class GroupSmoothingResult:
    seed_id: ObjectId | None
    new_pivot_id: ObjectId
    adjustments: dict[ObjectId, Adjustment] = field(default_factory=dict)
    total_cost: float = 0.0


def _check_members(ordered: Sequence[TrackedObject]) -> None:
    for o in ordered:
        if o.prev_loc is None or o.prev_time is None:
            raise PreconditionError(f"object {o.object_id!r} has no previous location to smooth from")
        if o.cur_time < o.prev_time:
            raise ParameterError(f"object {o.object_id!r}: elapsed time must be non-negative")


def smooth_groups(
    groups: Sequence[tuple[ObjectId | None, Sequence[TrackedObject]]],
    delta: float,
    alpha: float,
    mu: float,
    *,
    early_exit: bool = True,
) -> list[GroupSmoothingResult]:
    """``smooth_group`` for many disjoint groups in one compiled call."""
    ordered = []
    for _, members in groups:
        if not members:
            raise PreconditionError("cannot smooth an empty group")
        ordered.append(sorted(members, key=lambda m: id_sort_key(m.object_id)))
    flat = [o for grp in ordered for o in grp]
    _check_members(flat)
    if not flat:
        return []
    offsets = np.zeros(len(ordered) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([len(g) for g in ordered])
    cur = np.array([o.cur_loc for o in flat], dtype=float)
    prev = np.array([o.prev_loc for o in flat], dtype=float)
    radius = mu * np.array([o.cur_time - o.prev_time for o in flat], dtype=float)
    pivots, totals, r, src, sc, hc = _kernel.smooth_groups(
        cur, prev, radius, offsets, float(delta), float(alpha), early_exit
    )
    r_l = [PlanarPoint(x, y) for x, y in r.tolist()]
    src_l = [PlanarPoint(x, y) for x, y in src.tolist()]
    sc_l, hc_l, bounds = sc.tolist(), hc.tolist(), offsets.tolist()

    out = []
    for g, ((seed_id, _), p, total) in enumerate(zip(groups, pivots.tolist(), totals.tolist())):
        piv = r_l[p]
        adjustments = {}
        for n in range(bounds[g], bounds[g + 1]):
            o = flat[n]
            raw = o.cur_loc if type(o.cur_loc) is PlanarPoint else PlanarPoint(*o.cur_loc)
            adjustments[o.object_id] = Adjustment(o.object_id, r_l[n], raw, src_l[n], sc_l[n], hc_l[n], piv, True)
        out.append(GroupSmoothingResult(seed_id, flat[p].object_id, adjustments, total))
    return out


def smooth_group(
    members: Sequence[TrackedObject],
    delta: float,
    alpha: float,
    mu: float,
    *,
    seed_id: ObjectId | None = None,
    early_exit: bool = True,
) -> GroupSmoothingResult:
    """Elect the cheapest pivot of a group and adjust every other member toward it.

    ``members`` carry their raw current location in ``cur_loc`` and a previous
    location. Pivots are tried in id order and ties keep the earlier one. With
    ``early_exit`` a pivot is abandoned once its running cost reaches the best
    complete cost so far, which never changes the outcome.
    """
    return smooth_groups([(seed_id, members)], delta, alpha, mu, early_exit=early_exit)[0]


def smoothing_members(
    snapshot: Snapshot,
    prev_groups: GroupSet | None,
    tracked: Mapping[ObjectId, TrackedObject],
    gap_steps: int = 1,
) -> list[tuple[ObjectId, list[TrackedObject]]]:
    """Per active previous group, its members present now with a usable history.

    Returned views hold the raw current location in ``cur_loc`` and the last
    adjusted location in ``prev_loc``.
    """
    if prev_groups is None:
        return []
    out = []
    for group in prev_groups.active_groups():
        views = []
        for oid in canonical_order(group.member_ids):
            entry = snapshot.entries.get(oid)
            hist = tracked.get(oid)
            if entry is None or hist is None or snapshot.k - hist.last_step > gap_steps:
                continue
            if entry[1] < hist.cur_time:
                continue
            views.append(TrackedObject(oid, entry[0], entry[1], hist.cur_loc, hist.cur_time, group.seed_id, snapshot.k))
        if views:
            out.append((group.seed_id, views))
    return out


def smooth_snapshot(
    snapshot: Snapshot,
    prev_groups: GroupSet | None,
    tracked: Mapping[ObjectId, TrackedObject],
    params: Params,
    *,
    gap_steps: int = 1,
    delta: float | None = None,
) -> dict[ObjectId, Adjustment]:
    """Adjustments for every object of the snapshot.

    Objects outside every active previous group keep their raw location.
    Groups are disjoint, so they are smoothed independently in seed order.
    """
    delta = params.delta if delta is None else delta
    result = {oid: Adjustment.identity(oid, loc) for oid, (loc, _) in snapshot.entries.items()}
    for res in smooth_groups(smoothing_members(snapshot, prev_groups, tracked, gap_steps), delta, params.alpha, params.mu):
        result.update(res.adjustments)
    return result


def normalized_costs(adj: Adjustment, params: Params, delta: float | None = None) -> tuple[float, float]:
    """Snapshot and historical cost scaled by ``4*mu*delta_t + delta``; both lie in [0, 1)."""
    delta = params.delta if delta is None else delta
    scale = 4.0 * params.mu * params.delta_t + delta
    sc = (_dist(adj.r_opt, adj.source_loc) / scale) ** 2
    if adj.pivot_loc is None:
        return sc, 0.0
    rings = math.ceil(_dist(adj.r_opt, adj.pivot_loc) / delta - 1e-9) - 1
    tc = (max(rings, 0) / (scale / delta)) ** 2
    return sc, tc
