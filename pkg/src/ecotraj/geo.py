"""Planar geometry, time discretization and snapshot assembly."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable, NamedTuple, Sequence

import numpy as np

from .errors import AssignmentError, OrderingError, ParameterError

EARTH_RADIUS_M = 6_371_000.0

ObjectId = Hashable


class PlanarPoint(NamedTuple):
    """Location in meters on a local tangent plane (x east, y north)."""

    x: float
    y: float


@dataclass(frozen=True, slots=True)
class GpsRecord:
    """A raw geographic fix: seconds since origin plus lat/lon in degrees."""

    object_id: ObjectId
    timestamp: float
    lat: float
    lon: float

    def __post_init__(self):
        if not self.timestamp >= 0:
            raise ParameterError(f"timestamp must be non-negative, got {self.timestamp}")
        if not -90.0 <= self.lat <= 90.0:
            raise ParameterError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ParameterError(f"longitude out of range: {self.lon}")


@dataclass(frozen=True, slots=True)
class PlanarRecord:
    """A fix whose location is already planar meters."""

    object_id: ObjectId
    timestamp: float
    x: float
    y: float

    @property
    def point(self) -> PlanarPoint:
        return PlanarPoint(self.x, self.y)


@dataclass(slots=True)
class TrackedObject:
    """Cross-step state of one object.

    ``cur_loc`` is the adjusted location at the step the object was last seen
    (``last_step``); ``prev_loc``/``prev_time`` describe the step before it.
    """

    object_id: ObjectId
    cur_loc: PlanarPoint
    cur_time: float
    prev_loc: PlanarPoint | None = None
    prev_time: float | None = None
    prev_group: ObjectId | None = None
    last_step: int = 0


@dataclass(frozen=True)
class Params:
    """Algorithm parameters. Distances in meters, speed in m/s, time in seconds."""

    eps0: float = 500.0
    min_pts: int = 8
    delta: float = 400.0
    rho: int = 6
    alpha: float = 0.9
    mu: float = 30.0
    delta_t: float = 10.0
    delta_eps: float = 50.0
    dist_floor: float = 1e-3

    def __post_init__(self):
        for name in ("eps0", "delta", "mu", "delta_t", "delta_eps", "dist_floor"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ParameterError(f"{name} must be positive and finite, got {value}")
        if self.min_pts < 1 or self.rho < 1:
            raise ParameterError("min_pts and rho must be positive integers")
        if not (self.alpha >= 0 and math.isfinite(self.alpha)):
            raise ParameterError(f"alpha must be non-negative, got {self.alpha}")
        if self.delta > self.eps0:
            raise ParameterError(f"delta ({self.delta}) must not exceed eps0 ({self.eps0})")

    @property
    def normalizer(self) -> float:
        """Upper bound ``4 * mu * delta_t + delta`` used to scale costs into [0, 1)."""
        return 4.0 * self.mu * self.delta_t + self.delta


def discretize_timestamp(t: float, origin: float, delta_t: float) -> int:
    """Index of the ``delta_t``-long interval containing ``t``."""
    if delta_t <= 0:
        raise ParameterError(f"delta_t must be positive, got {delta_t}")
    if t < origin:
        raise OrderingError(f"timestamp {t} precedes stream origin {origin}")
    return int(math.floor((t - origin) / delta_t))


def project_to_plane(lat: float, lon: float, ref: tuple[float, float]) -> PlanarPoint:
    """Equirectangular projection around ``ref = (lat0, lon0)``."""
    lat0, lon0 = ref
    x = EARTH_RADIUS_M * math.radians(lon - lon0) * math.cos(math.radians(lat0))
    y = EARTH_RADIUS_M * math.radians(lat - lat0)
    return PlanarPoint(x, y)


def to_planar(records: Iterable[GpsRecord], ref: tuple[float, float] | None = None) -> list[PlanarRecord]:
    """Project geographic records once, with the first record as default reference."""
    out = []
    for rec in records:
        if ref is None:
            ref = (rec.lat, rec.lon)
        p = project_to_plane(rec.lat, rec.lon, ref)
        out.append(PlanarRecord(rec.object_id, rec.timestamp, p.x, p.y))
    return out


def euclidean_distance(p: Sequence[float], q: Sequence[float]) -> float:
    return math.hypot(p[0] - q[0], p[1] - q[1])


def id_sort_key(object_id):
    """Canonical ordering: integers numerically, then everything else as text."""
    if isinstance(object_id, (int, np.integer)) and not isinstance(object_id, bool):
        return (0, int(object_id), "")
    return (1, 0, str(object_id))


def canonical_order(ids: Iterable[ObjectId]) -> list[ObjectId]:
    return sorted(ids, key=id_sort_key)


@dataclass
class Snapshot:
    """Objects active at step ``k``: one ``(point, timestamp)`` entry per object."""

    k: int
    entries: dict[ObjectId, tuple[PlanarPoint, float]] = field(default_factory=dict)

    def __len__(self):
        return len(self.entries)

    def ids(self) -> list[ObjectId]:
        return canonical_order(self.entries)

    def arrays(self) -> tuple[list[ObjectId], np.ndarray, np.ndarray]:
        """Ids in canonical order with matching ``(n, 2)`` locations and times."""
        ids = self.ids()
        xy = np.array([self.entries[i][0] for i in ids], dtype=float).reshape(-1, 2)
        t = np.array([self.entries[i][1] for i in ids], dtype=float)
        return ids, xy, t


def build_snapshot(
    records: Iterable[PlanarRecord],
    k: int,
    *,
    delta_t: float | None = None,
    origin: float = 0.0,
) -> Snapshot:
    """Keep each object's earliest record of the step; arrival order breaks ties.

    When ``delta_t`` is given every record is checked against step ``k``.
    """
    best: dict[ObjectId, tuple[PlanarPoint, float]] = {}
    for rec in records:
        if delta_t is not None and discretize_timestamp(rec.timestamp, origin, delta_t) != k:
            raise AssignmentError(f"record of {rec.object_id!r} at t={rec.timestamp} is not in step {k}")
        held = best.get(rec.object_id)
        if held is None or rec.timestamp < held[1]:
            best[rec.object_id] = (PlanarPoint(float(rec.x), float(rec.y)), float(rec.timestamp))
    return Snapshot(k, best)
