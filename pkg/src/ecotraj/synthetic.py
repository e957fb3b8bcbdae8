"""Seeded synthetic streams of co-moving groups with one-step deviations."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .geo import Params, PlanarRecord


@dataclass(frozen=True)
class GeneratorSpec:
    group_count: int = 10
    objects_per_group: int = 20
    steps: int = 100
    group_speed: float = 10.0
    spread: float = 150.0
    deviation_p: float = 0.05
    deviation_magnitude: float = 900.0
    seed: int = 0
    delta_t: float = 10.0
    separation: float = 5000.0
    jitter_fraction: float = 0.1

    def __post_init__(self):
        if self.group_count < 0 or self.objects_per_group < 0 or self.steps < 0:
            raise ParameterError("counts must be non-negative")
        if not 0.0 <= self.deviation_p <= 1.0:
            raise ParameterError(f"deviation_p must lie in [0, 1], got {self.deviation_p}")
        if self.spread < 0 or self.deviation_magnitude < 0 or self.group_speed < 0:
            raise ParameterError("spread, speed and deviation magnitude must be non-negative")
        if not self.delta_t > 0:
            raise ParameterError("delta_t must be positive")
        if not 0.0 <= self.jitter_fraction <= 1.0:
            raise ParameterError("jitter_fraction must lie in [0, 1]")


def _in_disk(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    r = radius * np.sqrt(rng.random(n))
    a = rng.random(n) * 2.0 * math.pi
    return np.column_stack([r * np.cos(a), r * np.sin(a)])


def generate_synthetic(spec: GeneratorSpec) -> list[PlanarRecord]:
    """Records ordered by timestamp, one per object per step.

    Group ``g`` starts on a square lattice with pitch ``separation`` and keeps a
    random heading. Each object holds a fixed offset inside the spread disk and
    adds a small per-step jitter, so it never leaves ``spread`` of its center.
    A deviating object is displaced by ``deviation_magnitude`` in a random
    direction for that step only. Object ids are ``g * objects_per_group + i``;
    timestamps fall in the first half of each step, the very first one at 0.
    """
    rng = np.random.default_rng(spec.seed)
    g, m = spec.group_count, spec.objects_per_group
    side = max(1, math.ceil(math.sqrt(g)))
    origin = np.array([[(n % side) * spec.separation, (n // side) * spec.separation] for n in range(g)], dtype=float)
    heading = rng.random(g) * 2.0 * math.pi
    velocity = spec.group_speed * np.column_stack([np.cos(heading), np.sin(heading)])
    jitter = spec.spread * spec.jitter_fraction
    base = _in_disk(rng, g * m, spec.spread - jitter).reshape(g, m, 2) if g * m else np.empty((g, m, 2))

    records: list[PlanarRecord] = []
    for k in range(spec.steps):
        t_step = k * spec.delta_t
        center = origin + velocity * t_step
        noise = _in_disk(rng, g * m, jitter).reshape(g, m, 2) if g * m else np.empty((g, m, 2))
        pos = center[:, None, :] + base + noise
        deviate = rng.random((g, m)) < spec.deviation_p
        angle = rng.random((g, m)) * 2.0 * math.pi
        shift = spec.deviation_magnitude * np.stack([np.cos(angle), np.sin(angle)], axis=-1)
        pos = np.where(deviate[..., None], pos + shift, pos)
        offsets = rng.random((g, m)) * 0.5 * spec.delta_t
        if k == 0 and offsets.size:
            # the stream origin defaults to the first timestamp, so pin it to the step boundary
            offsets -= offsets.min()
        step_recs = [
            PlanarRecord(gi * m + i, t_step + float(offsets[gi, i]), float(pos[gi, i, 0]), float(pos[gi, i, 1]))
            for gi in range(g)
            for i in range(m)
        ]
        step_recs.sort(key=lambda r: r.timestamp)
        records.extend(step_recs)
    return records


# Two blobs of six objects. At the middle step o6 and o10 wander toward the
# fringe object o12 and, under plain DBSCAN, form a third cluster with it.
_BLOB_STEADY = {
    1: (0.0, 0.0), 2: (4.0, 3.0), 3: (-4.0, 3.0),
    4: (0.0, -12.0), 5: (4.0, -15.0), 6: (-4.0, -15.0),
    7: (100.0, 0.0), 8: (105.0, 4.0), 9: (105.0, -4.0),
    10: (91.0, 0.0), 11: (103.0, 0.0), 12: (78.0, 0.0),
}
_BLOB_DEVIATED = {6: (70.0, -5.0), 10: (70.0, 5.0)}


@dataclass(frozen=True)
class Scenario:
    records: list[PlanarRecord]
    params: Params
    steps: int


def two_blob_scenario() -> Scenario:
    """Three-step, twelve-object two-blob stream with a one-step disturbance.

    With the returned parameters plain DBSCAN gives 2, 3 and 2 clusters while
    the smoothed pipeline keeps the two blobs intact at every step.
    """
    params = Params(eps0=15.0, min_pts=3, delta=10.0, rho=3, alpha=20.0, mu=10.0, delta_t=10.0, delta_eps=1e-3)
    records = []
    for k in range(3):
        layout = dict(_BLOB_STEADY)
        if k == 1:
            layout.update(_BLOB_DEVIATED)
        for oid in sorted(layout):
            x, y = layout[oid]
            records.append(PlanarRecord(oid, k * params.delta_t, x, y))
    return Scenario(records, params, 3)
