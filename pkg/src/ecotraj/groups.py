"""Greedy seed selection and minimal-group assignment."""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import ParameterError
from .geo import ObjectId, canonical_order
from .grid import GridIndex, stencil


@dataclass(frozen=True)
class MinimalGroup:
    seed_id: ObjectId
    member_ids: frozenset
    active: bool

    def __len__(self):
        return len(self.member_ids)


@dataclass
class GroupSet:
    k: int
    groups: dict[ObjectId, MinimalGroup] = field(default_factory=dict)
    member_of: dict[ObjectId, ObjectId] = field(default_factory=dict)

    def active_groups(self) -> list[MinimalGroup]:
        return [self.groups[s] for s in canonical_order(self.groups) if self.groups[s].active]


@numba.njit(cache=True)
def _scan(x, y, key, cell_keys, offsets, delta):
    """Greedy seeds in position order, then each point's nearest seed within delta.

    Seeds are chained per cell, so a point only looks at seeds in its stencil
    cells. Ties on distance go to the smaller position.
    """
    n = x.shape[0]
    ncell = cell_keys.shape[0]
    d2max = delta * delta
    cell = np.searchsorted(cell_keys, key)
    head = np.full(ncell, -1, dtype=np.int64)
    nxt = np.full(n, -1, dtype=np.int64)
    is_seed = np.zeros(n, dtype=np.bool_)
    for o in range(n):
        free = True
        for off in offsets:
            c = np.searchsorted(cell_keys, key[o] + off)
            if c == ncell or cell_keys[c] != key[o] + off:
                continue
            s = head[c]
            while s >= 0:
                dx = x[o] - x[s]
                dy = y[o] - y[s]
                if dx * dx + dy * dy <= d2max:
                    free = False
                    break
                s = nxt[s]
            if not free:
                break
        if free:
            is_seed[o] = True
            nxt[o] = head[cell[o]]
            head[cell[o]] = o

    owner = np.full(n, -1, dtype=np.int64)
    for o in range(n):
        if is_seed[o]:
            owner[o] = o
            continue
        best, best_d2 = -1, np.inf
        for off in offsets:
            c = np.searchsorted(cell_keys, key[o] + off)
            if c == ncell or cell_keys[c] != key[o] + off:
                continue
            s = head[c]
            while s >= 0:
                dx = x[o] - x[s]
                dy = y[o] - y[s]
                d2 = dx * dx + dy * dy
                if d2 <= d2max and (d2 < best_d2 or (d2 == best_d2 and s < best)):
                    best, best_d2 = s, d2
                s = nxt[s]
        owner[o] = best
    return is_seed, owner


def seed_owners(idx: GridIndex, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Seed mask and, per point, the position of the seed it belongs to."""
    if len(idx) == 0:
        return np.zeros(0, dtype=bool), np.zeros(0, dtype=np.int64)
    offsets = np.array([di * idx.span + dj for di, dj in stencil(delta, idx.eps)], dtype=np.int64)
    return _scan(
        np.ascontiguousarray(idx.xy[:, 0]), np.ascontiguousarray(idx.xy[:, 1]),
        idx.key, idx.cell_keys, offsets, float(delta),
    )


def generate(idx: GridIndex, delta: float, rho: int, k: int = 0) -> GroupSet:
    """Minimal groups over the points of ``idx``, scanned in canonical id order.

    Every object lands in exactly one group; groups with fewer than ``rho``
    members are kept but flagged inactive.
    """
    if not 0 < delta <= idx.eps * (1 + 1e-12):
        raise ParameterError(f"delta={delta} must lie in (0, eps={idx.eps}]")
    _, owner = seed_owners(idx, delta)
    if len(owner) and (owner < 0).any():
        raise AssertionError("greedy scan left an object without a seed")
    return group_set_from_owner(idx.ids, owner, rho, k)


def group_set_from_owner(ids, owner: np.ndarray, rho: int, k: int) -> GroupSet:
    members: dict[int, list[int]] = {}
    for pos, s in enumerate(owner.tolist()):
        members.setdefault(s, []).append(pos)
    groups = {}
    member_of = {}
    for s, mem in members.items():
        sid = ids[s]
        mids = frozenset(ids[m] for m in mem)
        groups[sid] = MinimalGroup(sid, mids, len(mem) >= rho)
        for m in mids:
            member_of[m] = sid
    return GroupSet(k, groups, member_of)
