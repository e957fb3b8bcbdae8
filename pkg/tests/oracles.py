"""Slow, obviously-correct reference implementations used only by the tests."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import replace

import numpy as np

from ecotraj.geo import PlanarPoint, id_sort_key
from ecotraj.smoothing import Adjustment, preprocess_member, preprocess_pivot, solve_adjustment


def brute_neighbors(ids, xy, p, h):
    return {oid for oid, q in zip(ids, xy) if math.hypot(q[0] - p[0], q[1] - p[1]) <= h}


def brute_pairs(xy, h):
    out = set()
    n = len(xy)
    for i in range(n):
        for j in range(i + 1, n):
            if math.hypot(xy[i][0] - xy[j][0], xy[i][1] - xy[j][1]) <= h:
                out.add((i, j))
    return out


def naive_dbscan(xy, eps, min_pts):
    """Textbook DBSCAN: O(n^2) neighbourhoods, BFS from cores in index order.

    Returns (core mask, labels) with -1 for noise.
    """
    xy = np.asarray(xy, dtype=float)
    n = len(xy)
    d = np.sqrt(((xy[:, None, :] - xy[None, :, :]) ** 2).sum(-1))
    nbrs = [np.nonzero(d[i] <= eps)[0] for i in range(n)]
    core = np.array([len(nb) >= min_pts for nb in nbrs], dtype=bool)
    labels = np.full(n, -1)
    c = 0
    for i in range(n):
        if not core[i] or labels[i] >= 0:
            continue
        labels[i] = c
        queue = deque([i])
        while queue:
            u = queue.popleft()
            if not core[u]:
                continue
            for v in nbrs[u]:
                if labels[v] < 0:
                    labels[v] = c
                    if core[v]:
                        queue.append(v)
        c += 1
    return core, labels


def naive_modularity(xy, labels, floor=1e-3):
    xy = np.asarray(xy, dtype=float)
    n = len(xy)
    labels = list(labels)
    ts = 0.0
    k = max(labels) + 1 if labels else 0
    intra = [0.0] * k
    inter = [0.0] * k
    for i in range(n):
        for j in range(i + 1, n):
            s = 1.0 / max(math.hypot(*(xy[i] - xy[j])), floor)
            ts += s
            a, b = labels[i], labels[j]
            if a < 0 or b < 0:
                continue
            if a == b:
                intra[a] += s
            else:
                inter[a] += s
                inter[b] += s
    return sum(intra[c] / ts - (inter[c] / ts) ** 2 for c in range(k))


def reference_smooth_group(members, delta, alpha, mu):
    """Pivot election without early exit, built on the scalar solver."""
    ordered = sorted(members, key=lambda m: id_sort_key(m.object_id))
    best = None
    for pivot in ordered:
        piv = preprocess_pivot(pivot.cur_loc, pivot.prev_loc, pivot.cur_time - pivot.prev_time, mu)
        adjs = {pivot.object_id: Adjustment(pivot.object_id, piv, PlanarPoint(*pivot.cur_loc), piv, 0.0, 0.0, piv, True)}
        total = 0.0
        for o in ordered:
            if o is pivot:
                continue
            start = preprocess_member(o.cur_loc, o.prev_loc, o.cur_time - o.prev_time, mu, piv)
            adj, _ = solve_adjustment(replace(o, cur_loc=start), piv, delta, alpha, mu)
            adjs[o.object_id] = replace(adj, raw_loc=PlanarPoint(*o.cur_loc))
            total += adj.cost(alpha)
        if best is None or total < best[0]:
            best = (total, pivot.object_id, adjs)
    return best
