import math
import random

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from oracles import reference_smooth_group
from ecotraj.engine import snapshots
from ecotraj.errors import PreconditionError
from ecotraj.geo import Params, PlanarPoint, Snapshot, TrackedObject
from ecotraj.grid import build
from ecotraj.groups import generate
from ecotraj.smoothing import (
    Adjustment,
    normalized_costs,
    pair_cost,
    preprocess_member,
    preprocess_pivot,
    smooth_group,
    smooth_groups,
    smooth_snapshot,
    solve_adjustment,
)
from ecotraj.synthetic import two_blob_scenario

SPEED_TOL = 1e-9
xy = st.floats(-200, 200, allow_nan=False)


def obj(oid, cur, prev, dt=1.0, t0=0.0):
    return TrackedObject(oid, PlanarPoint(*cur), t0 + dt, PlanarPoint(*prev), t0)


# ---------------------------------------------------------------- pre-processing
def test_pivot_inside_disk_unchanged():
    assert preprocess_pivot((3.0, 4.0), (0.0, 0.0), 1.0, 10.0) == (3.0, 4.0)


def test_pivot_clamped_to_circle():
    assert preprocess_pivot((20.0, 0.0), (0.0, 0.0), 1.0, 10.0) == pytest.approx((10.0, 0.0))


def test_pivot_on_boundary_is_feasible():
    assert preprocess_pivot((0.0, 10.0), (0.0, 0.0), 1.0, 10.0) == (0.0, 10.0)


def test_member_inside_disk_unchanged():
    assert preprocess_member((1.0, 1.0), (0.0, 0.0), 1.0, 10.0, (40.0, 0.0)) == (1.0, 1.0)


def test_member_clamped_up_to_nearest_distance():
    assert preprocess_member((30.0, 0.0), (0.0, 0.0), 1.0, 10.0, (40.0, 0.0)) == pytest.approx((10.0, 0.0))


def test_member_clamped_down_to_farthest_distance():
    assert preprocess_member((-30.0, 0.0), (0.0, 0.0), 1.0, 10.0, (40.0, 0.0)) == pytest.approx((-10.0, 0.0))


def test_member_keeps_pivot_distance_when_reachable():
    # raw is 50 from the pivot and the disk around prev reaches distances [30, 50]
    out = preprocess_member((40.0, 50.0), (0.0, 0.0), 1.0, 10.0, (40.0, 0.0))
    assert math.dist(out, (40.0, 0.0)) == pytest.approx(50.0)
    assert math.dist(out, (0.0, 0.0)) <= 10.0 + 1e-9


def test_member_degenerate_pivot_equals_prev():
    assert preprocess_member((0.0, 30.0), (0.0, 0.0), 1.0, 10.0, (0.0, 0.0)) == pytest.approx((0.0, 10.0))
    assert preprocess_member((0.0, 0.0), (5.0, 0.0), 1.0, 1.0, (0.0, 0.0)) == pytest.approx((4.0, 0.0))


@given(xy, xy, xy, xy, xy, xy, st.floats(0.1, 80))
def test_member_preprocessing_is_feasible_and_distance_optimal(rx, ry, vx, vy, sx, sy, radius):
    out = preprocess_member((rx, ry), (vx, vy), 1.0, radius, (sx, sy))
    assert math.dist(out, (vx, vy)) <= radius * (1 + 1e-9) + 1e-9
    c = math.dist((sx, sy), (vx, vy))
    want = min(max(math.dist((rx, ry), (sx, sy)), max(0.0, c - radius)), c + radius)
    if math.dist((rx, ry), (vx, vy)) > radius:
        assert math.dist(out, (sx, sy)) == pytest.approx(want, abs=1e-6)


# ------------------------------------------------------------------------ solver
def test_worked_example_candidate_costs():
    o = obj(6, (25.0, 0.0), (25.0, 0.0), dt=1.0)
    adj, cands = solve_adjustment(o, (0.0, 0.0), 10.0, 2.1, 1e6)
    assert cands.candidates == (1.0, 2.0, 2.5)
    costs = [pair_cost(25.0, b, 10.0, 2.1) for b in cands.candidates]
    assert costs == pytest.approx([225.0, 235.0, 472.5])
    assert cands.b_opt_prime == 1.0 and cands.b_opt == 1.0
    assert adj.r_opt == pytest.approx((10.0, 0.0))
    assert adj.snapshot_cost == pytest.approx(225.0) and adj.historical_cost == 0.0


def test_skip_rule_returns_raw_location():
    o = obj(1, (3.0, 4.0), (3.0, 4.0))
    adj, _ = solve_adjustment(o, (0.0, 0.0), 5.0, 2.0, 10.0)
    assert adj.r_opt == (3.0, 4.0)
    assert adj.cost(2.0) == 0.0


def test_only_feasible_solution_is_raw():
    # speed disk touches the segment only at the observation itself
    o = obj(6, (25.0, 0.0), (52.0, 0.0), dt=3.0)
    adj, cands = solve_adjustment(o, (0.0, 0.0), 10.0, 2.1, 9.0)
    assert cands.candidates == (2.5,)
    assert cands.b_opt == 2.5
    assert adj.r_opt == (25.0, 0.0)


def test_unreachable_candidate_realized_on_speed_circle():
    # b = 2 is feasible but the on-segment point lies outside the disk
    o = obj(1, (30.0, 0.0), (28.0, 9.5), dt=1.0)
    adj, cands = solve_adjustment(o, (0.0, 0.0), 10.0, 50.0, 10.0)
    assert cands.candidates == (2.0, 3.0)
    assert cands.b_opt_prime == cands.b_opt == 2.0
    r = adj.r_opt
    assert math.dist(r, (28.0, 9.5)) <= 10.0 + 1e-9
    assert math.dist(r, (0.0, 0.0)) == pytest.approx(cands.b_opt * 10.0)


def test_missing_history_is_precondition_error():
    with pytest.raises(PreconditionError):
        solve_adjustment(TrackedObject(1, PlanarPoint(0, 0), 1.0), (0, 0), 1.0, 1.0, 1.0)


def test_speed_violation_is_precondition_error():
    with pytest.raises(PreconditionError):
        solve_adjustment(obj(1, (50.0, 0.0), (0.0, 0.0)), (100.0, 0.0), 1.0, 1.0, 1.0)


def _feasible_instance(data):
    sx, sy, vx, vy = (data.draw(xy) for _ in range(4))
    radius = data.draw(st.floats(0.5, 100))
    ang = data.draw(st.floats(0, 2 * math.pi))
    frac = data.draw(st.floats(0, 1))
    cur = (vx + radius * frac * math.cos(ang), vy + radius * frac * math.sin(ang))
    return cur, (vx, vy), radius, (sx, sy)


@settings(max_examples=300)
@given(st.data(), st.floats(0.5, 40), st.floats(0, 10))
def test_solver_respects_speed_and_candidates(data, delta, alpha):
    cur, prev, radius, pivot = _feasible_instance(data)
    adj, c = solve_adjustment(obj(1, cur, prev, dt=1.0), pivot, delta, alpha, radius)
    assert math.dist(adj.r_opt, prev) <= radius + 1e-9 * max(1.0, radius) + SPEED_TOL
    if math.dist(cur, pivot) > delta:
        assert c.b_opt_prime in c.candidates and c.b_opt in c.candidates
        best = min(pair_cost(math.dist(cur, pivot), b, delta, alpha) for b in c.candidates)
        assert pair_cost(math.dist(cur, pivot), c.b_opt_prime, delta, alpha) <= best + 1e-9 * max(1.0, best)


@settings(max_examples=200)
@given(st.data(), st.floats(0.5, 40))
def test_alpha_zero_never_moves(data, delta):
    cur, prev, radius, pivot = _feasible_instance(data)
    adj, _ = solve_adjustment(obj(1, cur, prev), pivot, delta, 0.0, radius)
    assert adj.r_opt == PlanarPoint(*cur)


@settings(max_examples=200)
@given(st.data(), st.floats(0.5, 40), st.floats(0, 10))
def test_unconstrained_agreement(data, delta, alpha):
    cur, prev, radius, pivot = _feasible_instance(data)
    d = math.dist(cur, pivot)
    assume(d > delta)
    _, free = solve_adjustment(obj(1, cur, cur), pivot, delta, alpha, 1e9)
    ring = free.b_opt_prime * delta
    spot = (pivot[0] + (cur[0] - pivot[0]) * ring / d, pivot[1] + (cur[1] - pivot[1]) * ring / d)
    _, c = solve_adjustment(obj(1, cur, prev), pivot, delta, alpha, radius)
    if math.dist(spot, prev) <= radius * (1 - 1e-9) and c.lambda1 <= 1:
        assert c.b_opt == c.b_opt_prime


# -------------------------------------------------------------------- group level
def test_central_member_becomes_pivot():
    members = [obj(4, (0.0, 0.0), (0.0, 0.0)), obj(5, (16.0, 0.0), (16.0, 0.0)), obj(6, (8.0, 0.0), (8.0, 0.0))]
    res = smooth_group(members, 10.0, 2.0, 100.0, seed_id=4)
    assert res.new_pivot_id == 6 and res.seed_id == 4
    assert res.adjustments[4].r_opt == (0.0, 0.0)
    assert res.adjustments[5].r_opt == (16.0, 0.0)
    assert res.total_cost == 0.0


def test_close_group_costs_nothing():
    members = [obj(i, (i * 1.0, 0.0), (i * 1.0, 0.5)) for i in (3, 1, 2)]
    res = smooth_group(members, 5.0, 1.0, 10.0)
    assert res.total_cost == 0.0 and res.new_pivot_id == 1
    assert all(a.r_opt == a.raw_loc for a in res.adjustments.values())


def test_symmetric_pair_picks_smaller_id():
    members = [obj("b", (30.0, 0.0), (30.0, 0.0)), obj("a", (0.0, 0.0), (0.0, 0.0))]
    res = smooth_group(members, 10.0, 1.0, 100.0)
    assert res.new_pivot_id == "a"
    assert res.adjustments["a"].r_opt == (0.0, 0.0)


def test_pivot_keeps_its_preprocessed_location():
    members = [obj(1, (0.0, 40.0), (0.0, 0.0)), obj(2, (3.0, 0.0), (3.0, 0.0))]
    res = smooth_group(members, 5.0, 1.0, 10.0)
    piv = res.adjustments[res.new_pivot_id]
    assert piv.r_opt == piv.source_loc == piv.pivot_loc
    assert piv.cost(1.0) == 0.0


def test_empty_group_rejected():
    with pytest.raises(PreconditionError):
        smooth_group([], 1.0, 1.0, 1.0)


def _random_group(rng, m):
    out = []
    center = rng.normal(scale=30, size=2)
    for i in range(m):
        prev = center + rng.normal(scale=12, size=2)
        dt = float(rng.uniform(0.5, 2.0))
        cur = prev + rng.normal(scale=float(rng.choice([3, 25])), size=2)
        out.append(TrackedObject(int(rng.integers(0, 10**6)) * 10 + i, PlanarPoint(*cur), 5.0 + dt, PlanarPoint(*prev), 5.0))
    return out


def test_compiled_group_matches_reference_and_early_exit_is_transparent():
    rng = np.random.default_rng(42)
    for _ in range(150):
        members = _random_group(rng, int(rng.integers(1, 9)))
        delta, alpha, mu = float(rng.uniform(3, 15)), float(rng.uniform(0, 5)), float(rng.uniform(2, 20))
        total, pivot, adjs = reference_smooth_group(members, delta, alpha, mu)
        fast = smooth_group(members, delta, alpha, mu)
        slow = smooth_group(members, delta, alpha, mu, early_exit=False)
        assert fast.new_pivot_id == slow.new_pivot_id == pivot
        assert fast.total_cost == slow.total_cost
        assert fast.total_cost == pytest.approx(total, rel=1e-9, abs=1e-9)
        for oid, a in adjs.items():
            assert fast.adjustments[oid].r_opt == slow.adjustments[oid].r_opt
            assert fast.adjustments[oid].r_opt == pytest.approx(a.r_opt, abs=1e-7)


def test_group_order_does_not_matter():
    rng = np.random.default_rng(7)
    groups = [(g, _random_group(rng, 5)) for g in range(6)]
    forward = smooth_groups(groups, 8.0, 1.5, 10.0)
    shuffled = groups[:]
    random.Random(1).shuffle(shuffled)
    backward = {r.seed_id: r for r in smooth_groups(shuffled, 8.0, 1.5, 10.0)}
    for r in forward:
        assert backward[r.seed_id].adjustments == r.adjustments


def test_speed_safety_of_group_smoothing():
    rng = np.random.default_rng(3)
    for _ in range(100):
        members = _random_group(rng, 6)
        mu = float(rng.uniform(1, 10))
        res = smooth_group(members, 6.0, 2.0, mu)
        for o in members:
            r = res.adjustments[o.object_id].r_opt
            limit = mu * (o.cur_time - o.prev_time)
            assert math.dist(r, o.prev_loc) <= limit + 1e-9 * max(1.0, limit) + SPEED_TOL


# ---------------------------------------------------------------- snapshot level
def _tracked_from(snapshot, k):
    return {oid: TrackedObject(oid, loc, t, None, None, None, k) for oid, (loc, t) in snapshot.entries.items()}


def test_no_previous_groups_means_identity():
    snap = Snapshot(0, {1: (PlanarPoint(0, 0), 0.0)})
    out = smooth_snapshot(snap, None, {}, Params())
    assert out[1] == Adjustment.identity(1, (0, 0))


def test_blob_scenario_second_step_moves_only_the_wanderers():
    sc = two_blob_scenario()
    p = sc.params
    s0, s1, _ = list(snapshots(sc.records, p.delta_t))
    groups = generate(build({i: s0.entries[i][0] for i in s0.ids()}, p.eps0), p.delta, p.rho, 0)
    out = smooth_snapshot(s1, groups, _tracked_from(s0, 0), p)
    moved = {oid for oid, a in out.items() if a.moved}
    assert moved == {6, 10}


def test_inactive_or_absent_members_contribute_nothing():
    sc = two_blob_scenario()
    p = sc.params
    s0, s1, _ = list(snapshots(sc.records, p.delta_t))
    groups = generate(build({i: s0.entries[i][0] for i in s0.ids()}, p.eps0), p.delta, 50, 0)
    out = smooth_snapshot(s1, groups, _tracked_from(s0, 0), p)
    assert not any(a.moved for a in out.values())
    # history older than the gap is ignored
    stale = {oid: TrackedObject(oid, loc, t, None, None, None, -5) for oid, (loc, t) in s0.entries.items()}
    groups = generate(build({i: s0.entries[i][0] for i in s0.ids()}, p.eps0), p.delta, p.rho, 0)
    out = smooth_snapshot(s1, groups, stale, p)
    assert not any(a.moved for a in out.values())


# ------------------------------------------------------------------ normalization
def test_normalized_cost_zero_cases():
    p = Params(eps0=20, delta=10, mu=5, delta_t=10)
    a = Adjustment(1, PlanarPoint(5, 0), PlanarPoint(5, 0), PlanarPoint(5, 0), 0, 0, PlanarPoint(0, 0), True)
    sc, tc = normalized_costs(a, p)
    assert sc == 0.0 and tc == 0.0
