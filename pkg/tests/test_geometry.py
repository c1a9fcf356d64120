import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from scenelang import geometry as geo
from scenelang.scenario import Lane, MapLayout, TrajectoryState

finite = st.floats(-1e4, 1e4, allow_nan=False)
angle = st.floats(-179.999, 180.0, allow_nan=False)


def test_ego_frame_examples():
    r = geo.ego_frame((10.0, 0.0), (0.0, 0.0, 0.0))
    assert (r.longitudinal, r.lateral) == pytest.approx((10.0, 0.0))
    r = geo.ego_frame((0.0, 5.0), (0.0, 0.0, 0.0))
    assert (r.longitudinal, r.lateral) == pytest.approx((0.0, 5.0))
    r = geo.ego_frame((1.0, 1.0), (1.0, 0.0, 90.0))
    assert (r.longitudinal, r.lateral) == pytest.approx((1.0, 0.0))


@given(finite, finite, finite, finite, angle)
def test_ego_frame_preserves_distance(px, py, ex, ey, h):
    r = geo.ego_frame((px, py), (ex, ey, h))
    assert r.distance == pytest.approx(math.hypot(px - ex, py - ey), abs=1e-6)


@pytest.mark.parametrize(
    "ego,other,want",
    [(0, 10, "same"), (0, 90, "left"), (0, -90, "right"), (0, 180, "opposite"), (170, -170, "same"), (0, 45, "left"), (0, -45, "right"), (0, 135, "opposite")],
)
def test_heading_relation(ego, other, want):
    assert geo.heading_relation(ego, other) == want


FLIP = {"same": "same", "opposite": "opposite", "left": "right", "right": "left"}


@given(angle, angle)
def test_heading_relation_antisymmetric(a, b):
    assert geo.heading_relation(b, a) == FLIP[geo.heading_relation(a, b)]


def _states(speeds, dt=0.1):
    return [TrajectoryState(t=k * dt, x=0.0, y=0.0, heading=0.0, speed=v) for k, v in enumerate(speeds)]


def test_motion_status():
    assert geo.motion_status(_states([5 + 0.1 * k for k in range(21)]), 10) == "accelerating"
    assert geo.motion_status(_states([5 - 0.1 * k for k in range(21)]), 10) == "decelerating"
    assert geo.motion_status(_states([5.0] * 21), 10) == "constant"
    assert geo.motion_status(_states([0.2] * 21), 10) == "not_moving"
    # 0.2 m/s^2 is under the threshold
    assert geo.motion_status(_states([5 + 0.02 * k for k in range(21)]), 10) == "constant"


def test_motion_status_needs_samples():
    with pytest.raises(geo.InsufficientSamples):
        geo.motion_status(_states([5.0]), 0)


def _road(n):
    return MapLayout(lanes=tuple(Lane(f"L{i}", "g", i, ((-100.0, -3.5 * (i - 1)), (100.0, -3.5 * (i - 1)))) for i in range(1, n + 1)))


def test_lane_placement_counts_from_nearer_edge():
    mp = _road(3)
    assert geo.lane_placement((0.0, 0.0), mp, 0.0) == geo.LanePlacement(1, "from_left", 3, "L1", "g")
    right = geo.lane_placement((0.0, -7.0), mp, 0.0)
    assert (right.index, right.side) == (1, "from_right")
    mid = geo.lane_placement((0.0, -3.5), mp, 0.0)
    assert mid.from_left == 2 and mid.from_right == 2


def test_lane_placement_filters():
    mp = _road(2)
    assert geo.lane_placement((0.0, 10.0), mp) is None  # too far off
    assert geo.lane_placement((0.0, 0.0), mp, 180.0) is None  # running against it
    assert geo.lane_placement((150.0, 0.0), mp) is None  # past the end


@given(st.integers(1, 6), st.data())
def test_lane_index_identity(n, data):
    k = data.draw(st.integers(1, n))
    pl = geo.lane_placement((0.0, -3.5 * (k - 1)), _road(n), 0.0)
    assert pl.from_left + pl.from_right == pl.total + 1
    assert pl.from_left == k


def test_lane_identity_on_fixtures(generated):
    for s, _ in generated.values():
        for a in s.agents:
            for stt in a.states[:: 10]:
                if not stt.valid:
                    continue
                pl = geo.lane_placement(stt.position, s.map, stt.heading)
                if pl is not None:
                    assert pl.from_left + pl.from_right == pl.total + 1


def test_intersection_phase_on_appendix(generated):
    s, _ = generated["appendix_replica"]
    inter = geo.related_intersection(s)
    ph = geo.intersection_phase(s.ego, s.map, s.current_index, intersection=inter)
    assert ph.value == "heading_towards"


def test_no_intersection_raises(generated):
    s, _ = generated["follow_straight"]
    with pytest.raises(geo.NoIntersection):
        geo.intersection_phase(s.ego, s.map, s.current_index)


def test_future_snapshot_horizon(generated):
    s, _ = generated["stop_sign_4way"]
    snap = geo.future_snapshot(s)
    assert s.ego_id in snap
    with pytest.raises(geo.HorizonUnavailable):
        geo.future_snapshot(s, horizon_s=100.0)


def test_point_in_polygon():
    sq = ((0, 0), (2, 0), (2, 2), (0, 2))
    assert geo.point_in_polygon((1, 1), sq)
    assert not geo.point_in_polygon((3, 1), sq)


def test_zero_horizon_snapshot_is_current(generated):
    for s, _ in generated.values():
        now = geo.snapshot(s, s.current_index)
        zero = geo.future_snapshot(s, 0.0)
        assert {k: (v.speed, v.heading, v.phase) for k, v in zero.items()} == {k: (v.speed, v.heading, v.phase) for k, v in now.items()}
