"""Ego-centric geometric and semantic features of agents in a scenario."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

from .scenario import (
    FUTURE_HORIZON_S,
    Agent,
    Area,
    Intersection,
    MapLayout,
    Point,
    Scenario,
    SignalState,
    TrajectoryState,
    normalize_heading,
)

Pose = tuple[float, float, float]  # x, y, heading in degrees

HeadingLabel = Literal["same", "opposite", "left", "right"]
MotionLabel = Literal["accelerating", "decelerating", "constant", "not_moving"]
PhaseLabel = Literal["heading_towards", "inside", "exiting", "departing", "same_side", "opposite_side"]
FeatureKind = Literal["crosswalk", "stop_sign", "speed_bump"]

NOT_MOVING_SPEED = 0.5  # m/s
ACCEL_THRESHOLD = 0.3  # m/s^2
ACCEL_WINDOW_S = 1.0
LANE_MATCH_M = 3.0
APPROACH_RANGE_M = 50.0
DEPARTING_LOOKBACK_S = 3.0
PROXIMITY_HORIZON_M = 30.0
RELATED_INTERSECTION_M = 100.0


class GeometryError(ValueError):
    pass


class InsufficientSamples(GeometryError):
    pass


class NoIntersection(GeometryError):
    pass


class HorizonUnavailable(GeometryError):
    pass


@dataclass(frozen=True)
class RelPos:
    longitudinal: float  # + in front
    lateral: float  # + to the left

    @property
    def distance(self) -> float:
        return math.hypot(self.longitudinal, self.lateral)


@dataclass(frozen=True)
class LanePlacement:
    index: int
    side: Literal["from_left", "from_right"]
    total: int
    lane_id: str
    group: str

    @property
    def from_left(self) -> int:
        return self.index if self.side == "from_left" else self.total + 1 - self.index

    @property
    def from_right(self) -> int:
        return self.index if self.side == "from_right" else self.total + 1 - self.index


@dataclass(frozen=True)
class IntersectionPhase:
    value: PhaseLabel
    distance_to_center: float
    side: Literal["same", "opposite"] | None = None  # None while inside


def pose_of(state: TrajectoryState) -> Pose:
    return (state.x, state.y, state.heading)


def ego_frame(point: Point, ego_pose: Pose) -> RelPos:
    """Express a global point in the ego frame (x forward, y left)."""
    dx, dy = point[0] - ego_pose[0], point[1] - ego_pose[1]
    h = math.radians(ego_pose[2])
    c, s = math.cos(h), math.sin(h)
    return RelPos(longitudinal=dx * c + dy * s, lateral=-dx * s + dy * c)


def heading_relation(ego_heading: float, other_heading: float) -> HeadingLabel:
    d = normalize_heading(other_heading - ego_heading)
    if abs(d) < 45.0:
        return "same"
    if 45.0 <= d < 135.0:
        return "left"
    if -135.0 < d <= -45.0:
        return "right"
    return "opposite"


def motion_status(states: Sequence[TrajectoryState], current: int) -> MotionLabel:
    """Classify motion at ``states[current]`` from a centered 1 s speed window."""
    cur = states[current]
    half = ACCEL_WINDOW_S / 2.0
    window = [st for st in states if st.valid and abs(st.t - cur.t) <= half + 1e-9]
    if not cur.valid or len(window) < 2:
        raise InsufficientSamples(f"need >= 2 valid samples around t={cur.t:g}")
    if cur.speed < NOT_MOVING_SPEED:
        return "not_moving"
    n = len(window)
    mt = sum(st.t for st in window) / n
    mv = sum(st.speed for st in window) / n
    var = sum((st.t - mt) ** 2 for st in window)
    slope = sum((st.t - mt) * (st.speed - mv) for st in window) / var
    if slope > ACCEL_THRESHOLD:
        return "accelerating"
    if slope < -ACCEL_THRESHOLD:
        return "decelerating"
    return "constant"


# ---------------------------------------------------------------------------
# polyline helpers


@dataclass(frozen=True)
class _Projection:
    distance: float
    arc: float  # arc length of the foot point from the polyline start
    heading: float  # tangent direction at the foot point (deg)
    clamped: bool  # foot point fell on an end of the polyline


def _project(p: Point, line: Sequence[Point]) -> _Projection:
    best = None
    acc = 0.0
    last = len(line) - 2
    for i, ((ax, ay), (bx, by)) in enumerate(zip(line, line[1:])):
        dx, dy = bx - ax, by - ay
        seg = math.hypot(dx, dy)
        if seg == 0:
            continue
        u = ((p[0] - ax) * dx + (p[1] - ay) * dy) / (seg * seg)
        clamped = (u < 0 and i == 0) or (u > 1 and i == last)
        uc = min(1.0, max(0.0, u))
        d = math.hypot(p[0] - ax - uc * dx, p[1] - ay - uc * dy)
        if best is None or d < best.distance - 1e-12:
            best = _Projection(d, acc + uc * seg, math.degrees(math.atan2(dy, dx)), clamped)
        acc += seg
    if best is None:
        return _Projection(math.hypot(p[0] - line[0][0], p[1] - line[0][1]), 0.0, 0.0, True)
    return best


def _polyline_length(line: Sequence[Point]) -> float:
    return sum(math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(line, line[1:]))


def _point_at(line: Sequence[Point], arc: float) -> Point:
    acc = 0.0
    for a, b in zip(line, line[1:]):
        seg = math.hypot(b[0] - a[0], b[1] - a[1])
        if seg and acc + seg >= arc:
            u = (arc - acc) / seg
            return (a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1]))
        acc += seg
    return line[-1]


def point_in_polygon(p: Point, poly: Sequence[Point]) -> bool:
    inside = False
    n = len(poly)
    for i in range(n):
        (x1, y1), (x2, y2) = poly[i], poly[(i + 1) % n]
        if (y1 > p[1]) != (y2 > p[1]):
            x = x1 + (p[1] - y1) * (x2 - x1) / (y2 - y1)
            if p[0] < x:
                inside = not inside
    return inside


def _segment_hit(a: Point, b: Point, c: Point, d: Point) -> float | None:
    """Parameter along a->b where it crosses c->d, or None."""
    rx, ry = b[0] - a[0], b[1] - a[1]
    sx, sy = d[0] - c[0], d[1] - c[1]
    den = rx * sy - ry * sx
    if den == 0:
        return None
    qx, qy = c[0] - a[0], c[1] - a[1]
    t = (qx * sy - qy * sx) / den
    u = (qx * ry - qy * rx) / den
    if 0.0 <= t <= 1.0 and 0.0 <= u <= 1.0:
        return t
    return None


def _first_entry(path: Sequence[Point], poly: Sequence[Point]) -> float | None:
    """Arc length along ``path`` at which it first touches the polygon."""
    if point_in_polygon(path[0], poly):
        return 0.0
    acc = 0.0
    for a, b in zip(path, path[1:]):
        seg = math.hypot(b[0] - a[0], b[1] - a[1])
        hits = [
            t for i in range(len(poly)) if (t := _segment_hit(a, b, poly[i], poly[(i + 1) % len(poly)])) is not None
        ]
        if hits:
            return acc + min(hits) * seg
        acc += seg
    return None


# ---------------------------------------------------------------------------
# lanes


def _lane_candidates(pos: Point, heading: float | None, mp: MapLayout):
    for lane in mp.lanes:
        pr = _project(pos, lane.centerline)
        if pr.clamped or pr.distance > LANE_MATCH_M:
            continue
        if heading is not None and abs(normalize_heading(heading - pr.heading)) > 90.0:
            continue
        yield pr.distance, lane, pr


def lane_placement(agent_pos: Point, mp: MapLayout, heading: float | None = None) -> LanePlacement | None:
    """Lane the point sits on, counted from the nearer road edge.

    When ``heading`` is given, lanes running against it are ignored.
    """
    best = min(_lane_candidates(agent_pos, heading, mp), key=lambda c: (c[0], c[1].id), default=None)
    if best is None:
        return None
    lane = best[1]
    total = len(mp.group_lanes(lane.group))
    from_left = lane.index
    from_right = total + 1 - from_left
    if from_right <= from_left:
        return LanePlacement(from_right, "from_right", total, lane.id, lane.group)
    return LanePlacement(from_left, "from_left", total, lane.id, lane.group)


def path_ahead(state: TrajectoryState, mp: MapLayout, length: float = PROXIMITY_HORIZON_M) -> list[Point]:
    """Travel path of ``length`` meters: along the lane if on one, else a ray."""
    pos = state.position
    cand = min(_lane_candidates(pos, state.heading, mp), key=lambda c: (c[0], c[1].id), default=None)
    if cand is None:
        h = math.radians(state.heading)
        return [pos, (pos[0] + length * math.cos(h), pos[1] + length * math.sin(h))]
    lane, pr = cand[1], cand[2]
    line = list(lane.centerline)
    # start at the agent itself, then follow the remaining lane vertices
    out = [pos]
    acc = 0.0
    for a, b in zip(line, line[1:]):
        seg = math.hypot(b[0] - a[0], b[1] - a[1])
        if acc + seg > pr.arc + 1e-9:
            out.append(b)
        acc += seg
    used = _polyline_length(out)
    if used < length:
        a, b = line[-2], line[-1]
        h = math.atan2(b[1] - a[1], b[0] - a[0])
        end = out[-1]
        rest = length - used
        out.append((end[0] + rest * math.cos(h), end[1] + rest * math.sin(h)))
    return out


def _arc_ahead(path: Sequence[Point], p: Point) -> float | None:
    pr = _project(p, path)
    if pr.clamped and pr.arc == 0.0:
        return None  # behind the start of the path
    return pr.arc


# ---------------------------------------------------------------------------
# intersections


def nearest_intersection(mp: MapLayout, point: Point, max_distance: float = RELATED_INTERSECTION_M) -> Intersection | None:
    best = min(
        mp.intersections,
        key=lambda it: (math.hypot(it.center[0] - point[0], it.center[1] - point[1]), it.id),
        default=None,
    )
    if best is None or math.hypot(best.center[0] - point[0], best.center[1] - point[1]) > max_distance:
        return None
    return best


def classify_intersection(inter: Intersection) -> str:
    return f"{inter.branches} way"


def _radial_velocity(st: TrajectoryState, center: Point) -> float:
    dx, dy = st.x - center[0], st.y - center[1]
    d = math.hypot(dx, dy)
    if d == 0:
        return 0.0
    h = math.radians(st.heading)
    return st.speed * (math.cos(h) * dx + math.sin(h) * dy) / d


def _side_sign(p: Point, center: Point, axis_heading: float) -> bool:
    h = math.radians(axis_heading)
    return (p[0] - center[0]) * math.cos(h) + (p[1] - center[1]) * math.sin(h) > 0


def intersection_phase(
    agent: Agent,
    mp: MapLayout,
    at: int,
    *,
    intersection: Intersection | None = None,
    reference: Point | None = None,
    axis_heading: float | None = None,
) -> IntersectionPhase:
    """Where ``agent`` is relative to an intersection at sample ``at``.

    The intersection is a disk of ``radius`` around its center. Outside the
    disk, the side is found by projecting onto ``axis_heading`` (default: the
    agent's heading at ``at``) and comparing with ``reference`` (usually the
    ego's current position).
    """
    st = agent.states[at]
    inter = intersection or nearest_intersection(mp, st.position, max_distance=math.inf)
    if inter is None:
        raise NoIntersection("map has no intersection")
    c = inter.center
    dist = math.hypot(st.x - c[0], st.y - c[1])
    moving = st.speed >= NOT_MOVING_SPEED
    radial = _radial_velocity(st, c)
    closing = moving and radial < 0
    receding = moving and radial > 0
    if dist <= inter.radius:
        return IntersectionPhase("exiting" if receding else "inside", dist)

    axis = st.heading if axis_heading is None else axis_heading
    ref = st.position if reference is None else reference
    side = "same" if _side_sign(st.position, c, axis) == _side_sign(ref, c, axis) else "opposite"
    if closing and dist <= APPROACH_RANGE_M:
        return IntersectionPhase("heading_towards", dist, side)
    if receding:
        for past in agent.states[: at + 1]:
            if past.valid and st.t - past.t <= DEPARTING_LOOKBACK_S + 1e-9:
                if math.hypot(past.x - c[0], past.y - c[1]) <= inter.radius:
                    return IntersectionPhase("departing", dist, side)
    return IntersectionPhase("same_side" if side == "same" else "opposite_side", dist, side)


# ---------------------------------------------------------------------------
# map features and signals


def proximity_features(agent: Agent, mp: MapLayout, at: int, horizon: float = PROXIMITY_HORIZON_M) -> list[tuple[FeatureKind, float]]:
    """Crosswalks, stop signs and speed bumps on the path ahead, nearest first."""
    st = agent.states[at]
    path = path_ahead(st, mp, horizon)
    found: list[tuple[FeatureKind, float]] = []

    def scan(kind: FeatureKind, areas: Sequence[Area]) -> None:
        for area in areas:
            s = _first_entry(path, area.polygon)
            if s is not None and s <= horizon:
                found.append((kind, s))

    scan("crosswalk", mp.crosswalks)
    scan("speed_bump", mp.speed_bumps)
    placement = lane_placement(st.position, mp, st.heading)
    if placement is not None:
        for sign in mp.stop_signs:
            if sign.approach != placement.group:
                continue
            s = _arc_ahead(path, sign.point)
            if s is not None and s <= horizon:
                found.append(("stop_sign", s))
    found.sort(key=lambda f: (f[1], f[0]))
    return found


def signal_for(agent: Agent, signals: Sequence[SignalState], mp: MapLayout, at: int) -> tuple[str, float | None] | None:
    """Signal governing the agent's approach as (color, meters to stop point).

    The distance is None when the stop point is unknown or already passed.
    """
    st = agent.states[at]
    placement = lane_placement(st.position, mp, st.heading)
    if placement is None:
        return None
    mine = [sig for sig in signals if sig.approach == placement.group]
    if not mine:
        return None
    path = path_ahead(st, mp, length=200.0)
    options = []
    for sig in mine:
        d = None if sig.stop_point is None else _arc_ahead(path, sig.stop_point)
        options.append((d is None, d if d is not None else 0.0, sig.color, d))
    options.sort()
    _, _, color, dist = options[0]
    return color, dist


# ---------------------------------------------------------------------------
# snapshots


@dataclass(frozen=True)
class AgentSnapshot:
    agent_id: str
    relpos: RelPos
    heading: HeadingLabel
    speed: float
    phase: IntersectionPhase | None


def related_intersection(s: Scenario) -> Intersection | None:
    return nearest_intersection(s.map, s.ego.states[s.current_index].position)


def snapshot(s: Scenario, index: int) -> dict[str, AgentSnapshot]:
    """Per-agent features at sample ``index``.

    Surrounding agents are located against the ego pose at ``index``; the ego
    is located against its own current pose. Intersection sides are judged
    along each agent's current heading.
    """
    if not (0 <= index < s.num_samples):
        raise HorizonUnavailable(f"sample {index} outside trajectory of {s.num_samples}")
    ego = s.ego
    ego_now = ego.states[s.current_index]
    ego_then = ego.states[index]
    if not ego_then.valid:
        raise HorizonUnavailable(f"ego invalid at sample {index}")
    inter = related_intersection(s)
    out: dict[str, AgentSnapshot] = {}
    for agent in s.agents:
        st = agent.states[index]
        now = agent.states[s.current_index]
        if not st.valid or not now.valid:
            continue
        if agent.id == s.ego_id:
            rel = ego_frame(st.position, pose_of(ego_now))
            rel_heading = heading_relation(ego_now.heading, st.heading)
        else:
            rel = ego_frame(st.position, pose_of(ego_then))
            rel_heading = heading_relation(ego_then.heading, st.heading)
        phase = None
        if inter is not None:
            phase = intersection_phase(
                agent, s.map, index, intersection=inter, reference=ego_now.position, axis_heading=now.heading
            )
        out[agent.id] = AgentSnapshot(agent.id, rel, rel_heading, st.speed, phase)
    return out


def future_snapshot(s: Scenario, horizon_s: float = FUTURE_HORIZON_S) -> dict[str, AgentSnapshot]:
    return snapshot(s, s.future_index(horizon_s))
