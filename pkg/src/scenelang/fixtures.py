"""Synthetic scenarios with analytically known ground truth.

Each template builds its geometry in a local frame; the optional
``rotation_deg``/``offset_x``/``offset_y`` parameters place it rigidly in the
global frame, which must not change any rendered fact or label.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .scenario import (
    Agent,
    Area,
    Intersection,
    Lane,
    MapLayout,
    Point,
    Scenario,
    SignalState,
    StopSign,
    TrajectoryState,
    normalize_heading,
    validate,
)

TEMPLATES = (
    "appendix_replica",
    "stop_sign_4way",
    "arrow_left_turn",
    "overtake_straight",
    "follow_straight",
    "ped_crossing",
    "random",
)

DT = 0.1
NUM_SAMPLES = 91
CURRENT_INDEX = 10
LANE_WIDTH = 3.5
EGO = "ego"

# (x, y, heading_deg, speed) as a function of time relative to the current moment
Motion = Callable[[float], tuple[float, float, float, float]]


class BadParameters(ValueError):
    pass


@dataclass(frozen=True)
class FixtureSpec:
    template: str
    seed: int = 0
    parameters: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class ExpectedLabel:
    pair: tuple[str, str]
    kind: str
    yielder: str | None = None
    cause: str = "none"
    actor: str | None = None

    def to_dict(self) -> dict:
        return {"pair": list(self.pair), "kind": self.kind, "yielder": self.yielder, "cause": self.cause, "actor": self.actor}


@dataclass(frozen=True)
class Expectation:
    labels: tuple[ExpectedLabel, ...] = ()
    sentences: tuple[str, ...] = ()
    paragraphs: tuple[str, ...] = ()  # whole paragraphs expected verbatim, if known

    def to_dict(self) -> dict:
        return {
            "labels": [lb.to_dict() for lb in self.labels],
            "sentences": list(self.sentences),
            "paragraphs": list(self.paragraphs),
        }


# ---------------------------------------------------------------------------
# motion helpers


def _times() -> list[float]:
    return [round((k - CURRENT_INDEX) * DT, 10) for k in range(NUM_SAMPLES)]


class SpeedProfile:
    """Piecewise-linear speed over relative time, constant outside the knots."""

    def __init__(self, knots: Sequence[tuple[float, float]]):
        self.knots = sorted(knots)

    def speed(self, t: float) -> float:
        k = self.knots
        if t <= k[0][0]:
            return k[0][1]
        for (t0, v0), (t1, v1) in zip(k, k[1:]):
            if t <= t1:
                return v0 + (v1 - v0) * (t - t0) / (t1 - t0)
        return k[-1][1]

    def distance(self, t: float) -> float:
        """Signed distance travelled between relative time 0 and ``t``."""
        if t < 0:
            return -self._integral(t, 0.0)
        return self._integral(0.0, t)

    def _integral(self, a: float, b: float) -> float:
        cuts = sorted({a, b, *(tk for tk, _ in self.knots if a < tk < b)})
        return sum((y - x) * (self.speed(x) + self.speed(y)) / 2.0 for x, y in zip(cuts, cuts[1:]))


class Path:
    """Polyline with arc-length lookup, extended straight beyond both ends."""

    def __init__(self, points: Sequence[Point]):
        self.points = list(points)
        self.cum = [0.0]
        for a, b in zip(self.points, self.points[1:]):
            self.cum.append(self.cum[-1] + math.hypot(b[0] - a[0], b[1] - a[1]))

    @property
    def length(self) -> float:
        return self.cum[-1]

    def at(self, s: float) -> tuple[float, float, float]:
        """(x, y, heading) at arc length ``s``."""
        pts, cum = self.points, self.cum
        if s <= 0:
            i = 0
        elif s >= cum[-1]:
            i = len(pts) - 2
        else:
            i = max(j for j in range(len(pts) - 1) if cum[j] <= s)
        a, b = pts[i], pts[i + 1]
        seg = cum[i + 1] - cum[i]
        u = (s - cum[i]) / seg
        h = math.degrees(math.atan2(b[1] - a[1], b[0] - a[0]))
        return (a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1]), h)


def along(path: Path, s0: float, profile: SpeedProfile) -> Motion:
    def f(t: float):
        x, y, h = path.at(s0 + profile.distance(t))
        return x, y, h, profile.speed(t)

    return f


def arc_points(center: Point, radius: float, a0_deg: float, a1_deg: float, step_deg: float = 1.0) -> list[Point]:
    n = max(1, int(math.ceil(abs(a1_deg - a0_deg) / step_deg)))
    return [
        (center[0] + radius * math.cos(math.radians(a0_deg + (a1_deg - a0_deg) * k / n)),
         center[1] + radius * math.sin(math.radians(a0_deg + (a1_deg - a0_deg) * k / n)))
        for k in range(n + 1)
    ]


def stationary(x: float, y: float, heading: float) -> Motion:
    return lambda t: (x, y, heading, 0.0)


def _agent(agent_id: str, kind: str, motion: Motion, invalid: Callable[[float], bool] | None = None) -> Agent:
    states = []
    for k, t in enumerate(_times()):
        x, y, h, v = motion(t)
        states.append(
            TrajectoryState(
                t=round(k * DT, 10),
                x=x,
                y=y,
                heading=normalize_heading(h),
                speed=max(0.0, v),
                valid=not (invalid and invalid(t)),
            )
        )
    return Agent(agent_id, kind, tuple(states))


# ---------------------------------------------------------------------------
# rigid placement


class _Frame:
    def __init__(self, rotation_deg: float, dx: float, dy: float):
        self.r = rotation_deg
        self.c, self.s = math.cos(math.radians(rotation_deg)), math.sin(math.radians(rotation_deg))
        self.dx, self.dy = dx, dy

    def p(self, pt: Point) -> Point:
        return (self.c * pt[0] - self.s * pt[1] + self.dx, self.s * pt[0] + self.c * pt[1] + self.dy)

    def pts(self, pts: Sequence[Point]) -> tuple[Point, ...]:
        return tuple(self.p(q) for q in pts)

    def scenario(self, sc: Scenario) -> Scenario:
        if self.r == 0 and self.dx == 0 and self.dy == 0:
            return sc
        agents = tuple(
            Agent(
                a.id,
                a.kind,
                tuple(
                    TrajectoryState(st.t, *self.p(st.position), normalize_heading(st.heading + self.r), st.speed, st.valid)
                    for st in a.states
                ),
            )
            for a in sc.agents
        )
        m = sc.map
        mp = MapLayout(
            lanes=tuple(Lane(ln.id, ln.group, ln.index, self.pts(ln.centerline)) for ln in m.lanes),
            intersections=tuple(Intersection(i.id, self.p(i.center), i.branches, i.radius) for i in m.intersections),
            stop_signs=tuple(StopSign(sg.id, self.p(sg.point), sg.approach) for sg in m.stop_signs),
            crosswalks=tuple(Area(a.id, self.pts(a.polygon)) for a in m.crosswalks),
            speed_bumps=tuple(Area(a.id, self.pts(a.polygon)) for a in m.speed_bumps),
        )
        signals = tuple(
            SignalState(sg.approach, sg.color, None if sg.stop_point is None else self.p(sg.stop_point)) for sg in sc.signals
        )
        return Scenario(sc.id, sc.timestep_s, sc.current_index, sc.ego_id, agents, mp, signals, sc.interactive_flags)


# ---------------------------------------------------------------------------
# map builders

ARMS = {"east": 0.0, "north": 90.0, "south": -90.0, "west": 180.0}


def _unit(deg: float) -> Point:
    return (math.cos(math.radians(deg)), math.sin(math.radians(deg)))


def _right_of(heading: float) -> Point:
    h = math.radians(heading)
    return (math.sin(h), -math.cos(h))


def _offset(p: Point, *terms: tuple[Point, float]) -> Point:
    x, y = p
    for (ux, uy), k in terms:
        x += ux * k
        y += uy * k
    return (x, y)


@dataclass
class FourWay:
    """A four-arm intersection centered at the origin with straight arms."""

    radius: float = 10.0
    lanes_per_side: int = 1
    arm_length: float = 80.0

    def lanes(self, arms: Sequence[str] = ("south", "east", "north", "west")) -> list[Lane]:
        out = []
        for name in arms:
            a = ARMS[name]
            d = _unit(a)
            h_in, h_out = a + 180.0, a
            for i in range(1, self.lanes_per_side + 1):
                off = (i - 0.5) * LANE_WIDTH
                r_in, r_out = _right_of(h_in), _right_of(h_out)
                out.append(
                    Lane(f"{name}_in_{i}", f"{name}_in", i, (_offset((0, 0), (d, self.arm_length), (r_in, off)), _offset((0, 0), (d, self.radius), (r_in, off))))
                )
                out.append(
                    Lane(f"{name}_out_{i}", f"{name}_out", i, (_offset((0, 0), (d, self.radius), (r_out, off)), _offset((0, 0), (d, self.arm_length), (r_out, off))))
                )
        return out

    def lane_x(self, name: str, i: int = 1) -> Point:
        """Lateral offset vector of incoming lane ``i`` on arm ``name``."""
        return _offset((0, 0), (_right_of(ARMS[name] + 180.0), (i - 0.5) * LANE_WIDTH))

    def stop_point(self, name: str, i: int = 1) -> Point:
        return _offset(self.lane_x(name, i), (_unit(ARMS[name]), self.radius + 1.0))

    def crosswalk(self, name: str) -> Area:
        d, r = _unit(ARMS[name]), _right_of(ARMS[name])
        half = self.lanes_per_side * LANE_WIDTH + 1.0
        near, far = self.radius, self.radius + 3.0
        poly = (
            _offset((0, 0), (d, near), (r, -half)),
            _offset((0, 0), (d, far), (r, -half)),
            _offset((0, 0), (d, far), (r, half)),
            _offset((0, 0), (d, near), (r, half)),
        )
        return Area(f"crosswalk_{name}", poly)

    def intersection(self) -> Intersection:
        return Intersection("inter_0", (0.0, 0.0), 4, self.radius)


def _straight_road(east: int, west: int = 0, x0: float = -200.0, x1: float = 200.0) -> list[Lane]:
    """Two-way road along the x axis, right-hand traffic.

    Eastbound lanes sit at y = 0, 3.5, ... (rightmost at y = 0); westbound
    lanes continue above them. Lane 1 of each group is next to the divider.
    """
    out = []
    for i in range(1, east + 1):
        y = (east - i) * LANE_WIDTH
        out.append(Lane(f"east_{i}", "east", i, ((x0, y), (x1, y))))
    for i in range(1, west + 1):
        y = (east - 1 + i) * LANE_WIDTH
        out.append(Lane(f"west_{i}", "west", i, ((x1, y), (x0, y))))
    return out


def _rect(x0: float, x1: float, y0: float, y1: float) -> tuple[Point, ...]:
    return ((x0, y0), (x1, y0), (x1, y1), (x0, y1))


def _scenario(sid: str, agents: Sequence[Agent], mp: MapLayout, signals=(), flags=()) -> Scenario:
    return Scenario(sid, DT, CURRENT_INDEX, EGO, tuple(agents), mp, tuple(signals), frozenset(flags))


# ---------------------------------------------------------------------------
# templates


APPENDIX_PARAGRAPHS = (
    "The ego agent is heading towards intersection. The intersection center is 18.0 meters in front of the ego agent, "
    "and is 17.0 meters on the left of the ego agent. The intersection is a 4 way intersection.",
    "The ego agent is on the 1 lane from the right, out of 3 lanes. Its current speed is 8 m/s. It is accelerating. "
    "Traffic Light for the ego agent is red. The ego agent is approaching a crosswalk 3 meters ahead.",
    "Surrounding agent # 0 is a vehicle. It is 23 meters in front of the ego agent, and is 17 meters on the left of "
    "the ego agent. It is heading right of the ego agent. Its current speed is 6 m/s. It is accelerating. It is in "
    "the intersection. It is 29 meters away from the ego agent. It is approaching a crosswalk 3 meters ahead.",
    "Surrounding agent # 2 is a vehicle. It is 11 meters on the right of the ego agent, and is 0 meters behind the "
    "ego agent. It is heading left of the ego agent. It is not moving. It is on the same side of the intersection as "
    "the ego agent. It is 34 meters away from the intersection center.",
    "The following is the description of the ego and surrounding agents after 3.0 seconds:",
    "Surrounding agent # 0 will be 8 meters in front of the ego agent, and will be 5 meters on the left of the ego "
    "agent. It will be heading right of the ego agent. Its speed will be 7 m/s. It will be departing from the "
    "intersection. Looking from the agent's current angle, it will be on the same side of the intersection. It will "
    "be 18 meters away from the intersection center.",
    "The ego agent will be 13 meters in front of the current place, and will be 2 meters on the right of the current "
    "place. It will be heading in the same direction as the current moment. Its speed will be 3 m/s. It will be "
    "departing from the intersection. Looking from the agent's current angle, it will be on the same side of the "
    "intersection. It will be 20 meters away from the intersection center.",
    "Surrounding agent # 2 will be 13 meters on the right of the ego agent, and will be 9 meters behind the ego "
    "agent. It will be heading left of the ego agent. It will not be moving. Looking from the agent's current angle, "
    "it will be on the same side of the intersection. It will be 34 meters away from the intersection center.",
)


def split_sentences(text: str) -> list[str]:
    """Split template text after '.'/':' followed by a space and a capital."""
    out, start = [], 0
    for i, ch in enumerate(text):
        if ch in ".:" and i + 2 < len(text) and text[i + 1] == " " and text[i + 2].isupper():
            out.append(text[start : i + 1])
            start = i + 2
    tail = text[start:].strip()
    if tail:
        out.append(tail)
    return out


def _appendix_replica(p: Mapping[str, float], rng: random.Random):
    center = (18.0, 17.0)
    lanes = [Lane(f"ego_road_{i}", "ego_road", i, ((-80.0, y), (2.5, y))) for i, y in ((1, 7.0), (2, 3.5), (3, 0.0))]
    mp = MapLayout(
        lanes=tuple(lanes),
        intersections=(Intersection("inter_0", center, 4, 16.5),),
        crosswalks=(Area("crosswalk_0", _rect(3.0, 7.0, -2.0, 9.0)), Area("crosswalk_1", _rect(20.0, 26.0, 11.3, 14.3))),
    )
    signals = (SignalState("ego_road", "red", None),)

    # ego: straight history, then a left bulge through the intersection disk
    # that ends 13 m ahead and 2 m right, heading -20.5 deg, at 3 m/s
    ego_speed = SpeedProfile([(-1.0, 7.0), (0.5, 8.5), (3.0, 3.0)])
    theta_end = -20.5

    def ego(t: float):
        v = ego_speed.speed(t)
        if t <= 0:
            return 7.5 * t, 0.0, 0.0, v
        if t <= 3.0:
            u = t / 3.0
            x = 13.0 * (1.0 - (1.0 - u) ** 2)
            y = 40.0 * u * u * (1.0 - u) - 2.0 * u * u
            return x, y, theta_end * u, v
        d = 3.0 * (t - 3.0)
        return 13.0 + d * math.cos(math.radians(theta_end)), -2.0 + d * math.sin(math.radians(theta_end)), theta_end, v

    # agent 0: in the intersection heading south, ends at a known offset from
    # the ego's future pose
    a0_start = (23.0, 17.3)
    ce, se = math.cos(math.radians(theta_end)), math.sin(math.radians(theta_end))
    a0_end = (13.0 + 8.0 * ce - 5.0 * se, -2.0 + 8.0 * se + 5.0 * ce)
    a0_speed = SpeedProfile([(-1.0, 5.0), (0.5, 6.5), (3.0, 7.0)])
    a0_h_end = theta_end - 90.0

    def agent0(t: float):
        v = a0_speed.speed(t)
        if t <= 0:
            return a0_start[0], a0_start[1] - 5.5 * t, -90.0, v
        if t <= 3.0:
            u = t / 3.0
            return (a0_start[0] + u * (a0_end[0] - a0_start[0]), a0_start[1] + u * (a0_end[1] - a0_start[1]), -90.0 + u * (a0_h_end + 90.0), v)
        d = 7.0 * (t - 3.0)
        return a0_end[0] + d * math.cos(math.radians(a0_h_end)), a0_end[1] + d * math.sin(math.radians(a0_h_end)), a0_h_end, v

    agents = [
        _agent(EGO, "vehicle", ego),
        _agent("0", "vehicle", agent0),
        _agent("2", "vehicle", stationary(-0.4, -11.3, 90.0)),
    ]
    sc = _scenario("appendix_replica", agents, mp, signals, flags=(EGO, "0"))
    sentences = tuple(s for par in APPENDIX_PARAGRAPHS for s in split_sentences(par))
    return sc, Expectation(labels=(), sentences=sentences, paragraphs=APPENDIX_PARAGRAPHS)


def _stop_sign_4way(p: Mapping[str, float], rng: random.Random):
    fw = FourWay(radius=10.0)
    all_way = bool(p.get("all_way", 0))
    sign_arms = ("west", "east", "south", "north") if all_way else ("west", "east")
    signs = tuple(StopSign(f"stop_{a}", fw.stop_point(a), f"{a}_in") for a in sign_arms)
    mp = MapLayout(lanes=tuple(fw.lanes()), intersections=(fw.intersection(),), stop_signs=signs)

    # ego northbound on the major road
    ego_path = Path([(1.75, -80.0), (1.75, 80.0)])
    if all_way:
        # stopped at its sign, then pulled away just before the current moment
        prof = SpeedProfile([(-1.0, 0.0), (-0.2, 0.0), (3.8, 10.0)])
        ego = along(ego_path, 80.0 - 11.0, prof)
    else:
        ego = along(ego_path, 80.0 - 40.0, SpeedProfile([(0.0, 10.0)]))
    ego_speed = float(p.get("ego_speed", 10.0))
    if not all_way and ego_speed != 10.0:
        ego = along(ego_path, 40.0, SpeedProfile([(0.0, ego_speed)]))

    # agent 0 eastbound on the minor road: brakes to its sign, waits, then goes
    west_path = Path([(-80.0, -1.75), (80.0, -1.75)])
    a0 = along(west_path, 80.0 - 27.0, SpeedProfile([(0.0, 8.0), (4.0, 0.0), (5.0, 0.0), (8.0, 9.0)]))
    # agent 1 southbound on the major road, far away and never close to the ego
    south_path = Path([(-1.75, 80.0), (-1.75, -80.0)])
    a1 = along(south_path, 80.0 - 70.0, SpeedProfile([(0.0, 8.0)]))
    agents = [_agent(EGO, "vehicle", ego), _agent("0", "vehicle", a0), _agent("1", "vehicle", a1)]
    sc = _scenario("stop_sign_4way", agents, mp, flags=(EGO, "0"))
    labels = (
        ExpectedLabel((EGO, "0"), "rule_yield", "0", "stop_sign"),
        ExpectedLabel((EGO, "1"), "none"),
    )
    n = len(signs)
    sentences = ("The intersection is a 4 way intersection.", f"There are {n} stop signs in the intersection.", "Surrounding agent # 0 is a vehicle.")
    return sc, Expectation(labels=labels, sentences=sentences)


def _arrow_left_turn(p: Mapping[str, float], rng: random.Random):
    fw = FourWay(radius=10.0)
    mp = MapLayout(lanes=tuple(fw.lanes()), intersections=(fw.intersection(),))
    signals = (
        SignalState("south_in", "arrow_green", fw.stop_point("south")),
        SignalState("north_in", "green", fw.stop_point("north")),
        SignalState("east_in", "red", fw.stop_point("east")),
        SignalState("west_in", "red", fw.stop_point("west")),
    )
    # ego turns left from the south arm into the west arm
    turn = [(1.75, -80.0), (1.75, -10.0)] + arc_points((-10.0, -10.0), 11.75, 0.0, 90.0)[1:] + [(-80.0, 1.75)]
    ego = along(Path(turn), 80.0 - 16.0, SpeedProfile([(0.0, 6.0)]))
    # agent 1 oncoming: holds at its stop line, then crosses the ego's turn
    south_path = Path([(-1.75, 80.0), (-1.75, -80.0)])
    a1 = along(south_path, 80.0 - 23.0, SpeedProfile([(0.0, 6.0), (4.0, 0.0), (5.0, 0.0), (8.0, 9.0)]))
    agents = [_agent(EGO, "vehicle", ego), _agent("0", "vehicle", stationary(45.0, -1.75, 0.0)), _agent("1", "vehicle", a1)]
    sc = _scenario("arrow_left_turn", agents, mp, signals, flags=(EGO, "1"))
    labels = (
        ExpectedLabel((EGO, "0"), "none"),
        ExpectedLabel((EGO, "1"), "rule_yield", "1", "arrow_right_of_way"),
    )
    sentences = ("Traffic Light for the ego agent is arrow green 5.0 meters ahead.", "The intersection is a 4 way intersection.")
    return sc, Expectation(labels=labels, sentences=sentences)


def _overtake_straight(p: Mapping[str, float], rng: random.Random):
    mp = MapLayout(lanes=tuple(_straight_road(2, 1)))
    ego = along(Path([(-200.0, 0.0), (200.0, 0.0)]), 200.0, SpeedProfile([(0.0, 8.0)]))
    gap = float(p.get("gap", 15.0))
    speed = float(p.get("speed", 12.0))
    if not (0 < gap < 40 and speed > 8.0 + gap / 8.0):
        raise BadParameters("overtake needs 0 < gap < 40 and enough speed to pass within 8 s")

    def overtaker(t: float):
        x = -gap + speed * t
        # cosine lane change from y=0 to y=3.5 between t=0.5 and t=2.5
        if t <= 0.5:
            y, dy = 0.0, 0.0
        elif t >= 2.5:
            y, dy = LANE_WIDTH, 0.0
        else:
            u = (t - 0.5) / 2.0
            y = LANE_WIDTH * (1 - math.cos(math.pi * u)) / 2
            dy = LANE_WIDTH * math.pi * math.sin(math.pi * u) / 4.0
        return x, y, math.degrees(math.atan2(dy, speed)), math.hypot(speed, dy)

    oncoming = along(Path([(200.0, 7.0), (-200.0, 7.0)]), 140.0, SpeedProfile([(0.0, 10.0)]))
    agents = [_agent(EGO, "vehicle", ego), _agent("0", "vehicle", overtaker), _agent("1", "vehicle", oncoming)]
    sc = _scenario("overtake_straight", agents, mp, flags=(EGO, "0"))
    labels = (
        ExpectedLabel((EGO, "0"), "overtake", None, "intention_pattern", actor="0"),
        ExpectedLabel((EGO, "1"), "none"),
    )
    sentences = ("The ego agent is on the 1 lane from the right, out of 2 lanes.", "Surrounding agent # 0 is a vehicle.")
    return sc, Expectation(labels=labels, sentences=sentences)


def _follow_straight(p: Mapping[str, float], rng: random.Random):
    gap = float(p.get("gap", 12.0))
    if not (3.0 < gap < 30.0):
        raise BadParameters("follow gap must lie in (3, 30) m")
    with_sign = bool(p.get("stop_sign", 0))
    lanes = _straight_road(1)
    road = Path([(-200.0, 0.0), (200.0, 0.0)])
    if with_sign:
        # both stopped, the leader at its sign and the follower far behind it;
        # they pull away together so the gap stays constant
        prof = SpeedProfile([(-1.0, 0.0), (-0.3, 0.0), (4.7, 10.0)])
        sign = StopSign("stop_0", (0.5, 0.0), "east")
        mp = MapLayout(lanes=tuple(lanes), stop_signs=(sign,))
        ego = along(road, 200.0 - 1.0, prof)
        follower = along(road, 200.0 - 1.0 - gap, prof)
        labels = (ExpectedLabel((EGO, "0"), "rule_yield", "0", "stop_sign"),)
        sid = "follow_straight_stop"
    else:
        prof = SpeedProfile([(0.0, 10.0)])
        mp = MapLayout(lanes=tuple(lanes))
        ego = along(road, 200.0, prof)
        follower = along(road, 200.0 - gap, prof)
        labels = (ExpectedLabel((EGO, "0"), "follow", None, "intention_pattern", actor="0"),)
        sid = "follow_straight"
    agents = [_agent(EGO, "vehicle", ego), _agent("0", "vehicle", follower)]
    sc = _scenario(sid, agents, mp, flags=(EGO, "0"))
    return sc, Expectation(labels=labels, sentences=("Surrounding agent # 0 is a vehicle.",))


def _ped_crossing(p: Mapping[str, float], rng: random.Random):
    lanes = _straight_road(1, 1)
    mp = MapLayout(lanes=tuple(lanes), crosswalks=(Area("crosswalk_0", _rect(20.0, 24.0, -2.0, 5.5)),))
    # brake from 8 m/s to a stop 1.5 m before the crosswalk, wait, then go
    a = 64.0 / (2 * 17.5)
    t_stop = 8.0 / a
    ego = along(Path([(-200.0, 0.0), (200.0, 0.0)]), 200.0, SpeedProfile([(0.0, 8.0), (t_stop, 0.0), (6.0, 0.0), (8.0, 4.0)]))
    walker = along(Path([(22.0, -20.0), (22.0, 20.0)]), 20.0 - 7.0, SpeedProfile([(0.0, 1.4)]))
    stroller = along(Path([(-20.0, -8.0), (60.0, -8.0)]), 30.0, SpeedProfile([(0.0, 1.4)]))
    agents = [_agent(EGO, "vehicle", ego), _agent("0", "pedestrian", walker), _agent("1", "pedestrian", stroller)]
    sc = _scenario("ped_crossing", agents, mp, flags=(EGO, "0"))
    labels = (
        ExpectedLabel((EGO, "0"), "ped_yield", EGO, "pedestrian_priority"),
        ExpectedLabel((EGO, "1"), "none"),
    )
    sentences = ("Surrounding agent # 0 is a pedestrian.", "The ego agent is approaching a crosswalk 20 meters ahead.")
    return sc, Expectation(labels=labels, sentences=sentences)


def _random(p: Mapping[str, float], rng: random.Random):
    """Fuzz scenario: random map, agents, signals, gaps and flags."""
    max_agents = int(p.get("max_agents", 8))
    flag_prob = float(p.get("flag_prob", 0.5))
    if max_agents < 0 or not (0.0 <= flag_prob <= 1.0):
        raise BadParameters("max_agents must be >= 0 and flag_prob in [0, 1]")
    crosswalks: list[Area] = []
    bumps: list[Area] = []
    signs: list[StopSign] = []
    signals: list[SignalState] = []
    if rng.random() < 0.6:
        fw = FourWay(radius=rng.uniform(8.0, 14.0), lanes_per_side=rng.randint(1, 3))
        arms = ["south", "east", "north", "west"]
        n_arms = 3 if rng.random() < 0.3 else 4
        arms = arms[:n_arms]
        lanes = fw.lanes(arms)
        for a in arms:
            roll = rng.random()
            if roll < 0.3:
                signs.append(StopSign(f"stop_{a}", fw.stop_point(a), f"{a}_in"))
            elif roll < 0.7:
                color = rng.choice(["red", "yellow", "green", "arrow_green", "unknown"])
                sp = fw.stop_point(a) if rng.random() < 0.8 else None
                signals.append(SignalState(f"{a}_in", color, sp))
            if rng.random() < 0.4:
                crosswalks.append(fw.crosswalk(a))
        inters = (Intersection("inter_0", (0.0, 0.0), n_arms, fw.radius),)
    else:
        lanes = _straight_road(rng.randint(1, 3), rng.randint(1, 2))
        inters = ()
        for k in range(rng.randint(0, 2)):
            x = rng.uniform(-50, 80)
            crosswalks.append(Area(f"crosswalk_{k}", _rect(x, x + 4.0, -8.0, 12.0)))
        if rng.random() < 0.3:
            x = rng.uniform(-30, 60)
            bumps.append(Area("bump_0", _rect(x, x + 1.0, -8.0, 12.0)))
        if rng.random() < 0.3:
            signs.append(StopSign("stop_0", (rng.uniform(0, 60), 0.0), "east"))
    mp = MapLayout(tuple(lanes), inters, tuple(signs), tuple(crosswalks), tuple(bumps))

    def lane_motion(lane: Lane) -> Motion:
        path = Path(lane.centerline)
        s0 = rng.uniform(0.0, path.length)
        v0 = rng.choice([0.0, rng.uniform(0.0, 15.0)])
        acc = rng.uniform(-2.0, 2.0)
        t_end = 8.0
        v_end = max(0.0, v0 + acc * t_end)
        return along(path, s0, SpeedProfile([(-1.0, max(0.0, v0 - acc)), (0.0, v0), (t_end, v_end)]))

    def free_motion(speed_max: float) -> Motion:
        x0, y0 = rng.uniform(-40, 40), rng.uniform(-40, 40)
        h = rng.uniform(-179.0, 180.0)
        v = rng.uniform(0.0, speed_max)
        c, s = math.cos(math.radians(h)), math.sin(math.radians(h))
        return lambda t: (x0 + v * t * c, y0 + v * t * s, h, v)

    agents = [_agent(EGO, "vehicle", lane_motion(rng.choice(lanes)))]
    for k in range(rng.randint(0, max_agents)):
        kind = rng.choices(["vehicle", "pedestrian", "cyclist"], [0.7, 0.2, 0.1])[0]
        motion = lane_motion(rng.choice(lanes)) if kind != "pedestrian" else free_motion(2.0)
        invalid = None
        if rng.random() < 0.15:
            lo = rng.uniform(-1.0, 8.0)
            hi = lo + rng.uniform(0.2, 3.0)
            invalid = lambda t, lo=lo, hi=hi: lo <= t <= hi
        agents.append(_agent(str(k), kind, motion, invalid))
    flags: tuple[str, ...] = ()
    if rng.random() < flag_prob:
        flags = tuple(a.id for a in agents if a.id == EGO or rng.random() < 0.3)
    return _scenario(f"random_{p.get('_seed', 0)}", agents, mp, signals, flags=flags), Expectation()


_BUILDERS = {
    "appendix_replica": _appendix_replica,
    "stop_sign_4way": _stop_sign_4way,
    "arrow_left_turn": _arrow_left_turn,
    "overtake_straight": _overtake_straight,
    "follow_straight": _follow_straight,
    "ped_crossing": _ped_crossing,
    "random": _random,
}

PLACEMENT_KEYS = ("rotation_deg", "offset_x", "offset_y")
KNOWN_PARAMETERS = {
    "appendix_replica": (),
    "stop_sign_4way": ("all_way", "ego_speed"),
    "arrow_left_turn": (),
    "overtake_straight": ("gap", "speed"),
    "follow_straight": ("gap", "stop_sign"),
    "ped_crossing": (),
    "random": ("max_agents", "flag_prob"),
}


def generate(spec: FixtureSpec) -> tuple[Scenario, Expectation]:
    """Build the scenario for ``spec`` plus what the engines must find in it."""
    if spec.template not in _BUILDERS:
        raise BadParameters(f"unknown template {spec.template!r}; expected one of {', '.join(TEMPLATES)}")
    params = dict(spec.parameters)
    unknown = set(params) - set(KNOWN_PARAMETERS[spec.template]) - set(PLACEMENT_KEYS)
    if unknown:
        raise BadParameters(f"unknown parameter(s) for {spec.template}: {', '.join(sorted(unknown))}")
    for k, v in params.items():
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise BadParameters(f"parameter {k} must be a finite number")
    rng = random.Random(spec.seed)
    params["_seed"] = spec.seed
    scenario, expected = _BUILDERS[spec.template](params, rng)
    frame = _Frame(params.get("rotation_deg", 0.0), params.get("offset_x", 0.0), params.get("offset_y", 0.0))
    scenario = frame.scenario(scenario)
    validate(scenario)
    return scenario, expected


def random_batch(n: int, seed: int = 0, **parameters: float) -> list[Scenario]:
    """``n`` random scenarios with seeds ``seed .. seed + n - 1``."""
    return [generate(FixtureSpec("random", seed + k, parameters))[0] for k in range(n)]
