"""Scenario schema, parsing/validation and the interactive-scenario filter.

A scenario file is a UTF-8 JSON document. See ``docs/scenario-format.md`` for
the field-by-field description.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Literal, Sequence

Point = tuple[float, float]

AgentKind = Literal["vehicle", "pedestrian", "cyclist"]
SignalColor = Literal["red", "yellow", "green", "arrow_green", "unknown"]

AGENT_KINDS = ("vehicle", "pedestrian", "cyclist")
SIGNAL_COLORS = ("red", "yellow", "green", "arrow_green", "unknown")

# Future moment described alongside the current one.
FUTURE_HORIZON_S = 3.0

# Max distance (m) between a signal stop point and a lane of its approach.
STOP_POINT_TOLERANCE_M = 3.0

CANONICAL_UNITS = {"length": "m", "speed": "m/s", "heading": "deg", "time": "s"}

TOP_LEVEL_KEYS = (
    "id",
    "timestep_s",
    "current_index",
    "ego_id",
    "agents",
    "map",
    "signals",
    "interactive_flags",
)


class ScenarioError(ValueError):
    """Base class for scenario problems; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")


class SchemaError(ScenarioError):
    """Missing field, wrong type, unknown key or wrong unit."""


class InvariantError(ScenarioError):
    """Structurally valid document that breaks a semantic invariant."""


@dataclass(frozen=True)
class TrajectoryState:
    t: float
    x: float
    y: float
    heading: float
    speed: float
    valid: bool = True

    @property
    def position(self) -> Point:
        return (self.x, self.y)


@dataclass(frozen=True)
class Agent:
    id: str
    kind: AgentKind
    states: tuple[TrajectoryState, ...]


@dataclass(frozen=True)
class Lane:
    id: str
    group: str
    index: int  # 1 = leftmost lane of the group, w.r.t. travel direction
    centerline: tuple[Point, ...]


@dataclass(frozen=True)
class Intersection:
    id: str
    center: Point
    branches: int
    radius: float  # half-width of the widest approach; the intersection disk


@dataclass(frozen=True)
class StopSign:
    id: str
    point: Point
    approach: str  # lane group governed by the sign


@dataclass(frozen=True)
class Area:
    id: str
    polygon: tuple[Point, ...]


@dataclass(frozen=True)
class MapLayout:
    lanes: tuple[Lane, ...] = ()
    intersections: tuple[Intersection, ...] = ()
    stop_signs: tuple[StopSign, ...] = ()
    crosswalks: tuple[Area, ...] = ()
    speed_bumps: tuple[Area, ...] = ()

    def group_lanes(self, group: str) -> list[Lane]:
        return sorted((ln for ln in self.lanes if ln.group == group), key=lambda ln: ln.index)


@dataclass(frozen=True)
class SignalState:
    approach: str
    color: SignalColor
    stop_point: Point | None = None


@dataclass(frozen=True)
class Scenario:
    id: str
    timestep_s: float
    current_index: int
    ego_id: str
    agents: tuple[Agent, ...]
    map: MapLayout = field(default_factory=MapLayout)
    signals: tuple[SignalState, ...] = ()
    interactive_flags: frozenset[str] = frozenset()

    @property
    def num_samples(self) -> int:
        return len(self.agents[0].states) if self.agents else 0

    @property
    def ego(self) -> Agent:
        return self.agent(self.ego_id)

    def agent(self, agent_id: str) -> Agent:
        for a in self.agents:
            if a.id == agent_id:
                return a
        raise KeyError(agent_id)

    def others(self) -> list[Agent]:
        """Non-ego agents in ascending id order."""
        return sorted((a for a in self.agents if a.id != self.ego_id), key=lambda a: agent_sort_key(a.id))

    def future_index(self, horizon_s: float = FUTURE_HORIZON_S) -> int:
        return self.current_index + round(horizon_s / self.timestep_s)


def agent_sort_key(agent_id: str) -> tuple[int, int, str]:
    """Numeric ids sort numerically and before non-numeric ones."""
    if agent_id.isdigit():
        return (0, int(agent_id), "")
    return (1, 0, agent_id)


def normalize_heading(deg: float) -> float:
    """Map an angle in degrees into (-180, 180]."""
    h = math.fmod(deg, 360.0)
    if h <= -180.0:
        h += 360.0
    elif h > 180.0:
        h -= 360.0
    return h


# ---------------------------------------------------------------------------
# parsing


def _req(obj: dict, key: str, path: str) -> Any:
    if key not in obj:
        raise SchemaError(f"{path}.{key}" if path else key, "missing field")
    return obj[key]


def _check_keys(obj: Any, allowed: Iterable[str], path: str, optional: Iterable[str] = ()) -> dict:
    if not isinstance(obj, dict):
        raise SchemaError(path or "<root>", f"expected object, got {type(obj).__name__}")
    extra = set(obj) - set(allowed) - set(optional)
    if extra:
        bad = sorted(extra)[0]
        raise SchemaError(f"{path}.{bad}" if path else bad, "unknown field")
    return obj


def _num(v: Any, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(path, f"expected number, got {type(v).__name__}")
    f = float(v)
    if not math.isfinite(f):
        raise SchemaError(path, "non-finite number")
    return f


def _int(v: Any, path: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise SchemaError(path, f"expected integer, got {type(v).__name__}")
    return v


def _str(v: Any, path: str) -> str:
    if not isinstance(v, str) or not v:
        raise SchemaError(path, "expected non-empty string")
    return v


def _list(v: Any, path: str) -> list:
    if not isinstance(v, list):
        raise SchemaError(path, f"expected list, got {type(v).__name__}")
    return v


def _point(v: Any, path: str) -> Point:
    v = _list(v, path)
    if len(v) != 2:
        raise SchemaError(path, "expected [x, y]")
    return (_num(v[0], f"{path}[0]"), _num(v[1], f"{path}[1]"))


def _points(v: Any, path: str, min_len: int) -> tuple[Point, ...]:
    pts = tuple(_point(p, f"{path}[{i}]") for i, p in enumerate(_list(v, path)))
    if len(pts) < min_len:
        raise SchemaError(path, f"expected at least {min_len} points")
    return pts


def _parse_state(obj: Any, path: str) -> TrajectoryState:
    _check_keys(obj, ("t", "x", "y", "heading", "speed", "valid"), path)
    valid = obj.get("valid", True)
    if not isinstance(valid, bool):
        raise SchemaError(f"{path}.valid", "expected boolean")
    return TrajectoryState(
        t=_num(_req(obj, "t", path), f"{path}.t"),
        x=_num(_req(obj, "x", path), f"{path}.x"),
        y=_num(_req(obj, "y", path), f"{path}.y"),
        heading=_num(_req(obj, "heading", path), f"{path}.heading"),
        speed=_num(_req(obj, "speed", path), f"{path}.speed"),
        valid=valid,
    )


def _parse_agent(obj: Any, path: str) -> Agent:
    _check_keys(obj, ("id", "kind", "states"), path)
    kind = _str(_req(obj, "kind", path), f"{path}.kind")
    if kind not in AGENT_KINDS:
        raise SchemaError(f"{path}.kind", f"unknown agent kind {kind!r}")
    states = tuple(
        _parse_state(s, f"{path}.states[{i}]") for i, s in enumerate(_list(_req(obj, "states", path), f"{path}.states"))
    )
    return Agent(id=_str(_req(obj, "id", path), f"{path}.id"), kind=kind, states=states)


def _parse_map(obj: Any, path: str = "map") -> MapLayout:
    keys = ("lanes", "intersections", "stop_signs", "crosswalks", "speed_bumps")
    _check_keys(obj, keys, path)
    lanes = []
    for i, ln in enumerate(_list(obj.get("lanes", []), f"{path}.lanes")):
        p = f"{path}.lanes[{i}]"
        _check_keys(ln, ("id", "group", "index", "centerline"), p)
        lanes.append(
            Lane(
                id=_str(_req(ln, "id", p), f"{p}.id"),
                group=_str(_req(ln, "group", p), f"{p}.group"),
                index=_int(_req(ln, "index", p), f"{p}.index"),
                centerline=_points(_req(ln, "centerline", p), f"{p}.centerline", 2),
            )
        )
    inters = []
    for i, it in enumerate(_list(obj.get("intersections", []), f"{path}.intersections")):
        p = f"{path}.intersections[{i}]"
        _check_keys(it, ("id", "center", "branches", "radius"), p)
        inters.append(
            Intersection(
                id=_str(_req(it, "id", p), f"{p}.id"),
                center=_point(_req(it, "center", p), f"{p}.center"),
                branches=_int(_req(it, "branches", p), f"{p}.branches"),
                radius=_num(_req(it, "radius", p), f"{p}.radius"),
            )
        )
    signs = []
    for i, sg in enumerate(_list(obj.get("stop_signs", []), f"{path}.stop_signs")):
        p = f"{path}.stop_signs[{i}]"
        _check_keys(sg, ("id", "point", "approach"), p)
        signs.append(
            StopSign(
                id=_str(_req(sg, "id", p), f"{p}.id"),
                point=_point(_req(sg, "point", p), f"{p}.point"),
                approach=_str(_req(sg, "approach", p), f"{p}.approach"),
            )
        )

    def areas(key: str) -> tuple[Area, ...]:
        out = []
        for i, ar in enumerate(_list(obj.get(key, []), f"{path}.{key}")):
            p = f"{path}.{key}[{i}]"
            _check_keys(ar, ("id", "polygon"), p)
            out.append(Area(id=_str(_req(ar, "id", p), f"{p}.id"), polygon=_points(_req(ar, "polygon", p), f"{p}.polygon", 3)))
        return tuple(out)

    return MapLayout(
        lanes=tuple(lanes),
        intersections=tuple(inters),
        stop_signs=tuple(signs),
        crosswalks=areas("crosswalks"),
        speed_bumps=areas("speed_bumps"),
    )


def _parse_signal(obj: Any, path: str) -> SignalState:
    _check_keys(obj, ("approach", "color", "stop_point"), path)
    color = _str(_req(obj, "color", path), f"{path}.color")
    if color not in SIGNAL_COLORS:
        raise SchemaError(f"{path}.color", f"unknown signal color {color!r}")
    sp = obj.get("stop_point")
    return SignalState(
        approach=_str(_req(obj, "approach", path), f"{path}.approach"),
        color=color,
        stop_point=None if sp is None else _point(sp, f"{path}.stop_point"),
    )


def scenario_from_dict(doc: Any) -> Scenario:
    """Build a Scenario from a decoded document and validate it."""
    _check_keys(doc, TOP_LEVEL_KEYS, "", optional=("units",))
    if "units" in doc:
        units = _check_keys(doc["units"], CANONICAL_UNITS, "units")
        for k, v in units.items():
            if v != CANONICAL_UNITS[k]:
                raise SchemaError(f"units.{k}", f"expected {CANONICAL_UNITS[k]!r}, got {v!r}")
    agents = tuple(_parse_agent(a, f"agents[{i}]") for i, a in enumerate(_list(_req(doc, "agents", ""), "agents")))
    flags = _list(_req(doc, "interactive_flags", ""), "interactive_flags")
    scenario = Scenario(
        id=_str(_req(doc, "id", ""), "id"),
        timestep_s=_num(_req(doc, "timestep_s", ""), "timestep_s"),
        current_index=_int(_req(doc, "current_index", ""), "current_index"),
        ego_id=_str(_req(doc, "ego_id", ""), "ego_id"),
        agents=agents,
        map=_parse_map(_req(doc, "map", "")),
        signals=tuple(_parse_signal(s, f"signals[{i}]") for i, s in enumerate(_list(_req(doc, "signals", ""), "signals"))),
        interactive_flags=frozenset(_str(f, f"interactive_flags[{i}]") for i, f in enumerate(flags)),
    )
    validate(scenario)
    return scenario


def parse_scenario(document: bytes | str) -> Scenario:
    """Parse and validate one scenario file."""
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SchemaError("<root>", f"not UTF-8: {exc}") from None
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SchemaError("<root>", f"malformed JSON at line {exc.lineno} column {exc.colno}") from None
    return scenario_from_dict(doc)


# ---------------------------------------------------------------------------
# validation


def _dist_to_polyline(p: Point, line: Sequence[Point]) -> float:
    best = math.inf
    for (ax, ay), (bx, by) in zip(line, line[1:]):
        dx, dy = bx - ax, by - ay
        L2 = dx * dx + dy * dy
        s = 0.0 if L2 == 0 else max(0.0, min(1.0, ((p[0] - ax) * dx + (p[1] - ay) * dy) / L2))
        best = min(best, math.hypot(p[0] - ax - s * dx, p[1] - ay - s * dy))
    return best


def validate(s: Scenario) -> None:
    """Raise SchemaError/InvariantError naming the first offending path."""
    if not (s.timestep_s > 0):
        raise SchemaError("timestep_s", "must be positive seconds")
    if not s.agents:
        raise InvariantError("agents", "scenario has no agents")

    seen: set[str] = set()
    for i, a in enumerate(s.agents):
        if a.id in seen:
            raise InvariantError(f"agents[{i}].id", f"duplicate agent id {a.id!r}")
        seen.add(a.id)
    if s.ego_id not in seen:
        raise InvariantError("ego_id", f"ego {s.ego_id!r} not among agents")

    n = len(s.agents[0].states)
    for i, a in enumerate(s.agents):
        if not a.states:
            raise InvariantError(f"agents[{i}].states", "empty trajectory")
        if len(a.states) != n:
            raise InvariantError(f"agents[{i}].states", f"expected {n} samples like agents[0], got {len(a.states)}")
        prev = None
        for k, st in enumerate(a.states):
            p = f"agents[{i}].states[{k}]"
            if not (-180.0 < st.heading <= 180.0):
                raise InvariantError(f"{p}.heading", f"heading {st.heading} outside (-180, 180]")
            if st.speed < 0:
                raise InvariantError(f"{p}.speed", "negative speed")
            if prev is not None:
                gap = st.t - prev
                if gap <= 0:
                    raise InvariantError(f"{p}.t", "timestamps not strictly increasing")
                if abs(gap - s.timestep_s) > 1e-3:
                    raise InvariantError(f"{p}.t", f"sample spacing {gap:g} s differs from timestep_s")
            prev = st.t
        if i > 0 and any(abs(st.t - ref.t) > 1e-6 for st, ref in zip(a.states, s.agents[0].states)):
            raise InvariantError(f"agents[{i}].states", "timestamps differ from agents[0]")

    if not (0 <= s.current_index < n):
        raise InvariantError("current_index", f"{s.current_index} outside [0, {n})")
    if s.future_index() >= n:
        raise InvariantError("current_index", f"no sample {FUTURE_HORIZON_S} s after the current one")

    groups: dict[str, list[int]] = {}
    lane_ids: set[str] = set()
    for i, ln in enumerate(s.map.lanes):
        if ln.id in lane_ids:
            raise InvariantError(f"map.lanes[{i}].id", f"duplicate lane id {ln.id!r}")
        lane_ids.add(ln.id)
        groups.setdefault(ln.group, []).append(ln.index)
    for g, idx in groups.items():
        if sorted(idx) != list(range(1, len(idx) + 1)):
            bad = next(i for i, ln in enumerate(s.map.lanes) if ln.group == g)
            raise InvariantError(f"map.lanes[{bad}].index", f"indices of group {g!r} must be 1..{len(idx)}")
    for i, it in enumerate(s.map.intersections):
        if it.branches < 3:
            raise InvariantError(f"map.intersections[{i}].branches", "branch count must be >= 3")
        if it.radius <= 0:
            raise InvariantError(f"map.intersections[{i}].radius", "radius must be positive")
    for i, sg in enumerate(s.map.stop_signs):
        if sg.approach not in groups:
            raise InvariantError(f"map.stop_signs[{i}].approach", f"unknown lane group {sg.approach!r}")
    for i, sig in enumerate(s.signals):
        if sig.approach not in groups:
            raise InvariantError(f"signals[{i}].approach", f"unknown lane group {sig.approach!r}")
        if sig.stop_point is not None:
            d = min(_dist_to_polyline(sig.stop_point, ln.centerline) for ln in s.map.group_lanes(sig.approach))
            if d > STOP_POINT_TOLERANCE_M:
                raise InvariantError(f"signals[{i}].stop_point", f"{d:.2f} m away from approach {sig.approach!r}")
    for f in sorted(s.interactive_flags):
        if f not in seen:
            raise InvariantError("interactive_flags", f"unknown agent id {f!r}")


# ---------------------------------------------------------------------------
# serialization


def _pt(p: Point) -> list[float]:
    return [p[0], p[1]]


def scenario_to_dict(s: Scenario) -> dict[str, Any]:
    return {
        "id": s.id,
        "timestep_s": s.timestep_s,
        "current_index": s.current_index,
        "ego_id": s.ego_id,
        "agents": [
            {
                "id": a.id,
                "kind": a.kind,
                "states": [
                    {"t": st.t, "x": st.x, "y": st.y, "heading": st.heading, "speed": st.speed, "valid": st.valid}
                    for st in a.states
                ],
            }
            for a in s.agents
        ],
        "map": {
            "lanes": [
                {"id": ln.id, "group": ln.group, "index": ln.index, "centerline": [_pt(p) for p in ln.centerline]}
                for ln in s.map.lanes
            ],
            "intersections": [
                {"id": it.id, "center": _pt(it.center), "branches": it.branches, "radius": it.radius}
                for it in s.map.intersections
            ],
            "stop_signs": [{"id": sg.id, "point": _pt(sg.point), "approach": sg.approach} for sg in s.map.stop_signs],
            "crosswalks": [{"id": a.id, "polygon": [_pt(p) for p in a.polygon]} for a in s.map.crosswalks],
            "speed_bumps": [{"id": a.id, "polygon": [_pt(p) for p in a.polygon]} for a in s.map.speed_bumps],
        },
        "signals": [
            {"approach": sg.approach, "color": sg.color, "stop_point": None if sg.stop_point is None else _pt(sg.stop_point)}
            for sg in s.signals
        ],
        "interactive_flags": sorted(s.interactive_flags, key=agent_sort_key),
    }


def serialize_scenario(s: Scenario) -> bytes:
    """Byte-stable UTF-8 JSON with a fixed key order."""
    doc = scenario_to_dict(s)
    return (json.dumps(doc, indent=1, ensure_ascii=False) + "\n").encode("utf-8")


# ---------------------------------------------------------------------------


def filter_interactive(scenarios: Iterable[Scenario]) -> list[Scenario]:
    """Keep scenarios carrying at least one objects-of-interest flag."""
    return [s for s in scenarios if s.interactive_flags]
