"""Rule-based rendering of a scenario into an ego-centric scene description.

Paragraph order is fixed: map environment, ego agent, surrounding agents
(ascending id), then the future moment. All wording lives in the template
constants below so golden tests can compare bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import geometry as geo
from .geometry import AgentSnapshot, IntersectionPhase, LanePlacement, RelPos
from .scenario import FUTURE_HORIZON_S, Intersection, Scenario, agent_sort_key

# stop signs this close to an intersection's disk are counted as part of it
STOP_SIGN_CATCHMENT_M = 20.0

T_EGO_PHASE = {
    "heading_towards": "The ego agent is heading towards intersection.",
    "inside": "The ego agent is in the intersection.",
    "exiting": "The ego agent is exiting the intersection.",
    "departing": "The ego agent is departing from the intersection.",
}
T_CENTER = "The intersection center is {first}, and is {second}."
T_INTER_TYPE = "The intersection is a {label} intersection."
T_STOP_SIGNS = "There are {n} stop signs in the intersection."
T_STOP_SIGN_ONE = "There is 1 stop sign in the intersection."

T_EGO_LANE = "The ego agent is on the {index} lane from the {side}, out of {total} {lanes}."
T_AGENT_LANE = "It is on the {index} lane from the {side}, out of {total} {lanes}."
T_SPEED = "Its current speed is {speed} m/s."
T_STATUS = {
    "accelerating": "It is accelerating.",
    "decelerating": "It is decelerating.",
    "constant": "It is moving at a constant speed.",
    "not_moving": "It is not moving.",
}
T_EGO_SIGNAL = "Traffic Light for the ego agent is {color}{where}."
T_AGENT_SIGNAL = "Traffic Light for this agent is {color}{where}."
COLOR_WORDS = {"red": "red", "yellow": "yellow", "green": "green", "arrow_green": "arrow green"}
FEATURE_WORDS = {"crosswalk": "crosswalk", "stop_sign": "stop sign", "speed_bump": "speed bump"}
T_EGO_APPROACHING = "The ego agent is approaching a {feature} {d} meters ahead."
T_EGO_AT = "The ego agent is at a {feature}."
T_AGENT_APPROACHING = "It is approaching a {feature} {d} meters ahead."
T_AGENT_AT = "It is at a {feature}."

T_AGENT_TYPE = "Surrounding agent # {id} is a {kind}."
T_AGENT_RELPOS = "It is {first}, and is {second}."
T_AGENT_HEADING = {
    "same": "It is heading in the same direction as the ego agent.",
    "opposite": "It is heading the opposite direction as the ego agent.",
    "left": "It is heading left of the ego agent.",
    "right": "It is heading right of the ego agent.",
}
T_AGENT_PHASE = {
    "heading_towards": "It is heading towards the intersection.",
    "inside": "It is in the intersection.",
    "exiting": "It is exiting the intersection.",
    "departing": "It is departing from the intersection.",
}
T_AGENT_SIDE = {
    "same": "It is on the same side of the intersection as the ego agent.",
    "opposite": "It is on the opposite side of the intersection from the ego agent.",
}
T_DIST_EGO = "It is {d} meters away from the ego agent."
T_DIST_CENTER = "It is {d} meters away from the intersection center."

T_FUTURE_HEADER = "The following is the description of the ego and surrounding agents after {h} seconds:"
T_FUTURE_AGENT_RELPOS = "Surrounding agent # {id} will be {first}, and will be {second}."
T_FUTURE_EGO_RELPOS = "The ego agent will be {first}, and will be {second}."
T_FUTURE_AGENT_HEADING = {
    "same": "It will be heading in the same direction as the ego agent.",
    "opposite": "It will be heading the opposite direction as the ego agent.",
    "left": "It will be heading left of the ego agent.",
    "right": "It will be heading right of the ego agent.",
}
T_FUTURE_EGO_HEADING = {
    "same": "It will be heading in the same direction as the current moment.",
    "opposite": "It will be heading the opposite direction as the current moment.",
    "left": "It will be heading left of the current moment.",
    "right": "It will be heading right of the current moment.",
}
T_FUTURE_SPEED = "Its speed will be {speed} m/s."
T_FUTURE_NOT_MOVING = "It will not be moving."
T_FUTURE_PHASE = {
    "heading_towards": "It will be heading towards the intersection.",
    "inside": "It will be in the intersection.",
    "exiting": "It will be exiting the intersection.",
    "departing": "It will be departing from the intersection.",
}
T_FUTURE_SIDE = {
    "same": "Looking from the agent's current angle, it will be on the same side of the intersection.",
    "opposite": "Looking from the agent's current angle, it will be on the opposite side of the intersection.",
}
T_FUTURE_DIST_EGO = "It will be {d} meters away from the ego agent."
T_FUTURE_DIST_CENTER = "It will be {d} meters away from the intersection center."

REF_EGO = "the ego agent"
REF_CURRENT_PLACE = "the current place"


class TranslationError(ValueError):
    pass


class UnknownAgent(TranslationError):
    pass


def fmt_int(x: float) -> str:
    """Round half away from zero on the magnitude."""
    return str(int(math.floor(abs(x) + 0.5)))


def fmt_1(x: float) -> str:
    return f"{abs(x):.1f}"


def relpos_parts(rel: RelPos, ref: str, fmt=fmt_int) -> tuple[str, str]:
    """Two phrases, larger-magnitude axis first (longitudinal on ties)."""
    lon = f"{fmt(rel.longitudinal)} meters {'in front of' if rel.longitudinal >= 0 else 'behind'} {ref}"
    lat = f"{fmt(rel.lateral)} meters on the {'left' if rel.lateral >= 0 else 'right'} of {ref}"
    if abs(rel.lateral) > abs(rel.longitudinal):
        return lat, lon
    return lon, lat


# ---------------------------------------------------------------------------
# facts


@dataclass(frozen=True)
class AgentFacts:
    agent_id: str
    kind: str
    speed: float
    status: str | None
    lane: LanePlacement | None
    signal: tuple[str, float | None] | None
    proximity: tuple[tuple[str, float], ...]
    phase: IntersectionPhase | None
    relpos: RelPos | None = None  # None for the ego
    heading: str | None = None  # relation to the ego heading


@dataclass(frozen=True)
class SceneFacts:
    ego: AgentFacts
    agents: tuple[AgentFacts, ...]
    intersection: Intersection | None
    center_offset: RelPos | None
    stop_sign_count: int
    future: dict[str, AgentSnapshot] | None = None
    horizon_s: float = FUTURE_HORIZON_S


def _agent_facts(s: Scenario, agent, snap: dict[str, AgentSnapshot]) -> AgentFacts:
    i = s.current_index
    st = agent.states[i]
    try:
        status = geo.motion_status(agent.states, i)
    except geo.InsufficientSamples:
        status = "not_moving" if st.speed < geo.NOT_MOVING_SPEED else None
    on_road = agent.kind != "pedestrian"
    lane = geo.lane_placement(st.position, s.map, st.heading) if on_road else None
    signal = geo.signal_for(agent, s.signals, s.map, i) if on_road else None
    if signal is not None and signal[0] == "unknown":
        signal = None
    sn = snap[agent.id]
    is_ego = agent.id == s.ego_id
    return AgentFacts(
        agent_id=agent.id,
        kind=agent.kind,
        speed=st.speed,
        status=status,
        lane=lane,
        signal=signal,
        proximity=tuple(geo.proximity_features(agent, s.map, i)),
        phase=sn.phase,
        relpos=None if is_ego else sn.relpos,
        heading=None if is_ego else sn.heading,
    )


def scene_facts(s: Scenario, horizon_s: float = FUTURE_HORIZON_S) -> SceneFacts:
    """Everything the templates need, computed once."""
    ego_state = s.ego.states[s.current_index]
    if not ego_state.valid:
        raise TranslationError(f"ego {s.ego_id!r} has no valid current sample")
    snap = geo.snapshot(s, s.current_index)
    inter = geo.related_intersection(s)
    center = None
    n_signs = 0
    if inter is not None:
        center = geo.ego_frame(inter.center, geo.pose_of(ego_state))
        reach = inter.radius + STOP_SIGN_CATCHMENT_M
        n_signs = sum(
            1 for sg in s.map.stop_signs if math.hypot(sg.point[0] - inter.center[0], sg.point[1] - inter.center[1]) <= reach
        )
    try:
        future = geo.future_snapshot(s, horizon_s)
    except geo.HorizonUnavailable:
        future = None
    return SceneFacts(
        ego=_agent_facts(s, s.ego, snap),
        agents=tuple(_agent_facts(s, a, snap) for a in s.others() if a.id in snap),
        intersection=inter,
        center_offset=center,
        stop_sign_count=n_signs,
        future=future,
        horizon_s=horizon_s,
    )


# ---------------------------------------------------------------------------
# sentences


def _lane_sentence(template: str, lane: LanePlacement) -> str:
    side = "right" if lane.side == "from_right" else "left"
    return template.format(index=lane.index, side=side, total=lane.total, lanes="lane" if lane.total == 1 else "lanes")


def _motion_sentences(f: AgentFacts) -> list[str]:
    if f.status == "not_moving" or f.speed < geo.NOT_MOVING_SPEED:
        return [T_STATUS["not_moving"]]
    out = [T_SPEED.format(speed=fmt_int(f.speed))]
    if f.status is not None:
        out.append(T_STATUS[f.status])
    return out


def _signal_sentence(template: str, signal: tuple[str, float | None] | None) -> list[str]:
    if signal is None:
        return []
    color, dist = signal
    where = "" if dist is None else f" {fmt_1(dist)} meters ahead"
    return [template.format(color=COLOR_WORDS[color], where=where)]


def _proximity_sentences(f: AgentFacts, approaching: str, at: str) -> list[str]:
    out = []
    for kind, d in f.proximity:
        word = FEATURE_WORDS[kind]
        if fmt_int(d) == "0":
            out.append(at.format(feature=word))
        else:
            out.append(approaching.format(feature=word, d=fmt_int(d)))
    return out


def _join(sentences: list[str]) -> str:
    return " ".join(sentences)


def describe_map(s: Scenario, facts: SceneFacts | None = None) -> str:
    f = facts or scene_facts(s)
    if f.intersection is None:
        return ""
    out = []
    if f.ego.phase is not None and f.ego.phase.value in T_EGO_PHASE:
        out.append(T_EGO_PHASE[f.ego.phase.value])
    first, second = relpos_parts(f.center_offset, REF_EGO, fmt_1)
    out.append(T_CENTER.format(first=first, second=second))
    out.append(T_INTER_TYPE.format(label=geo.classify_intersection(f.intersection)))
    if f.stop_sign_count == 1:
        out.append(T_STOP_SIGN_ONE)
    elif f.stop_sign_count > 1:
        out.append(T_STOP_SIGNS.format(n=f.stop_sign_count))
    return _join(out)


def describe_ego(s: Scenario, facts: SceneFacts | None = None) -> str:
    f = (facts or scene_facts(s)).ego
    out = []
    if f.lane is not None:
        out.append(_lane_sentence(T_EGO_LANE, f.lane))
    out += _motion_sentences(f)
    out += _signal_sentence(T_EGO_SIGNAL, f.signal)
    out += _proximity_sentences(f, T_EGO_APPROACHING, T_EGO_AT)
    return _join(out)


def _describe_agent_facts(f: AgentFacts) -> str:
    out = [T_AGENT_TYPE.format(id=f.agent_id, kind=f.kind)]
    first, second = relpos_parts(f.relpos, REF_EGO)
    out.append(T_AGENT_RELPOS.format(first=first, second=second))
    out.append(T_AGENT_HEADING[f.heading])
    if f.lane is not None:
        out.append(_lane_sentence(T_AGENT_LANE, f.lane))
    out += _motion_sentences(f)
    out += _signal_sentence(T_AGENT_SIGNAL, f.signal)
    if f.phase is not None:
        if f.phase.value in T_AGENT_PHASE:
            out.append(T_AGENT_PHASE[f.phase.value])
        if f.phase.side is not None:
            out.append(T_AGENT_SIDE[f.phase.side])
    if f.phase is None or f.phase.side is None:
        out.append(T_DIST_EGO.format(d=fmt_int(f.relpos.distance)))
    else:
        out.append(T_DIST_CENTER.format(d=fmt_int(f.phase.distance_to_center)))
    out += _proximity_sentences(f, T_AGENT_APPROACHING, T_AGENT_AT)
    return _join(out)


def describe_agent(s: Scenario, agent_id: str, facts: SceneFacts | None = None) -> str:
    if agent_id == s.ego_id:
        raise UnknownAgent(f"{agent_id!r} is the ego agent")
    f = facts or scene_facts(s)
    for af in f.agents:
        if af.agent_id == agent_id:
            return _describe_agent_facts(af)
    raise UnknownAgent(f"no surrounding agent {agent_id!r} valid at the current moment")


def _future_paragraph(agent_id: str, sn: AgentSnapshot, is_ego: bool) -> str:
    if is_ego:
        first, second = relpos_parts(sn.relpos, REF_CURRENT_PLACE)
        out = [T_FUTURE_EGO_RELPOS.format(first=first, second=second), T_FUTURE_EGO_HEADING[sn.heading]]
    else:
        first, second = relpos_parts(sn.relpos, REF_EGO)
        out = [T_FUTURE_AGENT_RELPOS.format(id=agent_id, first=first, second=second), T_FUTURE_AGENT_HEADING[sn.heading]]
    if sn.speed < geo.NOT_MOVING_SPEED:
        out.append(T_FUTURE_NOT_MOVING)
    else:
        out.append(T_FUTURE_SPEED.format(speed=fmt_int(sn.speed)))
    ph = sn.phase
    if ph is not None:
        if ph.value in T_FUTURE_PHASE:
            out.append(T_FUTURE_PHASE[ph.value])
        if ph.side is not None:
            out.append(T_FUTURE_SIDE[ph.side])
    if ph is not None and (ph.side is not None or is_ego):
        out.append(T_FUTURE_DIST_CENTER.format(d=fmt_int(ph.distance_to_center)))
    elif not is_ego:
        out.append(T_FUTURE_DIST_EGO.format(d=fmt_int(sn.relpos.distance)))
    return _join(out)


def _future_order(s: Scenario, future: dict[str, AgentSnapshot]) -> list[str]:
    """Nearest to the intersection center first; ego wins ties."""

    def key(agent_id: str):
        sn = future[agent_id]
        d = sn.phase.distance_to_center if sn.phase is not None else 0.0
        return (d, agent_id != s.ego_id, agent_sort_key(agent_id))

    return sorted(future, key=key)


def describe_future(s: Scenario, facts: SceneFacts | None = None) -> list[str]:
    f = facts or scene_facts(s)
    if f.future is None:
        raise geo.HorizonUnavailable(f"no sample {f.horizon_s} s after the current one")
    current_ids = {s.ego_id} | {a.agent_id for a in f.agents}
    future = {k: v for k, v in f.future.items() if k in current_ids}
    out = [T_FUTURE_HEADER.format(h=f"{f.horizon_s:.1f}")]
    for agent_id in _future_order(s, future):
        out.append(_future_paragraph(agent_id, future[agent_id], agent_id == s.ego_id))
    return out


@dataclass(frozen=True)
class SceneDescription:
    scenario_id: str
    map_paragraph: str
    ego_paragraph: str
    agent_paragraphs: tuple[tuple[str, str], ...]
    future_paragraphs: tuple[str, ...]
    facts: SceneFacts | None = field(default=None, compare=False, repr=False)

    @property
    def parts(self) -> list[str]:
        return [p for p in (self.map_paragraph, self.ego_paragraph, *(t for _, t in self.agent_paragraphs), *self.future_paragraphs) if p]

    @property
    def full_text(self) -> str:
        return "\n\n".join(self.parts)

    @property
    def agent_ids(self) -> list[str]:
        return [a for a, _ in self.agent_paragraphs]


def render(s: Scenario, horizon_s: float = FUTURE_HORIZON_S) -> SceneDescription:
    facts = scene_facts(s, horizon_s)
    return SceneDescription(
        scenario_id=s.id,
        map_paragraph=describe_map(s, facts),
        ego_paragraph=describe_ego(s, facts),
        agent_paragraphs=tuple((af.agent_id, _describe_agent_facts(af)) for af in facts.agents),
        future_paragraphs=tuple(describe_future(s, facts)),
        facts=facts,
    )
