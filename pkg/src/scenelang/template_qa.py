"""Rule-mode Q&A: checklist questions answered straight from the scene facts.

A question is emitted only when its answer exists in the scene. Question
wording rotates through a few variants picked by a stable hash, so output
is varied across agents but identical across runs.
"""

from __future__ import annotations

import zlib
from typing import Sequence

from . import geometry as geo
from .interaction import IntentionSummary, InteractionLabel
from .qa import QARecord
from .translator import (
    COLOR_WORDS,
    FEATURE_WORDS,
    REF_EGO,
    AgentFacts,
    SceneDescription,
    TranslationError,
    fmt_1,
    fmt_int,
    relpos_parts,
)

ORDINALS = {1: "first", 2: "second", 3: "third", 4: "fourth", 5: "fifth", 6: "sixth"}

STATUS_WORDS = {
    "accelerating": "accelerating",
    "decelerating": "decelerating",
    "constant": "moving at a constant speed",
    "not_moving": "not moving",
}
PHASE_WORDS = {
    "heading_towards": "heading towards the intersection",
    "inside": "inside the intersection",
    "exiting": "exiting the intersection",
    "departing": "departing from the intersection",
    "same_side": "on the same side of the intersection as the ego agent",
    "opposite_side": "on the opposite side of the intersection from the ego agent",
}
HEADING_WORDS = {
    "same": "in the same direction as the ego agent",
    "opposite": "in the opposite direction of the ego agent",
    "left": "to the left of the ego agent's heading",
    "right": "to the right of the ego agent's heading",
}
CAUSE_WORDS = {
    "stop_sign": "it has to stop at its stop sign first",
    "traffic_light": "its traffic light is red",
    "arrow_right_of_way": "the other agent has a protected green arrow",
    "pedestrian_priority": "pedestrians have the right of way",
}

INT_QUESTIONS = (
    "What interactions will happen between surrounding agent #{a} and the ego agent?",
    "How will surrounding agent #{a} and the ego agent interact?",
    "Is there any interaction between the ego agent and surrounding agent #{a}?",
    "What kind of interaction can be expected between the ego agent and surrounding agent #{a}?",
)
INTENT_QUESTIONS = (
    "What will be the intention of the ego agent?",
    "What will the ego agent aim to do in the upcoming moments?",
    "What does the ego agent intend to do next?",
)
BASE_INTENT_WORDS = {
    "go_straight": "keep going straight in its lane",
    "turn_left": "turn left",
    "turn_right": "turn right",
    "stop": "come to a stop",
    "proceed_through": "go through the intersection",
}
CONTROL_WORDS = {
    "wait_for_green": "It has to stop at the red light and wait for it to turn green.",
    "prepare_to_stop": "The light is yellow, so it should prepare to stop.",
    "proceed_on_green": "Its light is green, so it may proceed.",
    "stop_at_sign": "It must come to a full stop at the stop sign before going on.",
    "already_stopped": "It has already stopped at the stop sign and may go on when the way is clear.",
    "watch_for_pedestrians": "It will watch for pedestrians at the crosswalk ahead.",
    "slow_down": "It will slow down for the speed bump.",
}
RESPONSE_WORDS = {
    "ego_yields": "The ego agent will yield to surrounding agent #{a}.",
    "other_yields": "Surrounding agent #{a} will yield to the ego agent.",
    "ego_overtakes": "The ego agent will overtake surrounding agent #{a}.",
    "other_overtakes": "Surrounding agent #{a} will overtake the ego agent, so the ego agent keeps its lane.",
    "ego_follows": "The ego agent will keep following surrounding agent #{a}.",
    "other_follows": "Surrounding agent #{a} will keep following the ego agent.",
}


def _variant(options: Sequence[str], *keys: str) -> str:
    h = zlib.crc32("\x1f".join(keys).encode("utf-8"))
    return options[h % len(options)]


def _ordinal(n: int) -> str:
    return ORDINALS.get(n, f"{n}th")


def _feature_answer(kind: str, d: float, who: str) -> str:
    word = FEATURE_WORDS[kind]
    if fmt_int(d) == "0":
        return f"Yes, {who} is at a {word}."
    return f"Yes, there is a {word} {fmt_int(d)} meters ahead of {who}."


def _motion(f: AgentFacts, who: str) -> list[tuple[str, str]]:
    out = []
    if f.status == "not_moving" or f.speed < geo.NOT_MOVING_SPEED:
        out.append((f"Is {who} moving?", f"No, {who} is not moving."))
        return out
    out.append((f"What is the current speed of {who}?", f"Its current speed is {fmt_int(f.speed)} m/s."))
    if f.status is not None:
        out.append((f"What is the motion status of {who}?", f"It is {STATUS_WORDS[f.status]}."))
    return out


def _controls(f: AgentFacts, who: str) -> list[tuple[str, str]]:
    out = []
    if f.signal is not None:
        color, dist = f.signal
        where = "" if dist is None else f", {fmt_1(dist)} meters ahead"
        out.append((f"What traffic light does {who} face?", f"The traffic light for {who} is {COLOR_WORDS[color]}{where}."))
    for kind, d in f.proximity:
        out.append((f"Is {who} approaching a {FEATURE_WORDS[kind]}?", _feature_answer(kind, d, who)))
    return out


def map_env_qa(desc: SceneDescription) -> list[QARecord]:
    f = desc.facts
    recs = []
    if f.intersection is not None:
        recs.append(QARecord("map_env", "Is there an intersection?", "Yes, there is an intersection near the ego agent."))
        recs.append(
            QARecord("map_env", "What type of intersection is it?", f"It is a {geo.classify_intersection(f.intersection)} intersection.")
        )
        first, second = relpos_parts(f.center_offset, REF_EGO, fmt_1)
        recs.append(QARecord("map_env", "Where is the intersection center?", f"It is {first}, and {second}."))
    if f.ego.lane is not None:
        recs.append(QARecord("map_env", "How many lanes on ego's side?", str(f.ego.lane.total)))
    if f.stop_sign_count:
        n = f.stop_sign_count
        text = "There is 1 stop sign" if n == 1 else f"There are {n} stop signs"
        recs.append(QARecord("map_env", "Are there stop signs at the intersection?", f"Yes. {text} in the intersection."))
    for kind, d in f.ego.proximity:
        if kind == "stop_sign":
            recs.append(QARecord("map_env", "Is there a stop sign for the ego agent's direction?", _feature_answer(kind, d, "the ego agent")))
        else:
            recs.append(QARecord("map_env", f"Is there a {FEATURE_WORDS[kind]} ahead?", _feature_answer(kind, d, "the ego agent")))
    return recs


def ego_qa(desc: SceneDescription) -> list[QARecord]:
    f = desc.facts.ego
    who = "the ego agent"
    pairs = _motion(f, who)
    if f.lane is not None:
        side = "left" if f.lane.side == "from_left" else "right"
        pairs.append(
            ("Which lane is the ego agent on?", f"It is on the {_ordinal(f.lane.index)} lane from the {side}, out of {f.lane.total}.")
        )
    pairs += _controls(f, who)
    if f.phase is not None and f.phase.value in PHASE_WORDS:
        pairs.append(("Where is the ego agent relative to the intersection?", f"It is {PHASE_WORDS[f.phase.value]}."))
    return [QARecord("ego", q, a) for q, a in pairs]


def agent_qa(f: AgentFacts) -> list[QARecord]:
    a = f.agent_id
    who = f"surrounding agent #{a}"
    pairs = [(f"What type of agent is {who}?", f"Surrounding agent #{a} is a {f.kind}.")]
    pairs += _motion(f, who)
    if f.relpos is not None:
        first, second = relpos_parts(f.relpos, REF_EGO)
        pairs.append((f"Where is {who} relative to the ego agent?", f"It is {first}, and is {second}."))
    if f.phase is not None and f.phase.value in PHASE_WORDS:
        pairs.append((f"Where is {who} relative to the intersection?", f"It is {PHASE_WORDS[f.phase.value]}."))
    if f.lane is not None:
        side = "left" if f.lane.side == "from_left" else "right"
        pairs.append((f"Which lane is {who} on?", f"It is on the {_ordinal(f.lane.index)} lane from the {side}, out of {f.lane.total}."))
    if f.heading is not None:
        pairs.append((f"Which direction is {who} heading?", f"It is heading {HEADING_WORDS[f.heading]}."))
    pairs += _controls(f, who)
    return [QARecord("other_agent", q, ans, a) for q, ans in pairs]


def interaction_answer(label: InteractionLabel, ego_id: str) -> str:
    a = label.other(ego_id)
    if label.kind in ("rule_yield", "ped_yield"):
        cause = CAUSE_WORDS[label.cause]
        if label.yielder == ego_id:
            return f"The ego agent will yield to surrounding agent #{a} because {cause}."
        return f"Surrounding agent #{a} will yield to the ego agent because {cause}."
    if label.kind == "overtake":
        if label.actor == ego_id:
            return f"The ego agent will overtake surrounding agent #{a} by moving into another lane."
        return f"Surrounding agent #{a} will overtake the ego agent by moving into another lane."
    if label.kind == "follow":
        if label.actor == ego_id:
            return f"The ego agent is following surrounding agent #{a} in the same lane."
        return f"Surrounding agent #{a} is following the ego agent in the same lane."
    return f"Surrounding agent #{a} will have no interaction with the ego agent as their paths have no conflicts."


def intention_answer(intent: IntentionSummary) -> str:
    parts = [f"The ego agent intends to {BASE_INTENT_WORDS[intent.ego_base_intent]}."]
    parts += [CONTROL_WORDS[action] for _, action in intent.control_responses]
    parts += [RESPONSE_WORDS[token].format(a=agent) for agent, token in intent.responses]
    return " ".join(parts)


def generate_template_qa(desc: SceneDescription, labels: Sequence[InteractionLabel], intent: IntentionSummary) -> list[QARecord]:
    if desc.facts is None:
        raise TranslationError(f"{desc.scenario_id}: description carries no facts")
    ego_id = desc.facts.ego.agent_id
    recs = map_env_qa(desc) + ego_qa(desc)
    for af in desc.facts.agents:
        recs += agent_qa(af)
    by_agent = {lb.other(ego_id): lb for lb in labels if ego_id in lb.pair}
    for af in desc.facts.agents:
        a = af.agent_id
        q = _variant(INT_QUESTIONS, desc.scenario_id, a).format(a=a)
        lb = by_agent.get(a)
        if lb is None:
            ans = f"Surrounding agent #{a} will have no interaction with the ego agent as their paths have no conflicts."
        else:
            ans = interaction_answer(lb, ego_id)
        recs.append(QARecord("interaction", q, ans, a))
    recs.append(QARecord("intention", _variant(INTENT_QUESTIONS, desc.scenario_id), intention_answer(intent)))
    return recs
