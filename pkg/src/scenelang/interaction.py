"""Rule engine for pairwise interactions and the ego's intention.

Pairs are classified by a first-match chain: traffic-control yielding between
two vehicles, then vehicle/pedestrian conflicts, then intention patterns
(overtaking, following). The engine is deterministic and serves both as the
offline annotator and as the comparator for language-model answers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from . import geometry as geo
from .scenario import Agent, Scenario, StopSign, agent_sort_key, normalize_heading

Kind = Literal["rule_yield", "ped_yield", "overtake", "follow", "none"]
Cause = Literal["stop_sign", "traffic_light", "arrow_right_of_way", "pedestrian_priority", "intention_pattern", "none"]
BaseIntent = Literal["go_straight", "turn_left", "turn_right", "stop", "proceed_through"]

CONFLICT_RADIUS_M = 3.0
HORIZON_S = 8.0
TURN_THRESHOLD_DEG = 30.0
INTENT_WINDOW_S = 3.0
STOP_SERVED_RADIUS_M = 5.0
STOP_SIGN_LOOKAHEAD_M = 50.0
FOLLOW_GAP_M = (3.0, 30.0)
FOLLOW_GAP_CHANGE = 0.2
ORACLE_STEP_S = 0.01


@dataclass(frozen=True)
class Conflict:
    time: float  # seconds after the current moment
    point_a: tuple[float, float]
    point_b: tuple[float, float]
    distance: float


@dataclass(frozen=True)
class InteractionLabel:
    pair: tuple[str, str]
    kind: Kind = "none"
    yielder: str | None = None
    cause: Cause = "none"
    conflict_time: float | None = None
    actor: str | None = None  # overtaking or following agent for intention patterns
    rationale: str = ""

    def __post_init__(self):
        if self.yielder is not None and self.yielder not in self.pair:
            raise ValueError(f"yielder {self.yielder!r} not in pair {self.pair}")
        if self.kind == "none" and (self.cause != "none" or self.yielder is not None):
            raise ValueError("kind none requires cause none and no yielder")

    def other(self, agent_id: str) -> str:
        return self.pair[1] if self.pair[0] == agent_id else self.pair[0]

    def to_dict(self) -> dict:
        return {
            "pair": list(self.pair),
            "kind": self.kind,
            "yielder": self.yielder,
            "cause": self.cause,
            "conflict_time": self.conflict_time,
            "actor": self.actor,
            "rationale": self.rationale,
        }


@dataclass(frozen=True)
class IntentionSummary:
    ego_base_intent: BaseIntent
    responses: tuple[tuple[str, str], ...] = ()
    control_responses: tuple[tuple[str, str], ...] = ()

    def to_dict(self) -> dict:
        return {
            "ego_base_intent": self.ego_base_intent,
            "responses": [list(r) for r in self.responses],
            "control_responses": [list(c) for c in self.control_responses],
        }


def _none(pair: tuple[str, str], why: str = "") -> InteractionLabel:
    return InteractionLabel(pair=pair, rationale=why)


# ---------------------------------------------------------------------------
# path conflicts


def _track(agent: Agent, start: int, horizon_s: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Times, positions and a per-segment validity mask from ``start`` on."""
    t0 = agent.states[start].t
    sts = [st for st in agent.states[start:] if st.t - t0 <= horizon_s + 1e-9]
    t = np.array([st.t - t0 for st in sts])
    xy = np.array([[st.x, st.y] for st in sts])
    ok = np.array([st.valid for st in sts])
    return t, xy, ok


def _segments(t: np.ndarray, xy: np.ndarray, ok: np.ndarray):
    """Motion segments between consecutive valid samples; isolated ones become points."""
    starts, ends, ts, te = [], [], [], []
    n = len(t)
    for i in range(n):
        if not ok[i]:
            continue
        if i + 1 < n and ok[i + 1]:
            starts.append(xy[i]), ends.append(xy[i + 1]), ts.append(t[i]), te.append(t[i + 1])
        elif i == 0 or not ok[i - 1]:
            starts.append(xy[i]), ends.append(xy[i]), ts.append(t[i]), te.append(t[i])
    if not starts:
        return None
    return np.array(starts), np.array(ends), np.array(ts), np.array(te)


def _point_seg(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    den = np.einsum("...i,...i->...", ab, ab)
    u = np.where(den > 0, np.einsum("...i,...i->...", p - a, ab) / np.where(den > 0, den, 1.0), 0.0)
    u = np.clip(u, 0.0, 1.0)
    return np.linalg.norm(p - (a + u[..., None] * ab), axis=-1)


def _seg_seg(a0, a1, b0, b1) -> np.ndarray:
    """Minimum distance between segments, broadcasting over leading axes."""

    def cross(u, v):
        return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]

    r, s = a1 - a0, b1 - b0
    den = cross(r, s)
    q = b0 - a0
    safe = np.where(den != 0, den, 1.0)
    tt = cross(q, s) / safe
    uu = cross(q, r) / safe
    hit = (den != 0) & (tt >= 0) & (tt <= 1) & (uu >= 0) & (uu <= 1)
    d = np.minimum.reduce(
        [_point_seg(a0, b0, b1), _point_seg(a1, b0, b1), _point_seg(b0, a0, a1), _point_seg(b1, a0, a1)]
    )
    return np.where(hit, 0.0, d)


def _truncated(seg_start, seg_end, ts, te, T):
    """Part of a motion segment covered by time T (requires T >= ts)."""
    if te <= ts or T >= te:
        return seg_start, seg_end
    u = (T - ts) / (te - ts)
    return seg_start, seg_start + u * (seg_end - seg_start)


def path_conflict(
    a: Agent, b: Agent, horizon_s: float = HORIZON_S, start: int = 0, radius: float = CONFLICT_RADIUS_M
) -> Conflict | None:
    """Earliest time both agents have reached a shared spot of their paths.

    The paths are the piecewise-linear tracks of the next ``horizon_s``
    seconds. They conflict when some point of one comes within ``radius`` of
    some point of the other, regardless of when each passes it; the conflict
    time is the smallest ``max(t_a, t_b)`` over such point pairs.
    """
    ta, pa, oka = _track(a, start, horizon_s)
    tb, pb, okb = _track(b, start, horizon_s)
    sa, sb = _segments(ta, pa, oka), _segments(tb, pb, okb)
    if sa is None or sb is None:
        return None
    a0, a1, ats, ate = sa
    b0, b1, bts, bte = sb
    # cheap reject on bounding boxes
    lo_a, hi_a = np.minimum(a0, a1).min(axis=0), np.maximum(a0, a1).max(axis=0)
    lo_b, hi_b = np.minimum(b0, b1).min(axis=0), np.maximum(b0, b1).max(axis=0)
    gap = np.maximum(0.0, np.maximum(lo_a - hi_b, lo_b - hi_a))
    if math.hypot(*gap) > radius:
        return None

    d = _seg_seg(a0[:, None], a1[:, None], b0[None, :], b1[None, :])
    ii, jj = np.nonzero(d <= radius)
    if len(ii) == 0:
        return None
    lower = np.maximum(ats[ii], bts[jj])
    order = np.lexsort((jj, ii, lower))
    best_t, best = math.inf, None
    for k in order:
        i, j = ii[k], jj[k]
        if lower[k] >= best_t:
            break
        lo = lower[k]
        hi = max(ate[i], bte[j])

        def dist_at(T):
            pa0, pa1 = _truncated(a0[i], a1[i], ats[i], ate[i], T)
            pb0, pb1 = _truncated(b0[j], b1[j], bts[j], bte[j], T)
            return float(_seg_seg(pa0, pa1, pb0, pb1))

        if dist_at(lo) > radius:
            for _ in range(60):
                mid = (lo + hi) / 2.0
                if dist_at(mid) <= radius:
                    hi = mid
                else:
                    lo = mid
            T = hi
        else:
            T = lo
        if T < best_t:
            best_t, best = T, (i, j)
    i, j = best
    # report the closest pair of points reached by then
    pa0, pa1 = _truncated(a0[i], a1[i], ats[i], ate[i], best_t)
    pb0, pb1 = _truncated(b0[j], b1[j], bts[j], bte[j], best_t)
    ca, cb = _closest_points(pa0, pa1, pb0, pb1)
    return Conflict(float(best_t), (float(ca[0]), float(ca[1])), (float(cb[0]), float(cb[1])), float(np.linalg.norm(ca - cb)))


def _closest_points(a0, a1, b0, b1):
    best = None
    for u in np.linspace(0.0, 1.0, 101):
        p = a0 + u * (a1 - a0)
        ab = b1 - b0
        den = float(ab @ ab)
        v = 0.0 if den == 0 else min(1.0, max(0.0, float((p - b0) @ ab) / den))
        q = b0 + v * ab
        dd = float(np.linalg.norm(p - q))
        if best is None or dd < best[0]:
            best = (dd, p, q)
    return best[1], best[2]


def dense_conflict_oracle(
    a: Agent, b: Agent, horizon_s: float = HORIZON_S, start: int = 0, radius: float = CONFLICT_RADIUS_M, step: float = ORACLE_STEP_S
) -> float | None:
    """Brute-force reference: resample both tracks every ``step`` seconds."""

    def resample(agent: Agent):
        t, xy, ok = _track(agent, start, horizon_s)
        grid = np.arange(0.0, t[-1] + 1e-9, step)
        k = np.searchsorted(t, grid + 1e-9, side="right") - 1
        exact = np.abs(t[k] - grid) < 1e-9
        nxt = np.minimum(k + 1, len(t) - 1)
        inner = ~exact & (k + 1 < len(t)) & ok[k] & ok[nxt]
        keep = (exact & ok[k]) | inner
        span = np.where(t[nxt] > t[k], t[nxt] - t[k], 1.0)
        u = np.where(exact, 0.0, (grid - t[k]) / span)
        pts = xy[k] + u[:, None] * (xy[nxt] - xy[k])
        return grid[keep], pts[keep]

    ta, pa = resample(a)
    tb, pb = resample(b)
    if len(ta) == 0 or len(tb) == 0:
        return None
    dx = pa[:, None, 0] - pb[None, :, 0]
    dy = pa[:, None, 1] - pb[None, :, 1]
    ii, jj = np.nonzero(dx * dx + dy * dy <= radius * radius)
    if len(ii) == 0:
        return None
    return float(np.min(np.maximum(ta[ii], tb[jj])))


# ---------------------------------------------------------------------------
# traffic controls


def _valid_now(agent: Agent, s: Scenario) -> bool:
    return agent.states[s.current_index].valid


def served_stop(agent: Agent, sign: StopSign, upto: int) -> bool:
    """The agent came to a stop near the sign at or before sample ``upto``."""
    for st in agent.states[: upto + 1]:
        if st.valid and st.speed < geo.NOT_MOVING_SPEED:
            if math.hypot(st.x - sign.point[0], st.y - sign.point[1]) <= STOP_SERVED_RADIUS_M:
                return True
    return False


def stop_signs_ahead(agent: Agent, s: Scenario) -> list[tuple[StopSign, float]]:
    """Stop signs governing the agent's lane group that lie ahead of it."""
    st = agent.states[s.current_index]
    placement = geo.lane_placement(st.position, s.map, st.heading)
    if placement is None:
        return []
    path = geo.path_ahead(st, s.map, STOP_SIGN_LOOKAHEAD_M)
    out = []
    for sign in s.map.stop_signs:
        if sign.approach != placement.group:
            continue
        d = geo._arc_ahead(path, sign.point)
        if d is not None and d <= STOP_SIGN_LOOKAHEAD_M:
            out.append((sign, d))
    return sorted(out, key=lambda x: (x[1], x[0].id))


@dataclass(frozen=True)
class ControlState:
    signal: str | None  # signal color facing the agent
    stop_sign: bool  # a governing stop sign lies ahead
    stop_served: bool


def control_state(agent: Agent, s: Scenario) -> ControlState:
    if agent.kind == "pedestrian":
        return ControlState(None, False, False)
    sig = geo.signal_for(agent, s.signals, s.map, s.current_index)
    color = None if sig is None or sig[0] == "unknown" else sig[0]
    signs = stop_signs_ahead(agent, s)
    if not signs:
        return ControlState(color, False, False)
    return ControlState(color, True, served_stop(agent, signs[0][0], s.current_index))


# ---------------------------------------------------------------------------
# the chain


def detect_rule_yield(pair: tuple[str, str], s: Scenario) -> InteractionLabel:
    """Q1: does a traffic control decide who yields between two vehicles?"""
    a, b = s.agent(pair[0]), s.agent(pair[1])
    if a.kind != "vehicle" or b.kind != "vehicle":
        return _none(pair, "not a vehicle pair")
    if not (_valid_now(a, s) and _valid_now(b, s)):
        return _none(pair, "agent not observed at the current moment")
    conflict = path_conflict(a, b, start=s.current_index)
    if conflict is None:
        return _none(pair, "paths do not conflict")
    ca, cb = control_state(a, s), control_state(b, s)
    t = conflict.time

    def verdict(yielder: Agent, other: Agent, cause: Cause, why: str) -> InteractionLabel:
        return InteractionLabel(pair, "rule_yield", yielder.id, cause, t, None, why.format(y=yielder.id, o=other.id))

    arrow_a, arrow_b = ca.signal == "arrow_green", cb.signal == "arrow_green"
    if arrow_a != arrow_b:
        holder, other = (a, b) if arrow_a else (b, a)
        return verdict(other, holder, "arrow_right_of_way", "{o} holds a protected arrow, so {y} must yield")
    red_a, red_b = ca.signal == "red", cb.signal == "red"
    if red_a != red_b:
        y, o = (a, b) if red_a else (b, a)
        return verdict(y, o, "traffic_light", "{y} faces a red light")
    stop_a, stop_b = ca.stop_sign and not ca.stop_served, cb.stop_sign and not cb.stop_served
    if stop_a != stop_b:
        y, o = (a, b) if stop_a else (b, a)
        return verdict(y, o, "stop_sign", "{y} must stop at its stop sign before proceeding")
    return _none(pair, "no traffic control separates the two agents")


def detect_ped_conflict(pair: tuple[str, str], s: Scenario) -> InteractionLabel:
    """Q2: a vehicle and a pedestrian whose paths conflict; the vehicle yields."""
    a, b = s.agent(pair[0]), s.agent(pair[1])
    kinds = {a.kind, b.kind}
    if kinds != {"vehicle", "pedestrian"}:
        return _none(pair, "not a vehicle-pedestrian pair")
    if not (_valid_now(a, s) and _valid_now(b, s)):
        return _none(pair, "agent not observed at the current moment")
    conflict = path_conflict(a, b, start=s.current_index)
    if conflict is None:
        return _none(pair, "paths do not conflict")
    vehicle = a if a.kind == "vehicle" else b
    return InteractionLabel(
        pair, "ped_yield", vehicle.id, "pedestrian_priority", conflict.time, None, f"{vehicle.id} yields to the pedestrian"
    )


def _lane_at(agent: Agent, s: Scenario, k: int):
    st = agent.states[k]
    if not st.valid:
        return None
    return geo.lane_placement(st.position, s.map, st.heading)


def _window(s: Scenario, horizon_s: float = HORIZON_S) -> range:
    last = min(s.num_samples - 1, s.current_index + round(horizon_s / s.timestep_s))
    return range(s.current_index, last + 1)


def _lon(of: Agent, rel_to: Agent, k: int) -> float:
    return geo.ego_frame(of.states[k].position, geo.pose_of(rel_to.states[k])).longitudinal


def _overtakes(f: Agent, o: Agent, s: Scenario) -> bool:
    i = s.current_index
    lf, lo = _lane_at(f, s, i), _lane_at(o, s, i)
    if lf is None or lo is None or lf.group != lo.group or _lon(f, o, i) >= 0:
        return False
    samples = [k for k in _window(s) if f.states[k].valid and o.states[k].valid]
    shifted = False
    for k in samples:
        lk = _lane_at(f, s, k)
        if lk is not None and lk.group == lf.group and abs(lk.from_left - lf.from_left) >= 1:
            shifted = True
            break
    return shifted and bool(samples) and _lon(f, o, samples[-1]) > 0


def _follows(f: Agent, o: Agent, s: Scenario) -> bool:
    i = s.current_index
    lf, lo = _lane_at(f, s, i), _lane_at(o, s, i)
    if lf is None or lo is None or lf.lane_id != lo.lane_id:
        return False
    fs, os_ = f.states[i], o.states[i]
    if fs.speed < geo.NOT_MOVING_SPEED or geo.heading_relation(os_.heading, fs.heading) != "same":
        return False
    if _lon(f, o, i) >= 0:
        return False
    gap0 = math.hypot(fs.x - os_.x, fs.y - os_.y)
    if not (FOLLOW_GAP_M[0] <= gap0 <= FOLLOW_GAP_M[1]):
        return False
    for k in _window(s):
        a, b = f.states[k], o.states[k]
        if not (a.valid and b.valid):
            continue
        if abs(math.hypot(a.x - b.x, a.y - b.y) - gap0) >= FOLLOW_GAP_CHANGE * gap0:
            return False
    return True


def detect_intention_pattern(pair: tuple[str, str], s: Scenario) -> InteractionLabel:
    """Q3: overtaking, then following, between two non-pedestrian agents."""
    a, b = s.agent(pair[0]), s.agent(pair[1])
    if "pedestrian" in (a.kind, b.kind):
        return _none(pair, "pedestrians take no part in intention patterns")
    if not (_valid_now(a, s) and _valid_now(b, s)):
        return _none(pair, "agent not observed at the current moment")
    for f, o in ((a, b), (b, a)):
        if _overtakes(f, o, s):
            return InteractionLabel(pair, "overtake", None, "intention_pattern", None, f.id, f"{f.id} overtakes {o.id}")
    for f, o in ((a, b), (b, a)):
        if _follows(f, o, s):
            return InteractionLabel(pair, "follow", None, "intention_pattern", None, f.id, f"{f.id} follows {o.id}")
    return _none(pair, "no intention pattern")


def classify_interaction(pair: tuple[str, str], s: Scenario) -> InteractionLabel:
    """First match of Q1, Q2, Q3; otherwise none."""
    a, b = s.agent(pair[0]), s.agent(pair[1])
    kinds = (a.kind, b.kind)
    if kinds == ("vehicle", "vehicle"):
        label = detect_rule_yield(pair, s)
        if label.kind != "none":
            return label
    if set(kinds) == {"vehicle", "pedestrian"}:
        label = detect_ped_conflict(pair, s)
        if label.kind != "none":
            return label
    if "pedestrian" not in kinds:
        label = detect_intention_pattern(pair, s)
        if label.kind != "none":
            return label
    return _none(pair, "no interaction")


def ego_pairs(s: Scenario) -> list[tuple[str, str]]:
    return [(s.ego_id, a.id) for a in s.others()]


def label_scenario(s: Scenario) -> list[InteractionLabel]:
    """Labels for every (ego, surrounding agent) pair, ordered by agent id."""
    return [classify_interaction(p, s) for p in ego_pairs(s)]


# ---------------------------------------------------------------------------
# intention

RESPONSE_TOKENS = {
    ("rule_yield", True): "ego_yields",
    ("rule_yield", False): "other_yields",
    ("ped_yield", True): "ego_yields",
    ("ped_yield", False): "other_yields",
    ("overtake", True): "ego_overtakes",
    ("overtake", False): "other_overtakes",
    ("follow", True): "ego_follows",
    ("follow", False): "other_follows",
}

SIGNAL_ACTIONS = {
    "red": "wait_for_green",
    "yellow": "prepare_to_stop",
    "green": "proceed_on_green",
    "arrow_green": "proceed_on_green",
}


def base_intent(s: Scenario) -> BaseIntent:
    """What the ego would do with nobody else around."""
    ego = s.ego
    now = ego.states[s.current_index]
    k = min(s.future_index(INTENT_WINDOW_S), s.num_samples - 1)
    later = ego.states[k]
    if later.valid:
        turn = normalize_heading(later.heading - now.heading)
        if abs(turn) >= TURN_THRESHOLD_DEG:
            return "turn_left" if turn > 0 else "turn_right"
    inter = geo.related_intersection(s)
    if inter is not None:
        phase = geo.intersection_phase(ego, s.map, s.current_index, intersection=inter)
        if phase.value in ("heading_towards", "inside", "exiting"):
            return "proceed_through"
        ctrl = control_state(ego, s)
        if ctrl.signal is not None or ctrl.stop_sign:
            return "proceed_through"
    if later.valid and later.speed < geo.NOT_MOVING_SPEED:
        return "stop"
    return "go_straight"


def ego_intention(s: Scenario, labels: Sequence[InteractionLabel]) -> IntentionSummary:
    responses = []
    for lb in labels:
        if lb.kind == "none" or s.ego_id not in lb.pair:
            continue
        other = lb.other(s.ego_id)
        ego_is_actor = (lb.yielder == s.ego_id) if lb.kind in ("rule_yield", "ped_yield") else (lb.actor == s.ego_id)
        responses.append((other, RESPONSE_TOKENS[(lb.kind, ego_is_actor)]))
    responses.sort(key=lambda r: agent_sort_key(r[0]))

    controls = []
    ego = s.ego
    ctrl = control_state(ego, s)
    if ctrl.signal in SIGNAL_ACTIONS:
        controls.append(("traffic_light", SIGNAL_ACTIONS[ctrl.signal]))
    if ctrl.stop_sign:
        controls.append(("stop_sign", "already_stopped" if ctrl.stop_served else "stop_at_sign"))
    kinds = {kind for kind, _ in geo.proximity_features(ego, s.map, s.current_index)}
    if "crosswalk" in kinds:
        controls.append(("crosswalk", "watch_for_pedestrians"))
    if "speed_bump" in kinds:
        controls.append(("speed_bump", "slow_down"))
    return IntentionSummary(base_intent(s), tuple(responses), tuple(controls))
