import math

import pytest

from scenelang import fixtures as fx
from scenelang import interaction as ix
from scenelang.scenario import Agent, TrajectoryState


def _line(agent_id, x0, y0, heading, speed, n=91, dt=0.1, kind="vehicle"):
    h = math.radians(heading)
    states = tuple(
        TrajectoryState(k * dt, x0 + speed * k * dt * math.cos(h), y0 + speed * k * dt * math.sin(h), heading, speed) for k in range(n)
    )
    return Agent(agent_id, kind, states)


def test_perpendicular_crossing():
    a = _line("a", -20.0, 0.0, 0.0, 10.0)
    b = _line("b", 0.0, -20.0, 90.0, 10.0)
    c = ix.path_conflict(a, b)
    assert c is not None
    # both reach points within 3 m of each other about 3/(10*sqrt(2)) s before the crossing
    assert c.time == pytest.approx(2.0 - 3.0 / (10 * math.sqrt(2)), abs=0.02)
    assert c.distance <= ix.CONFLICT_RADIUS_M + 1e-6


def test_parallel_lanes_never_conflict():
    a = _line("a", 0.0, 0.0, 0.0, 10.0)
    b = _line("b", 0.0, 3.5, 0.0, 10.0)
    assert ix.path_conflict(a, b) is None
    assert ix.dense_conflict_oracle(a, b) is None


def test_shared_spot_at_different_times():
    # b passes the crossing point long after a; paths still conflict
    a = _line("a", -10.0, 0.0, 0.0, 10.0)
    b = _line("b", 0.0, -60.0, 90.0, 10.0)
    c = ix.path_conflict(a, b)
    assert c is not None and c.time > 4.0
    assert c.time == pytest.approx(ix.dense_conflict_oracle(a, b), abs=0.02)


def test_matches_dense_oracle_on_random_pairs():
    for s in fx.random_batch(15, seed=500):
        agents = [a for a in s.agents if a.states[s.current_index].valid]
        for i in range(len(agents)):
            for j in range(i + 1, len(agents)):
                fast = ix.path_conflict(agents[i], agents[j], start=s.current_index)
                slow = ix.dense_conflict_oracle(agents[i], agents[j], start=s.current_index)
                assert (fast is None) == (slow is None)
                if fast is not None:
                    assert abs(fast.time - slow) <= 0.1


def test_label_invariants():
    with pytest.raises(ValueError):
        ix.InteractionLabel(("a", "b"), "rule_yield", "c", "stop_sign")
    with pytest.raises(ValueError):
        ix.InteractionLabel(("a", "b"), "none", "a", "none")


@pytest.mark.parametrize(
    "template,kind,yielder,cause",
    [
        ("stop_sign_4way", "rule_yield", "0", "stop_sign"),
        ("arrow_left_turn", "rule_yield", "1", "arrow_right_of_way"),
        ("ped_crossing", "ped_yield", "ego", "pedestrian_priority"),
        ("overtake_straight", "overtake", None, "intention_pattern"),
        ("follow_straight", "follow", None, "intention_pattern"),
    ],
)
def test_fixture_labels(generated, template, kind, yielder, cause):
    s, exp = generated[template]
    pair = next(lb.pair for lb in exp.labels if lb.kind != "none")
    lb = ix.classify_interaction(pair, s)
    assert (lb.kind, lb.yielder, lb.cause) == (kind, yielder, cause)


def test_all_way_stop_still_far_agent_yields():
    s, _ = fx.generate(fx.FixtureSpec("stop_sign_4way", parameters={"all_way": 1.0}))
    lb = ix.classify_interaction((s.ego_id, "0"), s)
    assert (lb.yielder, lb.cause) == ("0", "stop_sign")


def test_rule_question_wins_over_intention_pattern():
    s, _ = fx.generate(fx.FixtureSpec("follow_straight", parameters={"stop_sign": 1.0}))
    pair = (s.ego_id, "0")
    assert ix.detect_intention_pattern(pair, s).kind == "follow"
    assert ix.classify_interaction(pair, s).cause == "stop_sign"


def test_labels_are_deterministic_and_ordered(generated):
    s, _ = generated["random"]
    a = ix.label_scenario(s)
    assert a == ix.label_scenario(s)
    assert [lb.pair[1] for lb in a] == [x.id for x in s.others()]


def test_intention(generated):
    s, _ = generated["arrow_left_turn"]
    intent = ix.ego_intention(s, ix.label_scenario(s))
    assert intent.ego_base_intent == "turn_left"
    assert ("traffic_light", "proceed_on_green") in intent.control_responses
    s, _ = generated["stop_sign_4way"]
    intent = ix.ego_intention(s, ix.label_scenario(s))
    assert ("0", "other_yields") in intent.responses


def test_identical_stationary_positions_conflict_at_zero():
    a = _line("a", 5.0, 5.0, 0.0, 0.0)
    b = _line("b", 5.0, 5.0, 90.0, 0.0)
    assert ix.path_conflict(a, b).time == 0.0


def test_longer_horizon_keeps_conflicts():
    for s in fx.random_batch(8, seed=700):
        live = [a for a in s.agents if a.states[s.current_index].valid]
        for i in range(len(live)):
            for j in range(i + 1, len(live)):
                short = ix.path_conflict(live[i], live[j], horizon_s=4.0, start=s.current_index)
                if short is not None:
                    long = ix.path_conflict(live[i], live[j], horizon_s=8.0, start=s.current_index)
                    assert long is not None and long.time <= short.time + 1e-9


def test_yielder_stable_under_pair_order(generated):
    for s, _ in generated.values():
        for lb in ix.label_scenario(s):
            back = ix.classify_interaction(lb.pair[::-1], s)
            assert (back.kind, back.yielder, back.cause) == (lb.kind, lb.yielder, lb.cause)
