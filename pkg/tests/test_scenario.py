import json

import pytest

from scenelang import fixtures as fx
from scenelang.scenario import (
    InvariantError,
    SchemaError,
    filter_interactive,
    normalize_heading,
    parse_scenario,
    scenario_to_dict,
    serialize_scenario,
)


def _doc(template="follow_straight"):
    s, _ = fx.generate(fx.FixtureSpec(template))
    return scenario_to_dict(s)


def test_round_trip_is_byte_stable(generated):
    for s, _ in generated.values():
        raw = serialize_scenario(s)
        again = parse_scenario(raw)
        assert again == s
        assert serialize_scenario(again) == raw


def test_missing_field_names_path():
    doc = _doc()
    del doc["agents"][0]["states"][3]["speed"]
    with pytest.raises(SchemaError) as ei:
        parse_scenario(json.dumps(doc))
    assert ei.value.path == "agents[0].states[3].speed"


def test_unknown_key_rejected():
    doc = _doc()
    doc["map"]["lanes"][0]["width"] = 3.5
    with pytest.raises(SchemaError, match="unknown field"):
        parse_scenario(json.dumps(doc))


def test_wrong_unit_rejected():
    doc = _doc()
    doc["units"] = {"speed": "km/h"}
    with pytest.raises(SchemaError) as ei:
        parse_scenario(json.dumps(doc))
    assert ei.value.path == "units.speed"


def test_malformed_json():
    with pytest.raises(SchemaError, match="malformed JSON"):
        parse_scenario(b"{not json")


def test_non_monotonic_time():
    doc = _doc()
    st = doc["agents"][1]["states"]
    st[5]["t"], st[6]["t"] = st[6]["t"], st[5]["t"]
    with pytest.raises(InvariantError) as ei:
        parse_scenario(json.dumps(doc))
    assert ei.value.path.startswith("agents[1].states[")


def test_ego_must_exist():
    doc = _doc()
    doc["ego_id"] = "nobody"
    with pytest.raises(InvariantError) as ei:
        parse_scenario(json.dumps(doc))
    assert ei.value.path == "ego_id"


def test_lane_indices_contiguous():
    doc = _doc("overtake_straight")
    doc["map"]["lanes"][0]["index"] = 7
    with pytest.raises(InvariantError, match="indices"):
        parse_scenario(json.dumps(doc))


def test_future_sample_required():
    doc = _doc()
    doc["current_index"] = len(doc["agents"][0]["states"]) - 5
    with pytest.raises(InvariantError, match="no sample"):
        parse_scenario(json.dumps(doc))


def test_heading_range():
    doc = _doc()
    doc["agents"][0]["states"][0]["heading"] = -180.0
    with pytest.raises(InvariantError, match="heading"):
        parse_scenario(json.dumps(doc))


def test_filter_interactive(generated):
    s, _ = generated["follow_straight"]
    bare = parse_scenario(json.dumps({**scenario_to_dict(s), "id": "quiet", "interactive_flags": []}))
    assert [x.id for x in filter_interactive([s, bare])] == [s.id]


@pytest.mark.parametrize("deg,want", [(0, 0), (180, 180), (-180, 180), (540, 180), (-190, 170), (359, -1)])
def test_normalize_heading(deg, want):
    assert normalize_heading(deg) == pytest.approx(want)
