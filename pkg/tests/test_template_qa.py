from scenelang import interaction as ix
from scenelang import qa
from scenelang.template_qa import generate_template_qa
from scenelang.translator import render


def _qa(scenario):
    labels = ix.label_scenario(scenario)
    return generate_template_qa(render(scenario), labels, ix.ego_intention(scenario, labels))


def test_appendix_lane_count(generated):
    recs = _qa(generated["appendix_replica"][0])
    assert ("How many lanes on ego's side?", "3") in [(r.question, r.answer) for r in recs]


def test_omits_absent_features(generated):
    recs = _qa(generated["follow_straight"][0])
    text = " ".join(r.question + " " + r.answer for r in recs).lower()
    assert "stop sign" not in text
    assert "intersection" not in text


def test_stop_sign_interaction_answer(generated):
    recs = _qa(generated["stop_sign_4way"][0])
    ans = [r.answer for r in recs if r.category == "interaction" and r.agent_id == "0"]
    assert ans == ["Surrounding agent #0 will yield to the ego agent because it has to stop at its stop sign first."]


def test_one_interaction_per_agent_and_one_intention(generated):
    for s, _ in generated.values():
        recs = _qa(s)
        ints = [r.agent_id for r in recs if r.category == "interaction"]
        assert ints == [a.id for a in s.others() if a.states[s.current_index].valid]
        assert sum(r.category == "intention" for r in recs) == 1


def test_answers_pass_validation(generated):
    for s, _ in generated.values():
        recs = _qa(s)
        assert qa.validate_qa(recs, render(s).agent_ids).ok


def test_question_wording_varies_but_is_stable(generated):
    s = generated["random"][0]
    first = [r.question for r in _qa(s) if r.category == "interaction"]
    assert first == [r.question for r in _qa(s) if r.category == "interaction"]
