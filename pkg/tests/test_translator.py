import pytest

from scenelang import fixtures as fx
from scenelang.translator import fmt_1, fmt_int, relpos_parts, render
from scenelang.geometry import RelPos


def _appendix(**params):
    s, _ = fx.generate(fx.FixtureSpec("appendix_replica", parameters=params))
    return render(s)


def test_appendix_paragraphs_exact():
    d = _appendix()
    assert list(d.parts) == list(fx.APPENDIX_PARAGRAPHS)


@pytest.mark.parametrize("params", [{"rotation_deg": 30.0}, {"rotation_deg": -123.0, "offset_x": 500.0, "offset_y": -77.0}])
def test_appendix_invariant_under_placement(params):
    assert _appendix(**params).full_text == _appendix().full_text


def test_render_is_deterministic(generated):
    for s, _ in generated.values():
        assert render(s).full_text == render(s).full_text


def test_expected_sentences_present(generated):
    for name, (s, exp) in generated.items():
        text = render(s).full_text
        for sentence in exp.sentences:
            assert sentence in text, (name, sentence)


def test_no_intersection_means_no_map_paragraph(generated):
    s, _ = generated["follow_straight"]
    d = render(s)
    assert d.map_paragraph == ""
    assert "intersection" not in d.full_text


def test_agent_ids_listed(generated):
    s, _ = generated["stop_sign_4way"]
    assert render(s).agent_ids == ["0", "1"]


def test_rounding():
    assert fmt_int(2.5) == "3"
    assert fmt_int(-2.5) == "3"
    assert fmt_int(0.49) == "0"
    assert fmt_1(17.96) == "18.0"


def test_relpos_larger_axis_first():
    first, second = relpos_parts(RelPos(2.0, -9.0), "the ego agent")
    assert first == "9 meters on the right of the ego agent"
    assert second == "2 meters in front of the ego agent"
    first, _ = relpos_parts(RelPos(-5.0, 5.0), "x")
    assert first.endswith("behind x")
