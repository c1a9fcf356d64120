import pytest
from hypothesis import given
from hypothesis import strategies as st

from scenelang import qa
from scenelang.qa import QARecord

FULL = """[Env QA]

[Q] Is there an intersection?
[A] Yes.

[Ego QA]
[Q] How fast is the ego agent?
[A] It moves at 6 m/s.
It is accelerating.

[Sur QA]
[Q] What is surrounding agent #3?
[A] A vehicle.

[Int QA]
[Q] How will surrounding agent #3 and the ego agent interact?
[A] The ego agent will yield to it.
[End Int QA]

[Intention]
[Q] What will the ego agent do?
[A] Turn left.
[End Intention]
"""


def test_parse_full():
    recs = qa.parse_qa(FULL)
    assert [r.category for r in recs] == list(qa.CATEGORIES)
    assert recs[1].answer == "It moves at 6 m/s.\nIt is accelerating."
    assert recs[2].agent_id == "3" and recs[3].agent_id == "3"


def test_bracketed_spans_and_crlf():
    raw = "[Int QA]\r\n[Q][What about agent # 7?]\r\n[A][No interaction.]\r\n[Intention]\r\n[Q] x\r\n[A] y\r\n"
    recs = qa.parse_qa(raw, required=("interaction", "intention"))
    assert recs[0].question == "What about agent # 7?"
    assert recs[0].answer == "No interaction."
    assert recs[0].agent_id == "7"


def test_unpaired_q_offset():
    raw = "[Env QA]\n[Q] one\n[A] two\n[Q] three\n"
    with pytest.raises(qa.UnpairedQ) as ei:
        qa.parse_qa(raw, required=())
    assert ei.value.offset == raw.index("[Q] three")


def test_missing_section():
    with pytest.raises(qa.MissingSection):
        qa.parse_qa("[Env QA]\n[Q] a\n[A] b\n")


def test_empty_answer():
    with pytest.raises(qa.EmptyAnswer):
        qa.parse_qa("[Env QA]\n[Q] a\n[A]\n[Q] b\n[A] c\n", required=())


def test_orphan_answer_and_stray_text():
    with pytest.raises(qa.OrphanAnswer):
        qa.parse_qa("[Env QA]\n[A] b\n", required=())
    with pytest.raises(qa.StrayText) as ei:
        qa.parse_qa("Sure! Here you go.\n[Env QA]\n", required=())
    assert ei.value.offset == 0


def test_interaction_needs_agent():
    with pytest.raises(qa.MissingAgentId):
        qa.parse_qa("[Int QA]\n[Q] what happens?\n[A] nothing\n", required=())


def test_offsets_are_bytes():
    raw = "[Env QA]\n[Q] café?\n[A] ok\n[Q] é\n"
    with pytest.raises(qa.UnpairedQ) as ei:
        qa.parse_qa(raw, required=())
    assert raw.encode()[ei.value.offset :].startswith(b"[Q] \xc3\xa9")


def test_record_invariants():
    with pytest.raises(ValueError):
        QARecord("interaction", "q", "a")
    with pytest.raises(ValueError):
        QARecord("ego", "q", " ")


def test_table8_sample(assets):
    from scenelang.prompting import in_context_samples

    recs = qa.parse_qa(in_context_samples(assets)[0], required=("interaction", "intention"))
    assert [(r.category, r.agent_id) for r in recs] == [("interaction", "0"), ("intention", None)]


def test_validate_numeric_and_unknown_agent():
    recs = [
        QARecord("interaction", "What about surrounding agent #1?", "at 6 m/s it will yield", "1"),
        QARecord("intention", "q", "It will wait 10 meters back."),
        QARecord("ego", "speed?", "6 m/s"),
        QARecord("interaction", "What about agent #9?", "No interaction.", "9"),
    ]
    rep = qa.validate_qa(recs, ["0", "1", "2"])
    assert {(v.index, v.rule) for v in rep.violations} == {(0, "numeric_measure"), (1, "numeric_measure"), (3, "unknown_agent")}
    assert recs[0].answer == "at 6 m/s it will yield"


def test_validate_clean():
    recs = [QARecord("interaction", "agent #1?", "Surrounding agent #1 yields to the ego agent at the 4 way stop.", "1")]
    assert qa.validate_qa(recs, ["1"]).ok


text = st.text(alphabet=st.characters(blacklist_categories=("Cs", "Cc"), blacklist_characters="[]#"), min_size=1, max_size=40).map(str.strip).filter(bool)


@st.composite
def records(draw):
    out = []
    for cat in draw(st.lists(st.sampled_from(qa.CATEGORIES), max_size=8)):
        agent = draw(st.sampled_from(["0", "1", "12"])) if cat in qa.AGENT_CATEGORIES else None
        q = draw(text) + (f" surrounding agent #{agent}" if agent else "")
        out.append(QARecord(cat, q, draw(text), agent))
    return out


@given(records())
def test_round_trip(recs):
    raw = qa.serialize_qa(recs)
    back = qa.parse_qa(raw)
    assert [(r.category, r.question, r.answer, r.agent_id) for r in back] == [
        (r.category, r.question, r.answer, r.agent_id) for r in recs
    ]
    assert qa.serialize_qa(back) == raw


@given(st.text(max_size=200))
def test_parser_total(raw):
    # any input either parses or raises a located grammar error
    try:
        qa.parse_qa(raw, required=())
    except qa.QAParseError as exc:
        assert 0 <= exc.offset <= len(raw.encode("utf-8"))
