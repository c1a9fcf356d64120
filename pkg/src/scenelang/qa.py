"""Q&A records and the sectioned ``[Q]``/``[A]`` output grammar.

A response is a sequence of sections, each opened by a marker line such as
``[Env QA]`` and optionally closed by ``[End ...]``. Inside a section every
``[Q]`` span is followed by exactly one ``[A]`` span; a span runs until the
next marker line and may continue over several lines.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

Category = Literal["map_env", "ego", "other_agent", "interaction", "intention"]

CATEGORIES: tuple[Category, ...] = ("map_env", "ego", "other_agent", "interaction", "intention")
SECTION_MARKERS: dict[Category, str] = {
    "map_env": "[Env QA]",
    "ego": "[Ego QA]",
    "other_agent": "[Sur QA]",
    "interaction": "[Int QA]",
    "intention": "[Intention]",
}
MARKER_CATEGORY = {v: k for k, v in SECTION_MARKERS.items()}
# categories whose records must name a surrounding agent
AGENT_CATEGORIES = ("other_agent", "interaction")
# categories where answers must not quote speeds or positions
NUMBER_FREE_CATEGORIES = ("interaction", "intention")

_SECTION_RE = re.compile(r"^\s*\[(Env QA|Ego QA|Sur QA|Int QA|Intention)\]\s*$")
_END_RE = re.compile(r"^\s*\[End[^\]]*\]\s*$", re.IGNORECASE)
_Q_RE = re.compile(r"^\s*\[Q\]\s*(.*?)\s*$")
_A_RE = re.compile(r"^\s*\[A\]\s*(.*?)\s*$")
AGENT_REF_RE = re.compile(r"agents?\s*#\s*(\w+)", re.IGNORECASE)
NUMERIC_MEASURE_RE = re.compile(
    r"(?<![\w#])\d+(?:\.\d+)?\s*(?:m/s|km/h|kph|mph|meters?|metres?|m|ft|feet|miles?)(?![\w/])",
    re.IGNORECASE,
)


@dataclass(frozen=True)
class QARecord:
    category: Category
    question: str
    answer: str
    agent_id: str | None = None

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        if not self.question.strip() or not self.answer.strip():
            raise ValueError("question and answer must be non-empty")
        if self.category in AGENT_CATEGORIES and self.agent_id is None:
            raise ValueError(f"{self.category} record needs an agent id")

    def to_dict(self) -> dict:
        return {"category": self.category, "agent_id": self.agent_id, "question": self.question, "answer": self.answer}

    @classmethod
    def from_dict(cls, d: dict) -> "QARecord":
        return cls(category=d["category"], question=d["question"], answer=d["answer"], agent_id=d.get("agent_id"))


class QAParseError(ValueError):
    """Grammar violation at a byte offset of the raw text."""

    def __init__(self, offset: int, message: str):
        self.offset = offset
        self.message = message
        super().__init__(f"byte {offset}: {message}")


class MissingSection(QAParseError):
    pass


class UnpairedQ(QAParseError):
    pass


class EmptyAnswer(QAParseError):
    pass


class OrphanAnswer(QAParseError):
    pass


class StrayText(QAParseError):
    pass


class MissingAgentId(QAParseError):
    pass


def agent_refs(text: str) -> list[str]:
    return AGENT_REF_RE.findall(text)


def _unwrap(text: str) -> str:
    """Drop one pair of brackets wrapping the whole span, as in ``[Q][text]``."""
    if len(text) >= 2 and text[0] == "[" and text[-1] == "]" and "[" not in text[1:-1] and "]" not in text[1:-1]:
        return text[1:-1].strip()
    return text


def _lines(raw: str):
    offset = 0
    for line in raw.split("\n"):
        yield offset, line.rstrip("\r")
        offset += len(line.encode("utf-8")) + 1


def parse_qa(raw: str, required: Iterable[Category] = CATEGORIES) -> list[QARecord]:
    """Parse a sectioned response into records, in textual order.

    Every non-blank line must be a marker or part of a Q/A span; anything
    else raises StrayText, so no content is dropped silently.
    """
    records: list[QARecord] = []
    seen: set[Category] = set()
    section: Category | None = None
    # open spans as (start offset, collected lines)
    q: tuple[int, list[str]] | None = None
    a: tuple[int, list[str]] | None = None

    def flush() -> None:
        nonlocal q, a
        if q is None:
            return
        if a is None:
            raise UnpairedQ(q[0], "question without an answer")
        question = _unwrap("\n".join(q[1]))
        answer = _unwrap("\n".join(a[1]))
        if not question:
            raise EmptyAnswer(q[0], "empty question")
        if not answer:
            raise EmptyAnswer(a[0], "empty answer")
        agent_id = None
        if section in AGENT_CATEGORIES:
            refs = agent_refs(question) or agent_refs(answer)
            if not refs:
                raise MissingAgentId(q[0], "no 'agent #n' reference in question or answer")
            agent_id = refs[0]
        records.append(QARecord(section, question, answer, agent_id))
        q = a = None

    for offset, line in _lines(raw):
        m = _SECTION_RE.match(line)
        if m:
            flush()
            section = MARKER_CATEGORY[f"[{m.group(1)}]"]
            seen.add(section)
            continue
        if _END_RE.match(line):
            flush()
            section = None
            continue
        mq = _Q_RE.match(line)
        if mq:
            flush()
            if section is None:
                raise StrayText(offset, "question outside any section")
            q = (offset, [mq.group(1)] if mq.group(1) else [])
            continue
        ma = _A_RE.match(line)
        if ma:
            if q is None or a is not None:
                raise OrphanAnswer(offset, "answer without a preceding question")
            a = (offset, [ma.group(1)] if ma.group(1) else [])
            continue
        text = line.strip()
        if not text:
            continue
        if a is not None:
            a[1].append(text)
        elif q is not None:
            q[1].append(text)
        else:
            raise StrayText(offset, f"text outside a Q/A span: {text[:40]!r}")
    flush()
    total = len(raw.encode("utf-8"))
    for cat in CATEGORIES:
        if cat in required and cat not in seen:
            raise MissingSection(total, f"section {SECTION_MARKERS[cat]} not found")
    return records


def serialize_qa(records: Sequence[QARecord], all_sections: bool = True) -> str:
    """Canonical text for ``records``; parse_qa inverts it.

    Consecutive records of one category share a section. With
    ``all_sections``, markers of absent categories are appended as empty
    sections so the result satisfies the five-section requirement.
    """
    out: list[str] = []
    current = None
    present: set[str] = set()
    for r in records:
        if r.category != current:
            if out:
                out.append("")
            out.append(SECTION_MARKERS[r.category])
            current = r.category
            present.add(r.category)
        out.append("")
        out.append(f"[Q] {r.question}")
        out.append(f"[A] {r.answer}")
    if all_sections:
        for cat in CATEGORIES:
            if cat not in present:
                if out:
                    out.append("")
                out.append(SECTION_MARKERS[cat])
    return "\n".join(out) + "\n"


def category_counts(records: Iterable[QARecord]) -> dict[str, int]:
    counts = {c: 0 for c in CATEGORIES}
    for r in records:
        counts[r.category] += 1
    return counts


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    index: int  # position of the record in the checked list
    rule: Literal["numeric_measure", "unknown_agent"]
    detail: str


@dataclass(frozen=True)
class QAReport:
    checked: int
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "checked": self.checked,
            "violations": [{"index": v.index, "rule": v.rule, "detail": v.detail} for v in self.violations],
        }


def validate_qa(records: Sequence[QARecord], known_agents: Iterable[str]) -> QAReport:
    """Flag quoted speeds/positions in interaction and intention answers and
    references to agents that are not in the scene. Records are not changed.

    ``known_agents`` is usually ``SceneDescription.agent_ids``.
    """
    known = set(known_agents)
    found: list[Violation] = []
    for i, r in enumerate(records):
        if r.category in NUMBER_FREE_CATEGORIES:
            for m in NUMERIC_MEASURE_RE.finditer(r.answer):
                found.append(Violation(i, "numeric_measure", m.group(0)))
        refs = agent_refs(r.question) + agent_refs(r.answer)
        if r.agent_id is not None:
            refs.append(r.agent_id)
        for ref in dict.fromkeys(refs):
            if ref not in known:
                found.append(Violation(i, "unknown_agent", ref))
    return QAReport(len(records), tuple(found))
