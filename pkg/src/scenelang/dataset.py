"""Dataset assembly: translate, annotate, persist, count, split."""

from __future__ import annotations

import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Mapping, Sequence

from . import _io
from .interaction import InteractionLabel, ego_intention, label_scenario
from .llm_client import CompletionClient, LlmError, LlmResponse, LlmSettings, complete_many
from .prompting import PromptAssets, PromptError, build_prompt, load_assets
from .qa import CATEGORIES, QAParseError, QARecord, category_counts, parse_qa, validate_qa
from .scenario import Scenario, ScenarioError
from .template_qa import generate_template_qa
from .translator import SceneDescription, TranslationError, render

log = logging.getLogger(__name__)

Mode = Literal["rule", "mock", "http"]
MODES: tuple[Mode, ...] = ("rule", "mock", "http")
Provenance = Literal["rule", "llm", "mixed"]

DATASET_FILE = "dataset.jsonl"
STATS_FILE = "stats.json"
REPORT_FILE = "report.json"
LABELS_FILE = "labels.jsonl"

# stats keys, in the order the categories are listed
STAT_KEYS = {"map_env": "map", "ego": "ego", "other_agent": "other", "interaction": "interaction", "intention": "intention"}
# words tied to rule- and intention-induced interactions; both surface forms kept
SELECTED_VOCABULARY = (
    "yield", "yields", "yielding", "stop", "stops", "sign", "light", "red", "green", "arrow",
    "right", "way", "wait", "pedestrian", "pedestrians", "crosswalk", "follow", "following",
    "overtake", "overtaking", "intends", "intention", "turn", "proceed",
)  # fmt: skip
_TOKEN_RE = re.compile(r"[^0-9a-z]+")


@dataclass(frozen=True)
class DatasetRecord:
    scenario_id: str
    description: str
    qa: tuple[QARecord, ...]
    labels: tuple[InteractionLabel, ...]
    provenance: Provenance
    asset_version: str | None = None
    raw_response: str | None = None

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "description": self.description,
            "qa": [r.to_dict() for r in self.qa],
            "labels": [lb.to_dict() for lb in self.labels],
            "provenance": self.provenance,
            "asset_version": self.asset_version,
            "raw_response": self.raw_response,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "DatasetRecord":
        labels = tuple(
            InteractionLabel(
                pair=tuple(lb["pair"]),
                kind=lb["kind"],
                yielder=lb["yielder"],
                cause=lb["cause"],
                conflict_time=lb.get("conflict_time"),
                actor=lb.get("actor"),
                rationale=lb.get("rationale", ""),
            )
            for lb in d.get("labels", ())
        )
        return cls(
            scenario_id=d["scenario_id"],
            description=d["description"],
            qa=tuple(QARecord.from_dict(r) for r in d["qa"]),
            labels=labels,
            provenance=d["provenance"],
            asset_version=d.get("asset_version"),
            raw_response=d.get("raw_response"),
        )


@dataclass(frozen=True)
class Failure:
    scenario_id: str
    stage: str
    error: str
    message: str

    def to_dict(self) -> dict:
        return {"scenario_id": self.scenario_id, "stage": self.stage, "error": self.error, "message": self.message}


@dataclass
class BuildReport:
    mode: str
    scenarios: int = 0
    failures: list[Failure] = field(default_factory=list)
    qa_violations: list[dict] = field(default_factory=list)
    disagreements: list[dict] = field(default_factory=list)

    @property
    def succeeded(self) -> int:
        return self.scenarios - len({f.scenario_id for f in self.failures})

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "scenarios": self.scenarios,
            "succeeded": self.succeeded,
            "failures": [f.to_dict() for f in self.failures],
            "qa_violations": self.qa_violations,
            "disagreements": self.disagreements,
        }


@dataclass(frozen=True)
class BuildResult:
    records: list[DatasetRecord]
    report: BuildReport


# ---------------------------------------------------------------------------
# comparator for llm answers


def answer_kind(answer: str) -> str:
    """Coarse reading of an interaction answer: yield, overtake, follow or none."""
    t = answer.lower()
    if re.search(r"\bno interaction|\bnot interact|\bwill not interact", t):
        return "none"
    if "yield" in t:
        return "yield"
    if "overtak" in t:
        return "overtake"
    if "follow" in t:
        return "follow"
    return "none"


_KIND_GROUP = {"rule_yield": "yield", "ped_yield": "yield", "overtake": "overtake", "follow": "follow", "none": "none"}


def compare_with_rules(qa: Sequence[QARecord], labels: Sequence[InteractionLabel], ego_id: str) -> list[dict]:
    """Interaction answers whose coarse kind differs from the rule label."""
    rule = {lb.other(ego_id): _KIND_GROUP[lb.kind] for lb in labels if ego_id in lb.pair}
    out = []
    for r in qa:
        if r.category != "interaction" or r.agent_id not in rule:
            continue
        got = answer_kind(r.answer)
        if got != rule[r.agent_id]:
            out.append({"agent_id": r.agent_id, "rule": rule[r.agent_id], "answer": got})
    return out


# ---------------------------------------------------------------------------
# build


def _rule_record(s: Scenario, desc: SceneDescription, labels: list[InteractionLabel]) -> DatasetRecord:
    intent = ego_intention(s, labels)
    qa = generate_template_qa(desc, labels, intent)
    return DatasetRecord(s.id, desc.full_text, tuple(qa), tuple(labels), "rule")


def build(
    scenarios: Iterable[Scenario],
    mode: Mode = "rule",
    client: CompletionClient | None = None,
    assets: PromptAssets | None = None,
    settings: LlmSettings | None = None,
) -> BuildResult:
    """Annotate every scenario; failures are recorded and skipped.

    Records come back sorted by scenario id whatever the input order.
    In mock/http mode the Q&A comes from the completion service and the rule
    labels are kept next to it for comparison.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if mode != "rule" and client is None:
        raise ValueError(f"mode {mode} needs a client")
    report = BuildReport(mode=mode)
    prepared: list[tuple[Scenario, SceneDescription, list[InteractionLabel]]] = []
    seen: set[str] = set()
    for s in sorted(scenarios, key=lambda sc: sc.id):
        report.scenarios += 1
        if s.id in seen:
            report.failures.append(Failure(s.id, "input", "DuplicateId", "scenario id appears more than once"))
            continue
        seen.add(s.id)
        try:
            desc = render(s)
            labels = label_scenario(s)
        except (TranslationError, ScenarioError, ValueError) as exc:
            log.warning("skipping %s: %s", s.id, exc)
            report.failures.append(Failure(s.id, "translate", type(exc).__name__, str(exc)))
            continue
        prepared.append((s, desc, labels))

    records: list[DatasetRecord] = []
    if mode == "rule":
        for s, desc, labels in prepared:
            try:
                records.append(_rule_record(s, desc, labels))
            except (TranslationError, ValueError, KeyError) as exc:
                report.failures.append(Failure(s.id, "template_qa", type(exc).__name__, str(exc)))
    else:
        assets = assets or load_assets()
        bundles, kept = [], []
        for s, desc, labels in prepared:
            try:
                bundles.append(build_prompt(desc, assets))
                kept.append((s, desc, labels))
            except PromptError as exc:
                report.failures.append(Failure(s.id, "prompt", type(exc).__name__, str(exc)))
        responses = complete_many(bundles, client, settings)
        for (s, desc, labels), resp in zip(kept, responses):
            if isinstance(resp, LlmError):
                report.failures.append(Failure(s.id, "complete", type(resp).__name__, str(resp)))
                continue
            rec = _llm_record(s, desc, labels, resp, assets.version, report)
            if rec is not None:
                records.append(rec)

    known = {s.id: d.agent_ids for s, d, _ in prepared}
    for rec in records:
        v = validate_qa(rec.qa, known[rec.scenario_id])
        for item in v.to_dict()["violations"]:
            report.qa_violations.append({"scenario_id": rec.scenario_id, **item})
    return BuildResult(records, report)


def _llm_record(s, desc, labels, resp: LlmResponse, version: str, report: BuildReport) -> DatasetRecord | None:
    try:
        qa = parse_qa(resp.raw_text)
    except QAParseError as exc:
        report.failures.append(Failure(s.id, "parse", type(exc).__name__, str(exc)))
        return None
    for d in compare_with_rules(qa, labels, s.ego_id):
        report.disagreements.append({"scenario_id": s.id, **d})
    return DatasetRecord(s.id, desc.full_text, tuple(qa), tuple(labels), "mixed", version, resp.raw_text)


# ---------------------------------------------------------------------------
# stats


def tokenize(text: str) -> list[str]:
    return [t for t in _TOKEN_RE.split(text.lower()) if t]


@dataclass(frozen=True)
class DatasetStats:
    scene_count: int
    per_category_totals: dict[str, int]
    per_scene_averages: dict[str, float]
    total: int
    vocabulary: dict[str, int]
    selected_vocabulary: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "scene_count": self.scene_count,
            "per_category_totals": self.per_category_totals,
            "per_scene_averages": self.per_scene_averages,
            "total": self.total,
            "vocabulary": self.vocabulary,
            "selected_vocabulary": self.selected_vocabulary,
        }


def compute_stats(records: Sequence[DatasetRecord]) -> DatasetStats:
    n = len(records)
    totals = {STAT_KEYS[c]: 0 for c in CATEGORIES}
    vocab: Counter[str] = Counter()
    for rec in records:
        for cat, k in category_counts(rec.qa).items():
            totals[STAT_KEYS[cat]] += k
        for r in rec.qa:
            if r.category in ("interaction", "intention"):
                vocab.update(tokenize(r.answer))
    total = sum(totals.values())
    totals["total"] = total
    averages = {k: (v / n if n else 0.0) for k, v in totals.items()}
    ordered = dict(sorted(vocab.items(), key=lambda kv: (-kv[1], kv[0])))
    selected = {w: vocab.get(w, 0) for w in SELECTED_VOCABULARY}
    return DatasetStats(n, totals, averages, total, ordered, selected)


# ---------------------------------------------------------------------------
# persistence


def write_dataset(out_dir: str | Path, result: BuildResult) -> DatasetStats:
    out = Path(out_dir)
    stats = compute_stats(result.records)
    _io.write_jsonl(out / DATASET_FILE, (r.to_dict() for r in result.records))
    _io.write_json(out / STATS_FILE, stats.to_dict())
    _io.write_json(out / REPORT_FILE, result.report.to_dict())
    _io.write_jsonl(
        out / LABELS_FILE,
        (
            {"scenario_id": r.scenario_id, "pair": list(lb.pair), "kind": lb.kind, "yielder": lb.yielder, "cause": lb.cause}
            for r in result.records
            for lb in r.labels
        ),
    )
    return stats


def read_dataset(path: str | Path) -> list[DatasetRecord]:
    return [DatasetRecord.from_dict(d) for d in _io.read_jsonl(path)]


# ---------------------------------------------------------------------------
# split


class OverlapError(ValueError):
    def __init__(self, ids: Sequence[str]):
        self.ids = list(ids)
        shown = ", ".join(self.ids[:5]) + (" ..." if len(self.ids) > 5 else "")
        super().__init__(f"{len(self.ids)} id(s) in both train and validation: {shown}")


@dataclass(frozen=True)
class SplitResult:
    train: list[DatasetRecord]
    validation: list[DatasetRecord]
    leftover: list[str]  # record ids named in neither list
    missing: dict[str, list[str]]  # manifest ids with no record, per split

    def counts(self) -> dict:
        return {
            "train": len(self.train),
            "validation": len(self.validation),
            "leftover": len(self.leftover),
            "missing_train": len(self.missing["train"]),
            "missing_validation": len(self.missing["validation"]),
        }


def split(records: Sequence[DatasetRecord], manifest: Mapping[str, Sequence[str]]) -> SplitResult:
    try:
        train_ids, val_ids = set(manifest["train"]), set(manifest["validation"])
    except KeyError as exc:
        raise ValueError(f"manifest lacks key {exc.args[0]!r}") from None
    both = train_ids & val_ids
    if both:
        raise OverlapError(sorted(both))
    train, val, leftover = [], [], []
    for r in records:
        if r.scenario_id in train_ids:
            train.append(r)
        elif r.scenario_id in val_ids:
            val.append(r)
        else:
            leftover.append(r.scenario_id)
    have = {r.scenario_id for r in records}
    missing = {"train": sorted(train_ids - have), "validation": sorted(val_ids - have)}
    return SplitResult(train, val, leftover, missing)
