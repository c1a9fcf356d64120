"""Command line entry point.

Exit codes: 0 success, 1 some records failed (see report.json),
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import _io
from . import dataset as ds
from . import fixtures as fx
from .llm_client import ConfigError, HttpClient, LlmSettings, MockClient, agent_ids_from_description
from .prompting import MissingAsset, load_assets
from .qa import validate_qa
from .scenario import Scenario, ScenarioError, filter_interactive, parse_scenario, serialize_scenario
from .translator import TranslationError, render

log = logging.getLogger("scenelang")

EXIT_OK = 0
EXIT_FAILURES = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    inputs: list[Path] = field(default_factory=list)
    out: Path | None = None
    mode: str = "rule"
    llm: dict = field(default_factory=dict)
    log_level: str = "INFO"

    def settings(self) -> LlmSettings:
        try:
            return LlmSettings.from_env(self.llm)
        except TypeError as exc:
            raise ConfigError(f"bad llm settings: {exc}") from None


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc.msg} at line {exc.lineno}") from None
    if not isinstance(doc, dict):
        raise UsageError(f"config {path} must hold an object")
    unknown = set(doc) - {"llm", "log_level"}
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return doc


def _scenario_paths(inputs: Sequence[str]) -> list[Path]:
    out: list[Path] = []
    for raw in inputs:
        p = Path(raw)
        if p.is_dir():
            out += sorted(q for q in p.glob("*.json") if q.name != "expected.json" and not q.name.endswith(".expected.json"))
        elif p.exists():
            out.append(p)
        else:
            raise UsageError(f"no such file or directory: {raw}")
    return out


def _load_scenarios(paths: Sequence[Path]) -> tuple[list[Scenario], list[ds.Failure]]:
    scenarios, failures = [], []
    for p in paths:
        try:
            scenarios.append(parse_scenario(p.read_bytes()))
        except ScenarioError as exc:
            log.warning("%s: %s", p, exc)
            failures.append(ds.Failure(str(p), "parse_scenario", type(exc).__name__, str(exc)))
    return scenarios, failures


# ---------------------------------------------------------------------------
# subcommands


def cmd_translate(args, cfg: RunConfig) -> int:
    scenarios, failures = _load_scenarios(_scenario_paths(args.inputs))
    rows = []
    for s in scenarios:
        try:
            d = render(s)
        except (TranslationError, ValueError) as exc:
            failures.append(ds.Failure(s.id, "translate", type(exc).__name__, str(exc)))
            continue
        rows.append({"scenario_id": s.id, "description": d.full_text})
    if args.out:
        _io.write_jsonl(args.out, rows)
    else:
        for r in rows:
            sys.stdout.write(f"## {r['scenario_id']}\n\n{r['description']}\n\n")
    for f in failures:
        print(f"error: {f.scenario_id}: {f.message}", file=sys.stderr)
    return EXIT_FAILURES if failures else EXIT_OK


def cmd_annotate(args, cfg: RunConfig) -> int:
    settings = cfg.settings()
    if args.max_in_flight is not None:
        settings = LlmSettings(**{**settings.__dict__, "max_in_flight": args.max_in_flight})
    client = None
    if cfg.mode == "http":
        settings.require_http()
        client = HttpClient(settings)
    elif cfg.mode == "mock":
        client = MockClient()
    assets = load_assets(args.assets) if cfg.mode != "rule" else None

    scenarios, failures = _load_scenarios(_scenario_paths(args.inputs))
    kept = scenarios if args.no_filter else filter_interactive(scenarios)
    if len(kept) < len(scenarios):
        log.info("filtered out %d scenario(s) without interactive flags", len(scenarios) - len(kept))
    try:
        result = ds.build(kept, cfg.mode, client=client, assets=assets, settings=settings)
    finally:
        if isinstance(client, HttpClient):
            client.close()
    result.report.scenarios += len(failures)
    result.report.failures[:0] = failures
    stats = ds.write_dataset(cfg.out, result)
    rep = result.report
    log.info(
        "%d record(s), %d Q&A, %d failure(s), %d filtered; wrote %s",
        len(result.records), stats.total, len(rep.failures), len(scenarios) - len(kept), cfg.out,
    )
    return EXIT_OK if rep.ok else EXIT_FAILURES


def cmd_stats(args, cfg: RunConfig) -> int:
    try:
        records = ds.read_dataset(args.input)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read dataset {args.input}: {exc}") from None
    doc = ds.compute_stats(records).to_dict()
    if args.out:
        _io.write_json(args.out, doc)
    else:
        if not args.full:
            doc["vocabulary"] = dict(list(doc["vocabulary"].items())[: args.top])
        json.dump(doc, sys.stdout, indent=2, sort_keys=False)
        sys.stdout.write("\n")
    return EXIT_OK


def cmd_split(args, cfg: RunConfig) -> int:
    try:
        records = ds.read_dataset(args.input)
        manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from None
    try:
        res = ds.split(records, manifest)
    except ds.OverlapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad manifest: {exc}") from None
    out = Path(args.out)
    _io.write_jsonl(out / "train.jsonl", (r.to_dict() for r in res.train))
    _io.write_jsonl(out / "validation.jsonl", (r.to_dict() for r in res.validation))
    counts = res.counts()
    _io.write_json(out / "split_report.json", {**counts, "leftover_ids": res.leftover, "missing": res.missing})
    print(json.dumps(counts))
    return EXIT_OK


def cmd_validate(args, cfg: RunConfig) -> int:
    bad = 0
    for raw in args.inputs:
        p = Path(raw)
        if not p.exists():
            raise UsageError(f"no such file: {raw}")
        if p.suffix == ".jsonl":
            try:
                records = ds.read_dataset(p)
            except (ValueError, KeyError) as exc:
                print(f"{p}: unreadable: {exc}", file=sys.stderr)
                bad += 1
                continue
            for rec in records:
                rep = validate_qa(rec.qa, agent_ids_from_description(rec.description))
                for v in rep.violations:
                    bad += 1
                    print(f"{p}: {rec.scenario_id}: record {v.index}: {v.rule}: {v.detail}")
        else:
            try:
                parse_scenario(p.read_bytes())
            except ScenarioError as exc:
                bad += 1
                print(f"{p}: {exc}")
    if not bad:
        print("ok")
    return EXIT_FAILURES if bad else EXIT_OK


def _param(text: str) -> tuple[str, float]:
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    try:
        return key.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"value for {key} is not a number") from None


def cmd_fixtures(args, cfg: RunConfig) -> int:
    spec = fx.FixtureSpec(args.template, args.seed, dict(args.param or []))
    try:
        scenario, expected = fx.generate(spec)
    except fx.BadParameters as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out) if args.out else Path(f"{scenario.id}.json")
    exp_path = Path(args.expected) if args.expected else out.parent / "expected.json"
    _io.atomic_write_bytes(out, serialize_scenario(scenario))
    _io.write_json(exp_path, {"scenario_id": scenario.id, **expected.to_dict()})
    print(out)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--log-level", choices=("DEBUG", "INFO", "WARNING", "ERROR"))

    p = argparse.ArgumentParser(prog="scenelang", description="Turn driving scenarios into language and Q&A datasets.")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    t = sub.add_parser("translate", parents=[common], help="render scene descriptions")
    t.add_argument("inputs", nargs="+", help="scenario files or directories")
    t.add_argument("--out", help="write JSONL here instead of printing")
    t.set_defaults(func=cmd_translate)

    a = sub.add_parser("annotate", parents=[common], help="build a Q&A dataset")
    a.add_argument("inputs", nargs="+", help="scenario files or directories")
    a.add_argument("--mode", choices=ds.MODES, default="rule")
    a.add_argument("--out", required=True, help="output directory")
    a.add_argument("--no-filter", action="store_true", help="keep scenarios without interactive flags")
    a.add_argument("--assets", help="directory with replacement prompt assets")
    a.add_argument("--max-in-flight", type=int, help="concurrent completion requests")
    a.set_defaults(func=cmd_annotate)

    s = sub.add_parser("stats", parents=[common], help="dataset statistics")
    s.add_argument("--in", dest="input", required=True, help="dataset.jsonl")
    s.add_argument("--out", help="write stats JSON here")
    s.add_argument("--top", type=int, default=30, help="vocabulary entries to print")
    s.add_argument("--full", action="store_true", help="print the whole vocabulary")
    s.set_defaults(func=cmd_stats)

    sp = sub.add_parser("split", parents=[common], help="train/validation split by manifest")
    sp.add_argument("--in", dest="input", required=True, help="dataset.jsonl")
    sp.add_argument("--manifest", required=True, help='JSON {"train": [...], "validation": [...]}')
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_split)

    v = sub.add_parser("validate", parents=[common], help="check scenario files or dataset Q&A")
    v.add_argument("inputs", nargs="+", help="scenario .json or dataset .jsonl files")
    v.set_defaults(func=cmd_validate)

    f = sub.add_parser("fixtures", parents=[common], help="write a synthetic scenario")
    f.add_argument("--template", required=True, choices=fx.TEMPLATES)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--param", action="append", type=_param, metavar="KEY=VALUE")
    f.add_argument("--out", help="scenario file (default: <id>.json)")
    f.add_argument("--expected", help="expectation file (default: expected.json next to --out)")
    f.set_defaults(func=cmd_fixtures)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        doc = load_config(args.config)
        cfg = RunConfig(
            inputs=[Path(x) for x in getattr(args, "inputs", [])],
            out=Path(args.out) if getattr(args, "out", None) else None,
            mode=getattr(args, "mode", "rule"),
            llm=doc.get("llm", {}),
            log_level=args.log_level or doc.get("log_level", "INFO"),
        )
        logging.basicConfig(level=cfg.log_level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
        return args.func(args, cfg)
    except (UsageError, ConfigError, MissingAsset) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
