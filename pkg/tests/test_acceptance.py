"""Acceptance criteria 1-10. Each test records one PASS/FAIL line."""

import math
import random
import re
import time

import numpy as np

from conftest import ACCEPTANCE_RESULTS
from scenelang import dataset as ds
from scenelang import fixtures as fx
from scenelang import geometry as geo
from scenelang import interaction as ix
from scenelang import qa
from scenelang.llm_client import LlmRequest, MockClient
from scenelang.prompting import build_prompt, in_context_samples
from scenelang.scenario import serialize_scenario
from scenelang.template_qa import generate_template_qa
from scenelang.translator import render

NAMED = ("appendix_replica", "stop_sign_4way", "arrow_left_turn", "overtake_straight", "follow_straight", "ped_crossing")


def record(n, title, ok, detail):
    line = f"criterion {n:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_RESULTS[n] = line
    print(line)
    assert ok, line


def fifty_fixtures():
    named = [fx.generate(fx.FixtureSpec(t))[0] for t in NAMED]
    return named + fx.random_batch(50 - len(named), seed=2000)


def test_c01_golden_translation():
    t0 = time.perf_counter()
    s, _ = fx.generate(fx.FixtureSpec("appendix_replica"))
    text = render(s).full_text
    elapsed = time.perf_counter() - t0
    quoted = [x for p in fx.APPENDIX_PARAGRAPHS for x in fx.split_sentences(p)]
    found = [x for x in quoted if x in text]
    must = (
        "The intersection center is 18.0 meters in front of the ego agent",
        "Traffic Light for the ego agent is red",
        "after 3.0 seconds",
    )
    ok = len(found) >= 12 and len(found) == len(quoted) and all(m in text for m in must) and elapsed < 1.0
    record(1, "golden translation", ok, f"{len(found)}/{len(quoted)} quoted sentences verbatim, {elapsed:.3f} s")


def test_c02_interaction_oracles():
    cases = {
        "stop_sign_4way": lambda lb: (lb.yielder, lb.cause) == ("0", "stop_sign"),
        "arrow_left_turn": lambda lb: (lb.yielder, lb.cause) == ("1", "arrow_right_of_way"),
        "overtake_straight": lambda lb: lb.kind == "overtake",
        "follow_straight": lambda lb: lb.kind == "follow",
        "ped_crossing": lambda lb: lb.kind == "ped_yield" and lb.yielder == "ego",
    }
    pairs = {"stop_sign_4way": "0", "arrow_left_turn": "1", "overtake_straight": "0", "follow_straight": "0", "ped_crossing": "0"}
    hits = []
    for name, check in cases.items():
        s, _ = fx.generate(fx.FixtureSpec(name))
        lb = ix.classify_interaction((s.ego_id, pairs[name]), s)
        if check(lb):
            hits.append(name)
    record(2, "interaction oracles", len(hits) == 5, f"{len(hits)}/5 exact matches")


def test_c03_chain_order():
    s, _ = fx.generate(fx.FixtureSpec("follow_straight", parameters={"stop_sign": 1.0}))
    pair = (s.ego_id, "0")
    q1 = ix.detect_rule_yield(pair, s)
    q3 = ix.detect_intention_pattern(pair, s)
    lb = ix.classify_interaction(pair, s)
    ok = q1.kind == "rule_yield" and q3.kind == "follow" and lb.cause == q1.cause
    record(3, "chain order", ok, f"Q1={q1.cause}, Q3={q3.kind}, label cause={lb.cause}")


def test_c04_geometry_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    pts = rng.uniform(-1e3, 1e3, size=(100_000, 5))
    pts[:, 4] = rng.uniform(-179.999, 180.0, size=100_000)
    norm_bad = 0
    for px, py, ex, ey, h in pts:
        r = geo.ego_frame((px, py), (ex, ey, h))
        if abs(math.hypot(r.longitudinal, r.lateral) - math.hypot(px - ex, py - ey)) > 1e-9:
            norm_bad += 1
    flip = {"same": "same", "opposite": "opposite", "left": "right", "right": "left"}
    grid = range(-179, 181)
    anti_bad = sum(1 for a in grid for b in grid if geo.heading_relation(b, a) != flip[geo.heading_relation(a, b)])
    lane_bad = lane_checked = 0
    for name in fx.TEMPLATES:
        s, _ = fx.generate(fx.FixtureSpec(name))
        for agent in s.agents:
            for st in agent.states:
                if not st.valid:
                    continue
                pl = geo.lane_placement(st.position, s.map, st.heading)
                if pl is not None:
                    lane_checked += 1
                    lane_bad += pl.from_left + pl.from_right != pl.total + 1
    elapsed = time.perf_counter() - t0
    ok = norm_bad == anti_bad == lane_bad == 0 and elapsed < 30
    detail = f"norm {norm_bad}/100000, antisymmetry {anti_bad}/{360 * 360}, lane identity {lane_bad}/{lane_checked}, {elapsed:.1f} s"
    record(4, "geometry suite", ok, detail)


def test_c05_path_conflict_vs_dense_oracle():
    pairs = []
    seed = 0
    while len(pairs) < 1000:
        s, _ = fx.generate(fx.FixtureSpec("random", seed))
        seed += 1
        live = [a for a in s.agents if a.states[s.current_index].valid]
        for i in range(len(live)):
            for j in range(i + 1, len(live)):
                pairs.append((live[i], live[j], s.current_index))
    pairs = pairs[:1000]
    disagree = both = 0
    worst = 0.0
    for a, b, k in pairs:
        fast = ix.path_conflict(a, b, start=k)
        slow = ix.dense_conflict_oracle(a, b, start=k)
        if (fast is None) != (slow is None):
            disagree += 1
        elif fast is not None:
            both += 1
            worst = max(worst, abs(fast.time - slow))
    ok = disagree == 0 and worst <= 0.1
    record(5, "path_conflict vs dense oracle", ok, f"{disagree} existence disagreements over 1000 pairs, {both} conflicts, max time error {worst:.3f} s")


def _fixed_point(raw, required):
    recs = qa.parse_qa(raw, required=required)
    again = qa.parse_qa(qa.serialize_qa(recs), required=required)
    return recs, again == recs and qa.serialize_qa(again) == qa.serialize_qa(recs)


def test_c06_grammar_round_trip(assets):
    passed = total = 0
    sample = in_context_samples(assets)[0]
    recs, fixed = _fixed_point(sample, ("interaction", "intention"))
    total += 1
    passed += fixed and [(r.category, r.agent_id) for r in recs] == [("interaction", "0"), ("intention", None)]
    client = MockClient()
    for s in fx.random_batch(500, seed=6000):
        bundle = build_prompt(render(s), assets)
        resp = client.send(LlmRequest.from_bundle(bundle))
        total += 1
        try:
            recs, fixed = _fixed_point(resp.raw_text, qa.CATEGORIES)
        except qa.QAParseError:
            continue
        passed += fixed and qa.category_counts(recs) == MockClient.expected_counts(bundle)
    record(6, "Q&A grammar round-trip", passed == total, f"{passed}/{total} (in-context sample + 500 mock responses)")


def _oracle_vocab(records):
    counts = {}
    for rec in records:
        for r in rec.qa:
            if r.category not in ("interaction", "intention"):
                continue
            word = ""
            for ch in r.answer.lower() + " ":
                if ch.isascii() and ch.isalnum():
                    word += ch
                elif word:
                    counts[word] = counts.get(word, 0) + 1
                    word = ""
    return counts


def test_c07_stats_conservation():
    res = ds.build(fifty_fixtures(), "rule")
    st = ds.compute_stats(res.records)
    n_qa = sum(len(r.qa) for r in res.records)
    keys = ("map", "ego", "other", "interaction", "intention")
    summed = sum(st.per_category_totals[k] for k in keys)
    avg_ok = all(st.per_scene_averages[k] == st.per_category_totals[k] / 50 for k in keys)
    vocab_ok = st.vocabulary == _oracle_vocab(res.records)
    ok = len(res.records) == 50 and summed == n_qa == st.total and avg_ok and vocab_ok
    record(7, "stats conservation", ok, f"totals {summed} = {n_qa} Q&As, averages exact={avg_ok}, vocabulary oracle match={vocab_ok}")


def test_c08_determinism(tmp_path):
    outs = []
    for k in range(2):
        scen = fifty_fixtures()
        ds.write_dataset(tmp_path / str(k), ds.build(list(reversed(scen)) if k else scen, "rule"))
        outs.append({f: (tmp_path / str(k) / f).read_bytes() for f in (ds.DATASET_FILE, ds.STATS_FILE)})
    same = [f for f in outs[0] if outs[0][f] == outs[1][f]]
    record(8, "determinism", len(same) == 2, f"byte-identical: {', '.join(same) or 'none'}")


def test_c09_throughput():
    scen = fx.random_batch(1000, seed=9000)
    t0 = time.perf_counter()
    for s in scen:
        desc = render(s)
        labels = ix.label_scenario(s)
        generate_template_qa(desc, labels, ix.ego_intention(s, labels))
    elapsed = time.perf_counter() - t0
    record(9, "throughput", elapsed < 60, f"1000 random fixtures translated and rule-annotated in {elapsed:.1f} s")


INJECTIONS = ("It moves at {v} m/s before it yields.", "It will stop {v} meters ahead.", "The agent travels at {v} km/h.", "Going {v}mph.")


def test_c10_validation_rule():
    res = ds.build(fifty_fixtures(), "rule")
    rng = random.Random(10)
    clean_flags = injected = caught = 0
    for rec in res.records:
        known = re.findall(r"Surrounding agent # (\w+) is a ", rec.description)
        clean_flags += len(qa.validate_qa(rec.qa, known).violations)
        for i, r in enumerate(rec.qa):
            if r.category not in qa.NUMBER_FREE_CATEGORIES:
                continue
            bad = qa.QARecord(r.category, r.question, r.answer + " " + rng.choice(INJECTIONS).format(v=rng.choice(("6", "12.5", "0.4"))), r.agent_id)
            injected += 1
            rep = qa.validate_qa([bad], known)
            caught += any(v.rule == "numeric_measure" for v in rep.violations)
    ok = injected > 0 and caught == injected and clean_flags == 0
    record(10, "validation rule", ok, f"flagged {caught}/{injected} injected answers, {clean_flags} false flags on clean fixtures")
