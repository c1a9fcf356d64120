import json

import httpx
import pytest

from scenelang import llm_client as lc
from scenelang import qa
from scenelang.prompting import build_prompt
from scenelang.translator import render

GOOD = "[Env QA]\n[Q] a\n[A] b\n[Ego QA]\n[Q] c\n[A] d\n[Sur QA]\n[Int QA]\n[Intention]\n[Q] e\n[A] f\n"


@pytest.fixture
def bundle(generated, assets):
    s, _ = generated["stop_sign_4way"]
    return build_prompt(render(s), assets)


def settings(**kw):
    base = dict(endpoint="https://llm.example/v1/chat/completions", api_key="k", backoff_base_s=1.0)
    return lc.LlmSettings(**{**base, **kw})


def body(text=GOOD, finish="stop"):
    return {"model": "m", "choices": [{"message": {"role": "assistant", "content": text}, "finish_reason": finish}]}


def client(handler, sleeps=None, **kw):
    sleeps = [] if sleeps is None else sleeps
    return lc.HttpClient(settings(**kw), transport=httpx.MockTransport(handler), sleep=sleeps.append)


def test_mock_is_deterministic(bundle):
    c = lc.MockClient()
    a, b = lc.complete(bundle, c), lc.complete(bundle, c)
    assert a.raw_text == b.raw_text
    assert "[Int QA]" in a.raw_text


def test_mock_counts_match_construction(bundle):
    r = lc.complete(bundle, lc.MockClient())
    assert qa.category_counts(qa.parse_qa(r.raw_text)) == lc.MockClient.expected_counts(bundle)


def test_mock_faults(bundle):
    sid = bundle.scenario_id
    with pytest.raises(lc.AuthError):
        lc.complete(bundle, lc.MockClient({sid: "auth"}))
    with pytest.raises(lc.TruncatedResponse):
        lc.complete(bundle, lc.MockClient({sid: "truncate"}))
    with pytest.raises(lc.TruncatedResponse):
        lc.complete(bundle, lc.MockClient({sid: "length"}))
    with pytest.raises(ValueError):
        lc.MockClient({sid: "gremlins"})


def test_http_request_shape(bundle):
    seen = {}

    def handler(req):
        seen["auth"] = req.headers["authorization"]
        seen["doc"] = json.loads(req.content)
        return httpx.Response(200, json=body())

    r = lc.complete(bundle, client(handler), settings())
    assert r.raw_text == GOOD and r.attempts == 1
    assert seen["auth"] == "Bearer k"
    assert seen["doc"]["temperature"] == 0.7
    assert [m["role"] for m in seen["doc"]["messages"]] == ["system", "user"]


def test_auth_error_not_retried(bundle):
    calls = []

    def handler(req):
        calls.append(1)
        return httpx.Response(401)

    with pytest.raises(lc.AuthError):
        lc.complete(bundle, client(handler))
    assert len(calls) == 1


def test_rate_limit_retry_then_success(bundle):
    codes = iter([429, 503, 200])
    sleeps = []

    def handler(req):
        code = next(codes)
        if code == 429:
            return httpx.Response(429, headers={"Retry-After": "7"})
        return httpx.Response(code, json=body()) if code == 200 else httpx.Response(code)

    r = lc.complete(bundle, client(handler, sleeps))
    assert r.attempts == 3
    assert sleeps[0] == 7.0  # Retry-After honored
    assert 2.0 <= sleeps[1] <= 3.0  # second backoff step plus jitter


def test_rate_limit_exhausted(bundle):
    sleeps = []
    with pytest.raises(lc.RateLimited):
        lc.complete(bundle, client(lambda req: httpx.Response(429), sleeps))
    assert len(sleeps) == 4
    assert all(lo <= s <= lo + 1.0 for s, lo in zip(sleeps, [1, 2, 4, 8]))


def test_timeout(bundle):
    def handler(req):
        raise httpx.ReadTimeout("slow", request=req)

    with pytest.raises(lc.Timeout):
        lc.complete(bundle, client(handler, max_attempts=2))


def test_truncated_http(bundle):
    with pytest.raises(lc.TruncatedResponse):
        lc.complete(bundle, client(lambda req: httpx.Response(200, json=body(finish="length"))))
    cut = GOOD.split("[Intention]")[0]
    with pytest.raises(lc.TruncatedResponse):
        lc.complete(bundle, client(lambda req: httpx.Response(200, json=body(cut))))


def test_malformed_body(bundle):
    with pytest.raises(lc.BadResponse):
        lc.complete(bundle, client(lambda req: httpx.Response(200, json={"nope": 1})))


def test_settings_from_env():
    st = lc.LlmSettings.from_env({"temperature": 0.2}, env={"LLM_ENDPOINT": "e", "LLM_API_KEY": "k", "LLM_MODEL": "m"})
    assert (st.endpoint, st.api_key, st.model, st.temperature) == ("e", "k", "m", 0.2)
    with pytest.raises(lc.ConfigError, match="LLM_API_KEY"):
        lc.LlmSettings.from_env({}, env={"LLM_ENDPOINT": "e"}).require_http()
    with pytest.raises(lc.ConfigError):
        lc.LlmSettings.from_env({"temprature": 1}, env={})


def test_token_bucket():
    now = [0.0]
    slept = []

    def sleep(d):
        slept.append(d)
        now[0] += d

    tb = lc.TokenBucket(2.0, capacity=2.0, clock=lambda: now[0], sleep=sleep)
    for _ in range(6):
        tb.acquire()
    # two tokens up front, then one every half second
    assert now[0] == pytest.approx(2.0)


def test_complete_many_keeps_order_and_isolates(generated, assets):
    bundles = [build_prompt(render(s), assets) for s, _ in generated.values()]
    bad = bundles[2].scenario_id
    out = lc.complete_many(bundles, lc.MockClient({bad: "timeout"}), lc.LlmSettings(max_in_flight=3))
    assert [getattr(r, "scenario_id", None) for r in out if not isinstance(r, Exception)] == [
        b.scenario_id for b in bundles if b.scenario_id != bad
    ]
    assert isinstance(out[2], lc.Timeout)
