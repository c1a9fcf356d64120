"""Completion service clients: a deterministic offline mock and an HTTP
chat-completion client with retry and rate control.

Both implement ``send(request) -> LlmResponse``. ``complete`` wraps a client
and rejects responses that stop early or end in the middle of the grammar.
"""

from __future__ import annotations

import hashlib
import logging
import os
import random
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Protocol, Sequence

import httpx

from .prompting import PromptBundle
from .qa import CATEGORIES, SECTION_MARKERS, EmptyAnswer, MissingSection, QAParseError, UnpairedQ, parse_qa

log = logging.getLogger(__name__)

ENV_ENDPOINT = "LLM_ENDPOINT"
ENV_API_KEY = "LLM_API_KEY"
ENV_MODEL = "LLM_MODEL"
DEFAULT_MODEL = "gpt-4-turbo"
FINISH_COMPLETE = "stop"


class LlmError(RuntimeError):
    pass


class ConfigError(LlmError):
    pass


class AuthError(LlmError):
    pass


class RateLimited(LlmError):
    pass


class Timeout(LlmError):
    pass


class ServiceUnavailable(LlmError):
    pass


class BadResponse(LlmError):
    pass


class TruncatedResponse(LlmError):
    pass


@dataclass(frozen=True)
class LlmSettings:
    endpoint: str | None = None
    api_key: str | None = None
    model: str = DEFAULT_MODEL
    temperature: float = 0.7
    max_tokens: int = 4096
    timeout_s: float = 120.0
    max_attempts: int = 5
    backoff_base_s: float = 1.0
    backoff_max_s: float = 60.0
    max_in_flight: int = 4
    requests_per_s: float | None = None

    @classmethod
    def from_env(cls, config: Mapping[str, object] | None = None, env: Mapping[str, str] | None = None) -> "LlmSettings":
        """Settings from a config mapping, with endpoint/key/model from the environment."""
        env = os.environ if env is None else env
        cfg = dict(config or {})
        known = set(cls.__dataclass_fields__)
        unknown = set(cfg) - known
        if unknown:
            raise ConfigError(f"unknown llm settings: {sorted(unknown)}")
        cfg.setdefault("endpoint", env.get(ENV_ENDPOINT))
        cfg.setdefault("api_key", env.get(ENV_API_KEY))
        if env.get(ENV_MODEL):
            cfg.setdefault("model", env[ENV_MODEL])
        return cls(**cfg)

    def require_http(self) -> None:
        missing = [name for name, v in ((ENV_ENDPOINT, self.endpoint), (ENV_API_KEY, self.api_key)) if not v]
        if missing:
            raise ConfigError(f"http mode needs {', '.join(missing)}")


@dataclass(frozen=True)
class LlmRequest:
    scenario_id: str
    messages: tuple[tuple[str, str], ...]  # (role, content)
    temperature: float = 0.7
    max_tokens: int = 4096
    model: str = DEFAULT_MODEL

    @classmethod
    def from_bundle(cls, bundle: PromptBundle, settings: LlmSettings | None = None) -> "LlmRequest":
        st = settings or LlmSettings()
        msgs = tuple((m["role"], m["content"]) for m in bundle.messages())
        return cls(bundle.scenario_id, msgs, st.temperature, st.max_tokens, st.model)

    @property
    def user_text(self) -> str:
        return "\n".join(c for r, c in self.messages if r == "user")

    def body(self) -> dict:
        return {
            "model": self.model,
            "messages": [{"role": r, "content": c} for r, c in self.messages],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }


@dataclass(frozen=True)
class LlmResponse:
    scenario_id: str
    raw_text: str  # kept byte-exact for audit
    finish_reason: str
    model: str
    attempts: int = 1

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "raw_text": self.raw_text,
            "finish_reason": self.finish_reason,
            "model": self.model,
            "attempts": self.attempts,
        }


class CompletionClient(Protocol):
    def send(self, request: LlmRequest) -> LlmResponse: ...


# ---------------------------------------------------------------------------
# completeness


def check_complete(resp: LlmResponse, required: Sequence[str] = CATEGORIES) -> None:
    """Raise TruncatedResponse if the text stopped early.

    Other grammar errors are left for the parser, which reports them with
    their offsets.
    """
    if resp.finish_reason != FINISH_COMPLETE:
        raise TruncatedResponse(f"{resp.scenario_id}: finish reason {resp.finish_reason!r}")
    try:
        parse_qa(resp.raw_text, required=required)
    except (MissingSection, UnpairedQ) as exc:
        raise TruncatedResponse(f"{resp.scenario_id}: {exc}") from exc
    except EmptyAnswer as exc:
        if not resp.raw_text[exc.offset :].strip().split("\n", 1)[1:]:
            raise TruncatedResponse(f"{resp.scenario_id}: {exc}") from exc
    except QAParseError:
        pass


def complete(bundle: PromptBundle, client: CompletionClient, settings: LlmSettings | None = None) -> LlmResponse:
    resp = client.send(LlmRequest.from_bundle(bundle, settings))
    check_complete(resp)
    return resp


def complete_many(
    bundles: Sequence[PromptBundle],
    client: CompletionClient,
    settings: LlmSettings | None = None,
) -> list[LlmResponse | LlmError]:
    """Complete bundles concurrently; results come back in input order.

    Failures are returned in place of the response so one bad scenario does
    not sink the batch.
    """
    st = settings or LlmSettings()

    def one(b: PromptBundle) -> LlmResponse | LlmError:
        try:
            return complete(b, client, st)
        except LlmError as exc:
            log.warning("completion failed for %s: %s", b.scenario_id, exc)
            return exc

    if st.max_in_flight <= 1 or len(bundles) <= 1:
        return [one(b) for b in bundles]
    with ThreadPoolExecutor(max_workers=st.max_in_flight) as pool:
        return list(pool.map(one, bundles))


# ---------------------------------------------------------------------------
# mock


_AGENT_LINE_RE = re.compile(r"Surrounding agent # (\w+) is a (\w+)\.")
FAULTS = ("auth", "rate_limit", "timeout", "unavailable", "truncate", "length")

_ENV_Q = (
    ("Is there an intersection ahead?", "Yes, the ego agent is heading towards an intersection."),
    ("What type of intersection is it?", "It is a {w} way intersection."),
    ("How many lanes are on the ego agent's side?", "There are {w} lanes on the ego agent's side."),
    ("Are there any stop signs nearby?", "No stop sign is mentioned in the description."),
    ("Is there a crosswalk nearby?", "The description mentions a crosswalk ahead of the ego agent."),
    ("What is the traffic light state?", "The traffic light for the ego agent is {c}."),
)
_EGO_Q = (
    ("What is the ego agent's current speed?", "The ego agent is moving at {v} m/s."),
    ("Is the ego agent accelerating?", "The ego agent is {m}."),
    ("Which lane is the ego agent in?", "The ego agent is on the {o} lane from the right."),
    ("Where will the ego agent be after 3 seconds?", "It will be about {d} meters in front of its current place."),
    ("What will the ego agent's speed be?", "Its speed will be about {v} m/s."),
    ("Is the ego agent approaching the intersection?", "Yes, it is getting closer to the intersection center."),
)
_SUR_Q = (
    ("What type of agent is surrounding agent #{a}?", "Surrounding agent #{a} is a {k}."),
    ("Where is surrounding agent #{a} relative to the ego agent?", "It is {d} meters {side} of the ego agent."),
    ("What is the speed of surrounding agent #{a}?", "Its current speed is {v} m/s."),
    ("Where will surrounding agent #{a} be after 3 seconds?", "Surrounding agent #{a} will be {d} meters away from the ego agent."),
    ("Is surrounding agent #{a} moving?", "Surrounding agent #{a} is {m}."),
)
_INT_A = (
    "Surrounding agent #{a} will yield to the ego agent because of the traffic rules.",
    "The ego agent will yield to surrounding agent #{a} since it has the right of way.",
    "Surrounding agent #{a} has no interaction with the ego agent because their paths do not cross.",
    "Surrounding agent #{a} is following the ego agent in the same lane.",
    "Surrounding agent #{a} is overtaking the ego agent from the left lane.",
)
_INTENT_A = (
    "The ego agent intends to go straight through the intersection. It will yield to any crossing pedestrians.",
    "The ego agent intends to turn left. It will wait for the oncoming traffic to pass before turning.",
    "The ego agent intends to keep its lane and follow the traffic ahead.",
    "The ego agent intends to stop at the stop sign first and then proceed when the way is clear.",
)


def _seed(scenario_id: str) -> int:
    return int.from_bytes(hashlib.sha256(scenario_id.encode("utf-8")).digest()[:8], "big")


def mock_plan(scenario_id: str, agent_ids: Sequence[str]) -> dict[str, list[tuple[str, str]]]:
    """The (question, answer) pairs the mock emits, per category.

    This is the construction the mock's output is checked against.
    """
    rng = random.Random(_seed(scenario_id))

    def fill(text: str, a: str | None = None) -> str:
        return text.format(
            a=a,
            w=rng.choice(("3", "4")),
            c=rng.choice(("red", "green", "yellow")),
            v=rng.choice(("0", "4", "7.5", "12")),
            m=rng.choice(("accelerating", "decelerating", "moving at a constant speed")),
            o=rng.choice(("first", "second", "third")),
            d=rng.choice(("5", "12", "18.0", "30")),
            k=rng.choice(("vehicle", "pedestrian", "cyclist")),
            side=rng.choice(("in front", "behind", "on the left", "on the right")),
        )

    def pick(pool, n: int, a: str | None = None) -> list[tuple[str, str]]:
        chosen = rng.sample(pool, n)
        out = []
        for q, ans in chosen:
            if rng.random() < 0.25:
                # some answers run over two lines
                ans = ans + "\nThis follows from the scene description."
            out.append((fill(q, a), fill(ans, a)))
        return out

    plan: dict[str, list[tuple[str, str]]] = {c: [] for c in CATEGORIES}
    plan["map_env"] = pick(_ENV_Q, rng.randint(1, 4))
    plan["ego"] = pick(_EGO_Q, rng.randint(2, 5))
    for a in agent_ids:
        plan["other_agent"] += pick(_SUR_Q, rng.randint(1, 4), a)
    for a in agent_ids:
        plan["interaction"].append(
            (f"What interaction will happen between the ego agent and surrounding agent #{a}?", rng.choice(_INT_A).format(a=a))
        )
    plan["intention"] = [("What will the ego agent intend to do?", rng.choice(_INTENT_A))]
    return plan


def _mock_text(scenario_id: str, plan: Mapping[str, list[tuple[str, str]]]) -> str:
    rng = random.Random(_seed(scenario_id) ^ 0x5A5A)
    lines: list[str] = []
    for cat in CATEGORIES:
        marker = SECTION_MARKERS[cat]
        lines.append(marker)
        for q, a in plan[cat]:
            lines += ["", f"[Q] {q}", f"[A] {a}"]
        if rng.random() < 0.3:
            lines += ["", f"[End {marker[1:-1]}]"]
        lines.append("")
    return "\n".join(lines)


def agent_ids_from_description(text: str) -> list[str]:
    return list(dict.fromkeys(m.group(1) for m in _AGENT_LINE_RE.finditer(text)))


@dataclass
class MockClient:
    """Offline stand-in for the completion service.

    The response for a scenario depends only on its id and the agents named
    in the description, so repeated calls return identical bytes.
    ``faults`` maps a scenario id to one of FAULTS to exercise error paths.
    """

    faults: Mapping[str, str] = field(default_factory=dict)
    model: str = "mock"
    calls: int = 0

    def __post_init__(self):
        self._lock = threading.Lock()
        bad = {f for f in self.faults.values() if f not in FAULTS}
        if bad:
            raise ValueError(f"unknown faults: {sorted(bad)}")

    def send(self, request: LlmRequest) -> LlmResponse:
        with self._lock:
            self.calls += 1
        sid = request.scenario_id
        fault = self.faults.get(sid)
        if fault == "auth":
            raise AuthError("mock: invalid credential")
        if fault == "rate_limit":
            raise RateLimited("mock: rate limited")
        if fault == "timeout":
            raise Timeout("mock: timed out")
        if fault == "unavailable":
            raise ServiceUnavailable("mock: service unavailable")
        text = _mock_text(sid, mock_plan(sid, agent_ids_from_description(request.user_text)))
        if fault == "truncate":
            # cut inside the interaction section
            cut = text.index(SECTION_MARKERS["interaction"]) + len(SECTION_MARKERS["interaction"])
            return LlmResponse(sid, text[:cut] + "\n\n[Q] What interaction", FINISH_COMPLETE, self.model)
        if fault == "length":
            return LlmResponse(sid, text[: len(text) // 2], "length", self.model)
        return LlmResponse(sid, text, FINISH_COMPLETE, self.model)

    @staticmethod
    def expected_counts(bundle: PromptBundle) -> dict[str, int]:
        plan = mock_plan(bundle.scenario_id, agent_ids_from_description(bundle.user_input))
        return {c: len(plan[c]) for c in CATEGORIES}


# ---------------------------------------------------------------------------
# http


class TokenBucket:
    """Thread-safe request rate limiter; ``acquire`` blocks until a token is free."""

    def __init__(self, rate_per_s: float, capacity: float | None = None, clock=time.monotonic, sleep=time.sleep):
        if rate_per_s <= 0:
            raise ValueError("rate must be positive")
        self.rate = rate_per_s
        self.capacity = capacity if capacity is not None else max(1.0, rate_per_s)
        self._tokens = self.capacity
        self._clock = clock
        self._sleep = sleep
        self._last = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
                self._last = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            self._sleep(wait)


def backoff_delay(attempt: int, base: float, cap: float, rng: random.Random) -> float:
    """Exponential delay with full jitter on top, for ``attempt`` starting at 1."""
    d = min(cap, base * 2 ** (attempt - 1))
    return d + rng.uniform(0, base)


def _retry_after(resp: httpx.Response) -> float | None:
    v = resp.headers.get("retry-after")
    if v is None:
        return None
    try:
        return max(0.0, float(v))
    except ValueError:
        return None


class HttpClient:
    """OpenAI-style chat-completion client.

    Transient failures (429, 5xx, timeouts, connection errors) are retried
    with exponential backoff up to ``max_attempts``; 401/403 fail at once.
    """

    def __init__(
        self,
        settings: LlmSettings,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
        rng: random.Random | None = None,
    ):
        settings.require_http()
        self.settings = settings
        self._sleep = sleep
        self._rng = rng or random.Random()
        self._http = httpx.Client(transport=transport, timeout=settings.timeout_s)
        self._bucket = TokenBucket(settings.requests_per_s, sleep=sleep) if settings.requests_per_s else None

    def close(self) -> None:
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _post(self, body: dict) -> httpx.Response:
        if self._bucket is not None:
            self._bucket.acquire()
        headers = {"Authorization": f"Bearer {self.settings.api_key}", "api-key": str(self.settings.api_key)}
        return self._http.post(self.settings.endpoint, json=body, headers=headers)

    def send(self, request: LlmRequest) -> LlmResponse:
        st = self.settings
        last: LlmError | None = None
        for attempt in range(1, st.max_attempts + 1):
            wait = None
            try:
                resp = self._post(request.body())
            except httpx.TimeoutException as exc:
                last = Timeout(f"{request.scenario_id}: {exc}")
            except httpx.TransportError as exc:
                last = ServiceUnavailable(f"{request.scenario_id}: {exc}")
            else:
                code = resp.status_code
                if code in (401, 403):
                    raise AuthError(f"{request.scenario_id}: HTTP {code}")
                if code == 429:
                    last = RateLimited(f"{request.scenario_id}: HTTP 429")
                    wait = _retry_after(resp)
                elif code >= 500:
                    last = ServiceUnavailable(f"{request.scenario_id}: HTTP {code}")
                    wait = _retry_after(resp)
                elif code >= 400:
                    raise BadResponse(f"{request.scenario_id}: HTTP {code}: {resp.text[:200]}")
                else:
                    return self._decode(request, resp, attempt)
            if attempt == st.max_attempts:
                break
            delay = wait if wait is not None else backoff_delay(attempt, st.backoff_base_s, st.backoff_max_s, self._rng)
            log.info("retrying %s in %.2fs after %s", request.scenario_id, delay, last)
            self._sleep(delay)
        assert last is not None
        raise last

    def _decode(self, request: LlmRequest, resp: httpx.Response, attempt: int) -> LlmResponse:
        try:
            doc = resp.json()
            choice = doc["choices"][0]
            text = choice["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BadResponse(f"{request.scenario_id}: malformed body: {exc}") from None
        if not isinstance(text, str):
            raise BadResponse(f"{request.scenario_id}: content is not text")
        finish = choice.get("finish_reason") or "unknown"
        return LlmResponse(request.scenario_id, text, finish, doc.get("model", request.model), attempt)
