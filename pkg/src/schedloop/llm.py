"""Chat-completion providers, code extraction and cost accounting.

Two providers share one interface, ``complete(messages, generation)``:
an HTTP client speaking the OpenAI-compatible chat-completion dialect, and a
scripted provider replaying ``response_NNN.txt`` files for offline runs.
"""

import math
import os
import random
import re
import time
from dataclasses import dataclass
from pathlib import Path

import httpx

from .lang import parse
from .lang.errors import InterpError

RETRY_BASE_S = 1.0
RETRY_FACTOR = 2.0
RETRY_JITTER = 0.2


def estimate_tokens(text: str) -> int:
    return math.ceil(len(text) / 4)


def estimate_cost(tokens_in: int, tokens_out: int, price_table) -> float:
    """USD for a call, given (usd per 1M input tokens, usd per 1M output tokens)."""
    price_in, price_out = price_table
    return tokens_in / 1e6 * price_in + tokens_out / 1e6 * price_out


class ProviderError(RuntimeError):
    def __init__(self, kind: str, message: str):
        self.kind = kind
        super().__init__(f"{kind}: {message}")


class ScriptExhausted(ProviderError):
    def __init__(self, message: str):
        super().__init__("script_exhausted", message)


class ExtractionError(ValueError):
    hint = "wrap the policy in a fenced code block"


@dataclass(frozen=True)
class ProviderConfig:
    kind: str  # http_chat | scripted
    model: str = "scripted"
    endpoint: str | None = None
    api_key_env_var: str | None = None
    timeout_s: float = 120.0
    max_retries: int = 3
    price_table: tuple[float, float] = (0.0, 0.0)
    script_dir: str | None = None

    def __post_init__(self):
        if self.kind not in ("http_chat", "scripted"):
            raise ValueError(f"unknown provider kind {self.kind!r} (expected http_chat or scripted)")
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be > 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if min(self.price_table) < 0:
            raise ValueError("prices must be >= 0")
        if self.kind == "http_chat" and not (self.endpoint and self.api_key_env_var):
            raise ValueError("http_chat providers need endpoint and api_key_env_var")
        if self.kind == "scripted" and not self.script_dir:
            raise ValueError("scripted providers need script_dir")

    @classmethod
    def from_dict(cls, d: dict) -> "ProviderConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown provider fields: {', '.join(sorted(unknown))}")
        d = dict(d)
        if "price_table" in d:
            d["price_table"] = tuple(float(x) for x in d["price_table"])
        return cls(**d)

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


@dataclass(frozen=True)
class ChatMessage:
    role: str  # system | user | assistant
    content: str

    def __post_init__(self):
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"bad role {self.role!r}")
        if self.role != "assistant" and not self.content:
            raise ValueError(f"{self.role} message must not be empty")


@dataclass(frozen=True)
class GenerationParams:
    temperature: float | None = None
    reasoning_effort: str | None = None


@dataclass(frozen=True)
class CompletionResult:
    text: str
    tokens_in: int
    tokens_out: int
    cost_usd: float
    latency_seconds: float
    estimated: bool = False


class ScriptedProvider:
    """Replays ``response_*.txt`` files from a directory in lexicographic order."""

    def __init__(self, script_dir, price_table=(0.0, 0.0)):
        self.script_dir = Path(script_dir)
        self.price_table = tuple(price_table)
        self.files = sorted(self.script_dir.glob("response_*.txt"))
        self.calls = 0

    def complete(self, messages, generation: GenerationParams | None = None) -> CompletionResult:
        self.calls += 1
        return scripted_complete(self.script_dir, self.calls, self.price_table, messages, files=self.files)


def scripted_complete(script_dir, call_index: int, price_table=(0.0, 0.0), messages=(), files=None) -> CompletionResult:
    files = files if files is not None else sorted(Path(script_dir).glob("response_*.txt"))
    if not 1 <= call_index <= len(files):
        raise ScriptExhausted(f"call {call_index} but {script_dir} holds {len(files)} responses")
    text = files[call_index - 1].read_text(encoding="utf-8")
    tokens_in = estimate_tokens("".join(m.content for m in messages))
    tokens_out = estimate_tokens(text)
    return CompletionResult(text, tokens_in, tokens_out, estimate_cost(tokens_in, tokens_out, price_table), 0.0,
                            estimated=True)


class HttpChatProvider:
    def __init__(self, config: ProviderConfig, client: httpx.Client | None = None, sleep=time.sleep,
                 rng: random.Random | None = None):
        self.config = config
        self.client = client
        self.sleep = sleep
        self.rng = rng or random.Random()

    def _backoff(self, attempt: int) -> float:
        jitter = 1.0 + RETRY_JITTER * self.rng.uniform(-1.0, 1.0)
        return RETRY_BASE_S * RETRY_FACTOR**attempt * jitter

    def complete(self, messages, generation: GenerationParams | None = None) -> CompletionResult:
        cfg = self.config
        key = os.environ.get(cfg.api_key_env_var or "")
        if not key:
            raise ProviderError("auth", f"environment variable {cfg.api_key_env_var} is not set")
        generation = generation or GenerationParams()
        body = {"model": cfg.model, "messages": [{"role": m.role, "content": m.content} for m in messages]}
        if generation.temperature is not None:
            body["temperature"] = generation.temperature
        if generation.reasoning_effort is not None:
            body["reasoning_effort"] = generation.reasoning_effort
        headers = {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}

        client = self.client or httpx.Client(timeout=cfg.timeout_s)
        start = time.monotonic()
        last: ProviderError | None = None
        try:
            for attempt in range(cfg.max_retries + 1):
                if attempt:
                    self.sleep(self._backoff(attempt - 1))
                try:
                    resp = client.post(cfg.endpoint, json=body, headers=headers, timeout=cfg.timeout_s)
                except httpx.TimeoutException as exc:
                    last = ProviderError("timeout", f"request timed out ({exc.__class__.__name__})")
                    continue
                except httpx.TransportError as exc:
                    last = ProviderError("connection", str(exc) or exc.__class__.__name__)
                    continue
                if resp.status_code in (401, 403):
                    raise ProviderError("auth", f"HTTP {resp.status_code} from {cfg.endpoint}")
                if resp.status_code == 429:
                    last = ProviderError("rate_limit", "HTTP 429")
                    continue
                if resp.status_code >= 500:
                    last = ProviderError("server_error", f"HTTP {resp.status_code}")
                    continue
                if resp.status_code >= 400:
                    raise ProviderError("http_error", f"HTTP {resp.status_code}: {resp.text[:200]}")
                return self._parse(resp, messages, time.monotonic() - start)
        finally:
            if self.client is None:
                client.close()
        assert last is not None
        raise last

    def _parse(self, resp: httpx.Response, messages, latency: float) -> CompletionResult:
        try:
            payload = resp.json()
            text = payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProviderError("malformed_response", f"cannot read choices[0].message.content ({exc!r})") from None
        if not isinstance(text, str):
            raise ProviderError("malformed_response", "message content is not a string")
        usage = payload.get("usage") or {}
        tin, tout = usage.get("prompt_tokens"), usage.get("completion_tokens")
        estimated = not (isinstance(tin, int) and isinstance(tout, int))
        if estimated:
            tin = estimate_tokens("".join(m.content for m in messages))
            tout = estimate_tokens(text)
        cost = estimate_cost(tin, tout, self.config.price_table)
        return CompletionResult(text, tin, tout, cost, latency, estimated)


def make_provider(config: ProviderConfig, **kw):
    if config.kind == "scripted":
        return ScriptedProvider(config.script_dir, config.price_table)
    return HttpChatProvider(config, **kw)


def complete(config: ProviderConfig, messages, generation: GenerationParams | None = None) -> CompletionResult:
    """One-shot call; for scripted providers this always returns the first response."""
    return make_provider(config).complete(messages, generation)


_FENCE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)


def extract_code_block(response_text: str) -> str:
    m = _FENCE.search(response_text)
    if m:
        return m.group(1)
    try:
        parse(response_text)
    except InterpError:
        raise ExtractionError("no fenced code block and the response is not a policy program") from None
    return response_text
