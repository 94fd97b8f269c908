"""Chat-completion client for the judge, with retry/backoff and an offline mock."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import httpx

log = logging.getLogger(__name__)

API_KEY_ENV = "JUDGE_API_KEY"
RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})


class JudgeError(RuntimeError):
    pass


class JudgeAuthError(JudgeError):
    pass


class RetriesExhausted(JudgeError):
    def __init__(self, message: str, attempts: int):
        super().__init__(message)
        self.attempts = attempts


@dataclass
class JudgeConfig:
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    model: str = "gpt-4.1"
    temperature: float = 0.2
    top_p: float = 0.9
    max_retries: int = 3
    backoff_base: float = 1.0
    backoff_max: float = 30.0
    timeout: float = 60.0
    concurrency: int = 4

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.concurrency < 1:
            raise ValueError("concurrency must be >= 1")

    def backoff(self, attempt: int) -> float:
        return min(self.backoff_base * 2 ** attempt, self.backoff_max)


def prompt_hash(system: str, user: str) -> str:
    return hashlib.sha256(json.dumps([system, user], ensure_ascii=False).encode("utf-8")).hexdigest()


def request_payload(prompt: tuple[str, str], cfg: JudgeConfig) -> dict:
    system, user = prompt
    return {
        "model": cfg.model,
        "messages": [{"role": "system", "content": system}, {"role": "user", "content": user}],
        "temperature": cfg.temperature,
        "top_p": cfg.top_p,
    }


def completion_body(content: str, model: str = "mock") -> dict:
    return {"id": "mock", "model": model, "object": "chat.completion",
            "choices": [{"index": 0, "finish_reason": "stop",
                         "message": {"role": "assistant", "content": content}}]}


def http_client(cfg: JudgeConfig, api_key: str | None = None) -> httpx.Client:
    key = api_key or os.environ.get(API_KEY_ENV)
    if not key:
        raise JudgeAuthError(f"set {API_KEY_ENV} to use the HTTP judge transport")
    return httpx.Client(headers={"Authorization": f"Bearer {key}"}, timeout=cfg.timeout)


# ------------------------------------------------------------------- mock

_REF = re.compile(r"The following is the reference description:\n\n(.*?)\n\nThe following is the description provided by the model:\n\n(.*?)\n\nNow, please rate", re.S)
_HAND_WORDS = {"left", "right", "both", "hand", "hands", "finger", "fingers", "thumb", "index", "middle",
               "ring", "little", "pinky", "pinkies", "palm", "palms", "wrist", "fingertip", "fingertips"}


def synthetic_judgement(reference: str, prediction: str) -> dict:
    """Overlap-based stand-in scores so the mock can answer any prompt."""
    from ..metrics import tokenize

    ref, hyp = tokenize(reference), tokenize(prediction)

    def f1(a: set, b: set) -> float:
        if not a or not b:
            return 0.0
        inter = len(a & b)
        return 2 * inter / (len(a) + len(b))

    def half_steps(x: float) -> float:
        return round(max(0.0, min(5.0, 5 * x)) * 2) / 2

    hand = f1(set(ref) & _HAND_WORDS, set(hyp) & _HAND_WORDS)
    words = f1(set(ref), set(hyp))
    length = min(len(hyp), len(ref)) / max(len(hyp), len(ref), 1)
    return {
        "explanation": f"Synthetic judgement from token overlap ({words:.2f}).",
        "finger": half_steps(hand),
        "motion": half_steps(words),
        "contact": half_steps((words + hand) / 2),
        "completeness": half_steps(words * length),
    }


def mock_handler(directory=None, canned: dict[str, str] | None = None,
                 synthesize: bool = True) -> Callable[[httpx.Request], httpx.Response]:
    """Answer from ``{hash}.json`` files or a ``{hash: content}`` map, else synthesize."""
    canned = dict(canned or {})
    root = Path(directory) if directory else None

    def handler(request: httpx.Request) -> httpx.Response:
        body = json.loads(request.content)
        msgs = {m["role"]: m["content"] for m in body["messages"]}
        key = prompt_hash(msgs.get("system", ""), msgs.get("user", ""))
        if key in canned:
            return httpx.Response(200, json=completion_body(canned[key]))
        if root is not None and (root / f"{key}.json").exists():
            stored = json.loads((root / f"{key}.json").read_text(encoding="utf-8"))
            if "choices" not in stored:
                stored = completion_body(json.dumps(stored))
            return httpx.Response(200, json=stored)
        m = _REF.search(msgs.get("user", ""))
        if synthesize and m:
            return httpx.Response(200, json=completion_body(json.dumps(synthetic_judgement(*m.groups()))))
        return httpx.Response(404, json={"error": {"message": f"no canned response for {key}"}})

    return handler


def mock_client(directory=None, canned: dict[str, str] | None = None, synthesize: bool = True) -> httpx.Client:
    return httpx.Client(transport=httpx.MockTransport(mock_handler(directory, canned, synthesize)))


def save_canned(directory, prompt: tuple[str, str], content: str) -> Path:
    path = Path(directory) / f"{prompt_hash(*prompt)}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(completion_body(content)), encoding="utf-8")
    return path


# ------------------------------------------------------------------- call


def call_judge(prompt: tuple[str, str], cfg: JudgeConfig, client: httpx.Client,
               sleep: Callable[[float], None] = time.sleep) -> str:
    """POST one chat completion and return the first choice's text.

    429, 5xx, timeouts and connection failures are retried up to
    ``cfg.max_retries`` times with exponential backoff.
    """
    payload = request_payload(prompt, cfg)
    attempts = cfg.max_retries + 1
    last = ""
    for attempt in range(attempts):
        try:
            resp = client.post(cfg.endpoint, json=payload, timeout=cfg.timeout)
        except httpx.TransportError as exc:
            last = f"{type(exc).__name__}: {exc}"
        else:
            if resp.status_code < 300:
                if attempt:
                    log.info("judge call succeeded after %d retries", attempt)
                try:
                    return resp.json()["choices"][0]["message"]["content"]
                except (ValueError, KeyError, IndexError, TypeError) as exc:
                    raise JudgeError(f"malformed chat-completion response: {exc}") from None
            if resp.status_code not in RETRYABLE_STATUS:
                raise JudgeError(f"judge endpoint returned HTTP {resp.status_code}: {resp.text[:200]}")
            last = f"HTTP {resp.status_code}"
        if attempt + 1 < attempts:
            delay = cfg.backoff(attempt)
            log.warning("judge call failed (%s); retry %d/%d in %.2fs", last, attempt + 1, cfg.max_retries, delay)
            sleep(delay)
    raise RetriesExhausted(f"judge call failed after {attempts} attempts: {last}", attempts)


def call_many(prompts: Sequence[tuple[str, str]], cfg: JudgeConfig, client: httpx.Client,
              sleep: Callable[[float], None] = time.sleep) -> list[str]:
    """Up to ``cfg.concurrency`` calls in flight; results keep input order."""
    with ThreadPoolExecutor(max_workers=cfg.concurrency) as pool:
        return list(pool.map(lambda p: call_judge(p, cfg, client, sleep), prompts))
