"""HandJudge: rubric prompts, an LLM client, response parsing and aggregation."""

from __future__ import annotations

from typing import Sequence

import httpx

from .client import (API_KEY_ENV, JudgeAuthError, JudgeConfig, JudgeError, RetriesExhausted, call_judge,
                     call_many, http_client, mock_client, prompt_hash, save_canned)
from .prompts import build_caption_prompt, build_judge_prompt, build_rephrase_prompt, export_templates
from .scoring import (AggregateReport, JudgeParseError, JudgeScores, aggregate, agreement, display2,
                      parse_judge_response)


def judge_records(items: Sequence[tuple[str, str, str]], cfg: JudgeConfig, client: httpx.Client,
                  strict: bool = False, sleep=None) -> list[tuple[str, JudgeScores]]:
    """Judge ``(subset, reference, prediction)`` triples; output keeps input order."""
    prompts = [build_judge_prompt(ref, pred) for _, ref, pred in items]
    kwargs = {} if sleep is None else {"sleep": sleep}
    texts = call_many(prompts, cfg, client, **kwargs)
    return [(subset, parse_judge_response(t, strict)) for (subset, _, _), t in zip(items, texts)]


__all__ = [
    "API_KEY_ENV", "AggregateReport", "JudgeAuthError", "JudgeConfig", "JudgeError", "JudgeParseError",
    "JudgeScores", "RetriesExhausted", "aggregate", "agreement", "build_caption_prompt", "build_judge_prompt",
    "build_rephrase_prompt", "call_judge", "call_many", "display2", "export_templates", "http_client",
    "judge_records", "mock_client", "parse_judge_response", "prompt_hash", "save_canned",
]
