"""Parsing judge responses, aggregating rubric scores, judge-vs-human agreement."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Mapping, Sequence

DIMENSIONS = ("finger", "motion", "contact", "completeness")
LABELS = {"finger": "FHI", "motion": "MT", "contact": "CI", "completeness": "CMS"}
SUBSETS = ("gesture", "hoi")

_FENCE = re.compile(r"```(?:json|JSON)?\s*\n?(.*?)```", re.S)


class JudgeParseError(ValueError):
    pass


@dataclass(frozen=True)
class JudgeScores:
    explanation: str
    finger: float
    motion: float
    contact: float
    completeness: float

    def __post_init__(self):
        if not isinstance(self.explanation, str) or not self.explanation.strip():
            raise JudgeParseError("explanation must be a non-empty string")
        for key in DIMENSIONS:
            value = getattr(self, key)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                raise JudgeParseError(f"score {key!r} is not a number: {value!r}")
            if not 0 <= value <= 5:
                raise JudgeParseError(f"score {key!r} = {value} is outside [0, 5]")

    def values(self) -> tuple[float, ...]:
        return tuple(float(getattr(self, k)) for k in DIMENSIONS)

    def to_json(self) -> dict:
        return {"explanation": self.explanation, **dict(zip(DIMENSIONS, self.values()))}


def _first_object(text: str) -> dict | None:
    decoder = json.JSONDecoder()
    for m in re.finditer(r"\{", text):
        try:
            obj, _ = decoder.raw_decode(text, m.start())
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict):
            return obj
    return None


def parse_judge_response(text: str, strict: bool = False) -> JudgeScores:
    """Pull the rubric JSON out of a judge reply; ``strict`` demands bare JSON."""
    if strict:
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise JudgeParseError(f"response is not bare JSON: {exc.msg}") from None
        if not isinstance(obj, dict):
            raise JudgeParseError("response JSON is not an object")
    else:
        fenced = _FENCE.search(text)
        obj = _first_object(fenced.group(1)) if fenced else None
        if obj is None:
            obj = _first_object(text)
        if obj is None:
            raise JudgeParseError("no JSON object found in judge response")
    for key in ("explanation", *DIMENSIONS):
        if key not in obj:
            raise JudgeParseError(f"judge response is missing key {key!r}")
    return JudgeScores(obj["explanation"], *(obj[k] for k in DIMENSIONS))


# ------------------------------------------------------------- aggregation


def display2(x: float) -> str:
    """Two-decimal display with half-up rounding on the decimal value."""
    return str(Decimal(f"{x:.10f}").quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


@dataclass
class AggregateReport:
    subsets: dict[str, dict[str, float]]

    def to_json(self) -> dict:
        return {k: dict(v) for k, v in self.subsets.items()}

    def format_table(self) -> str:
        cols = ("FHI", "MT", "CI", "CMS", "Overall")
        head = f"{'subset':<10}" + "".join(f"{c:>9}" for c in cols)
        lines = [head, "-" * len(head)]
        for name, row in self.subsets.items():
            lines.append(f"{name:<10}" + "".join(f"{display2(row[c]):>9}" for c in cols))
        return "\n".join(lines)


def _row(dim_means: Sequence[float], n: int | None = None) -> dict[str, float]:
    row = {LABELS[k]: float(v) for k, v in zip(DIMENSIONS, dim_means)}
    row["Overall"] = sum(dim_means) / len(dim_means)
    if n is not None:
        row["n"] = n
    return row


def overall(dim_means: Sequence[float]) -> float:
    return _row(dim_means)["Overall"]


def aggregate(scores: Sequence[tuple[str, JudgeScores]]) -> AggregateReport:
    """Per-subset dimension means, their Overall, and the gesture/hoi average."""
    if not scores:
        raise ValueError("nothing to aggregate")
    grouped: dict[str, list[JudgeScores]] = {}
    for subset, s in scores:
        grouped.setdefault(subset, []).append(s)
    out: dict[str, dict[str, float]] = {}
    order = [s for s in SUBSETS if s in grouped] + sorted(set(grouped) - set(SUBSETS))
    for subset in order:
        items = grouped[subset]
        means = [math.fsum(s.values()[i] for s in items) / len(items) for i in range(len(DIMENSIONS))]
        out[subset] = _row(means, len(items))
    present = [out[s] for s in SUBSETS if s in out]
    if present:
        avg = [sum(r[LABELS[k]] for r in present) / len(present) for k in DIMENSIONS]
        out["average"] = _row(avg)
    return AggregateReport(out)


# --------------------------------------------------------------- agreement


def ranking(scores: Mapping[str, float]) -> list[str]:
    return sorted(scores, key=lambda m: (-scores[m], m))


def agreement(llm: Mapping[str, float], human: Mapping[str, float]) -> dict:
    """Side-by-side judge and human means with per-model deviations."""
    if set(llm) != set(human):
        raise ValueError(f"model sets differ: {sorted(set(llm) ^ set(human))}")
    rows = []
    for model in human:
        delta = abs(llm[model] - human[model])
        rel = delta / abs(human[model]) if human[model] else (0.0 if delta == 0 else math.inf)
        rows.append({"model": model, "llm": llm[model], "human": human[model],
                     "abs_delta": delta, "rel_deviation": rel})
    return {"rows": rows, "llm_ranking": ranking(llm), "human_ranking": ranking(human),
            "ranking_consistent": ranking(llm) == ranking(human)}


def format_agreement(result: dict) -> str:
    lines = [f"{'model':<16}{'judge':>8}{'human':>8}{'|d|':>8}{'rel':>9}"]
    for r in result["rows"]:
        lines.append(f"{r['model']:<16}{r['llm']:>8.2f}{r['human']:>8.2f}{r['abs_delta']:>8.2f}{100 * r['rel_deviation']:>8.2f}%")
    lines.append(f"ranking consistent: {result['ranking_consistent']}")
    return "\n".join(lines)
