"""Caption metrics: BLEU-4, ROUGE-L, METEOR (exact-match core) and CIDEr.

Every score is reported on a 0-100 display scale. Inputs are token lists
produced by :func:`tokenize`, which the dataset statistics also use.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

_STRIP = re.compile(r'[.,;:!?"()\[\]]')

SUBSETS = ("gesture", "hoi")
METRIC_NAMES = ("B-4", "R-L", "METEOR", "CIDEr")


def tokenize(text: str) -> list[str]:
    """Lowercase, drop ``.,;:!?"()[]`` and split on whitespace."""
    return _STRIP.sub("", text.lower()).split()


@dataclass
class TokenizedPair:
    prediction: list[str]
    references: list[list[str]]

    def __post_init__(self):
        if not self.references:
            raise ValueError("a pair needs at least one reference")

    @classmethod
    def from_text(cls, prediction: str, references: Iterable[str]) -> "TokenizedPair":
        return cls(tokenize(prediction), [tokenize(r) for r in references])


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


# ------------------------------------------------------------------ BLEU


def _bleu_stats(pair: TokenizedPair, max_n: int = 4) -> tuple[list[int], list[int], int, int]:
    hyp = pair.prediction
    matches, totals = [], []
    for n in range(1, max_n + 1):
        counts = ngrams(hyp, n)
        best: Counter = Counter()
        for ref in pair.references:
            for g, c in ngrams(ref, n).items():
                best[g] = max(best[g], c)
        matches.append(sum(min(c, best[g]) for g, c in counts.items()))
        totals.append(max(len(hyp) - n + 1, 0))
    c = len(hyp)
    # closest reference length, shorter one on ties
    r = min((len(ref) for ref in pair.references), key=lambda L: (abs(L - c), L))
    return matches, totals, c, r


def _bleu_from_stats(matches, totals, c, r, smoothing: bool) -> float:
    if c == 0:
        return 0.0
    log_p = 0.0
    for n, (m, t) in enumerate(zip(matches, totals), start=1):
        if smoothing and n > 1:
            m, t = m + 1, t + 1
        if m == 0 or t == 0:
            return 0.0
        log_p += math.log(m / t)
    bp = 1.0 if c > r else math.exp(1 - r / c)
    return 100.0 * bp * math.exp(log_p / len(matches))


def bleu4(pair: TokenizedPair, smoothing: bool = False) -> float:
    return _bleu_from_stats(*_bleu_stats(pair), smoothing)


def corpus_bleu4(pairs: Sequence[TokenizedPair], smoothing: bool = False) -> float:
    """BLEU-4 with n-gram counts and lengths pooled over the whole corpus."""
    M, T, C, R = [0] * 4, [0] * 4, 0, 0
    for pair in pairs:
        m, t, c, r = _bleu_stats(pair)
        M = [a + b for a, b in zip(M, m)]
        T = [a + b for a, b in zip(T, t)]
        C += c
        R += r
    return _bleu_from_stats(M, T, C, R, smoothing)


# --------------------------------------------------------------- ROUGE-L


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(pair: TokenizedPair, beta: float = 1.2) -> float:
    hyp = pair.prediction
    best = 0.0
    for ref in pair.references:
        if not hyp or not ref:
            continue
        lcs = lcs_length(hyp, ref)
        if lcs == 0:
            continue
        p, r = lcs / len(hyp), lcs / len(ref)
        f = (1 + beta ** 2) * p * r / (r + beta ** 2 * p)
        best = max(best, f)
    return 100.0 * best


# ---------------------------------------------------------------- METEOR


def _align(hyp: Sequence[str], ref: Sequence[str]) -> list[tuple[int, int]]:
    used = [False] * len(ref)
    pairs = []
    for i, w in enumerate(hyp):
        for j, r in enumerate(ref):
            if not used[j] and r == w:
                used[j] = True
                pairs.append((i, j))
                break
    return pairs


def _meteor_single(hyp: Sequence[str], ref: Sequence[str]) -> float:
    pairs = _align(hyp, ref)
    m = len(pairs)
    if m == 0:
        return 0.0
    chunks = 1
    for (i0, j0), (i1, j1) in zip(pairs, pairs[1:]):
        if not (i1 == i0 + 1 and j1 == j0 + 1):
            chunks += 1
    p, r = m / len(hyp), m / len(ref)
    fmean = 10 * p * r / (r + 9 * p)
    penalty = 0.5 * (chunks / m) ** 3
    return 100.0 * fmean * (1 - penalty)


def meteor_lite(pair: TokenizedPair) -> float:
    """METEOR restricted to exact unigram matches; best score over references."""
    return max(_meteor_single(pair.prediction, ref) for ref in pair.references)


# ----------------------------------------------------------------- CIDEr


@dataclass
class CiderResult:
    scores: list[float]
    mean: float


def _tfidf(counts: Counter, df: Counter, log_n: float) -> tuple[dict, float]:
    vec = {g: tf * (log_n - math.log(max(1.0, df[g]))) for g, tf in counts.items()}
    return vec, math.sqrt(sum(v * v for v in vec.values()))


def cider(pairs: Sequence[TokenizedPair], max_n: int = 4, scale: str = "conventional") -> CiderResult:
    """Corpus CIDEr, document frequencies taken from the reference sets.

    ``scale="conventional"`` keeps CIDEr's own x10 factor before the x100
    display scaling (the magnitude of published captioning tables);
    ``scale="raw"`` drops the x10.
    """
    if len(pairs) < 2:
        raise ValueError("CIDEr needs a corpus of at least 2 pairs")
    if scale not in ("conventional", "raw"):
        raise ValueError(f"unknown CIDEr scale {scale!r}")
    df: Counter = Counter()
    for pair in pairs:
        seen = set()
        for ref in pair.references:
            for n in range(1, max_n + 1):
                seen.update(ngrams(ref, n))
        df.update(seen)
    log_n = math.log(float(len(pairs)))
    factor = (10.0 if scale == "conventional" else 1.0) * 100.0

    scores = []
    for pair in pairs:
        per_n = []
        for n in range(1, max_n + 1):
            hv, hnorm = _tfidf(ngrams(pair.prediction, n), df, log_n)
            sims = []
            for ref in pair.references:
                rv, rnorm = _tfidf(ngrams(ref, n), df, log_n)
                dot = sum(v * rv.get(g, 0.0) for g, v in hv.items())
                sims.append(dot / (hnorm * rnorm) if hnorm > 0 and rnorm > 0 else 0.0)
            per_n.append(sum(sims) / len(sims))
        scores.append(factor * sum(per_n) / max_n)
    return CiderResult(scores, sum(scores) / len(scores))


# ---------------------------------------------------------- corpus report


@dataclass
class MetricReport:
    subsets: dict[str, dict[str, float]] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {k: dict(v) for k, v in self.subsets.items()}

    def format_table(self) -> str:
        cols = [s for s in (*SUBSETS, "average") if s in self.subsets]
        head = f"{'subset':<10}" + "".join(f"{m:>10}" for m in METRIC_NAMES)
        lines = [head, "-" * len(head)]
        for s in cols:
            lines.append(f"{s:<10}" + "".join(f"{self.subsets[s][m]:>10.2f}" for m in METRIC_NAMES))
        return "\n".join(lines)


def score_subset(pairs: Sequence[TokenizedPair], smoothing: bool = False,
                 cider_scale: str = "conventional") -> dict[str, float]:
    n = len(pairs)
    out = {
        "B-4": corpus_bleu4(pairs, smoothing),
        "R-L": sum(rouge_l(p) for p in pairs) / n,
        "METEOR": sum(meteor_lite(p) for p in pairs) / n,
    }
    out["CIDEr"] = cider(pairs, scale=cider_scale).mean if n >= 2 else 0.0
    return out


def evaluate_corpus(records, predictions: dict[str, str], split: str | None = "test",
                    smoothing: bool = False, cider_scale: str = "conventional") -> MetricReport:
    """Score predictions against manifest captions, per domain plus their mean."""
    grouped: dict[str, list[TokenizedPair]] = {s: [] for s in SUBSETS}
    for rec in records:
        if split is not None and rec.split != split:
            continue
        if rec.video_id not in predictions:
            raise KeyError(f"missing prediction for video_id {rec.video_id!r}")
        grouped[rec.domain].append(TokenizedPair.from_text(predictions[rec.video_id], [rec.caption]))
    report = MetricReport()
    for s, pairs in grouped.items():
        if pairs:
            report.subsets[s] = score_subset(pairs, smoothing, cider_scale)
    present = [report.subsets[s] for s in SUBSETS if s in report.subsets]
    if not present:
        raise ValueError(f"no records in split {split!r}")
    report.subsets["average"] = {m: sum(p[m] for p in present) / len(present) for m in METRIC_NAMES}
    return report
