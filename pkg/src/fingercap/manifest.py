"""Caption manifests, pose tracks, dataset statistics and the train/val/test split."""

from __future__ import annotations

import hashlib
import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .metrics import tokenize

DOMAINS = ("gesture", "hoi")
VIEWS = ("TPV", "L_TPV", "R_TPV", "TDV", "FPV")
HAND_USES = ("single", "both")
SPLITS = ("train", "val", "test", "unassigned")

NUM_JOINTS = 42  # 21 left-hand joints, then 21 right-hand joints, wrist first
NUM_CHANNELS = 3  # x, y, confidence

FIELD_ORDER = ("video_id", "domain", "view", "hand_use", "fps", "num_frames", "caption", "pose_path", "split")


class ManifestError(ValueError):
    pass


class PoseFormatError(ValueError):
    pass


def _parse_fps(value):
    if isinstance(value, bool):
        raise ManifestError(f"fps must be a positive number, got {value!r}")
    if isinstance(value, str):
        try:
            value = Fraction(value)
        except ValueError:
            raise ManifestError(f"fps {value!r} is not a rational number") from None
    if not isinstance(value, (int, float, Fraction)) or not value > 0 or not math.isfinite(value):
        raise ManifestError(f"fps must be a positive number, got {value!r}")
    return value


@dataclass(frozen=True)
class CaptionRecord:
    video_id: str
    domain: str
    view: str
    hand_use: str
    fps: float | int | Fraction
    num_frames: int
    caption: str
    pose_path: str | None = None
    split: str = "unassigned"

    def __post_init__(self):
        if not isinstance(self.video_id, str) or not self.video_id:
            raise ManifestError("video_id must be a non-empty string")
        for name, allowed in (("domain", DOMAINS), ("view", VIEWS), ("hand_use", HAND_USES), ("split", SPLITS)):
            value = getattr(self, name)
            if value not in allowed:
                raise ManifestError(f"unknown {name} label {value!r} (expected one of {', '.join(allowed)})")
        object.__setattr__(self, "fps", _parse_fps(self.fps))
        if isinstance(self.num_frames, bool) or not isinstance(self.num_frames, int) or self.num_frames < 1:
            raise ManifestError(f"num_frames must be a positive integer, got {self.num_frames!r}")
        if not isinstance(self.caption, str) or not self.caption.strip():
            raise ManifestError(f"{self.video_id}: caption is empty")

    @property
    def duration(self) -> float:
        return self.num_frames / float(self.fps)

    def to_json(self) -> dict:
        out = {}
        for k in FIELD_ORDER:
            v = getattr(self, k)
            if k == "fps" and isinstance(v, Fraction):
                v = str(v)
            if k == "split" and v == "unassigned":
                continue
            out[k] = v
        return out


@dataclass
class Manifest:
    records: list[CaptionRecord] = field(default_factory=list)
    source_tags: list[str] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for r in self.records:
            if r.video_id in seen:
                raise ManifestError(f"duplicate video_id {r.video_id!r}")
            seen.add(r.video_id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def get(self, video_id: str) -> CaptionRecord:
        for r in self.records:
            if r.video_id == video_id:
                return r
        raise KeyError(video_id)

    def by_split(self, split: str) -> list[CaptionRecord]:
        return [r for r in self.records if r.split == split]


def load_manifest(path) -> Manifest:
    """Read a JSON-lines manifest; blank lines are skipped."""
    records: list[CaptionRecord] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"line {lineno}: malformed JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise ManifestError(f"line {lineno}: expected a JSON object")
            unknown = set(obj) - set(FIELD_ORDER)
            if unknown:
                raise ManifestError(f"line {lineno}: unknown keys {sorted(unknown)}")
            try:
                rec = CaptionRecord(**obj)
            except TypeError as exc:
                raise ManifestError(f"line {lineno}: {exc}") from None
            except ManifestError as exc:
                raise ManifestError(f"line {lineno}: {exc}") from None
            if rec.video_id in seen:
                raise ManifestError(f"line {lineno}: duplicate video_id {rec.video_id!r}")
            seen.add(rec.video_id)
            records.append(rec)
    return Manifest(records, [str(path)])


def save_manifest(manifest: Manifest, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in manifest.records:
            fh.write(json.dumps(r.to_json(), ensure_ascii=False) + "\n")


# ------------------------------------------------------------------ poses


def validate_pose(frames: np.ndarray) -> np.ndarray:
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 3 or frames.shape[1:] != (NUM_JOINTS, NUM_CHANNELS) or frames.shape[0] < 1:
        raise PoseFormatError(f"pose track must have shape T x {NUM_JOINTS} x {NUM_CHANNELS}, got {frames.shape}")
    if not np.isfinite(frames).all():
        raise PoseFormatError("pose track contains non-finite values")
    conf = frames[..., 2]
    if conf.min() < 0 or conf.max() > 1:
        raise PoseFormatError("confidence values must lie in [0, 1]")
    return frames


def load_pose_track(path) -> np.ndarray:
    """Load a pose file into a validated ``T x 42 x 3`` array."""
    obj = json.loads(Path(path).read_text())
    J, C = obj.get("J"), obj.get("C")
    if J != NUM_JOINTS or C != NUM_CHANNELS:
        raise PoseFormatError(f"pose file declares J={J}, C={C}; expected J={NUM_JOINTS}, C={NUM_CHANNELS}")
    try:
        frames = np.array(obj["frames"], dtype=np.float64)
    except (KeyError, ValueError) as exc:
        raise PoseFormatError(f"unreadable frames array: {exc}") from None
    return validate_pose(frames)


def save_pose_track(frames: np.ndarray, path) -> None:
    frames = validate_pose(frames)
    Path(path).write_text(json.dumps({"J": NUM_JOINTS, "C": NUM_CHANNELS, "frames": frames.tolist()}))


# ------------------------------------------------------------------ stats


@dataclass
class DomainStats:
    videos: int = 0
    words: int = 0
    frames: int = 0
    vocab: int = 0
    single_hand: int = 0
    both_hand: int = 0


@dataclass
class DatasetStats:
    domains: dict[str, DomainStats]
    view_hist: dict[str, dict[str, int]]
    caption_lengths: list[int]
    durations: list[float]

    def to_json(self) -> dict:
        return {
            "domains": {k: asdict(v) for k, v in self.domains.items()},
            "views": self.view_hist,
            "caption_length_hist": dict(sorted(Counter(self.caption_lengths).items())),
            "duration_hist_seconds": duration_histogram(self.durations),
        }

    def format_table(self) -> str:
        head = f"{'domain':<9}{'Num.Videos':>12}{'Num.Words':>12}{'Num.Frames':>12}{'Num.Vocs':>10}{'single':>8}{'both':>8}"
        lines = [head, "-" * len(head)]
        for name, d in self.domains.items():
            lines.append(f"{name:<9}{d.videos:>12}{d.words:>12}{d.frames:>12}{d.vocab:>10}{d.single_hand:>8}{d.both_hand:>8}")
        lines.append("")
        lines.append(f"{'view':<9}{'single':>8}{'both':>8}")
        for view, h in self.view_hist.items():
            lines.append(f"{view:<9}{h['single']:>8}{h['both']:>8}")
        return "\n".join(lines)


def duration_histogram(durations: Sequence[float], edges=(0, 1, 2, 5, 10, 20, 60)) -> dict[str, int]:
    labels = [f"{a}-{b}s" for a, b in zip(edges, edges[1:])] + [f">={edges[-1]}s"]
    counts = dict.fromkeys(labels, 0)
    for d in durations:
        i = int(np.searchsorted(edges, d, side="right")) - 1
        counts[labels[min(max(i, 0), len(labels) - 1)]] += 1
    return counts


def compute_stats(manifest: Manifest, tokenizer: Callable[[str], list[str]] = tokenize) -> DatasetStats:
    domains = {d: DomainStats() for d in DOMAINS}
    vocab: dict[str, set] = {d: set() for d in DOMAINS}
    views = {v: {"single": 0, "both": 0} for v in VIEWS}
    lengths, durations = [], []
    for r in manifest.records:
        toks = tokenizer(r.caption)
        d = domains[r.domain]
        d.videos += 1
        d.words += len(toks)
        d.frames += r.num_frames
        if r.hand_use == "single":
            d.single_hand += 1
        else:
            d.both_hand += 1
        vocab[r.domain].update(toks)
        views[r.view][r.hand_use] += 1
        lengths.append(len(toks))
        durations.append(r.duration)
    for name, toks in vocab.items():
        domains[name].vocab = len(toks)
    return DatasetStats(domains, views, lengths, durations)


# ------------------------------------------------------------------ split


def split_hash(video_id: str, seed: int) -> int:
    digest = hashlib.blake2b(f"{seed}:{video_id}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def apportion(n: int, ratios: Sequence[float]) -> list[int]:
    """Largest-remainder apportionment of ``n`` items; ties go to earlier slots."""
    quotas = [n * r for r in ratios]
    sizes = [math.floor(q) for q in quotas]
    order = sorted(range(len(ratios)), key=lambda i: (-(quotas[i] - sizes[i]), i))
    for i in order[: n - sum(sizes)]:
        sizes[i] += 1
    return sizes


def split(manifest: Manifest, seed: int, ratios: Sequence[float] = (0.8, 0.1, 0.1)) -> Manifest:
    """Assign train/val/test per domain by seeded hash order, cut by ``ratios``."""
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three non-negative numbers summing to 1, got {ratios}")
    if all(r > 0 for r in ratios) and len(manifest) < 3:
        raise ValueError(f"cannot split {len(manifest)} records three ways")
    assigned: dict[str, str] = {}
    for domain in DOMAINS:
        ids = sorted((r.video_id for r in manifest.records if r.domain == domain),
                     key=lambda v: (split_hash(v, seed), v))
        sizes = apportion(len(ids), ratios)
        start = 0
        for name, size in zip(("train", "val", "test"), sizes):
            for vid in ids[start:start + size]:
                assigned[vid] = name
            start += size
    return Manifest([replace(r, split=assigned[r.video_id]) for r in manifest.records],
                    list(manifest.source_tags))
