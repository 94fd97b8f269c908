"""Two-stage fine-tuning over a toy next-token decoder.

Stage one trains the pose encoder and the projector with the decoder and the
visual stub frozen; stage two trains the projector and the decoder. Updates
are plain SGD so a resumed run replays the direct run exactly.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import numerics as nx
from .figop import FiGOPUnit
from .fusion import encode_video
from .metrics import tokenize
from .numerics import ParamSet, Tensor
from .posenet import positional_encoding

log = logging.getLogger(__name__)

PAD, BOS, EOS, UNK = "<pad>", "<bos>", "<eos>", "<unk>"
SPECIALS = (PAD, BOS, EOS, UNK)


# ------------------------------------------------------------------ vocab


@dataclass
class Vocab:
    tokens: list[str]

    def __post_init__(self):
        self.index = {t: i for i, t in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def pad_id(self) -> int:
        return self.index[PAD]

    @classmethod
    def build(cls, captions: Iterable[str], max_words: int = 64) -> "Vocab":
        counts = Counter(t for c in captions for t in tokenize(c))
        words = sorted(counts, key=lambda w: (-counts[w], w))[:max_words]
        return cls([*SPECIALS, *words])

    def encode(self, text: str) -> list[int]:
        unk = self.index[UNK]
        return [self.index[BOS]] + [self.index.get(t, unk) for t in tokenize(text)] + [self.index[EOS]]

    def decode(self, ids: Iterable[int]) -> str:
        return " ".join(self.tokens[i] for i in ids if self.tokens[i] not in SPECIALS)


def decoder_shapes(dims, vocab_size: int) -> dict[str, tuple[tuple[int, ...], str]]:
    d = dims.d_llm
    return {
        "decoder.embed": ((vocab_size, d), "glorot"),
        "decoder.W_q": ((d, d), "glorot"),
        "decoder.W_k": ((d, d), "glorot"),
        "decoder.W_v": ((d, d), "glorot"),
        "decoder.ln.gain": ((d,), "ones"),
        "decoder.ln.bias": ((d,), "zeros"),
        "decoder.out.W": ((d, vocab_size), "glorot"),
        "decoder.out.b": ((vocab_size,), "zeros"),
    }


def decoder_forward(input_ids: Sequence[int], llm_tokens: Tensor, params: ParamSet) -> Tensor:
    """Logits (len(input_ids) x vocab) from one cross-attention block over the video tokens."""
    e = nx.take_rows(params["decoder.embed"], input_ids)
    L, d = e.shape
    e = nx.add(e, positional_encoding(L, d))
    mixed, _ = nx.attention(nx.matmul(e, params["decoder.W_q"]),
                            nx.matmul(llm_tokens, params["decoder.W_k"]),
                            nx.matmul(llm_tokens, params["decoder.W_v"]))
    h = nx.layer_norm(nx.add(e, mixed), params["decoder.ln.gain"], params["decoder.ln.bias"])
    return nx.linear(h, params["decoder.out.W"], params["decoder.out.b"])


def next_token_loss(logits, target_ids: Sequence[int], pad_id: int = 0) -> Tensor:
    """Mean cross-entropy over the positions whose target is not padding."""
    t = np.asarray(target_ids, dtype=np.int64)
    keep = t != pad_id
    if not keep.any():
        raise ValueError("every target position is padding")
    return nx.cross_entropy_rows(logits, t, keep.astype(np.float64))


# --------------------------------------------------------------- schedule


@dataclass(frozen=True)
class StageConfig:
    stage: str
    trainable: tuple[str, ...]
    learning_rate: float
    epochs: int

    def __post_init__(self):
        if self.stage not in ("one", "two"):
            raise ValueError(f"unknown stage {self.stage!r}")
        if any(p.startswith("visual") for p in self.trainable):
            raise ValueError("the visual stub is frozen in every stage")
        if self.stage == "one" and any(p.startswith("decoder") for p in self.trainable):
            raise ValueError("stage one keeps the decoder frozen")
        if not self.learning_rate >= 0 or self.epochs < 1:
            raise ValueError("learning rate must be >= 0 and epochs >= 1")

    def is_trainable(self, name: str) -> bool:
        return any(name.startswith(p) for p in self.trainable)


@dataclass(frozen=True)
class TrainConfig:
    stage1_lr: float = 1e-4
    stage2_lr: float = 1e-5
    stage1_epochs: int = 1
    stage2_epochs: int = 3
    shuffle: bool = True


def build_stage_schedule(cfg: TrainConfig = TrainConfig()) -> list[StageConfig]:
    return [
        StageConfig("one", ("posenet.", "fusion."), cfg.stage1_lr, cfg.stage1_epochs),
        StageConfig("two", ("fusion.", "decoder."), cfg.stage2_lr, cfg.stage2_epochs),
    ]


# --------------------------------------------------------------- training


@dataclass
class Sample:
    video_id: str
    units: list[FiGOPUnit]
    token_ids: list[int]  # BOS ... EOS
    features: dict[int, np.ndarray] | None = None


def sample_loss(sample: Sample, params: ParamSet, dims, seed: int, pad_id: int = 0) -> Tensor:
    tokens = encode_video(sample.units, sample.video_id, params, dims, seed, sample.features)
    logits = decoder_forward(sample.token_ids[:-1], tokens, params)
    return next_token_loss(logits, sample.token_ids[1:], pad_id)


def batch_loss(batch: Sequence[Sample], params: ParamSet, dims, seed: int, pad_id: int = 0) -> Tensor:
    loss = sample_loss(batch[0], params, dims, seed, pad_id)
    for s in batch[1:]:
        loss = nx.add(loss, sample_loss(s, params, dims, seed, pad_id))
    return loss if len(batch) == 1 else nx.scale(loss, 1.0 / len(batch))


def train_step(batch: Sequence[Sample], params: ParamSet, stage: StageConfig, dims, seed: int,
               pad_id: int = 0) -> tuple[ParamSet, float]:
    """One SGD step on the parameters ``stage`` makes trainable."""
    if not batch:
        raise ValueError("empty batch")
    work = params.copy()
    work.set_frozen(n for n in work if not stage.is_trainable(n))
    loss = batch_loss(batch, work, dims, seed, pad_id)
    value = loss.item()
    if not math.isfinite(value):
        raise FloatingPointError(
            f"non-finite loss {value} in stage {stage.stage} on {[s.video_id for s in batch]}")
    grads = nx.backward(loss, work)
    out = params.copy()
    for name, g in grads.items():
        out[name] = params[name].data - stage.learning_rate * g
    out.set_frozen(params.frozen)
    return out, value


@dataclass
class TrainReport:
    steps: list[dict] = field(default_factory=list)
    epochs: list[dict] = field(default_factory=list)
    checkpoints: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"steps": self.steps, "epochs": self.epochs, "checkpoints": self.checkpoints}


def epoch_order(n: int, seed: int, stage: str, epoch: int, shuffle: bool) -> list[int]:
    if not shuffle:
        return list(range(n))
    rng = np.random.default_rng([seed, 1 if stage == "one" else 2, epoch])
    return [int(i) for i in rng.permutation(n)]


def run_stages(dataset: Sequence[Sample], params: ParamSet, dims, seed: int,
               cfg: TrainConfig = TrainConfig(), out_dir=None, start_stage: int = 1,
               pad_id: int = 0) -> tuple[ParamSet, TrainReport]:
    """Run the schedule from ``start_stage`` on, batch size 1, checkpointing each stage."""
    if not dataset:
        raise ValueError("empty training set")
    report = TrainReport()
    schedule = build_stage_schedule(cfg)
    step = 0
    for number, stage in enumerate(schedule, start=1):
        if number < start_stage:
            continue
        for epoch in range(stage.epochs):
            losses = []
            for i in epoch_order(len(dataset), seed, stage.stage, epoch, cfg.shuffle):
                params, loss = train_step([dataset[i]], params, stage, dims, seed, pad_id)
                losses.append(loss)
                report.steps.append({"step": step, "stage": stage.stage, "loss": loss})
                step += 1
            mean_loss = float(np.mean(losses))
            report.epochs.append({"stage": stage.stage, "epoch": epoch, "mean_loss": mean_loss})
            log.info("stage %s epoch %d mean loss %.6f", stage.stage, epoch, mean_loss)
        if out_dir is not None:
            path = Path(out_dir) / f"stage{number}.json"
            path.parent.mkdir(parents=True, exist_ok=True)
            params.save(path)
            report.checkpoints.append(str(path))
    return params, report


def write_report_lines(report: TrainReport, path) -> None:
    with open(path, "w") as fh:
        for row in report.steps:
            fh.write(json.dumps(row) + "\n")
