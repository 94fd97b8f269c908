"""Frozen fixtures shared by the unit tests and the acceptance suite."""

from __future__ import annotations

import numpy as np

from fingercap.bench import SyntheticSpec, gen_synthetic_tracks
from fingercap.config import ModelDims
from fingercap.figop import SamplingConfig, segment
from fingercap.manifest import CaptionRecord, Manifest
from fingercap.model import init_params
from fingercap.trainer import Sample, StageConfig, Vocab, train_step

# Overfit-one-sample run. The learning rate and step budget were chosen by
# running the loop once (lr 0.1 is too slow to settle, 1.0 diverges) and are
# frozen here together with the track spec they were measured on.
OVERFIT_DIMS = ModelDims(N=4, d_v=16, d_a=16, d_m=16, d_p=16, d_hidden=16, d_ff=16, d_llm=16)
OVERFIT_CAPTION = "the right index finger taps the thumb twice"
OVERFIT_SPEC = SyntheticSpec(num_frames=16, amplitude=0.05, jitter=0.05)
OVERFIT_LR = 0.3
OVERFIT_STEPS = 200
OVERFIT_SEED = 0
OVERFIT_FIRST_BELOW = 26  # first step index with loss < 0.1 on the frozen run


def overfit_sample() -> tuple[Sample, Vocab]:
    vocab = Vocab.build([OVERFIT_CAPTION])
    track = gen_synthetic_tracks(1, OVERFIT_SPEC)[0][1]
    units = segment(track, OVERFIT_SPEC.fps, SamplingConfig(2.0, 8, 15))
    return Sample("overfit", units, vocab.encode(OVERFIT_CAPTION)), vocab


def overfit_losses(steps: int = OVERFIT_STEPS) -> list[float]:
    sample, vocab = overfit_sample()
    params = init_params(OVERFIT_DIMS, len(vocab), OVERFIT_SEED)
    stage = StageConfig("two", ("fusion.", "decoder."), OVERFIT_LR, 1)
    losses = []
    for _ in range(steps):
        params, loss = train_step([sample], params, stage, OVERFIT_DIMS, OVERFIT_SEED, vocab.pad_id)
        losses.append(loss)
    return losses


def four_records() -> Manifest:
    def rec(vid, domain, caption, view, hand_use):
        return CaptionRecord(vid, domain, view, hand_use, 30, 60, caption)
    return Manifest([rec("g1", "gesture", "a b", "TPV", "single"), rec("g2", "gesture", "a c", "TPV", "both"),
                     rec("h1", "hoi", "d", "FPV", "single"), rec("h2", "hoi", "d d", "TDV", "single")])


def random_track(T: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.concatenate([rng.random((T, 42, 2)), rng.uniform(0.2, 1, (T, 42, 1))], axis=2)
