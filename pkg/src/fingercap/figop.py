"""FiGOP units: sparse keyframes, each bound to the dense pose window after it."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .manifest import validate_pose


@dataclass(frozen=True)
class SamplingConfig:
    sample_fps: float = 2.0
    K: int = 8
    max_units: int = 15

    def __post_init__(self):
        if not self.sample_fps > 0:
            raise ValueError("sample_fps must be positive")
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if self.max_units < 1:
            raise ValueError("max_units must be at least 1")


@dataclass
class FiGOPUnit:
    keyframe_index: int
    pose_window: np.ndarray  # K_eff x 42 x 3
    K: int

    @property
    def K_eff(self) -> int:
        return self.pose_window.shape[0]

    @property
    def padded(self) -> bool:
        return self.K_eff < self.K


def round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def keyframe_indices(num_frames: int, fps: float, cfg: SamplingConfig) -> list[int]:
    """``round(i * fps / sample_fps)`` for i = 0, 1, ... while inside the track."""
    if cfg.sample_fps > fps:
        raise ValueError(f"sample_fps {cfg.sample_fps} exceeds source fps {fps}")
    out = []
    step = float(fps) / cfg.sample_fps
    i = 0
    while len(out) < cfg.max_units:
        t = round_half_up(i * step)
        if t >= num_frames:
            break
        out.append(t)
        i += 1
    return out


def segment(track: np.ndarray, fps: float, cfg: SamplingConfig = SamplingConfig()) -> list[FiGOPUnit]:
    track = np.asarray(track, dtype=np.float64)
    if track.ndim != 3 or track.shape[0] == 0:
        raise ValueError("cannot segment an empty pose track")
    validate_pose(track)
    T = track.shape[0]
    return [FiGOPUnit(t, track[t:min(t + cfg.K, T)].copy(), cfg.K)
            for t in keyframe_indices(T, fps, cfg)]


def pad_window(window: np.ndarray, K: int) -> np.ndarray:
    """Extend to ``K`` rows by repeating the last real frame with zero confidence."""
    window = np.asarray(window, dtype=np.float64)
    k_eff = window.shape[0]
    if k_eff == 0:
        raise ValueError("cannot pad an empty window")
    if k_eff > K:
        raise ValueError(f"window of {k_eff} frames exceeds K={K}")
    if k_eff == K:
        return window.copy()
    filler = np.repeat(window[-1:], K - k_eff, axis=0)
    filler[..., 2] = 0.0
    return np.concatenate([window, filler], axis=0)


def padded_window(unit: FiGOPUnit) -> tuple[np.ndarray, np.ndarray]:
    """Padded window plus a boolean mask of the real (unpadded) rows."""
    mask = np.zeros(unit.K, dtype=bool)
    mask[:unit.K_eff] = True
    return pad_window(unit.pose_window, unit.K), mask


def unit_index(units: list[FiGOPUnit]) -> list[dict]:
    return [{"keyframe_index": u.keyframe_index, "K_eff": u.K_eff, "padded": u.padded} for u in units]
