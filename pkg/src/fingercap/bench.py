"""Synthetic temporal-sparsity benchmark and the pose-window-length ablation.

Two classes of bimanual tracks agree exactly at every keyframe: one holds
still, the other wiggles the index fingers at a whole multiple of the
keyframe rate. Any probe that separates them must be reading the pose
frames between keyframes.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from sklearn.linear_model import LogisticRegression
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

from . import posenet
from .figop import SamplingConfig, keyframe_indices, padded_window, segment
from .fusion import fuse, token_budget
from .manifest import NUM_JOINTS
from .numerics import ParamSet

log = logging.getLogger(__name__)

OSCILLATING, STATIC = "oscillating", "static"
# index-finger joints (MCP..tip) of the left and right hand
INDEX_FINGER_JOINTS = (5, 6, 7, 8, 26, 27, 28, 29)


@dataclass(frozen=True)
class SyntheticSpec:
    num_frames: int = 60
    fps: float = 30.0
    sample_fps: float = 2.0
    frequency: float = 2.0
    amplitude: float = 0.1
    joints: tuple[int, ...] = INDEX_FINGER_JOINTS
    noise_std: float = 0.01
    jitter: float = 0.02  # per-sample translation range; scale varies by twice this
    seed: int = 0


@dataclass(frozen=True)
class BenchConfig:
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    n_train: int = 200  # per class
    n_test: int = 100  # per class
    K: int = 8
    max_units: int = 15
    probe_C: float = 1.0

    def sampling(self, K: int | None = None) -> SamplingConfig:
        return SamplingConfig(self.synthetic.sample_fps, self.K if K is None else K, self.max_units)


def _template_hand(wrist: tuple[float, float], mirror: float) -> np.ndarray:
    pts = [wrist]
    for f, angle in enumerate(np.linspace(-0.9, 0.6, 5)):
        length = 0.05 if f == 0 else 0.06
        for seg in range(1, 5):
            r = length * seg / 4 + 0.03
            pts.append((wrist[0] + mirror * r * np.sin(angle), wrist[1] - r * np.cos(angle)))
    return np.asarray(pts)


def template_pose() -> np.ndarray:
    """Resting two-hand pose in normalized image coordinates, confidence 1."""
    xy = np.concatenate([_template_hand((0.35, 0.65), -1.0), _template_hand((0.65, 0.65), 1.0)])
    return np.concatenate([xy, np.ones((NUM_JOINTS, 1))], axis=1)


def oscillation(spec: SyntheticSpec) -> np.ndarray:
    t = np.arange(spec.num_frames) / spec.fps
    return spec.amplitude * np.sin(2 * np.pi * spec.frequency * t)


def check_keyframe_identical(spec: SyntheticSpec, K: int = 8, tol: float = 1e-12) -> None:
    if spec.amplitude == 0:
        return
    kf = keyframe_indices(spec.num_frames, spec.fps, SamplingConfig(spec.sample_fps, K, 10 ** 9))
    wave = oscillation(spec)
    worst = float(np.max(np.abs(wave[kf])))
    if worst > tol:
        raise ValueError(f"frequency {spec.frequency} Hz at {spec.fps} fps does not vanish on the "
                         f"{spec.sample_fps} fps keyframes (max offset {worst:.3g})")


def gen_synthetic_tracks(n_per_class: int, spec: SyntheticSpec = SyntheticSpec(), seed: int | None = None,
                         offset: int = 0, noise: bool = True) -> list[tuple[str, np.ndarray]]:
    """``n_per_class`` pairs of (oscillating, static) tracks.

    Pair i shares its base pose and its noise, so the two classes differ only
    by the oscillation. ``offset`` shifts the pair index so train and test
    draws never overlap.
    """
    check_keyframe_identical(spec)
    seed = spec.seed if seed is None else seed
    wave = oscillation(spec)
    joints = list(spec.joints)
    out = []
    for i in range(offset, offset + n_per_class):
        rng = np.random.default_rng([seed, i])
        base = template_pose()
        j = spec.jitter
        base[:, :2] = (base[:, :2] - 0.5) * rng.uniform(1 - 2 * j, 1 + 2 * j) + 0.5 + rng.uniform(-j, j, size=2)
        static = np.repeat(base[None], spec.num_frames, axis=0)
        moving = static.copy()
        moving[:, joints, 0] += wave[:, None]
        moving[:, joints, 1] += 0.5 * wave[:, None]
        if noise and spec.noise_std > 0:
            jitter = rng.normal(0.0, spec.noise_std, size=(spec.num_frames, NUM_JOINTS, 2))
            static[..., :2] += jitter
            moving[..., :2] += jitter
        out.append((OSCILLATING, moving))
        out.append((STATIC, static))
    return out


def render_keyframe(pose: np.ndarray, N: int, d_v: int, seed: int) -> np.ndarray:
    """Fixed random map from a keyframe's pose to N x d_v visual tokens.

    Stands in for an image of the keyframe: it sees the pose at that single
    frame and nothing in between.
    """
    R = np.random.default_rng([seed, 7919]).standard_normal((pose.size, N * d_v)) / np.sqrt(pose.size)
    return np.tanh(((pose - 0.5).reshape(-1) @ R) * 4.0).reshape(N, d_v)


def track_features(track: np.ndarray, fps: float, cfg: SamplingConfig, params: ParamSet, dims,
                   seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Pooled visual-only and pooled fused tokens for one track."""
    vis, fused = [], []
    for unit in segment(track, fps, cfg):
        F_v = render_keyframe(track[unit.keyframe_index], dims.N, dims.d_v, seed)
        window, mask = padded_window(unit)
        F_p = posenet.encode_window(window, params, mask=mask, heads=dims.temporal_heads)
        vis.append(F_v.mean(axis=0))
        fused.append(fuse(F_v, F_p, params, mask=mask, heads=dims.fusion_heads).data.mean(axis=0))
    return np.mean(vis, axis=0), np.mean(fused, axis=0)


def _probe_accuracy(X_train, y_train, X_test, y_test, C: float) -> float:
    probe = make_pipeline(StandardScaler(), LogisticRegression(C=C, max_iter=5000))
    probe.fit(X_train, y_train)
    return float(probe.score(X_test, y_test))


def bench_temporal_sparsity(cfg: BenchConfig, params: ParamSet, dims, seed: int, K: int | None = None) -> dict:
    if cfg.n_train < 10 or cfg.n_test < 10:
        raise ValueError("the benchmark needs at least 10 samples per class")
    spec = replace(cfg.synthetic, seed=seed)
    sampling = cfg.sampling(K)
    train = gen_synthetic_tracks(cfg.n_train, spec)
    test = gen_synthetic_tracks(cfg.n_test, spec, offset=cfg.n_train)

    def featurize(items):
        V, Fz, y = [], [], []
        for label, track in items:
            v, f = track_features(track, spec.fps, sampling, params, dims, seed)
            V.append(v)
            Fz.append(f)
            y.append(1 if label == OSCILLATING else 0)
        return np.asarray(V), np.asarray(Fz), np.asarray(y)

    Vtr, Ftr, ytr = featurize(train)
    Vte, Fte, yte = featurize(test)
    acc_v = _probe_accuracy(Vtr, ytr, Vte, yte, cfg.probe_C)
    acc_f = _probe_accuracy(Ftr, ytr, Fte, yte, cfg.probe_C)
    log.info("K=%d visual-only %.3f fused %.3f", sampling.K, acc_v, acc_f)
    return {"K": sampling.K, "acc_visual_only": acc_v, "acc_figop": acc_f, "gap": acc_f - acc_v,
            "n_train": 2 * cfg.n_train, "n_test": 2 * cfg.n_test, "seed": seed,
            "synthetic": asdict(spec)}


def ablate_pose_length(K_values, cfg: BenchConfig, params_for_K, dims, seed: int) -> list[dict]:
    """Benchmark rerun per pose-window length; ``params_for_K(K)`` supplies encoder weights."""
    rows = []
    for K in K_values:
        if K < 1:
            raise ValueError(f"K must be >= 1, got {K}")
        result = bench_temporal_sparsity(cfg, params_for_K(K), dims, seed, K=K)
        budget = token_budget(cfg.sampling(K), dims.N)
        rows.append({"K": K, "acc_visual_only": result["acc_visual_only"], "acc_figop": result["acc_figop"],
                     "gap": result["gap"], **budget})
    return rows


def format_rows(rows: list[dict], keys: tuple[str, ...]) -> str:
    head = "".join(f"{k:>20}" for k in keys)
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append("".join(f"{r[k]:>20.4f}" if isinstance(r[k], float) else f"{r[k]:>20}" for k in keys))
    return "\n".join(lines)
