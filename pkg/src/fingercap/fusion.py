"""Motion-aware projector: visual tokens cross-attend into pose motion
features, the result is added back onto the visual tokens, and an affine
map takes the fused tokens into the language-model width."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import numerics as nx
from . import posenet
from .figop import FiGOPUnit, SamplingConfig, padded_window
from .numerics import ParamSet, Tensor


def fusion_shapes(dims) -> dict[str, tuple[tuple[int, ...], str]]:
    return {
        "fusion.W_Q": ((dims.d_v, dims.d_a), "glorot"),
        "fusion.W_K": ((dims.d_m, dims.d_a), "glorot"),
        "fusion.W_V": ((dims.d_m, dims.d_v), "glorot"),
        "fusion.proj.W": ((dims.d_v, dims.d_llm), "glorot"),
        "fusion.proj.b": ((dims.d_llm,), "zeros"),
    }


def visual_shapes(dims) -> dict[str, tuple[tuple[int, ...], str]]:
    return {"visual.proj": ((dims.d_v, dims.d_v), "glorot")}


# ------------------------------------------------------------ slow stream


def stub_seed(video_id: str, keyframe_index: int, seed: int) -> int:
    digest = hashlib.blake2b(f"{video_id}\x00{keyframe_index}\x00{seed}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def visual_stub_encode(keyframe_index: int, video_id: str, d_v: int, N: int, seed: int,
                       params: ParamSet | None = None) -> np.ndarray:
    """Deterministic N x d_v stand-in for the frozen vision tower.

    Raw tokens come from a generator keyed on (video, keyframe, seed); when
    ``params`` carries ``visual.proj`` they pass through that frozen map.
    """
    raw = np.random.default_rng(stub_seed(video_id, keyframe_index, seed)).standard_normal((N, d_v))
    if params is not None and "visual.proj" in params:
        return raw @ params["visual.proj"].data
    return raw


def load_visual_features(path, N: int, d_v: int) -> np.ndarray:
    arr = nx.load_array(path)
    if arr.shape != (N, d_v):
        raise nx.ShapeError(f"feature file {path} has shape {arr.shape}, expected {(N, d_v)}")
    return arr


# ----------------------------------------------------------------- fusion


def cross_attention(F_v, F_p, params: ParamSet, mask=None, heads: int = 1,
                    return_weights: bool = False):
    """Visual tokens query pose features: ``Attn(F_v W_Q, F_p W_K, F_p W_V)``."""
    F_v, F_p = nx.as_tensor(F_v), nx.as_tensor(F_p)
    if F_p.data.ndim != 2 or F_p.shape[0] == 0:
        raise nx.ShapeError("cross_attention needs at least one pose frame")
    q = nx.matmul(F_v, params["fusion.W_Q"])
    k = nx.matmul(F_p, params["fusion.W_K"])
    v = nx.matmul(F_p, params["fusion.W_V"])
    out, weights = nx.attention(q, k, v, mask=mask, heads=heads)
    return (out, weights) if return_weights else out


def fuse(F_v, F_p, params: ParamSet, mask=None, heads: int = 1) -> Tensor:
    F_v = nx.as_tensor(F_v)
    return nx.add(cross_attention(F_v, F_p, params, mask=mask, heads=heads), F_v)


def project_to_llm(F_fused, params: ParamSet) -> Tensor:
    return nx.linear(F_fused, params["fusion.proj.W"], params["fusion.proj.b"])


def encode_unit(unit: FiGOPUnit, video_id: str, params: ParamSet, dims, seed: int,
                visual: np.ndarray | None = None) -> Tensor:
    if visual is None:
        visual = visual_stub_encode(unit.keyframe_index, video_id, dims.d_v, dims.N, seed, params)
    window, mask = padded_window(unit)
    F_p = posenet.encode_window(window, params, mask=mask, heads=dims.temporal_heads)
    return project_to_llm(fuse(visual, F_p, params, mask=mask, heads=dims.fusion_heads), params)


def encode_video(units: Sequence[FiGOPUnit], video_id: str, params: ParamSet, dims, seed: int,
                 features: Mapping[int, np.ndarray] | None = None) -> Tensor:
    """Language-model tokens for a whole video, (T*N) x d_llm in unit order."""
    if not units:
        raise ValueError("encode_video needs at least one FiGOP unit")
    blocks = []
    for u in units:
        vis = None if features is None else features.get(u.keyframe_index)
        blocks.append(encode_unit(u, video_id, params, dims, seed, vis))
    return nx.concat_rows(blocks)


# ---------------------------------------------------------------- reports


def token_budget(cfg: SamplingConfig, N: int) -> dict[str, int]:
    figop = cfg.max_units * N
    dense = cfg.max_units * cfg.K * N
    return {"figop_llm_tokens": figop, "dense_rgb_equivalent_tokens": dense, "ratio": dense // figop}


@dataclass
class ParamCount:
    total: int
    by_module: dict[str, int]
    trainable: int

    @property
    def trainable_fraction(self) -> float:
        return self.trainable / self.total if self.total else 0.0

    def to_json(self) -> dict:
        return {"total": self.total, "by_module": self.by_module, "trainable": self.trainable,
                "trainable_fraction": self.trainable_fraction}


def count_shapes(shapes: Mapping[str, Sequence[int]], frozen_prefixes: Iterable[str] = ()) -> ParamCount:
    frozen_prefixes = tuple(frozen_prefixes)
    by_module: dict[str, int] = {}
    total = trainable = 0
    for name, shape in shapes.items():
        n = int(np.prod(shape))
        total += n
        mod = name.split(".", 1)[0]
        by_module[mod] = by_module.get(mod, 0) + n
        if not name.startswith(frozen_prefixes):
            trainable += n
    return ParamCount(total, by_module, trainable)


def count_params(params: ParamSet, frozen_prefixes: Iterable[str] | None = None) -> ParamCount:
    """Exact parameter counts; ``frozen_prefixes`` defaults to the set's frozen names."""
    shapes = {n: params[n].shape for n in params}
    if frozen_prefixes is None:
        frozen = params.frozen
        pc = count_shapes(shapes)
        pc.trainable = params.size(n for n in params if n not in frozen)
        return pc
    return count_shapes(shapes, frozen_prefixes)
