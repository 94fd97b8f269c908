"""Parameter layout and seeded initialisation for the whole encoder stack."""

from __future__ import annotations

import hashlib

import numpy as np

from . import numerics as nx
from .config import ModelDims
from .figop import FiGOPUnit, padded_window
from .fusion import encode_video, fuse, fusion_shapes, visual_shapes
from .numerics import ParamSet, glorot
from .posenet import encode_window, posenet_shapes
from .trainer import decoder_forward, decoder_shapes, next_token_loss


def param_specs(dims, vocab_size: int | None = None) -> dict[str, tuple[tuple[int, ...], str]]:
    specs = {**visual_shapes(dims), **posenet_shapes(dims), **fusion_shapes(dims)}
    if vocab_size:
        specs.update(decoder_shapes(dims, vocab_size))
    return specs


def param_shapes(dims, vocab_size: int | None = None) -> dict[str, tuple[int, ...]]:
    return {n: shape for n, (shape, _) in param_specs(dims, vocab_size).items()}


def _rng_for(seed: int, name: str) -> np.random.Generator:
    digest = hashlib.blake2b(f"{seed}:{name}".encode(), digest_size=8).digest()
    return np.random.default_rng(int.from_bytes(digest, "big"))


def init_params(dims, vocab_size: int | None = None, seed: int = 0) -> ParamSet:
    """Glorot-uniform matrices, zero biases, unit norm gains; visual stub frozen.

    Each tensor draws from its own generator keyed on (seed, name), so adding
    a module never reshuffles the others.
    """
    arrays = {}
    for name, (shape, kind) in param_specs(dims, vocab_size).items():
        if kind == "glorot":
            arrays[name] = glorot(_rng_for(seed, name), shape)
        elif kind == "zeros":
            arrays[name] = np.zeros(shape)
        else:
            arrays[name] = np.ones(shape)
    return ParamSet(arrays, frozen=[n for n in arrays if n.startswith("visual.")])


GRADCHECK_MODULES = ("posenet", "fusion", "decoder", "full")
# Finite differences in float64 carry ~1e-10 of absolute noise at these sizes,
# so the check point is chosen where no gradient entry is analytically tiny.
GRADCHECK_DIMS = ModelDims(N=4, d_v=8, d_a=8, d_m=8, d_p=8, d_hidden=8, d_ff=8, d_llm=8)
GRADCHECK_H = 3e-5
RELU_BIAS_OFFSET = 1.0
FRAME_SPREAD = 3.0


def gradcheck_case(module: str, dims=GRADCHECK_DIMS, seed: int = 0, K: int = 4, vocab_size: int = 7):
    """A small seeded objective for :func:`numerics.finite_diff_check`.

    Returns ``(f, params)`` where only the named module's parameters are
    trainable; ``"full"`` opens the pose stream, projector and decoder at once
    and scores a caption with the next-token loss.
    """
    if module not in GRADCHECK_MODULES:
        raise ValueError(f"unknown module {module!r}; choose from {', '.join(GRADCHECK_MODULES)}")
    rng = np.random.default_rng([seed, 17])
    params = init_params(dims, vocab_size, seed)
    for name in params:  # move biases and gains off their symmetric starting points
        if name.endswith((".b", ".bias", ".gain")):
            params[name] = params[name].data + 0.1 * rng.standard_normal(params[name].shape)
    for name in ("posenet.gcn0.b", "posenet.gcn1.b", "posenet.temporal.ff0.b"):
        # keep ReLU units away from their kink and alive across frames
        params[name] = params[name].data + RELU_BIAS_OFFSET
    # Large per-frame translations and confidence levels make every pooled
    # feature column vary over time. A column that is constant across frames
    # gets an almost-zero attention gradient (softmax is shift invariant),
    # which finite differences cannot resolve.
    xy = rng.uniform(0.3, 0.7, (K, 42, 2)) + FRAME_SPREAD * rng.uniform(-1, 1, (K, 1, 2))
    conf = rng.uniform(0.5, 1.0, (K, 42, 1)) * rng.uniform(0.2, 1.0, (K, 1, 1))
    window = np.concatenate([xy, conf], axis=2)
    unit = FiGOPUnit(0, window[: K - 1], K)  # one padded row exercises the mask
    padded, mask = padded_window(unit)
    visual = rng.standard_normal((dims.N, dims.d_v))
    R_pose = rng.standard_normal((K, dims.d_m))
    ids = [1, *rng.integers(4, vocab_size, size=3).tolist(), 2]

    if module == "posenet":
        def f(p):
            return nx.total(nx.mul(encode_window(padded, p, mask=mask), R_pose))
    elif module == "fusion":
        F_p = encode_window(padded, params, mask=mask).data
        R = rng.standard_normal(visual.shape)

        def f(p):
            return nx.total(nx.mul(fuse(visual, F_p, p, mask=mask), R))
    else:
        def f(p):
            tokens = encode_video([unit], "grad", p, dims, seed, {0: visual})
            return next_token_loss(decoder_forward(ids[:-1], tokens, p), ids[1:])

    prefixes = {"posenet": ("posenet.",), "fusion": ("fusion.W_",), "decoder": ("decoder.",),
                "full": ("posenet.", "fusion.", "decoder.")}[module]
    params.set_frozen(n for n in params if not n.startswith(prefixes))
    return f, params
