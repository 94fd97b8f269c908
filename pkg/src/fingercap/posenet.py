"""Fast pose stream: two graph-conv layers over the bimanual hand skeleton,
confidence-weighted joint pooling, then one temporal transformer block."""

from __future__ import annotations

import numpy as np

from . import numerics as nx
from .manifest import NUM_JOINTS
from .numerics import ParamSet, Tensor

JOINTS_PER_HAND = 21
# wrist (0) to the four joints of each finger: thumb, index, middle, ring, little
FINGER_CHAINS = [[0, 1, 2, 3, 4], [0, 5, 6, 7, 8], [0, 9, 10, 11, 12], [0, 13, 14, 15, 16], [0, 17, 18, 19, 20]]


def hand_edges() -> list[tuple[int, int]]:
    edges = []
    for hand in range(2):
        off = hand * JOINTS_PER_HAND
        for chain in FINGER_CHAINS:
            edges.extend((off + a, off + b) for a, b in zip(chain, chain[1:]))
    return edges


def hand_graph() -> np.ndarray:
    """42x42 binary adjacency: 20 bones per hand, no edges between hands."""
    A = np.zeros((NUM_JOINTS, NUM_JOINTS))
    for a, b in hand_edges():
        A[a, b] = A[b, a] = 1.0
    return A


def normalize_adjacency(A: np.ndarray) -> np.ndarray:
    """D^-1/2 (A + I) D^-1/2 with D the degree matrix of A + I."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"adjacency must be square, got {A.shape}")
    if not np.array_equal(A, A.T):
        raise ValueError("adjacency must be symmetric")
    if not np.isin(A, (0.0, 1.0)).all():
        raise ValueError("adjacency must be binary")
    if np.any(np.diag(A)):
        raise ValueError("adjacency must have a zero diagonal")
    S = A + np.eye(A.shape[0])
    d = 1.0 / np.sqrt(S.sum(axis=1))
    return S * d[:, None] * d[None, :]


def posenet_shapes(dims) -> dict[str, tuple[tuple[int, ...], str]]:
    p, h, f, m = dims.d_p, dims.d_hidden, dims.d_ff, dims.d_m
    return {
        "posenet.gcn0.W": ((3, h), "glorot"),
        "posenet.gcn0.b": ((h,), "zeros"),
        "posenet.gcn1.W": ((h, p), "glorot"),
        "posenet.gcn1.b": ((p,), "zeros"),
        "posenet.temporal.W_q": ((p, p), "glorot"),
        "posenet.temporal.W_k": ((p, p), "glorot"),
        "posenet.temporal.W_v": ((p, p), "glorot"),
        "posenet.temporal.W_o": ((p, p), "glorot"),
        "posenet.temporal.ln1.gain": ((p,), "ones"),
        "posenet.temporal.ln1.bias": ((p,), "zeros"),
        "posenet.temporal.ff0.W": ((p, f), "glorot"),
        "posenet.temporal.ff0.b": ((f,), "zeros"),
        "posenet.temporal.ff1.W": ((f, p), "glorot"),
        "posenet.temporal.ff1.b": ((p,), "zeros"),
        "posenet.temporal.ln2.gain": ((p,), "ones"),
        "posenet.temporal.ln2.bias": ((p,), "zeros"),
        "posenet.W_up": ((p, m), "glorot"),
    }


def joint_inputs(window: np.ndarray) -> np.ndarray:
    """Rows of (x, y, conf) per joint with zero-confidence coordinates zeroed."""
    window = np.asarray(window, dtype=np.float64)
    X = window.copy()
    X[..., :2] *= (window[..., 2:3] > 0)
    return X.reshape(-1, window.shape[-1])


def pooling_matrix(window: np.ndarray) -> np.ndarray:
    """K x (K*J) matrix averaging joints by confidence; a frame with no
    confident joint falls back to a plain mean."""
    conf = np.asarray(window)[..., 2]
    K, J = conf.shape
    P = np.zeros((K, K * J))
    for k in range(K):
        w = conf[k]
        s = w.sum()
        P[k, k * J:(k + 1) * J] = w / s if s > 0 else 1.0 / J
    return P


def stgcn_forward(window: np.ndarray, A_hat: np.ndarray, params: ParamSet, prefix: str = "posenet") -> Tensor:
    """Per-frame ``relu(A_hat H W + b)`` twice, pooled over joints to K x d_p."""
    window = np.asarray(window, dtype=np.float64)
    K = window.shape[0]
    if window.ndim != 3 or window.shape[1] != A_hat.shape[0]:
        raise ValueError(f"window shape {window.shape} does not match a {A_hat.shape[0]}-joint graph")
    big = np.kron(np.eye(K), A_hat)  # same graph applied to every frame
    H = Tensor(joint_inputs(window))
    for layer in (0, 1):
        H = nx.relu(nx.add(nx.matmul(big, nx.matmul(H, params[f"{prefix}.gcn{layer}.W"])),
                           params[f"{prefix}.gcn{layer}.b"]))
    return nx.matmul(pooling_matrix(window), H)


def positional_encoding(K: int, d: int) -> np.ndarray:
    pos = np.arange(K)[:, None]
    i = np.arange(d)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / d)
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))


def temporal_transformer_forward(spatial: Tensor, params: ParamSet, mask=None, heads: int = 1,
                                 prefix: str = "posenet.temporal", return_weights: bool = False):
    spatial = nx.as_tensor(spatial)
    K, d = spatial.shape
    x = nx.add(spatial, positional_encoding(K, d))
    q = nx.matmul(x, params[f"{prefix}.W_q"])
    k = nx.matmul(x, params[f"{prefix}.W_k"])
    v = nx.matmul(x, params[f"{prefix}.W_v"])
    mixed, weights = nx.attention(q, k, v, mask=mask, heads=heads)
    h = nx.layer_norm(nx.add(x, nx.matmul(mixed, params[f"{prefix}.W_o"])),
                      params[f"{prefix}.ln1.gain"], params[f"{prefix}.ln1.bias"])
    ff = nx.linear(nx.relu(nx.linear(h, params[f"{prefix}.ff0.W"], params[f"{prefix}.ff0.b"])),
                   params[f"{prefix}.ff1.W"], params[f"{prefix}.ff1.b"])
    out = nx.layer_norm(nx.add(h, ff), params[f"{prefix}.ln2.gain"], params[f"{prefix}.ln2.bias"])
    return (out, weights) if return_weights else out


def project_motion(emb, W_up) -> Tensor:
    return nx.matmul(emb, W_up)


def encode_window(window: np.ndarray, params: ParamSet, mask=None, heads: int = 1,
                  A_hat: np.ndarray | None = None) -> Tensor:
    """Full pose stream for one (padded) window: K x d_m motion features."""
    if A_hat is None:
        A_hat = HAND_GRAPH_NORM
    spatial = stgcn_forward(window, A_hat, params)
    emb = temporal_transformer_forward(spatial, params, mask=mask, heads=heads)
    return project_motion(emb, params["posenet.W_up"])


HAND_GRAPH_NORM = normalize_adjacency(hand_graph())
