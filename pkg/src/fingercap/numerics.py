"""Small float64 tensor core with tape-based reverse-mode differentiation.

Every op returns a new :class:`Tensor`. When any input requires a gradient
the result remembers its parents and a closure mapping the upstream gradient
to per-parent gradients; :func:`backward` walks that tape in reverse
topological order. Nothing is cached between forward passes, so a tape is
rebuilt each time a loss is evaluated.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np


class ShapeError(ValueError):
    pass


class Tensor:
    __slots__ = ("data", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim and 0 in arr.shape:
            raise ShapeError(f"empty dimension in shape {arr.shape}")
        self.data = arr
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, requires_grad={self.requires_grad})"

    # operator sugar for the common cases
    def __add__(self, other):
        return add(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data: np.ndarray, parents: Sequence[Tensor], backward: Callable) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.name = None
    live = any(p.requires_grad for p in parents)
    out.requires_grad = live
    out._parents = tuple(parents) if live else ()
    out._backward = backward if live else None
    return out


def _need_2d(t: Tensor, op: str) -> None:
    if t.data.ndim != 2:
        raise ShapeError(f"{op} expects a 2-D tensor, got shape {t.shape}")


# ---------------------------------------------------------------- core ops


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _need_2d(a, "matmul")
    _need_2d(b, "matmul")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    A, B = a.data, b.data
    return _result(A @ B, (a, b), lambda g: (g @ B.T, A.T @ g))


def add(a, b) -> Tensor:
    """Elementwise sum of equal shapes, or a 2-D tensor plus a row vector."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape == b.shape:
        return _result(a.data + b.data, (a, b), lambda g: (g, g))
    if a.data.ndim == 2 and b.data.ndim == 1 and a.shape[1] == b.shape[0]:
        return _result(a.data + b.data, (a, b), lambda g: (g, g.sum(axis=0)))
    raise ShapeError(f"add shape mismatch: {a.shape} + {b.shape}")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"sub shape mismatch: {a.shape} - {b.shape}")
    return _result(a.data - b.data, (a, b), lambda g: (g, -g))


def scale(a, s: float) -> Tensor:
    a = as_tensor(a)
    s = float(s)
    return _result(a.data * s, (a,), lambda g: (g * s,))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"mul shape mismatch: {a.shape} * {b.shape}")
    A, B = a.data, b.data
    return _result(A * B, (a, b), lambda g: (g * B, g * A))


def relu(x) -> Tensor:
    x = as_tensor(x)
    on = x.data > 0
    return _result(np.where(on, x.data, 0.0), (x,), lambda g: (g * on,))


def transpose(x) -> Tensor:
    x = as_tensor(x)
    _need_2d(x, "transpose")
    return _result(x.data.T.copy(), (x,), lambda g: (g.T,))


def total(x) -> Tensor:
    x = as_tensor(x)
    shape = x.shape
    return _result(np.array(x.data.sum()), (x,), lambda g: (np.full(shape, float(g)),))


def mean(x) -> Tensor:
    x = as_tensor(x)
    n = x.data.size
    shape = x.shape
    return _result(np.array(x.data.mean()), (x,), lambda g: (np.full(shape, float(g) / n),))


def mean_rows(x) -> Tensor:
    """Column-wise mean, collapsing an (n, d) tensor to (d,)."""
    x = as_tensor(x)
    _need_2d(x, "mean_rows")
    n = x.shape[0]
    return _result(x.data.mean(axis=0), (x,), lambda g: (np.broadcast_to(g / n, x.shape).copy(),))


def softmax_rows(x, mask=None) -> Tensor:
    """Row-wise softmax, max-shifted. ``mask`` is a boolean column mask;
    masked columns get weight exactly 0 in every row."""
    x = as_tensor(x)
    _need_2d(x, "softmax_rows")
    X = x.data
    if mask is None:
        z = X - X.max(axis=1, keepdims=True)
        e = np.exp(z)
    else:
        keep = np.asarray(mask, dtype=bool)
        if keep.shape != (X.shape[1],):
            raise ShapeError(f"softmax mask shape {keep.shape} does not match columns {X.shape[1]}")
        if not keep.any():
            raise ShapeError("softmax mask hides every column")
        z = X - X[:, keep].max(axis=1, keepdims=True)
        e = np.where(keep, np.exp(np.where(keep, z, 0.0)), 0.0)
    y = e / e.sum(axis=1, keepdims=True)

    def back(g):
        return (y * (g - (g * y).sum(axis=1, keepdims=True)),)

    return _result(y, (x,), back)


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    _need_2d(x, "layer_norm")
    d = x.shape[1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(f"layer_norm params {gain.shape}/{bias.shape} do not fit width {d}")
    X = x.data
    mu = X.mean(axis=1, keepdims=True)
    xc = X - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=1, keepdims=True) + eps)
    xhat = xc * inv
    G = gain.data

    def back(g):
        gx_hat = g * G
        gx = inv * (gx_hat - gx_hat.mean(axis=1, keepdims=True)
                    - xhat * (gx_hat * xhat).mean(axis=1, keepdims=True))
        return gx, (g * xhat).sum(axis=0), g.sum(axis=0)

    return _result(xhat * G + bias.data, (x, gain, bias), back)


def linear(x, W, b=None) -> Tensor:
    out = matmul(x, W)
    return out if b is None else add(out, b)


def concat_rows(parts: Sequence) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    if not parts:
        raise ShapeError("concat_rows of nothing")
    widths = {p.shape[1:] for p in parts}
    if len(widths) != 1:
        raise ShapeError(f"concat_rows width mismatch: {[p.shape for p in parts]}")
    cuts = np.cumsum([p.shape[0] for p in parts])[:-1]
    return _result(np.concatenate([p.data for p in parts], axis=0), parts,
                   lambda g: tuple(np.split(g, cuts, axis=0)))


def concat_cols(parts: Sequence) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    if not parts:
        raise ShapeError("concat_cols of nothing")
    for p in parts:
        _need_2d(p, "concat_cols")
    if len({p.shape[0] for p in parts}) != 1:
        raise ShapeError(f"concat_cols height mismatch: {[p.shape for p in parts]}")
    cuts = np.cumsum([p.shape[1] for p in parts])[:-1]
    return _result(np.concatenate([p.data for p in parts], axis=1), parts,
                   lambda g: tuple(np.split(g, cuts, axis=1)))


def slice_cols(x, start: int, stop: int) -> Tensor:
    x = as_tensor(x)
    _need_2d(x, "slice_cols")
    if not 0 <= start < stop <= x.shape[1]:
        raise ShapeError(f"bad column slice [{start}:{stop}) of {x.shape}")

    def back(g):
        full = np.zeros(x.shape)
        full[:, start:stop] = g
        return (full,)

    return _result(x.data[:, start:stop].copy(), (x,), back)


def take_rows(table, ids) -> Tensor:
    """Embedding lookup; gradients scatter-add into the looked-up rows."""
    table = as_tensor(table)
    _need_2d(table, "take_rows")
    idx = np.asarray(ids, dtype=np.int64)
    if idx.ndim != 1 or idx.size == 0:
        raise ShapeError("take_rows needs a non-empty 1-D index list")
    if idx.min() < 0 or idx.max() >= table.shape[0]:
        raise ShapeError(f"row index out of range for table of {table.shape[0]} rows")

    def back(g):
        full = np.zeros(table.shape)
        np.add.at(full, idx, g)
        return (full,)

    return _result(table.data[idx], (table,), back)


def cross_entropy_rows(logits, targets, weights=None) -> Tensor:
    """Mean negative log-likelihood of ``targets`` over rows with nonzero weight."""
    logits = as_tensor(logits)
    _need_2d(logits, "cross_entropy_rows")
    t = np.asarray(targets, dtype=np.int64)
    n, v = logits.shape
    if t.shape != (n,):
        raise ShapeError(f"targets shape {t.shape} does not match {n} rows")
    if t.min() < 0 or t.max() >= v:
        raise ShapeError("target id outside the vocabulary")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    count = w.sum()
    if count <= 0:
        raise ShapeError("cross_entropy_rows: no rows carry weight")
    X = logits.data
    z = X - X.max(axis=1, keepdims=True)
    logz = np.log(np.exp(z).sum(axis=1))
    nll = logz - z[np.arange(n), t]
    loss = float((w * nll).sum() / count)

    def back(g):
        p = np.exp(z - logz[:, None])
        p[np.arange(n), t] -= 1.0
        return (p * (w / count * float(g))[:, None],)

    return _result(np.array(loss), (logits,), back)


# ------------------------------------------------------------ differentiation


def _topo_order(output: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    state: dict[int, int] = {}  # 1 = on stack, 2 = done
    stack: list[tuple[Tensor, int]] = [(output, 0)]
    while stack:
        node, i = stack.pop()
        key = id(node)
        if i == 0:
            if state.get(key) == 2:
                continue
            if state.get(key) == 1:
                raise RuntimeError("graph cycle detected during backward")
            state[key] = 1
        if i < len(node._parents):
            stack.append((node, i + 1))
            child = node._parents[i]
            if child.requires_grad:
                cstate = state.get(id(child))
                if cstate == 1:
                    raise RuntimeError("graph cycle detected during backward")
                if cstate is None:
                    stack.append((child, 0))
        else:
            state[key] = 2
            order.append(node)
    return order


def grad_of(output: Tensor, leaves: Iterable[Tensor]) -> list[np.ndarray]:
    """Gradient of a scalar ``output`` with respect to each of ``leaves``."""
    if output.data.ndim != 0:
        raise ShapeError(f"backward needs a scalar output, got shape {output.shape}")
    leaves = list(leaves)
    grads: dict[int, np.ndarray] = {}
    if output.requires_grad:
        grads[id(output)] = np.ones(())
        for node in reversed(_topo_order(output)):
            g = grads.get(id(node))
            if g is None or node._backward is None:
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if not parent.requires_grad:
                    continue
                k = id(parent)
                grads[k] = grads[k] + pg if k in grads else np.array(pg, dtype=np.float64)
    return [grads.get(id(t), np.zeros(t.shape)) for t in leaves]


def backward(output: Tensor, params: "ParamSet") -> dict[str, np.ndarray]:
    names = params.trainable_names()
    return dict(zip(names, grad_of(output, (params[n] for n in names))))


# ------------------------------------------------------------------ params


def glorot(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    fan_in, fan_out = (shape[0], shape[1]) if len(shape) == 2 else (shape[0], shape[0])
    a = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=shape)


class ParamSet:
    """Named float64 parameters plus the set of names that are frozen."""

    def __init__(self, arrays: dict[str, np.ndarray] | None = None, frozen: Iterable[str] = ()):
        self._tensors: dict[str, Tensor] = {}
        self.frozen: set[str] = set()
        for name, arr in (arrays or {}).items():
            self[name] = arr
        self.freeze(frozen)

    def __setitem__(self, name: str, value) -> None:
        arr = value.data if isinstance(value, Tensor) else value
        self._tensors[name] = Tensor(arr, requires_grad=name not in self.frozen, name=name)

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __iter__(self):
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def names(self) -> list[str]:
        return list(self._tensors)

    def freeze(self, names: Iterable[str]) -> None:
        names = set(names)
        missing = names - set(self._tensors)
        if missing:
            raise KeyError(f"cannot freeze unknown parameters: {sorted(missing)}")
        self.frozen |= names
        self._sync_flags()

    def set_frozen(self, names: Iterable[str]) -> None:
        self.frozen = set()
        self.freeze(names)

    def _sync_flags(self) -> None:
        for n, t in self._tensors.items():
            t.requires_grad = n not in self.frozen

    def trainable_names(self) -> list[str]:
        return [n for n in self._tensors if n not in self.frozen]

    def arrays(self) -> dict[str, np.ndarray]:
        return {n: t.data for n, t in self._tensors.items()}

    def copy(self) -> "ParamSet":
        return ParamSet({n: t.data.copy() for n, t in self._tensors.items()}, self.frozen)

    def size(self, names: Iterable[str] | None = None) -> int:
        names = self._tensors if names is None else names
        return int(sum(self._tensors[n].data.size for n in names))

    def to_json(self) -> dict:
        return {n: {"shape": list(t.shape), "data": t.data.ravel().tolist()}
                for n, t in self._tensors.items()}

    @classmethod
    def from_json(cls, obj: dict) -> "ParamSet":
        arrays = {}
        for n, entry in obj.items():
            shape = tuple(entry["shape"])
            data = np.asarray(entry["data"], dtype=np.float64)
            if data.size != math.prod(shape):
                raise ShapeError(f"{n}: {data.size} values do not fill shape {shape}")
            arrays[n] = data.reshape(shape)
        return cls(arrays)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path) -> "ParamSet":
        return cls.from_json(json.loads(Path(path).read_text()))


def save_array(path, arr: np.ndarray) -> None:
    arr = np.asarray(arr, dtype=np.float64)
    Path(path).write_text(json.dumps({"shape": list(arr.shape), "data": arr.ravel().tolist()}))


def load_array(path) -> np.ndarray:
    obj = json.loads(Path(path).read_text())
    return np.asarray(obj["data"], dtype=np.float64).reshape(tuple(obj["shape"]))


# ----------------------------------------------------------- gradient check


def finite_diff_check(f: Callable[[ParamSet], Tensor], params: ParamSet, h: float = 1e-5,
                      gradient: dict[str, np.ndarray] | None = None) -> float:
    """Max per-coordinate relative error between central differences and ``gradient``.

    ``gradient`` defaults to :func:`backward` on ``f(params)``; passing a
    tampered one is how the checker itself gets tested.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    if gradient is None:
        gradient = backward(f(params), params)
    worst = 0.0
    for name in params.trainable_names():
        data = params[name].data
        g = gradient[name]
        flat = data.reshape(-1)
        gflat = np.asarray(g).reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = f(params).item()
            flat[i] = orig - h
            down = f(params).item()
            flat[i] = orig
            if not (math.isfinite(up) and math.isfinite(down)):
                raise FloatingPointError(f"non-finite objective while probing {name}[{i}]")
            approx = (up - down) / (2 * h)
            err = abs(approx - gflat[i]) / max(abs(approx), abs(gflat[i]), 1e-8)
            worst = max(worst, err)
    return worst


def attention(q, k, v, mask=None, heads: int = 1) -> tuple[Tensor, list[Tensor]]:
    """Scaled dot-product attention split into ``heads`` column groups.

    Returns the concatenated head outputs and each head's weight matrix.
    ``mask`` hides key rows (e.g. padded pose frames) from every query.
    """
    q, k, v = as_tensor(q), as_tensor(k), as_tensor(v)
    if q.shape[1] != k.shape[1] or k.shape[0] != v.shape[0]:
        raise ShapeError(f"attention shapes do not line up: q{q.shape} k{k.shape} v{v.shape}")
    if k.shape[0] == 0:
        raise ShapeError("attention over zero keys")
    d_a, d_o = q.shape[1], v.shape[1]
    if d_a % heads or d_o % heads:
        raise ShapeError(f"widths {d_a}/{d_o} are not divisible by {heads} heads")
    da, do = d_a // heads, d_o // heads
    outs, weights = [], []
    for h in range(heads):
        qh, kh, vh = (q, k, v) if heads == 1 else (
            slice_cols(q, h * da, (h + 1) * da), slice_cols(k, h * da, (h + 1) * da),
            slice_cols(v, h * do, (h + 1) * do))
        w = softmax_rows(scale(matmul(qh, transpose(kh)), 1.0 / math.sqrt(da)), mask)
        weights.append(w)
        outs.append(matmul(w, vh))
    return (outs[0] if heads == 1 else concat_cols(outs)), weights
