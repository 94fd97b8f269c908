"""Slow, obviously-correct reference implementations used only by the tests.

None of these import the package code they check. They favour explicit
loops, exhaustive enumeration and exact fractions over speed.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np


# ------------------------------------------------------------ n-gram metrics


def grams(tokens, n):
    out = []
    for i in range(len(tokens) - n + 1):
        out.append(tuple(tokens[i:i + n]))
    return out


def count(items, x):
    c = 0
    for y in items:
        if y == x:
            c += 1
    return c


def bleu4_oracle(hyp, refs):
    if len(hyp) == 0:
        return 0.0
    precisions = []
    for n in range(1, 5):
        hg = grams(hyp, n)
        if not hg:
            return 0.0
        clipped = 0
        for g in set(hg):
            ref_max = max(count(grams(r, n), g) for r in refs)
            clipped += min(count(hg, g), ref_max)
        if clipped == 0:
            return 0.0
        precisions.append(Fraction(clipped, len(hg)))
    c = len(hyp)
    best = None
    for r in refs:
        if best is None or abs(len(r) - c) < abs(best - c) or (abs(len(r) - c) == abs(best - c) and len(r) < best):
            best = len(r)
    bp = 1.0 if c > best else math.exp(1 - best / c)
    prod = 1.0
    for p in precisions:
        prod *= float(p)
    return 100.0 * bp * prod ** 0.25


def lcs_bruteforce(a, b):
    """Longest common subsequence by trying every subsequence of the shorter list."""
    short, long_ = (a, b) if len(a) <= len(b) else (b, a)
    for size in range(len(short), 0, -1):
        for idx in itertools.combinations(range(len(short)), size):
            sub = [short[i] for i in idx]
            it = iter(long_)
            if all(any(x == y for y in it) for x in sub):
                return size
    return 0


def rouge_l_oracle(hyp, refs, beta=1.2):
    best = 0.0
    for r in refs:
        if not hyp or not r:
            continue
        lcs = lcs_bruteforce(hyp, r)
        if lcs == 0:
            continue
        p = lcs / len(hyp)
        rec = lcs / len(r)
        f = ((1 + beta * beta) * p * rec) / (rec + beta * beta * p)
        best = max(best, f)
    return best * 100.0


def meteor_oracle(hyp, refs):
    scores = []
    for ref in refs:
        taken = set()
        align = []
        for i in range(len(hyp)):
            for j in range(len(ref)):
                if j not in taken and hyp[i] == ref[j]:
                    taken.add(j)
                    align.append((i, j))
                    break
        m = len(align)
        if m == 0:
            scores.append(0.0)
            continue
        chunks = 0
        for k in range(m):
            if k == 0 or align[k][0] != align[k - 1][0] + 1 or align[k][1] != align[k - 1][1] + 1:
                chunks += 1
        P = m / len(hyp)
        R = m / len(ref)
        fmean = (10 * P * R) / (R + 9 * P)
        pen = 0.5 * (chunks / m) ** 3
        scores.append(fmean * (1 - pen) * 100.0)
    return max(scores)


def cider_oracle(corpus, scale=1000.0):
    """corpus: list of (hyp, refs). Returns per-pair scores (x10 x100 by default)."""
    N = len(corpus)
    scores = []
    for hyp, refs in corpus:
        total = 0.0
        for n in range(1, 5):
            def df(g):
                return sum(1 for _, rs in corpus if any(g in grams(r, n) for r in rs))

            def vec(tokens):
                v = {}
                for g in set(grams(tokens, n)):
                    v[g] = count(grams(tokens, n), g) * (math.log(N) - math.log(max(1, df(g))))
                return v

            hv = vec(hyp)
            sims = []
            for r in refs:
                rv = vec(r)
                dot = 0.0
                for g in hv:
                    if g in rv:
                        dot += hv[g] * rv[g]
                nh = math.sqrt(sum(x * x for x in hv.values()))
                nr = math.sqrt(sum(x * x for x in rv.values()))
                sims.append(dot / (nh * nr) if nh > 0 and nr > 0 else 0.0)
            total += sum(sims) / len(sims)
        scores.append(scale * total / 4)
    return scores


# --------------------------------------------------------------- attention


def attention_loops(q, k, v, mask=None):
    """Scaled dot-product attention with explicit triple loops."""
    nq, d = q.shape
    nk = k.shape[0]
    out = np.zeros((nq, v.shape[1]))
    for i in range(nq):
        logits = []
        for j in range(nk):
            if mask is not None and not mask[j]:
                logits.append(None)
                continue
            s = 0.0
            for c in range(d):
                s += q[i, c] * k[j, c]
            logits.append(s / math.sqrt(d))
        top = max(x for x in logits if x is not None)
        w = [0.0 if x is None else math.exp(x - top) for x in logits]
        z = sum(w)
        for j in range(nk):
            for c in range(v.shape[1]):
                out[i, c] += w[j] / z * v[j, c]
    return out


def cross_attention_loops(F_v, F_p, W_Q, W_K, W_V, mask=None):
    return attention_loops(F_v @ W_Q, F_p @ W_K, F_p @ W_V, mask)


# ------------------------------------------------------------------- graph


def gcn_layer_loops(H, A, W, b):
    """relu(D^-1/2 (A+I) D^-1/2 H W + b) for one frame, joint by joint."""
    J = A.shape[0]
    deg = [1 + sum(A[i, j] for j in range(J)) for i in range(J)]
    HW = H @ W
    out = np.zeros((J, W.shape[1]))
    for i in range(J):
        for j in range(J):
            if i == j or A[i, j]:
                out[i] += HW[j] / math.sqrt(deg[i] * deg[j])
        out[i] = np.maximum(out[i] + b, 0.0)
    return out


# ---------------------------------------------------------------- keyframes


def keyframes_bruteforce(T, fps, sample_fps, max_units):
    """Frame nearest each multiple of 1/sample_fps seconds (halves round up), exact arithmetic."""
    step = Fraction(fps) / Fraction(sample_fps)
    out = []
    i = 0
    while len(out) < max_units:
        x = i * step
        t = int(x) + (1 if x - int(x) >= Fraction(1, 2) else 0)
        if t >= T:
            break
        out.append(t)
        i += 1
    return out


# ------------------------------------------------------------------ losses


def cross_entropy_scalar(logits, targets, pad_id=0):
    total, n = 0.0, 0
    for row, t in zip(logits, targets):
        if t == pad_id:
            continue
        m = max(row)
        z = sum(math.exp(x - m) for x in row)
        total += -(row[t] - m - math.log(z))
        n += 1
    return total / n


# -------------------------------------------------------- temporal block


def layer_norm_loops(x, gain, bias, eps=1e-5):
    out = np.zeros_like(x)
    for i in range(x.shape[0]):
        mu = sum(x[i]) / x.shape[1]
        var = sum((v - mu) ** 2 for v in x[i]) / x.shape[1]
        for c in range(x.shape[1]):
            out[i, c] = (x[i, c] - mu) / math.sqrt(var + eps) * gain[c] + bias[c]
    return out


def matmul_loops(a, b):
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            s = 0.0
            for k in range(a.shape[1]):
                s += a[i, k] * b[k, j]
            out[i, j] = s
    return out


def temporal_block_loops(spatial, p, mask=None):
    """One post-norm transformer block; ``p`` maps short names to arrays."""
    K, d = spatial.shape
    x = spatial.copy()
    for t in range(K):
        for c in range(d):
            angle = t / 10000.0 ** (2 * (c // 2) / d)
            x[t, c] += math.sin(angle) if c % 2 == 0 else math.cos(angle)
    mixed = attention_loops(matmul_loops(x, p["W_q"]), matmul_loops(x, p["W_k"]), matmul_loops(x, p["W_v"]), mask)
    h = layer_norm_loops(x + matmul_loops(mixed, p["W_o"]), p["ln1.gain"], p["ln1.bias"])
    f = matmul_loops(h, p["ff0.W"]) + p["ff0.b"]
    f = np.maximum(f, 0.0)
    f = matmul_loops(f, p["ff1.W"]) + p["ff1.b"]
    return layer_norm_loops(h + f, p["ln2.gain"], p["ln2.bias"])
