import math
import random

import numpy as np
import pytest

from fingercap.figop import SamplingConfig, keyframe_indices, pad_window, padded_window, segment, unit_index

from oracles import keyframes_bruteforce


def track(T, seed=0):
    return np.random.default_rng(seed).random((T, 42, 3))


def test_sixty_frames_at_two_fps():
    x = track(60)
    units = segment(x, 30, SamplingConfig(2, 8, 15))
    assert [u.keyframe_index for u in units] == [0, 15, 30, 45]
    for u in units:
        assert np.array_equal(u.pose_window, x[u.keyframe_index:u.keyframe_index + 8])
        assert not u.padded


def test_long_track_caps_at_fifteen_units():
    units = segment(track(600), 30, SamplingConfig(2, 8, 15))
    assert [u.keyframe_index for u in units] == list(range(0, 225, 15))


def test_short_track_pads():
    (u,) = segment(track(5), 30, SamplingConfig(2, 8, 15))
    assert (u.keyframe_index, u.K_eff, u.padded) == (0, 5, True)
    assert unit_index([u]) == [{"keyframe_index": 0, "K_eff": 5, "padded": True}]


def test_segment_errors():
    with pytest.raises(ValueError):
        segment(np.zeros((0, 42, 3)), 30)
    with pytest.raises(ValueError):
        segment(track(10), 1.0, SamplingConfig(2, 8, 15))
    with pytest.raises(ValueError):
        SamplingConfig(2, 0, 15)


def cases(n=200):
    rnd = random.Random(1234)
    for _ in range(n):
        fps = rnd.choice([24, 25, 29.97, 30, 50, 59.94, 60, rnd.randint(2, 120)])
        sample_fps = rnd.choice([1, 2, 2.5, 3, 4])
        sample_fps = min(sample_fps, fps)
        yield rnd.randint(1, 400), fps, sample_fps, rnd.randint(1, 16), rnd.randint(1, 20)


@pytest.mark.parametrize("T, fps, sample_fps, K, max_units", list(cases()))
def test_covered_indices_match_bruteforce(T, fps, sample_fps, K, max_units):
    cfg = SamplingConfig(sample_fps, K, max_units)
    units = segment(np.zeros((T, 42, 3)), fps, cfg)
    want_keys = keyframes_bruteforce(T, fps, sample_fps, max_units)
    assert [u.keyframe_index for u in units] == want_keys
    got = [(u.keyframe_index + j) for u in units for j in range(u.K_eff)]
    want = [t + j for t in want_keys for j in range(K) if t + j < T]
    assert got == want
    # strictly increasing keyframes, and no frame sits in more windows than K allows
    assert all(a < b for a, b in zip(want_keys, want_keys[1:]))
    if want_keys:
        stride = math.floor(fps / sample_fps)
        counts = np.bincount(got, minlength=T)
        assert counts.max() <= math.ceil(K / stride)


def test_pad_window_rules():
    w = track(3)
    out = pad_window(w, 8)
    assert out.shape == (8, 42, 3)
    assert np.array_equal(out[:3], w)
    for r in range(3, 8):
        assert np.array_equal(out[r, :, :2], w[2, :, :2])
        assert not out[r, :, 2].any()
    assert np.array_equal(pad_window(track(8), 8), track(8))
    with pytest.raises(ValueError):
        pad_window(np.zeros((0, 42, 3)), 4)
    with pytest.raises(ValueError):
        pad_window(track(9), 8)


def test_padded_window_mask():
    (u,) = segment(track(3), 30, SamplingConfig(2, 8, 15))
    w, mask = padded_window(u)
    assert w.shape[0] == 8 and mask.tolist() == [True] * 3 + [False] * 5
