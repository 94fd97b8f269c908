import numpy as np
import pytest

from fingercap import bench
from fingercap.bench import BenchConfig, SyntheticSpec
from fingercap.config import ModelDims
from fingercap.figop import SamplingConfig, keyframe_indices
from fingercap.model import init_params

SMALL = ModelDims(N=4, d_v=16, d_a=8, d_m=8, d_p=8, d_hidden=8, d_ff=8, d_llm=8)


def small_cfg(**kw):
    return BenchConfig(n_train=kw.pop("n_train", 10), n_test=kw.pop("n_test", 10), **kw)


def test_keyframe_identical_before_noise():
    spec = SyntheticSpec()
    kf = keyframe_indices(spec.num_frames, spec.fps, SamplingConfig(spec.sample_fps, 8, 100))
    for i in range(0, 10, 2):
        pairs = bench.gen_synthetic_tracks(5, spec, noise=False)
        osc, static = pairs[i][1], pairs[i + 1][1]
        assert pairs[i][0] == bench.OSCILLATING and pairs[i + 1][0] == bench.STATIC
        assert np.max(np.abs(osc[kf] - static[kf])) <= 1e-12
        assert np.max(np.abs(osc - static)) > 0.05


def test_amplitude_zero_gives_identical_classes():
    tracks = bench.gen_synthetic_tracks(3, SyntheticSpec(amplitude=0.0))
    for i in range(0, 6, 2):
        assert np.array_equal(tracks[i][1], tracks[i + 1][1])


def test_generation_is_deterministic_and_offset_disjoint():
    a = bench.gen_synthetic_tracks(3, SyntheticSpec())
    b = bench.gen_synthetic_tracks(3, SyntheticSpec())
    assert all(np.array_equal(x[1], y[1]) for x, y in zip(a, b))
    c = bench.gen_synthetic_tracks(3, SyntheticSpec(), offset=3)
    assert not any(np.array_equal(x[1], y[1]) for x, y in zip(a, c))


def test_bad_frequency_is_rejected():
    with pytest.raises(ValueError, match="does not vanish"):
        bench.gen_synthetic_tracks(1, SyntheticSpec(frequency=1.5))


def test_tracks_are_valid_pose_arrays():
    from fingercap.manifest import validate_pose
    for _, t in bench.gen_synthetic_tracks(2, SyntheticSpec()):
        validate_pose(t)


def test_render_keyframe_is_fixed_map():
    pose = bench.template_pose()
    a = bench.render_keyframe(pose, 4, 8, 0)
    assert a.shape == (4, 8) and np.array_equal(a, bench.render_keyframe(pose, 4, 8, 0))
    assert not np.array_equal(a, bench.render_keyframe(pose, 4, 8, 1))


def test_small_benchmark_report_shape():
    rep = bench.bench_temporal_sparsity(small_cfg(), init_params(SMALL, seed=0), SMALL, seed=0)
    assert rep["acc_visual_only"] == 0.5  # each test pair shares its keyframes
    assert set(rep) >= {"K", "acc_visual_only", "acc_figop", "gap", "n_train", "n_test", "seed"}
    assert rep["gap"] == rep["acc_figop"] - rep["acc_visual_only"]


def test_amplitude_zero_puts_both_probes_at_chance():
    cfg = small_cfg(synthetic=SyntheticSpec(amplitude=0.0))
    rep = bench.bench_temporal_sparsity(cfg, init_params(SMALL, seed=0), SMALL, seed=0)
    assert rep["acc_visual_only"] == 0.5 and rep["acc_figop"] == 0.5


def test_too_few_samples():
    with pytest.raises(ValueError):
        bench.bench_temporal_sparsity(small_cfg(n_train=5), init_params(SMALL), SMALL, 0)


def test_ablation_rows_and_determinism():
    params = init_params(SMALL, seed=1)
    cfg = small_cfg()
    rows = bench.ablate_pose_length([1, 4], cfg, lambda K: params, SMALL, seed=1)
    assert [r["K"] for r in rows] == [1, 4]
    assert rows[1]["ratio"] == 4 and rows[0]["figop_llm_tokens"] == rows[1]["figop_llm_tokens"]
    assert rows == bench.ablate_pose_length([1, 4], cfg, lambda K: params, SMALL, seed=1)
    with pytest.raises(ValueError):
        bench.ablate_pose_length([0], cfg, lambda K: params, SMALL, seed=1)
    text = bench.format_rows(rows, ("K", "gap"))
    assert len(text.splitlines()) == 4
