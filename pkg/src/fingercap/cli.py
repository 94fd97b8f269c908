"""``fingercap`` command line.

Exit status is 0 on success, 1 for usage errors (bad flags, unknown
subcommand) and 2 when the command itself fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bench, judge, manifest, metrics, numerics, plotting
from .config import ConfigError, GlobalConfig, load_config
from .figop import SamplingConfig, segment, unit_index
from .fusion import count_params, encode_video, token_budget
from .model import GRADCHECK_DIMS, GRADCHECK_H, GRADCHECK_MODULES, gradcheck_case, init_params
from .trainer import Sample, Vocab, run_stages, write_report_lines

log = logging.getLogger("fingercap")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _dump(obj, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _config(args) -> GlobalConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else GlobalConfig()
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _figure_path(out, suffix: str) -> Path:
    out = Path(out)
    return out.with_name(out.stem + suffix + ".png")


def _resolve_pose(rec: manifest.CaptionRecord, manifest_path) -> Path:
    if not rec.pose_path:
        raise ValueError(f"record {rec.video_id!r} has no pose_path")
    p = Path(rec.pose_path)
    return p if p.is_absolute() else Path(manifest_path).parent / p


def _read_predictions(path) -> dict[str, str]:
    preds = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            if not isinstance(obj, dict) or set(obj) != {"video_id", "prediction"}:
                raise ValueError(f"{path} line {lineno}: expected {{video_id, prediction}}")
            preds[obj["video_id"]] = obj["prediction"]
    return preds


# ----------------------------------------------------------- subcommands


def cmd_stats(args) -> int:
    stats = manifest.compute_stats(manifest.load_manifest(args.manifest))
    print(stats.format_table())
    print(json.dumps(stats.to_json(), sort_keys=True))
    if args.out:
        _dump(stats.to_json(), args.out)
        plotting.plot_durations(stats.to_json()["duration_hist_seconds"], _figure_path(args.out, "_durations"))
    return 0


def cmd_split(args) -> int:
    try:
        ratios = tuple(float(x) for x in args.ratios.split(","))
    except ValueError:
        raise UsageError(f"--ratios must be comma-separated numbers, got {args.ratios!r}") from None
    result = manifest.split(manifest.load_manifest(args.manifest), args.seed, ratios)
    manifest.save_manifest(result, args.out)
    for name in manifest.SPLITS[:3]:
        print(f"{name:<6}{len(result.by_split(name)):>8}")
    return 0


def cmd_encode(args) -> int:
    track = manifest.load_pose_track(args.pose)
    units = segment(track, args.fps, SamplingConfig(args.sample_fps, args.K, args.max_units))
    frames = np.concatenate([u.pose_window for u in units], axis=0)
    manifest.save_pose_track(frames, args.out)
    _dump({"fps": args.fps, "sample_fps": args.sample_fps, "K": args.K, "units": unit_index(units)},
          Path(args.out).with_suffix(".units.json"))
    print(f"{len(units)} units, {frames.shape[0]} pose frames -> {args.out}")
    return 0


def cmd_encode_video(args) -> int:
    cfg = _config(args)
    rec = manifest.load_manifest(args.manifest).get(args.video)
    track = manifest.load_pose_track(_resolve_pose(rec, args.manifest))
    units = segment(track, float(rec.fps), cfg.sampling)
    params = init_params(cfg.dims, seed=cfg.seed) if args.params is None else numerics.ParamSet.load(args.params)
    tokens = encode_video(units, rec.video_id, params, cfg.dims, cfg.seed)
    numerics.save_array(args.out, tokens.data)
    print(f"{rec.video_id}: {len(units)} units -> {tokens.shape[0]} x {tokens.shape[1]} tokens")
    return 0


def cmd_grad_check(args) -> int:
    f, params = gradcheck_case(args.module, GRADCHECK_DIMS, args.seed)
    err = numerics.finite_diff_check(f, params, h=args.h)
    print(f"{args.module}: max relative error {err:.3e} over {params.size(params.trainable_names())} coordinates")
    return 0 if err <= args.tol else 2


def _training_samples(records, manifest_path, vocab: Vocab, cfg: GlobalConfig) -> list[Sample]:
    samples = []
    for rec in records:
        track = manifest.load_pose_track(_resolve_pose(rec, manifest_path))
        samples.append(Sample(rec.video_id, segment(track, float(rec.fps), cfg.sampling), vocab.encode(rec.caption)))
    return samples


def cmd_train_toy(args) -> int:
    cfg = _config(args)
    m = manifest.load_manifest(args.manifest)
    records = m.by_split("train") or list(m)
    vocab = Vocab.build(r.caption for r in records)
    samples = _training_samples(records, args.manifest, vocab, cfg)
    params = init_params(cfg.dims, len(vocab), cfg.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params, report = run_stages(samples, params, cfg.dims, cfg.seed, cfg.train, out, pad_id=vocab.pad_id)
    write_report_lines(report, out / "report.jsonl")
    _dump({"tokens": vocab.tokens}, out / "vocab.json")
    _dump(count_params(params).to_json(), out / "params.json")
    plotting.plot_losses(report.steps, out / "loss.png")
    for row in report.epochs:
        print(f"stage {row['stage']} epoch {row['epoch']}: mean loss {row['mean_loss']:.6f}")
    return 0


def cmd_eval_metrics(args) -> int:
    cfg = _config(args)
    report = metrics.evaluate_corpus(manifest.load_manifest(args.manifest), _read_predictions(args.pred),
                                     split=args.split, smoothing=cfg.metrics.bleu_smoothing,
                                     cider_scale=cfg.metrics.cider_scale)
    print(report.format_table())
    print(json.dumps(report.to_json(), sort_keys=True))
    if args.out:
        _dump(report.to_json(), args.out)
    return 0


def cmd_judge(args) -> int:
    cfg = _config(args)
    if args.transport == "http":
        if not os.environ.get(judge.API_KEY_ENV):
            raise UsageError(f"--transport http needs {judge.API_KEY_ENV} in the environment")
        client = judge.http_client(cfg.judge)
    else:
        client = judge.client.mock_client(args.cache or cfg.paths.get("judge_cache"))
    preds = _read_predictions(args.pred)
    items = []
    for rec in manifest.load_manifest(args.manifest):
        if args.split is not None and rec.split != args.split:
            continue
        if rec.video_id not in preds:
            raise KeyError(f"missing prediction for video_id {rec.video_id!r}")
        items.append((rec.domain, rec.caption, preds[rec.video_id]))
    if not items:
        raise ValueError(f"no records in split {args.split!r}")
    with client:
        scored = judge.judge_records(items, cfg.judge, client, strict=args.strict)
    report = judge.aggregate(scored)
    print(report.format_table())
    _dump({"aggregate": report.to_json(), "items": [{"subset": s, **j.to_json()} for s, j in scored]}, args.out)
    return 0


def _score_file(path) -> dict[str, float]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict) or not all(isinstance(v, (int, float)) for v in data.values()):
        raise ValueError(f"{path}: expected an object mapping model name to score")
    return {k: float(v) for k, v in data.items()}


def cmd_judge_agreement(args) -> int:
    result = judge.agreement(_score_file(args.llm), _score_file(args.human))
    print(judge.scoring.format_agreement(result))
    if args.out:
        _dump(result, args.out)
    return 0


def _bench_setup(args):
    cfg = _config(args)
    bcfg = cfg.bench
    if args.n_train is not None or args.n_test is not None:
        bcfg = replace(bcfg, n_train=args.n_train or bcfg.n_train, n_test=args.n_test or bcfg.n_test)
    return cfg, bcfg


def cmd_bench_sparsity(args) -> int:
    cfg, bcfg = _bench_setup(args)
    report = bench.bench_temporal_sparsity(bcfg, init_params(cfg.dims, seed=cfg.seed), cfg.dims, cfg.seed)
    print(bench.format_rows([report], ("K", "acc_visual_only", "acc_figop", "gap")))
    _dump(report, args.out)
    plotting.plot_sparsity(report, _figure_path(args.out, ""))
    return 0


def cmd_ablate(args) -> int:
    cfg, bcfg = _bench_setup(args)
    try:
        ks = [int(k) for k in args.K.split(",")]
    except ValueError:
        raise UsageError(f"-K must be comma-separated integers, got {args.K!r}") from None
    params = init_params(cfg.dims, seed=cfg.seed)  # no parameter depends on K
    rows = bench.ablate_pose_length(ks, bcfg, lambda K: params, cfg.dims, cfg.seed)
    print(bench.format_rows(rows, ("K", "acc_visual_only", "acc_figop", "gap", "figop_llm_tokens",
                                   "dense_rgb_equivalent_tokens")))
    _dump({"rows": rows, "seed": cfg.seed}, args.out)
    plotting.plot_ablation(rows, _figure_path(args.out, ""))
    return 0


def cmd_budget(args) -> int:
    cfg = _config(args)
    print(json.dumps(token_budget(cfg.sampling, cfg.dims.N), sort_keys=True))
    return 0


def cmd_prompts_export(args) -> int:
    for path in judge.export_templates(args.out):
        print(path)
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fingercap", description="Fine-grained hand-motion captioning toolkit.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    def add(name, fn, help_text, config=False):
        sp = sub.add_parser(name, help=help_text, description=help_text)
        sp.set_defaults(fn=fn)
        if config:
            sp.add_argument("--config", help="JSON config file (default: desk profile)")
            sp.add_argument("--seed", type=int, help="override the config seed")
        return sp

    sp = add("stats", cmd_stats, "dataset statistics for a manifest")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out", help="also write JSON here, plus a duration histogram PNG")

    sp = add("split", cmd_split, "assign train/val/test splits")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--ratios", default="0.8,0.1,0.1")
    sp.add_argument("--out", required=True)

    sp = add("encode", cmd_encode, "cut a pose track into keyframe units")
    sp.add_argument("--pose", required=True)
    sp.add_argument("--fps", type=float, required=True)
    sp.add_argument("--sample-fps", type=float, default=2.0)
    sp.add_argument("-K", type=int, default=8)
    sp.add_argument("--max-units", type=int, default=15)
    sp.add_argument("--out", required=True)

    sp = add("encode-video", cmd_encode_video, "language-model tokens for one video", config=True)
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--video", required=True)
    sp.add_argument("--params", help="parameter checkpoint (default: seeded initialisation)")
    sp.add_argument("--out", required=True)

    sp = add("grad-check", cmd_grad_check, "finite-difference check of the backward pass")
    sp.add_argument("--module", choices=GRADCHECK_MODULES, default="full")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--h", type=float, default=GRADCHECK_H)
    sp.add_argument("--tol", type=float, default=1e-5)

    sp = add("train-toy", cmd_train_toy, "two-stage training of the toy captioner", config=True)
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out", required=True)

    sp = add("eval-metrics", cmd_eval_metrics, "BLEU-4, ROUGE-L, METEOR and CIDEr", config=True)
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--pred", required=True)
    sp.add_argument("--split", default="test")
    sp.add_argument("--out")

    sp = add("judge", cmd_judge, "rubric scores from an LLM judge", config=True)
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--pred", required=True)
    sp.add_argument("--split", default="test")
    sp.add_argument("--transport", choices=("mock", "http"), default="mock")
    sp.add_argument("--cache", help="directory of canned mock responses")
    sp.add_argument("--strict", action="store_true", help="reject fenced or wrapped JSON")
    sp.add_argument("--out", required=True)

    sp = add("judge-agreement", cmd_judge_agreement, "compare judge and human mean scores")
    sp.add_argument("--llm", required=True)
    sp.add_argument("--human", required=True)
    sp.add_argument("--out")

    for name, fn, text in (("bench-sparsity", cmd_bench_sparsity, "keyframe-identical probe benchmark"),
                           ("ablate", cmd_ablate, "benchmark across pose-window lengths")):
        sp = add(name, fn, text, config=True)
        if name == "ablate":
            sp.add_argument("-K", default="4,8,16", help="comma-separated window lengths")
        sp.add_argument("--n-train", type=int, help="training pairs per class")
        sp.add_argument("--n-test", type=int, help="held-out pairs per class")
        sp.add_argument("--out", required=True)

    add("budget", cmd_budget, "language-model token budget for the configured sampling", config=True)

    sp = add("prompts", None, "prompt template utilities")
    psub = sp.add_subparsers(dest="prompts_command", metavar="ACTION", parser_class=_Parser)
    ep = psub.add_parser("export", help="write the prompt templates verbatim")
    ep.set_defaults(fn=cmd_prompts_export)
    ep.add_argument("--out", required=True)
    return p


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(stream=sys.stderr, level=logging.DEBUG if verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s", force=True)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "fn", None) is None:
            raise UsageError(parser.format_usage().strip())
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    _setup_logging(args.verbose)
    try:
        return args.fn(args)
    except UsageError as exc:
        print(f"fingercap: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, manifest.ManifestError, manifest.PoseFormatError, judge.JudgeError,
            judge.JudgeParseError, numerics.ShapeError, ValueError, KeyError, OSError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
