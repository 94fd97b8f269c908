"""Report figures written to PNG next to the JSON output. Headless (Agg) only."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.2),
    "figure.dpi": 120,
    "savefig.bbox": "tight",
    "font.family": "serif",
    "axes.spines.top": False,
    "axes.spines.right": False,
    # fixed metadata keeps repeated runs byte-identical
    "svg.hashsalt": "fingercap",
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)
    return path


def plot_sparsity(report: dict, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        names = ["visual only", "fused"]
        vals = [report["acc_visual_only"], report["acc_figop"]]
        ax.bar(names, vals, color=["0.6", "C0"], width=0.5)
        ax.axhspan(0.35, 0.65, color="0.9", zorder=0, label="chance band")
        ax.set_ylim(0, 1.05)
        ax.set_ylabel("held-out accuracy")
        ax.set_title(f"keyframe-identical benchmark (K={report['K']})")
        for x, v in enumerate(vals):
            ax.text(x, v + 0.02, f"{v:.2f}", ha="center")
        ax.legend(loc="upper left", frameon=False)
        return _save(fig, path)


def plot_ablation(rows: list[dict], path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ks = [r["K"] for r in rows]
        ax.plot(ks, [r["acc_figop"] for r in rows], "o-", label="fused")
        ax.plot(ks, [r["acc_visual_only"] for r in rows], "s--", color="0.5", label="visual only")
        ax.set_xscale("log", base=2)
        ax.set_xticks(ks, [str(k) for k in ks])
        ax.set_ylim(0, 1.05)
        ax.set_xlabel("pose frames per unit (K)")
        ax.set_ylabel("held-out accuracy")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_durations(histogram: dict[str, int], path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        labels = list(histogram)
        ax.bar(range(len(labels)), [histogram[k] for k in labels], color="C0")
        ax.set_xticks(range(len(labels)), labels, rotation=30, ha="right")
        ax.set_xlabel("duration (s)")
        ax.set_ylabel("videos")
        return _save(fig, path)


def plot_losses(steps: list[dict], path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for stage, color in (("one", "C0"), ("two", "C1")):
            pts = [(s["step"], s["loss"]) for s in steps if s["stage"] == stage]
            if pts:
                ax.plot(*zip(*pts), color=color, label=f"stage {stage}")
        ax.set_xlabel("step")
        ax.set_ylabel("next-token loss")
        ax.legend(frameon=False)
        return _save(fig, path)
