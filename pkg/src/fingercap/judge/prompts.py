"""HandJudge, caption-generation and rephrase prompt templates."""

from __future__ import annotations

import re
from importlib import resources
from pathlib import Path

TEMPLATE_VERSION = "1"
TEMPLATE_NAMES = ("judge", "caption", "rephrase")
_PLACEHOLDER = re.compile(r"\{(reference|prediction|original_description)\}")


def load_template(name: str, role: str) -> str:
    """Raw template text for ``name`` ("judge", "caption", "rephrase") and ``role`` ("system", "user")."""
    if name not in TEMPLATE_NAMES or role not in ("system", "user"):
        raise KeyError(f"no template {name}/{role}")
    return resources.files(__package__).joinpath("templates", f"{name}_{role}.txt").read_text(encoding="utf-8")


def _fill(template: str, values: dict[str, str]) -> str:
    # single pass, so text inside a substituted value is never re-expanded
    return _PLACEHOLDER.sub(lambda m: values[m.group(1)] if m.group(1) in values else m.group(0), template)


def _system(name: str) -> str:
    return load_template(name, "system").strip()


def build_judge_prompt(reference: str, prediction: str) -> tuple[str, str]:
    if not reference.strip() or not prediction.strip():
        raise ValueError("reference and prediction must both be non-empty")
    user = _fill(load_template("judge", "user"), {"reference": reference, "prediction": prediction})
    return _system("judge"), user.rstrip("\n")


def build_caption_prompt(view: str | None = None) -> tuple[str, str]:
    """Zero-shot captioning prompt; ``view`` appends a camera-view hint line."""
    user = load_template("caption", "user").rstrip("\n")
    if view:
        user += f"\n\nCamera view: {view}."
    return _system("caption"), user


def build_rephrase_prompt(original: str) -> tuple[str, str]:
    if not original.strip():
        raise ValueError("original description is empty")
    user = _fill(load_template("rephrase", "user"), {"original_description": original})
    return _system("rephrase"), user.rstrip("\n")


def export_templates(out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name in TEMPLATE_NAMES:
        for role in ("system", "user"):
            path = out / f"{name}_{role}.txt"
            path.write_text(load_template(name, role), encoding="utf-8")
            written.append(path)
    return written
