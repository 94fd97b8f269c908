"""Keyframe-plus-pose-window captioning toolkit for fine-grained hand motion."""

from .config import GlobalConfig, ModelDims, load_config, save_config
from .figop import FiGOPUnit, SamplingConfig, segment
from .fusion import encode_video, fuse, token_budget
from .manifest import CaptionRecord, Manifest, load_manifest, load_pose_track, save_manifest, save_pose_track
from .model import init_params
from .numerics import ParamSet, Tensor

__version__ = "0.1.0"

__all__ = [
    "CaptionRecord", "FiGOPUnit", "GlobalConfig", "Manifest", "ModelDims", "ParamSet", "SamplingConfig",
    "Tensor", "encode_video", "fuse", "init_params", "load_config", "load_manifest", "load_pose_track",
    "save_config", "save_manifest", "save_pose_track", "segment", "token_budget",
]
