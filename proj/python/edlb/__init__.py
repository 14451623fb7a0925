"""Self-supervised monocular depth with low-rank adapters."""

from ._edlb import (
    ConfigError,
    ContractError,
    DepthModel,
    DimensionError,
    EvalError,
    LoadError,
    ParseError,
    adapted_linear,
    adapter_delta,
    ate,
    depth_metrics,
    finetune,
    generate_dataset,
    init_adapter,
    param_count,
    photometric_error,
    pretrain,
    reproject,
    scene_spec,
    umeyama,
    warp,
)

__all__ = [
    "ConfigError",
    "ContractError",
    "DepthModel",
    "DimensionError",
    "EvalError",
    "LoadError",
    "ParseError",
    "adapted_linear",
    "adapter_delta",
    "ate",
    "depth_metrics",
    "finetune",
    "generate_dataset",
    "init_adapter",
    "param_count",
    "photometric_error",
    "pretrain",
    "reproject",
    "scene_spec",
    "umeyama",
    "warp",
]
