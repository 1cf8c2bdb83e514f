"""Diffusion-based text speech editing: Python bindings over the C++ core."""

from ._core import (
    ConfigError,
    Error,
    MaskRegion,
    PrerequisiteError,
    RunConfig,
    Utterance,
    compute_mel,
    config_from_json,
    config_hash,
    evaluate,
    edit,
    load_config,
    mcd,
    pretrain_gst,
    resolve_edit,
    sample_mask,
    stoi,
    synth_corpus,
    synthset,
    train,
    vocode,
)

__all__ = [
    "ConfigError",
    "Error",
    "MaskRegion",
    "PrerequisiteError",
    "RunConfig",
    "Utterance",
    "compute_mel",
    "config_from_json",
    "config_hash",
    "edit",
    "evaluate",
    "load_config",
    "mcd",
    "pretrain_gst",
    "resolve_edit",
    "sample_mask",
    "stoi",
    "synth_corpus",
    "synthset",
    "train",
    "vocode",
]
