"""Semantic Gaussian-splatting SLAM on synthetic and TUM-style RGB-D sequences."""

from __future__ import annotations

from . import _core
from ._core import (
    ConfigError,
    InvalidArgument,
    InvalidState,
    LoadError,
    UndefinedMetric,
    ate_rmse,
    cluster_masks,
    default_config,
    psnr,
    seg_l1,
    ssim,
)

__all__ = [
    "ConfigError",
    "InvalidArgument",
    "InvalidState",
    "LoadError",
    "UndefinedMetric",
    "ate_rmse",
    "cluster_masks",
    "default_config",
    "evaluate",
    "generate",
    "psnr",
    "run",
    "seg_l1",
    "ssim",
]


def _overrides(values):
    out = {}
    for key, value in (values or {}).items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        out[key] = str(value)
    return out


def generate(out, **overrides):
    """Write a synthetic bundle. Keyword names use `section__key`, e.g. synth__seed=7."""
    return _core.generate(str(out), _overrides(_dotted(overrides)))


def run(bundle, out, renders=True, **overrides):
    """Run SLAM over `bundle`, write `out` and return the metrics dict."""
    return _core.run(str(bundle), str(out), _overrides(_dotted(overrides)), renders)


def evaluate(bundle, result):
    """Score a result directory against its bundle."""
    return _core.evaluate(str(bundle), str(result))


def _dotted(kwargs):
    return {k.replace("__", ".", 1): v for k, v in kwargs.items()}
