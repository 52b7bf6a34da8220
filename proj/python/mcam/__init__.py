"""Python bindings for the mcam simulator and processing pipeline."""

import json as _json

from . import _mcam
from ._mcam import (
    ConfigError,
    DomainError,
    Error,
    IoError,
    PipelineError,
    __version__,
    analytic_depth_sweep,
    array_config,
    classify_regime,
    design_report,
    focus_metric,
    frame_bytes,
    max_frame_rate,
    pixel_limited_resolution_um,
    plan_tiled_scan,
    presets,
    read_png,
    select_focus,
    throughput,
    triangulate,
    write_png,
)


def _text(config):
    if config is None:
        return ""
    if isinstance(config, str):
        return config
    return _json.dumps(config)


def validate_config(config=None, **overrides):
    """Validated, canonical run configuration as a dict."""
    return _json.loads(_mcam.validate_config(_text(config), **overrides))


def run(config=None, **overrides):
    """Run a mode, write its outputs and return the summary dict."""
    return _json.loads(_mcam.run(_text(config), **overrides))


def render(config=None, **overrides):
    """Rendered frames of the sub-array mosaic, pixels as float32 arrays."""
    return _mcam.render(_text(config), **overrides)


def stitch(config=None, **overrides):
    """Composite, contrast per bar group and measured resolution."""
    return _mcam.stitch(_text(config), **overrides)


def depth_sweep(config=None, **overrides):
    """Per-plane height estimates, RMSE and the height map when available."""
    return _mcam.depth_sweep(_text(config), **overrides)


__all__ = [name for name in dir() if not name.startswith("_")]
