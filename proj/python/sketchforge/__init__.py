"""Sketch-conditioned voxel radiance field generation."""

import json
import os

from ._core import (
    CameraPose,
    ConfigError,
    InputError,
    LoadError,
    NoiseSchedule,
    ProtocolError,
    TransportError,
    VoxelGrid,
    __version__,
    load_checkpoint,
    make_default_grid,
    make_toy_scene,
    orbit_pose,
    psnr,
    render,
    save_checkpoint,
)
from . import _core

__all__ = [
    "CameraPose",
    "ConfigError",
    "InputError",
    "LoadError",
    "NoiseSchedule",
    "ProtocolError",
    "TransportError",
    "VoxelGrid",
    "__version__",
    "decode",
    "encode",
    "eval_sketch",
    "generate",
    "load_checkpoint",
    "make_default_grid",
    "make_toy_scene",
    "orbit_pose",
    "psnr",
    "render",
    "save_checkpoint",
    "turntable",
]


def _overrides(settings):
    return [f"{k}={str(v).lower() if isinstance(v, bool) else v}" for k, v in (settings or {}).items()]


def _path(p):
    return None if p is None else os.fspath(p)


def encode(fields, arrays):
    """Wire body from a JSON-able dict and an ordered mapping of name -> float32 array."""
    return _core._encode(json.dumps(fields), list(arrays.items()))


def decode(body):
    """Inverse of encode: returns (fields, {name: float32 array})."""
    fields, arrays = _core._decode(body)
    return json.loads(fields), dict(arrays)


def generate(out, sketch=None, prompt=None, iterations=None, seed=None, config=None, settings=None):
    """Train a field and write the run directory; `settings` maps config keys to values."""
    _core._generate(_path(out), _path(sketch), prompt, iterations, seed, _path(config), _overrides(settings))


def turntable(checkpoint, out, frames=8, elevation_deg=None, azimuth_offset_deg=0.0, config=None, settings=None):
    """Render frame_%04d.png / depth_%04d.png around a checkpoint; returns the written paths."""
    return _core._turntable(
        _path(checkpoint), _path(out), frames, elevation_deg, azimuth_offset_deg, _path(config), _overrides(settings)
    )


def eval_sketch(checkpoint, sketch, views=8, config=None, settings=None):
    """Sketch-loss report over `views` turntable poses."""
    return json.loads(_core._eval_sketch(_path(checkpoint), _path(sketch), views, _path(config), _overrides(settings)))
