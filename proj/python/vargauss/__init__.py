"""Gaussian variational ground states and dynamics for polaron and spin-boson models."""

import json

from ._core import (
    VargaussError,
    build_id,
    kondo_cutoff,
    polaron_ed,
    polaron_ground,
    spin_boson_ground,
)
from ._core import run as _run

__all__ = [
    "VargaussError",
    "build_id",
    "kondo_cutoff",
    "polaron_ed",
    "polaron_ground",
    "run",
    "spin_boson_ground",
]


def run(task, config, overrides=()):
    """Run a task from YAML text. Returns (exit_code, output_dir, result record as a dict)."""
    code, out_dir, record = _run(task, config, list(overrides))
    return code, out_dir, json.loads(record)
