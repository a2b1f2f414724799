"""Python bindings for the rwacert C++ library."""

import json

from . import _core
from ._core import (
    ClassifierBundle,
    Error,
    MlpModel,
    generate_series,
    perturb,
    snr_db,
    verify_local_robustness,
    verify_query,
    weighted_sum,
    window_means,
)

__all__ = [
    "ClassifierBundle",
    "Error",
    "MlpModel",
    "cli",
    "generate_series",
    "perturb",
    "run_pipeline",
    "snr_db",
    "verify_local_robustness",
    "verify_query",
    "weighted_sum",
    "window_means",
]


def run_pipeline(omega, friction, config=None):
    """Pipeline summary (intervals, deltas, hist_c, hist_d) as a dict."""
    text = _core.run_pipeline(list(omega), list(friction), json.dumps(config) if config else "")
    return json.loads(text)


def cli(*args):
    """Run a command in-process. Returns (exit_code, stdout, stderr)."""
    return _core.cli([str(a) for a in args])
