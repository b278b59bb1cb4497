"""Closed-loop multistatic radar tracking simulator."""

import json

from ._core import (
    ChirpWaveform,
    Sweep,
    chirp_rate_for_bandwidth,
    gate_threshold,
    make_library,
    measurement_covariance,
    measurement_function,
    simulate,
    train_measurement_covariance,
    trajectory,
)
from ._core import compare as _compare


def compare(a, b):
    """Comparison of output directory `a` against baseline `b` as a dict."""
    return json.loads(_compare(a, b))


__all__ = [
    "ChirpWaveform",
    "Sweep",
    "chirp_rate_for_bandwidth",
    "compare",
    "gate_threshold",
    "make_library",
    "measurement_covariance",
    "measurement_function",
    "simulate",
    "train_measurement_covariance",
    "trajectory",
]
