"""Averaging of fractional-noise driven systems with a fast Markov chain."""

import json as _json

from ._fracavg import (
    ConfigError,
    NumericalError,
    fgn_target_error,
    fractional_power,
    graph_verdicts,
    sample_fbm,
    sigma,
    stationary_measure,
)
from ._fracavg import run_experiment as _run_experiment


def run_experiment(name, config, seed=None):
    """Run a CLI experiment in-process; config is a dict or JSON text. Returns the report dict."""
    text = config if isinstance(config, str) else _json.dumps(config)
    return _json.loads(_run_experiment(name, text, seed))


__all__ = [
    "ConfigError",
    "NumericalError",
    "fgn_target_error",
    "fractional_power",
    "graph_verdicts",
    "run_experiment",
    "sample_fbm",
    "sigma",
    "stationary_measure",
]
