"""Stationary fluid-structure interaction with shape sensitivities."""

import json as _json

from ._core import (
    Channel,
    CoupledState,
    CouplingError,
    DivergenceError,
    MeshTanglingError,
    Model,
    describe,
    mms,
    num_threads,
    scenarios,
    set_num_threads,
)

__all__ = [
    "Channel",
    "CoupledState",
    "CouplingError",
    "DivergenceError",
    "MeshTanglingError",
    "Model",
    "default_config",
    "describe",
    "mms",
    "num_threads",
    "run",
    "scenarios",
    "set_num_threads",
]


def default_config():
    """Resolved default configuration as a nested dict."""
    from ._core import default_config_json

    return _json.loads(default_config_json())


def run(scenario, config=None, out=".", seed=None):
    """Run a scenario like the command line tool; returns (exit_code, summary dict)."""
    from ._core import run_json

    code, summary = run_json(scenario, _json.dumps(config or {}), str(out), seed)
    return code, _json.loads(summary)
