"""Continual GUI-agent learning lab (native core)."""

import json

from ._core import (
    ConfigMismatch,
    InputError,
    RunResult,
    SchedulerConfig,
    Suite,
    average_accuracy,
    default_run_config_json,
    default_suite_config_json,
    entropy_change,
    forgetting_measure,
    lambda_value,
    load_suite,
    normalized_advantages,
    surgery,
    verify,
    write_run_outputs,
)
from . import _core


def generate(**overrides):
    """Generate a suite; keyword arguments override suite-config keys."""
    cfg = json.loads(default_suite_config_json())
    cfg.update(overrides)
    return _core.generate_suite(json.dumps(cfg))


def run_config(**overrides):
    """Default run config as a dict, with top-level keys overridden."""
    cfg = json.loads(default_run_config_json())
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(cfg.get(key), dict):
            cfg[key].update(value)
        else:
            cfg[key] = value
    return cfg


def run(suite, config):
    """Train one continual sequence. `config` is a run-config dict."""
    return _core.run_continual(suite, json.dumps(config))


__all__ = [
    "ConfigMismatch", "InputError", "RunResult", "SchedulerConfig", "Suite", "average_accuracy",
    "entropy_change", "forgetting_measure", "generate", "lambda_value", "load_suite",
    "normalized_advantages", "run", "run_config", "surgery", "verify", "write_run_outputs",
]
