"""Python access to the hieract core: configs, runs, features and checks."""

import json

from . import _hieract
from ._hieract import (
    ConfigError,
    ContractError,
    DimensionError,
    FormatError,
    MissingIdError,
    build_prompt,
    predict_topk,
    read_haf1,
    toy_embed,
    tsu_labels,
    write_haf1,
)

__all__ = [
    "ConfigError",
    "ContractError",
    "DimensionError",
    "FormatError",
    "MissingIdError",
    "build_prompt",
    "canonical_config",
    "config_digest",
    "gradcheck_suite",
    "predict_topk",
    "read_haf1",
    "run_experiment",
    "synth_dataset",
    "toy_embed",
    "tsu_labels",
    "write_haf1",
]


def _text(config):
    return config if isinstance(config, str) else json.dumps(config)


def config_digest(config):
    """16-hex-digit digest of a config given as a dict or JSON text."""
    return _hieract.config_digest(_text(config))


def canonical_config(config):
    return json.loads(_hieract.canonical_config(_text(config)))


def run_experiment(config):
    """Train and evaluate one configuration; returns the metrics report."""
    return json.loads(_hieract.run_experiment(_text(config)))


def synth_dataset(spec, out_dir):
    return _hieract.synth_dataset(_text(spec), str(out_dir))


def gradcheck_suite(seed=0):
    return json.loads(_hieract.gradcheck_suite(seed))
