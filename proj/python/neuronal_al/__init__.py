"""Neural active learning with an exploitation/exploration network pair."""

import json

from ._neuronal import (
    ConditioningError,
    ConfigError,
    DataError,
    DivergenceError,
    Net,
    NeuronalError,
    ParameterError,
    ShapeError,
    beta,
    complexity_terms,
    decide,
    expand_multiclass,
    igw_distribution,
    load_normalize,
    mc_gram_oracle,
    min_admissible_mu,
    ntk_matrix,
    synth,
)
from . import _neuronal


def default_config(algorithm="neuronal-stream"):
    return json.loads(_neuronal.default_config(algorithm))


def run_experiment(config):
    """Run an experiment from a config dict (same layout as the CLI's --config file).

    Returns the per-seed records followed by the aggregate record.
    """
    text = config if isinstance(config, str) else json.dumps(config)
    return [json.loads(r) for r in _neuronal.run_experiment(text)]


__all__ = [
    "ConditioningError",
    "ConfigError",
    "DataError",
    "DivergenceError",
    "Net",
    "NeuronalError",
    "ParameterError",
    "ShapeError",
    "beta",
    "complexity_terms",
    "decide",
    "default_config",
    "expand_multiclass",
    "igw_distribution",
    "load_normalize",
    "mc_gram_oracle",
    "min_admissible_mu",
    "ntk_matrix",
    "run_experiment",
    "synth",
]
