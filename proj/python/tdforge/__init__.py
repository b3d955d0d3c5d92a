"""Projection-free TD(0) with linear function approximation: simulator, oracles and checks."""

import json

from ._tdforge import (
    MIN_ALGORITHM_CONSTANT,
    Instance,
    InvalidInput,
    LemmaReport,
    MinTCondition,
    MixingFit,
    NumericalFailure,
    RunRecord,
    TdOracle,
    corpus,
    derive_seed,
    generate,
    instance_from_json,
    lemma_sum_a1,
    lemma_sum_a2,
    lemma_sum_a3,
    load_instance,
    min_T_condition,
    omega_c,
    potential,
    run_td0,
    save_instance,
    solve,
    standard_instance,
    stationary_gradient,
    step_size,
    verify,
)
from ._tdforge import run_experiment as _run_experiment


def run_experiment(config, threads=0):
    """Run an experiment from a config dict (or JSON string) and return the aggregate as a dict."""
    text = config if isinstance(config, str) else json.dumps(config)
    return json.loads(_run_experiment(text, threads))


__all__ = [name for name in dir() if not name.startswith("_") and name != "json"]
