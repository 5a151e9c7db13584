"""Python front end of the meta-risk lab.

Configuration blocks and plans are plain dicts in the same JSON schema the
command-line tool reads.
"""
import json
import os

from . import _core
from ._core import (
    ConfigError,
    DimensionMismatchError,
    DivergenceError,
    Error,
    ParameterDomainError,
    PreconditionError,
    bayes_error,
    c_rate,
    exp_spectrum,
    log_decay_spectrum,
    log_growth_task_spectrum,
    meta_covariance,
    poly_spectrum,
    two_block_spectrum,
)

__version__ = _core.__version__


def resolve_config(block, seed=0):
    """Materialized configuration with derived quantities."""
    return json.loads(_core._resolve_config(json.dumps(block), seed))


def evaluate_bounds(block, seed=0, appendix=False):
    """Upper and (for T > 10) lower bound breakdown."""
    return json.loads(_core._evaluate_bounds(json.dumps(block), seed, appendix))


def run_oracles(block, seed=0, mc_reps=100000, pairs=50, tasks=10000, jobs=1):
    return json.loads(_core._run_oracles(json.dumps(block), seed, mc_reps, pairs, tasks, jobs))


def load_plan(path, overrides=()):
    return json.loads(_core._load_plan(os.fspath(path), list(overrides)))


def run_plan(plan, out_dir, jobs=1, base_dir=""):
    """Runs a plan (dict or path) and returns the manifest."""
    if not isinstance(plan, dict):
        base_dir = base_dir or os.path.dirname(os.path.abspath(plan))
        plan = load_plan(plan)
    os.makedirs(out_dir, exist_ok=True)
    return json.loads(_core._run_plan(json.dumps(plan), os.fspath(out_dir), jobs, os.fspath(base_dir)))


__all__ = [
    "ConfigError", "DimensionMismatchError", "DivergenceError", "Error", "ParameterDomainError",
    "PreconditionError", "bayes_error", "c_rate", "evaluate_bounds", "exp_spectrum",
    "load_plan", "log_decay_spectrum", "log_growth_task_spectrum", "meta_covariance",
    "poly_spectrum", "resolve_config", "run_oracles", "run_plan", "two_block_spectrum",
]
