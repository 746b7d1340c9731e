"""EV charging deadline scheduling: priority heuristics, interchange
certification, exact average-cost DP and Monte Carlo comparison."""

import csv
import io
import json

from . import _core
from ._core import (
    ConfigError,
    ConvergenceError,
    ModelError,
    Scenario,
    StateSpaceTooLarge,
    benchmark,
    compare_priority,
    decide,
    laxity,
    load_scenario,
    scenario_from_json,
)

__all__ = [
    "ConfigError",
    "ConvergenceError",
    "ModelError",
    "Scenario",
    "StateSpaceTooLarge",
    "benchmark",
    "certify",
    "certify_two_vehicle",
    "compare",
    "compare_priority",
    "decide",
    "laxity",
    "load_scenario",
    "scenario_from_json",
    "simulate",
    "solve_exact",
]


def _scenario(s):
    if isinstance(s, Scenario):
        return s
    if isinstance(s, dict):
        return scenario_from_json(json.dumps(s))
    return load_scenario(str(s))


def simulate(scenario, policy, stages=200, warmup=20, trajectories=1000, seed=7, threads=0):
    """Mean time-averaged cost of one policy; dict with mean, stderr, samples."""
    return json.loads(_core.simulate(_scenario(scenario), policy, stages, warmup, trajectories, seed, threads))


def compare(scenario, policies, rates, stages=200, warmup=20, trajectories=1000, seed=7, threads=0):
    """Paired comparison over arrival rates, as a list of CSV row dicts."""
    text = _core.compare(_scenario(scenario), list(policies), list(rates), stages, warmup, trajectories, seed, threads)
    return list(csv.DictReader(io.StringIO(text)))


def certify(scenario, policy, cases=1000, seed=1, threads=0):
    return json.loads(_core.certify(_scenario(scenario), policy, cases, seed, threads))


def certify_two_vehicle(penalty, policy="edf", instances=10000, seed=1, max_stay=3, max_request=3):
    values = [str(v) for v in penalty]
    return json.loads(_core.certify_two_vehicle(values, policy, instances, seed, max_stay, max_request))


def solve_exact(scenario, tol=1e-10, exact=False, max_states=2_000_000):
    return json.loads(_core.solve_exact(_scenario(scenario), tol, exact, max_states))
