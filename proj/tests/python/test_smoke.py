import os
import pathlib

import pytest

import evsched

SCENARIOS = pathlib.Path(os.environ.get("EVSCHED_SCENARIO_DIR", pathlib.Path(__file__).parents[2] / "scenarios"))


def test_priority_primitives():
    assert evsched.laxity(8, 5, 10) == 3
    assert evsched.laxity(2, 0, 10) == 10
    assert evsched.compare_priority((2, 1), (3, 2), 10) == "j_over_i"
    assert evsched.compare_priority((3, 2), (3, 2), 10) == "equal"


def test_decide_respects_rules():
    s = evsched.scenario_from_json(
        '{"N":2,"B":2,"E":2,"grid":{"states":[0],"iid":[1]},"arrival":"none","budget":1}'
    )
    assert evsched.decide(s, "edf", [(1, 1), (2, 2)]) == [1, 0]
    assert evsched.decide(s, "lllp", [(1, 1), (2, 2)]) == [0, 1]
    assert evsched.decide(s, "llsp", [(1, 1), (2, 2)]) == [1, 0]


def test_simulate_zero_rate_is_free():
    r = evsched.simulate(evsched.benchmark(0), "edf", stages=20, warmup=0, trajectories=3)
    assert r["mean"] == 0.0
    assert len(r["samples"]) == 3


def test_compare_rows():
    rows = evsched.compare(SCENARIOS / "sec5.json", ["edf", "lllp"], [25], stages=40, trajectories=4)
    assert [r["policy"] for r in rows] == ["edf", "lllp"]
    assert float(rows[1]["mean_cost"]) <= float(rows[0]["mean_cost"])


def test_certify_and_negative_control():
    rep = evsched.certify(evsched.benchmark(30, "quadratic"), "llsp", cases=20, seed=3)
    assert rep["counterexamples"] == 0 and rep["passed"]
    neg = evsched.certify_two_vehicle([0, 3, 4, 4], "edf", instances=2000)
    assert neg["counterexamples"] > 0


def test_solve_exact_tiny():
    out = evsched.solve_exact(SCENARIOS / "tiny.json", exact=True)
    assert out["state_count"] == 98
    assert out["solution"]["residual"] <= 1e-10
    assert out["solution"]["exact_gain"] == "223/182"
    assert out["constant_gain"]["passed"]
    assert out["projection"]["compliant_violations"] == 0


def test_errors_map_to_python():
    with pytest.raises(ValueError):
        evsched.scenario_from_json('{"N":1,"nope":2}')
    with pytest.raises(ValueError):
        evsched.solve_exact(evsched.benchmark(5))
