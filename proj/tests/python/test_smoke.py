import json
import math

import numpy as np
import pytest

import tdforge


def test_two_state_instance():
    inst = tdforge.generate(chain="two-state", a=0.1, b=0.1, dim=1)
    assert np.array_equal(inst.P, np.array([[0.9, 0.1], [0.1, 0.9]]))
    assert np.allclose(inst.pi, [0.5, 0.5], atol=1e-15)


def test_json_round_trip(tmp_path):
    inst = tdforge.standard_instance()
    path = tmp_path / "standard.json"
    tdforge.save_instance(inst, str(path))
    again = tdforge.load_instance(str(path))
    assert again.to_json() == inst.to_json()
    doc = json.loads(inst.to_json())
    doc["transition"][0][0][0] += 0.5
    with pytest.raises(tdforge.InvalidInput, match="row-stochastic"):
        tdforge.instance_from_json(json.dumps(doc))


def test_oracle_identities():
    inst = tdforge.standard_instance()
    oracle = tdforge.solve(inst)
    assert np.abs(oracle.A @ oracle.theta_star - oracle.b).max() < 1e-10
    assert np.abs(tdforge.stationary_gradient(oracle, oracle.theta_star)).max() < 1e-10
    rng = np.random.default_rng(0)
    for _ in range(20):
        theta = rng.normal(size=3)
        f = tdforge.potential(oracle, inst, theta)
        gbar = tdforge.stationary_gradient(oracle, theta)
        assert abs(-gbar @ (theta - oracle.theta_star) - f) <= 1e-9 * (1 + abs(f))
    assert oracle.f_min_eig > 0


def test_run_td0_record():
    inst = tdforge.standard_instance()
    record = tdforge.run_td0(inst, c=100.0, T=512, seed=3, stride=64)
    steps = record.steps
    assert steps["t"] == list(range(0, 512, 64))
    assert steps["theta_norm"][0] == 0.0
    assert all(a > b for a, b in zip(steps["eta"], steps["eta"][1:]))
    assert math.isfinite(record.f_bar)
    again = tdforge.run_td0(inst, c=100.0, T=512, seed=3, stride=64)
    assert np.array_equal(record.theta_bar, again.theta_bar)


def test_constants_and_rejections():
    assert 2.0 <= tdforge.omega_c(1e6) <= 2.001
    assert tdforge.omega_c(66.09) > 1e3
    with pytest.raises(tdforge.InvalidInput):
        tdforge.run_td0(tdforge.standard_instance(), c=66.0, T=64)
    assert tdforge.MIN_ALGORITHM_CONSTANT == pytest.approx(30 + math.sqrt(1302))
    assert tdforge.lemma_sum_a1(0, 2).lhs == pytest.approx(1 / (math.log(4) ** 2 * 2), rel=1e-12)
    assert tdforge.lemma_sum_a3(1).lhs == pytest.approx(1 / math.log(3) ** 2, rel=1e-12)


def test_experiment_is_deterministic_across_threads():
    config = {"T": [256], "reps": 8, "seed": 4}
    one = tdforge.run_experiment(config, threads=1)
    three = tdforge.run_experiment(config, threads=3)
    assert one == three
    assert one["cells"][0]["status"] == "ok"
    sweep = tdforge.run_experiment({"T": [128], "reps": 2, "axes": {"c": [50, 100]}})
    assert [cell["status"] for cell in sweep["cells"]] == ["invalid_c", "ok"]


def test_verify_fast_passes():
    passed, reports = tdforge.verify(tdforge.corpus()[:3], level="fast")
    assert passed
    assert all(r.passed for r in reports)
