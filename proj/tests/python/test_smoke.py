import json
import math
import os

import pytest

import _apnn


def test_problem_catalog():
    ids = _apnn.problem_ids()
    assert ids == ["p1", "p2", "p3", "p4"]
    spec = _apnn.problem_spec("p3")
    assert spec["epsilon"] == 1.0
    assert spec["sigma"] == 10.0
    assert spec["eval_times"] == [0.1, 0.2, 0.3, 0.4, 0.5]
    assert not spec["stationary"]
    assert _apnn.problem_spec("p3", 1e-3)["epsilon"] == 1e-3
    assert _apnn.problem_spec("p2")["stationary"]
    with pytest.raises(ValueError):
        _apnn.problem_spec("p9")


def test_quadrature_integrates_polynomials():
    x, w = _apnn.gauss_legendre(8)
    assert len(x) == 8 and len(w) == 8
    assert abs(sum(w) - 2.0) < 1e-13
    for k in (2, 6, 14):
        exact = 2.0 / (k + 1)
        approx = sum(wi * xi**k for xi, wi in zip(x, w))
        assert abs(approx - exact) < 1e-13


def test_relative_l2():
    assert _apnn.relative_l2([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert _apnn.relative_l2([3.0, 4.0], [0.0, 5.0]) == pytest.approx(
        math.sqrt(0.4)
    )
    with pytest.raises(ValueError):
        _apnn.relative_l2([1.0], [1.0, 2.0])


def test_config_canonicalization():
    canon = _apnn.config_from_json('{"problem": "p1", "method": "mm"}')
    cfg = json.loads(canon)
    assert cfg["problem"] == "p1"
    assert cfg["method"] == "mm"
    assert cfg["sampler"]["n_quad"] == 16
    with pytest.raises(ValueError):
        _apnn.config_from_json('{"mystery": 1}')


def test_reference_solver_equilibrium():
    sol = _apnn.solve_reference("p3", epsilon=0.5, n_x=24, n_t=40, n_mu=4)
    assert len(sol["x"]) == 24
    assert sol["times"] == [0.1, 0.2, 0.3, 0.4, 0.5]
    assert len(sol["rho"]) == 5
    assert len(sol["te_t"]) == 41
    # temperatures stay within the initial data's range on this smooth problem
    for profile in sol["T"]:
        assert all(0.4 < v < 1.1 for v in profile)


def test_train_and_evaluate_roundtrip(tmp_path):
    cfg = {
        "problem": "p3",
        "method": "eo",
        "iterations": 5,
        "trace_every": 5,
        "seed": 3,
        "sampler": {"n_int": 8, "n_bdy": 4, "n_init": 4, "n_quad": 4},
        "network": {"width_macro": 6, "width_micro": 6, "blocks": 1},
    }
    run_dir = tmp_path / "run"
    trace = _apnn.train(json.dumps(cfg), str(run_dir))
    assert trace[-1]["iteration"] == 5
    assert math.isfinite(trace[-1]["risk"])
    assert (run_dir / "risk_trace.csv").exists()

    # the stored config is what evaluate_run reads back
    (run_dir / "config.json").write_text(
        _apnn.config_from_json(json.dumps(cfg)) + "\n"
    )

    ref_csv = tmp_path / "ref.csv"
    cli = os.environ.get("APNN_CLI")
    assert cli, "APNN_CLI must point at the command line tool"
    rc = os.system(
        f"{cli} reference --problem p3 --nx 16 --nt 20 --nmu 4"
        f" --out {ref_csv} >/dev/null 2>&1"
    )
    assert rc == 0

    rows = _apnn.evaluate_run(str(run_dir), str(ref_csv))
    quantities = {r["quantity"] for r in rows}
    assert quantities == {"rho", "T", "Tr", "Te"}
    assert all(math.isfinite(r["error"]) for r in rows)

    xs = [0.1, 0.7, 1.3]
    vals = _apnn.sample_run(str(run_dir), "rho", 0.3, xs)
    assert len(vals) == 3
    assert all(v > 0.0 for v in vals)
