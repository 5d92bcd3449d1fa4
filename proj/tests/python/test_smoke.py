import json
import math

import numpy as np
import pytest

import causalmatch as cm


def test_simulated_frame_shapes():
    d = cm.simulate(500, seed=3)
    assert d["x"].shape == (500, 3)
    assert len(d["a"]) == len(d["y"]) == 500
    for a, y, y0, y1 in zip(d["a"], d["y"], d["y0"], d["y1"]):
        assert y == (y1 if a else y0)
    again = cm.simulate(500, seed=3)
    assert np.array_equal(d["x"], again["x"])


def test_ipw_weights_are_inverse_scores():
    a = [1, 0, 1, 0]
    ps = np.array([0.5, 0.8, 0.8, 0.5])
    w = cm.weights(a, ps, "ipw")
    assert np.allclose(w, [2.0, 5.0, 1.25, 2.0], rtol=0, atol=1e-15)


def test_estimators_on_confounded_data():
    d = cm.simulate(4000, seed=11)
    truth = cm.analytic_effects()["ate"]
    est = cm.estimate_effects(d["a"], d["y"], d["x"], scheme="ipw")
    assert est["naive"].estimate - truth > 1.0
    m = est["matched"]
    assert abs(m.estimate - truth) < 4 * m.se
    assert m.ci_low <= m.estimate <= m.ci_high
    assert est["matched"].estimator == "matched"


def test_propensity_fit_and_balance():
    d = cm.simulate(4000, seed=12)
    fit = cm.estimate_ps(d["a"], d["x"])
    assert fit["coefficients"].shape == (4,)
    w = cm.weights(d["a"], fit["ps"], "ipw")
    x1 = d["x"][:, 0]
    assert abs(cm.smd(x1, d["a"], w)) < abs(cm.smd(x1, d["a"]))


def test_weighted_quantiles_match_replication():
    q = cm.weighted_quantiles([1.0, 2.0, 3.0], [1.0, 2.0, 1.0], [0.5])
    assert q == pytest.approx([2.0])


def test_decomposition_identity():
    r = cm.decompose([0, 1, 0, 1], [0.0, 0.0, 1.0, 1.0], [1.0, 2.0, 2.0, 3.0])
    assert r.att == 2.0 and r.atc == 1.0
    assert abs(r.naive - (r.ate + r.selection_bias_term + r.het_term)) < 1e-12


def test_simpson_reversal():
    rng = np.random.default_rng(5)
    u = rng.normal(size=400)
    k = np.repeat([0.0, 1.0], 200)
    t = 5 * k + u
    y = 20 * k - u + 0.1 * rng.normal(size=400)
    z = 10 * k + 0.5 * rng.normal(size=400)
    s = cm.simpson(t, y, z, bins=4)
    assert s.marginal.slope > 0
    assert s.all_reversed


def test_errors_carry_kind():
    with pytest.raises(cm.CausalMatchError) as info:
        cm.weights([1, 0], np.array([0.5, 0.5]), "bogus")
    assert info.value.exit_code == 2
    with pytest.raises(ValueError):
        cm.simulate(10, spec='{"k": 2, "gamma": [0, 1]}')


def test_analyze_writes_report(tmp_path):
    d = cm.simulate(1500, seed=2)
    header = "unit_id,a,y," + ",".join(d["confounders"])
    rows = [
        f"{i},{a},{float(y)!r}," + ",".join(repr(float(v)) for v in x)
        for i, (a, y, x) in enumerate(zip(d["a"], d["y"], d["x"]))
    ]
    (tmp_path / "data.csv").write_text(header + "\n" + "\n".join(rows) + "\n")
    config = {
        "input": str(tmp_path / "data.csv"),
        "treatment": "a",
        "outcome": "y",
        "confounders": d["confounders"],
        "n_trials": 2,
        "sample_size": 1000,
        "seed": 4,
        "out": str(tmp_path / "out"),
    }
    cm.analyze(json.dumps(config))
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert len(report["trials"]) == 2
    assert all(math.isfinite(t["matched"]["estimate"]) for t in report["trials"])
