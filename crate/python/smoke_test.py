"""Smoke test for the `lka` extension module.

Build and install first:

    pip install maturin
    pip install --no-build-isolation -e crates/py

then run `python python/smoke_test.py` (or `pytest python/smoke_test.py`).
"""

import math

import lka


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol


def test_fit_matches_the_poll_closed_form():
    # d = 10, h = 6, northern indicator; P = (1-mu)/h south, mu/(d-h) north
    rows = [[0.0]] * 6 + [[1.0]] * 4
    g, report = lka.fit([0.7], features=rows)
    assert report["feasibility"] == "interior"
    p = g.probs()
    assert all(close(x, 0.3 / 6, 1e-12) for x in p[:6])
    assert all(close(x, 0.7 / 4, 1e-12) for x in p[6:])
    assert close(g.lambda_[0], math.log(0.7 * 6 / (0.3 * 4)))
    assert close(g.active_info([6, 7, 8, 9]), math.log(0.7 / 0.4), 1e-12)
    v = g.verdict([6, 7, 8, 9], 8)
    assert v["learned"] and not v["fullKnowledge"]


def test_cube_fit_and_sampling():
    cube = {"r": 1, "features": [{"kind": "linear", "coord": 0}]}
    g, _ = lka.fit([0.3], cube=cube)
    assert g.probs() is None
    assert close(g.moments()[0], 0.3)
    xs = g.sample(2000, seed=1)
    assert len(xs) == 2000 and all(0.0 <= x[0] <= 1.0 for x in xs)
    assert xs == g.sample(2000, seed=1)
    h, _ = lka.mle(xs, cube=cube)
    assert abs(h.lambda_[0] - g.lambda_[0]) < 0.5


def test_fundamental_limits():
    rows = lka.fundamental_limit_features(8)
    assert len(rows) == 8 and len(rows[0]) == 3
    for x0 in range(8):
        g = lka.Gibbs(lka.lambda_for_world(8, x0), features=rows)
        assert g.probs()[x0] >= 1 - 1e-9


def test_bias_and_tv():
    p = [0.25, 0.25, 0.25, 0.25]
    q = [0.1, 0.2, 0.3, 0.4]
    b = lka.bias(p, q, [2, 3])
    assert close(b["bias"], math.log(0.7 / 0.5), 1e-12)
    assert close(lka.tv_distance(p, q), 0.2, 1e-12)
    assert close(lka.active_info(p, q, [3]), math.log(0.4 / 0.25), 1e-12)


def test_scenarios_and_asymptotics():
    run = lka.run_scenario(
        {"scenario": "poll", "d": 10, "h": 6, "eps": 0.2, "x0": 7, "N": 10, "replicates": 5},
        seed=2024,
        cross_check=True,
    )
    assert len(run["results"]) == 5 and run["crossCheckTv"] <= 1e-8
    assert {r["muHat"] for r in run["results"]} <= {0.0, 0.4, 1.0}

    coin = {"scenario": "coin", "r": 1, "x0": [0.3]}
    conv = lka.primary_convergence(coin, [100, 1000], 20, 7)
    assert conv["medians"][1] < conv["medians"][0]
    a = {"kind": "rectangle", "r": 1, "intervals": [[0.0, 0.5]]}
    clt = lka.clt_check(coin, a, 2000, 400, 3)
    assert 0.7 < clt["ratio"] < 1.3
    syn = lka.synthetic_loop(coin, 2, 1000, 5)
    assert len(syn["generations"]) == 3


def test_secondary():
    rows = [[0.0], [0.0], [1.0], [1.0]]
    k = lka.expansion_constant(rows, [2, 3], [1.0])
    assert close(k["C"], -0.5, 1e-6)
    r = lka.plugin_secondary(rows, [2, 3], [1.0], 500, 9)
    assert r["identityError"] <= 1e-12


def test_errors():
    try:
        lka.fit([2.0], features=[[0.0], [1.0]])
    except lka.NumericalError:
        pass
    else:
        raise AssertionError("infeasible target accepted")
    try:
        lka.run_scenario({"scenario": "poll", "d": 6, "h": 6, "eps": 0.2, "x0": 1, "N": 5}, seed=1)
    except lka.ValidationError as e:
        assert "h must be < d" in str(e)
    else:
        raise AssertionError("h >= d accepted")
    assert issubclass(lka.ValidationError, ValueError)


if __name__ == "__main__":
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_")]
    for t in tests:
        t()
        print(f"ok {t.__name__}")
    print(f"{len(tests)} passed")
