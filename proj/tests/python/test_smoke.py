import json

import pytest

import stretchperc as sp


def test_stationary_pmf_geometric():
    rho, tail = sp.stationary_pmf("geometric:0.5", 2)
    assert rho == pytest.approx([0.5, 0.25, 0.125])
    assert tail == pytest.approx(0.125)
    assert sum(rho) + tail == pytest.approx(1.0)


def test_infinite_mean_rejected():
    with pytest.raises(ValueError):
        sp.stationary_pmf("zeta:1.5", 2)


def test_gap_moment():
    finite, value = sp.gap_moment("det:3", 2.0)
    assert finite and value == pytest.approx(9.0)
    finite, _ = sp.gap_moment("zeta:1.5", 0.5)
    assert not finite


def test_sample_arrivals_deterministic():
    a = sp.sample_arrivals("geometric:0.5", "stationary", 50, seed=7)
    b = sp.sample_arrivals("geometric:0.5", "stationary", 50, seed=7)
    c = sp.sample_arrivals("geometric:0.5", "stationary", 50, seed=8)
    assert a == b
    assert a != c
    assert a[-1] >= 50
    assert all(y > x for x, y in zip(a, a[1:]))


def test_renewal_covariance_uniform12():
    # density 2/3; lag 1 hit needs a gap of 1: (2/3)(1/2) - (2/3)^2 = -1/9
    assert sp.renewal_covariance("pmf:1:0.5,2:0.5", 1) == pytest.approx(-1.0 / 9.0)


def test_scale_ladder_example():
    rows = sp.scale_ladder(300, 2, gamma=1.2, height="desk", desk_h=4)
    assert [r["L"] for r in rows] == [300, 900, 2700]
    assert [r["ratio"] for r in rows] == [3, 3, 4]
    assert rows[0]["H"] == 1200


def test_crossing_exact_unit_box():
    for p in (0.3, 0.5, 0.7):
        got = sp.crossing_exact("det:1", "dirac:0", p, [0, 1, 0, 1], "inhomogeneous", "h")
        assert got == pytest.approx(p)


def test_crossing_mc_matches_exact():
    rect = [0, 3, 0, 2]
    exact = sp.crossing_exact("det:1", "dirac:0", 0.6, rect, "dilute", "h", seed=5)
    est = sp.crossing_mc("det:1", "dirac:0", 0.6, rect, "dilute", "h", samples=4000, seed=5)
    assert est["n"] == 4000
    assert est["ci_lo"] <= exact <= est["ci_hi"]


def test_duality_parameters():
    kappa = sp.choose_kappa("geometric:0.5")
    assert kappa == pytest.approx(1.0)
    k2, pd = sp.dual_edge_parameter("geometric:0.5", 0.6)
    assert k2 == kappa
    assert pd == pytest.approx(0.4)


def test_realize_gaps_deterministic_spec():
    delay, gaps = sp.realize_gaps("det:2", "dirac:1", 4, seed=0)
    assert delay == 1.0
    assert gaps == [2.0, 2.0, 2.0, 2.0]


def test_run_config_roundtrip():
    rec = sp.run_config("seed = 3\ntasks =\n")
    assert len(rec["config_hash"]) == 16
    assert rec["reused"] == 0
    assert len(rec["lines"]) == 1
    header = json.loads(rec["lines"][0])
    assert header["kind"] == "config"
    assert header["hash"] == rec["config_hash"]


def test_run_config_sweep_task_deterministic():
    cfg = (
        "spec = det:1\nformulation = dilute\np_grid = 0.4,0.5,0.6\n"
        "box = 8\nreplicas = 40\nseed = 11\ntasks = sweep\n"
    )
    first = sp.run_config(cfg)
    second = sp.run_config(cfg)
    assert first["lines"] == second["lines"]
    task = json.loads(first["lines"][1])
    assert task["task"] == "sweep"
    curve = task["result"]["curve"]
    assert [pt["p"] for pt in curve] == [0.4, 0.5, 0.6]
    hits = [pt["hits"] for pt in curve]
    assert hits == sorted(hits)


def test_unknown_config_key_rejected():
    with pytest.raises(ValueError):
        sp.run_config("boxx = 8\n")
