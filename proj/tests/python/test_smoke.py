import json
import math

import pytest

import rflab

HYPERBOLIC = {"kind": "model_space", "dimension": 3, "sectional_sign": -1, "scale": 1.0, "base_volume": 1.0}


def flat_torus(n=16):
    return {"kind": "conformal_torus", "grid_size": [n, n], "periods": [1.0, 1.0]}


def test_hyperbolic_entropy_is_constant():
    h = rflab.evolve(HYPERBOLIC, 0.1, 10.0)
    assert h.birth_time < 0.1
    rows = rflab.entropy_series(h, [0.1, 1.0, 10.0])["rows"]
    expected = 1.5 + 1.5 * math.log(math.pi)
    for r in rows:
        assert r["W_plus"] == pytest.approx(expected, abs=1e-6)
        assert r["lambda_bar"] == pytest.approx(-6.0, abs=1e-8)


def test_nu_plus_on_hyperbolic_and_flat():
    nu = rflab.nu_plus(HYPERBOLIC)
    assert not nu["unbounded"]
    assert nu["value"] == pytest.approx(1.5 + 1.5 * math.log(math.pi), abs=1e-6)
    assert nu["sigma"] == pytest.approx(0.25, abs=1e-4)
    assert rflab.nu_plus(flat_torus())["unbounded"]


def test_mu_plus_flat_torus_minimizer_is_uniform():
    r = rflab.mu_plus(flat_torus(), 0.5)
    assert r["converged"]
    assert max(r["u"]) - min(r["u"]) < 1e-8
    # uniform density on unit area: W+ = (n/2) log 4 pi sigma + n
    assert r["value"] == pytest.approx(math.log(4 * math.pi * 0.5) + 2.0, abs=1e-6)


def test_flat_reduced_distance():
    h = rflab.evolve(flat_torus(), 0.0, 1.0)
    f = rflab.ell_plus(h, 0.0, (0.5, 0.5), [(0.7, 0.5, 0.5), (0.5, 0.9, 1.0)])
    ells = [p["ell"] for p in f["points"]]
    assert ells[0] == pytest.approx(0.2**2 / (4 * 0.5), abs=1e-6)
    assert ells[1] == pytest.approx(0.4**2 / (4 * 1.0), abs=1e-6)


def test_blowdown_keeps_entropy():
    h = rflab.evolve(HYPERBOLIC, 0.1, 10.0)
    b = h.blowdown(4.0)
    w = rflab.entropy_series(h, [2.0])["rows"][0]["W_plus"]
    wb = rflab.entropy_series(b, [0.5])["rows"][0]["W_plus"]
    assert wb == pytest.approx(w, abs=1e-9)


def test_homogeneous_models_refuse_reduced_distance():
    h = rflab.evolve({"kind": "homogeneous", "structure_constants": [1, 0, 0]}, 1.0, 2.0)
    with pytest.raises(rflab.UnsupportedModel):
        rflab.ell_plus(h, 1.0, (0.0, 0.0), [(0.1, 0.0, 2.0)])


def test_run_scenario_and_config_errors():
    cfg = {
        "schema": "rflab.scenario/1",
        "name": "hyp",
        "model": HYPERBOLIC,
        "t_span": [0.1, 10.0],
        "samples": 5,
        "checks": ["entropy", "mu_nu"],
    }
    (report,) = rflab.run_scenario(json.dumps(cfg))
    assert report["ok"]
    cfg["checks"] = ["nonsense"]
    with pytest.raises(rflab.ConfigError):
        rflab.run_scenario(json.dumps(cfg))
