import json
import math

import numpy as np
import pytest

import ksmooth


def test_bandwidth_matrix():
    h = ksmooth.BandwidthMatrix.from_matrix(np.array([[2.0, 1.0], [1.0, 2.0]]), "full")
    assert h.form == "full"
    assert h.dim == 2
    assert h.abs_determinant() == pytest.approx(3.0)
    assert np.allclose(h.inverse() @ h.entries, np.eye(2))
    with pytest.raises(ksmooth.KsmoothError) as err:
        ksmooth.BandwidthMatrix.from_matrix(np.zeros((2, 2)))
    assert err.value.args[0] == "SingularBandwidth"


def test_kde_single_point_and_flat_limit():
    data = np.array([[0.0, 0.0]])
    out = ksmooth.kde(data, 1.0, np.array([[0.0, 0.0]]))
    assert out["value"][0] == pytest.approx(1.0 / (2.0 * math.pi))
    rng = np.random.default_rng(1)
    x = rng.uniform(size=(50, 3))
    h = 1e6
    flat = ksmooth.kde(x, h, rng.uniform(size=(4, 3)))["value"] * h**3
    assert np.allclose(flat, (2.0 * math.pi) ** -1.5, rtol=1e-9)


def test_nw_regression_matches_numpy():
    rng = np.random.default_rng(2)
    x = rng.uniform(size=(40, 2))
    y = np.sin(3 * x[:, 0]) + 0.1 * rng.normal(size=40)
    q = rng.uniform(size=(5, 2))
    out = ksmooth.nw_regression(x, y, np.array([0.2, 0.3]), q)
    for i, point in enumerate(q):
        w = np.exp(-0.5 * (((point - x) / np.array([0.2, 0.3])) ** 2).sum(axis=1))
        assert out["value"][i] == pytest.approx((w * y).sum() / w.sum(), rel=1e-12)
    huge = ksmooth.nw_regression(x, y, 1e9, q)["value"]
    assert np.allclose(huge, y.mean(), rtol=1e-9)


def test_conditional_density_integrates_to_one():
    rng = np.random.default_rng(3)
    x = rng.uniform(size=(60, 1))
    y = x[:, 0] + 0.2 * rng.normal(size=60)
    grid = np.linspace(-2.0, 3.0, 2001)
    queries = np.column_stack([grid, np.full_like(grid, 0.4)])
    f = ksmooth.conditional_density(x, y, np.array([0.15, 0.1]), queries)["value"]
    assert np.trapezoid(f, grid) == pytest.approx(1.0, abs=0.02)


def test_selection_and_lscv():
    x, y = ksmooth.generate(1, 200, 5)
    assert x.shape == (200, 3)
    sel = ksmooth.select_bandwidth(x, y, form="diagonal")
    assert len(sel["divergent_flags"]) == 3
    value, excluded = ksmooth.lscv_regression(x, y, sel["bandwidth"])
    assert value == pytest.approx(sel["criterion"], rel=1e-12)
    assert excluded == sel["excluded_points"]


def test_simulation_and_rate():
    report = ksmooth.estimate_mise(2, "diagonal", 60, 2, test_points=200, seed=1, optimizer={"max_evaluations": 200})
    assert report["mise"] > 0
    fit = ksmooth.fit_rate([100, 200, 400], [0.4, 0.2, 0.1])
    assert fit["slope"] == pytest.approx(-1.0)
    assert ksmooth.true_regression(1, np.array([[0.25, 0.5, 0.9]]))[0] == pytest.approx(2.0)


def test_run_writes_manifest(tmp_path):
    out = tmp_path / "sel.json"
    code, summary, outputs = ksmooth.run(
        {"command": "select", "case": 1, "n": [100], "seed": 3, "output": str(out), "optimizer": {"max_evaluations": 200}}
    )
    assert code == 0
    assert "divergent_flags" in summary
    manifest = json.loads((tmp_path / "sel.json.manifest.json").read_text())
    assert manifest["config"]["seed"] == 3
    assert str(out) in outputs
    code, summary, _ = ksmooth.run({"command": "select", "output": str(tmp_path / "bad.json")})
    assert code == 2
    assert summary["error"]["code"] == "InvalidConfig"
