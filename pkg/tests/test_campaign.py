import json

import numpy as np
import pytest

from biotuq import cli
from biotuq.basis import expansion_variance
from biotuq.campaign import (CampaignConfig, CampaignError, FieldEvaluator, convergence_sweep,
                             evaluate_points, export_artifacts, load_expansions, mse_field,
                             node_payloads, run_campaign, validate)
from biotuq.coefficients import Transform, UncertaintyModel, sample_params, validation_model
from biotuq.quadrature import smolyak_grid

COARSE = {"scenario": "injection", "params": {"n": 4, "n_steps": 2}}


def additive(xi):
    return np.array([xi[0] + 2 * xi[1]])


def interaction(xi):
    return np.array([xi[0] * xi[1]])


def linear_payload(xi):
    return np.array([1.0 + xi[0], 2.0 * xi[1] - xi[3], xi[2] * xi[3]])


def failing(xi):
    if xi[0] > 0.5:
        raise RuntimeError("solver diverged")
    return linear_payload(xi)


def stub_config(tmp_path, **kw):
    return CampaignConfig(scenario=None, output_dir=str(tmp_path / "out"), **kw)


def test_additive_sobol(tmp_path):
    res = run_campaign(stub_config(tmp_path, level=2), evaluator=additive, write=False)
    s = res.sensitivity
    np.testing.assert_allclose(s["first"][:, 0], [1 / 3, 4 / 3, 0, 0], atol=1e-13)
    np.testing.assert_allclose(s["total"][:, 0], [1 / 3, 4 / 3, 0, 0], atol=1e-13)
    assert s["variance"][0] == pytest.approx(5 / 3, rel=1e-13)


def test_interaction_sobol(tmp_path):
    res = run_campaign(stub_config(tmp_path, level=2), evaluator=interaction, write=False)
    s = res.sensitivity
    np.testing.assert_allclose(s["first"][:, 0], 0, atol=1e-14)
    np.testing.assert_allclose(s["total"][:2, 0], 1 / 9, rtol=1e-12)
    assert s["sum_first"][0] <= s["variance"][0] <= s["sum_total"][0]


def test_linear_payload_modes(tmp_path):
    res = run_campaign(stub_config(tmp_path, level=1), evaluator=linear_payload, write=False)
    e = res.expansion
    np.testing.assert_allclose(e[(0, 0, 0, 0)], [1, 0, 0], atol=1e-14)
    np.testing.assert_allclose(e[(1, 0, 0, 0)], [1 / np.sqrt(3), 0, 0], atol=1e-14)
    np.testing.assert_allclose(res.statistics["variance"][:2], [1 / 3, 4 / 3 + 1 / 3], rtol=1e-13)
    # xi3 * xi4 is beyond total degree 1 at level 1
    assert res.statistics["variance"][2] == pytest.approx(0, abs=1e-14)


def test_mean_matches_collapsed_weights(tmp_path):
    cfg = stub_config(tmp_path, level=3)
    res = run_campaign(cfg, evaluator=linear_payload, write=False)
    grid = res.grid
    Y = np.stack([linear_payload(x) for x in grid.nodes])
    w = grid.collapsed_weights()
    np.testing.assert_allclose(res.statistics["mean"], w @ Y, atol=1e-12)


def test_workers_do_not_change_results(tmp_path):
    a = run_campaign(stub_config(tmp_path, level=3, workers=1), evaluator=linear_payload, write=False)
    b = run_campaign(stub_config(tmp_path, level=3, workers=2), evaluator=linear_payload, write=False)
    assert np.array_equal(a.expansion.coefficients, b.expansion.coefficients)
    assert a.manifest == b.manifest


def test_evaluate_points_keeps_order():
    pts = np.arange(20.0).reshape(10, 2)
    out = evaluate_points(lambda x: x.sum(), pts)
    assert [v for _, v in out] == [float(x.sum()) for x in pts]
    out = evaluate_points(additive, pts, workers=3)
    assert [float(v[0]) for _, v in out] == [x[0] + 2 * x[1] for x in pts]


def test_node_failure_aborts_with_location():
    grid = smolyak_grid(4, 1)
    with pytest.raises(CampaignError, match=r"node \d+ \(xi = \[1\.0"):
        node_payloads(grid, failing)


def test_validation_excludes_failures(tmp_path):
    cfg = stub_config(tmp_path, level=1, validation_samples=40)
    safe = run_campaign(cfg, evaluator=linear_payload, write=False)
    out = validate(safe, cfg, evaluator=failing)
    assert 0 < len(out["excluded"]) < 40
    assert out["n_points"] == 40 - len(out["excluded"])
    assert all(e["xi"][0] > 0.5 and "diverged" in e["error"] for e in out["excluded"])


def test_exact_surrogate_has_zero_mse(tmp_path):
    cfg = stub_config(tmp_path, level=2, validation_samples=1)
    res = run_campaign(cfg, evaluator=linear_payload, write=False)
    out = validate(res, cfg, evaluator=linear_payload)
    assert out["n_points"] == 1
    assert out["norms"]["payload"] <= 1e-24 ** 0.5
    assert np.all(out["mse"] <= 1e-24)


def test_mse_field_direct():
    res_grid = smolyak_grid(4, 2)
    from biotuq.quadrature import psp_project
    e = psp_project(res_grid, np.stack([additive(x) for x in res_grid.nodes]))
    pts = np.zeros((3, 4))
    out = mse_field(e, pts, np.full((3, 1), 1.0))
    assert out["mse"][0] == pytest.approx(1.0)


def test_convergence_sweep_decreases():
    fn = lambda x: np.array([np.exp(np.sum(x) / 4)])
    rows = convergence_sweep([1, 2, 3], fn, 4, 50, seed=1)
    errs = [r["mse_payload"] for r in rows]
    assert errs[0] > errs[1] > errs[2]
    assert [r["n_nodes"] for r in rows] == [9, 41, 137]


def test_config_validation(tmp_path):
    with pytest.raises(ValueError):
        CampaignConfig(level=-1)
    with pytest.raises(ValueError):
        CampaignConfig(workers=0)
    with pytest.raises(ValueError):
        CampaignConfig(sensitivity_output="q")
    with pytest.raises(ValueError, match="unknown campaign config keys"):
        CampaignConfig.from_dict({"levle": 3})
    with pytest.raises(ValueError, match="unknown model"):
        CampaignConfig(model="nope").uncertainty_model()


def test_degenerate_model_has_no_variance(tmp_path):
    model = UncertaintyModel({"mu": Transform("loguniform", 10.0, 10.0),
                              "lambda": Transform("loguniform", 20.0, 20.0),
                              "alpha": Transform("uniform", 0.8, 0.8),
                              "kappa": Transform("loguniform", 0.1, 0.1)},
                             phi=0.2, K_f=2.2e6, d=2, units="kPa-m-s", name="degenerate")
    cfg = CampaignConfig(scenario=COARSE, level=1, output_dir=str(tmp_path))
    res = run_campaign(cfg, model=model, write=False)
    assert np.abs(res.statistics["variance"]).max() <= 1e-20


def test_fem_campaign_linear_in_well_pressure(tmp_path):
    model = validation_model()
    xi = np.array([0.1, -0.4, 0.3, 0.0])
    base = dict(COARSE, params=dict(COARSE["params"], magnitude=1.0))
    scaled = dict(COARSE, params=dict(COARSE["params"], magnitude=3.0))
    a = FieldEvaluator(CampaignConfig(scenario=base).template(), model)(xi)
    b = FieldEvaluator(CampaignConfig(scenario=scaled).template(), model)(xi)
    np.testing.assert_allclose(b, 3 * a, rtol=1e-12, atol=1e-15)


@pytest.fixture(scope="module")
def fem_campaign(tmp_path_factory):
    out = tmp_path_factory.mktemp("camp")
    cfg = CampaignConfig(scenario=COARSE, level=1, output_dir=str(out), validation_samples=5)
    res = run_campaign(cfg, write=False)
    validate(res, cfg)
    export_artifacts(res, out, 1.0)
    return cfg, res, out


def test_fem_campaign_statistics(fem_campaign):
    cfg, res, out = fem_campaign
    st = res.statistics
    for name in ("u1", "u2", "p"):
        assert np.all(st[f"var_{name}"] >= 0)
    nv = res.layout.n_vertices
    for a, b in (("u1", "u2"), ("u1", "p"), ("u2", "p")):
        bound = np.sqrt(st[f"var_{a}"][:nv] * st[f"var_{b}"][:nv]) + 1e-12
        assert np.all(np.abs(st[f"cov_{a}_{b}"]) <= bound)
    s = res.sensitivity
    assert np.all(s["sum_first"] <= s["variance"] * (1 + 1e-12) + 1e-15)
    assert np.all(s["variance"] <= s["sum_total"] * (1 + 1e-12) + 1e-15)


def test_fem_campaign_artifacts(fem_campaign):
    cfg, res, out = fem_campaign
    manifest = json.loads((out / "manifest.json").read_text())
    for name in ("modes_u1.csv", "modes_u2.csv", "modes_p.csv", "statistics.vtk", "mean.csv",
                 "variance.csv", "sensitivity.vtk", "mse.vtk"):
        assert (out / name).exists() and name in manifest["files"]
    assert manifest["n_nodes"] == 9 and manifest["validation"]["samples"] == 5
    back = load_expansions(out)
    np.testing.assert_array_equal(back["p"].coefficients, res.field_expansion("p").coefficients)
    np.testing.assert_array_equal(expansion_variance(back["p"]), res.statistics["var_p"])
    assert set(res.mse["norms"]) == {"u", "p"}


def test_export_is_reproducible(fem_campaign, tmp_path):
    cfg, res, out = fem_campaign
    m = export_artifacts(res, tmp_path / "again", 1.0)
    first = json.loads((out / "manifest.json").read_text())
    assert m["files"] == first["files"]


def test_export_to_unwritable_location(fem_campaign, tmp_path):
    cfg, res, out = fem_campaign
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(CampaignError):
        export_artifacts(res, blocker / "sub", 1.0)


def test_cli_grid_reports_discrepancy(capsys):
    assert cli.main(["grid"]) == 0
    text = capsys.readouterr().out
    assert "209" in text and "2561" in text and "note:" in text
    rows = {int(ln.split()[0]): ln.split() for ln in text.splitlines() if ln.strip()[:1].isdigit()}
    assert rows[3][1] == "137" and rows[5][1] == "1105"
    assert rows[3][-1] == "209" and rows[5][-1] == "2561"


def test_cli_run_and_sense(tmp_path, capsys):
    cfg = {"scenario": COARSE, "level": 1, "output_dir": str(tmp_path / "o")}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    assert cli.main(["run", str(path)]) == 0
    assert (tmp_path / "o" / "manifest.json").exists()
    assert cli.main(["sense", str(path), "--field", "u1"]) == 0
    assert "partial variances of u1" in capsys.readouterr().out


def test_cli_reports_errors(tmp_path, capsys):
    assert cli.main(["run", str(tmp_path / "missing.json")]) == 1
    assert "error" in capsys.readouterr().err
