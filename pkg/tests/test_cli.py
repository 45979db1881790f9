import json

import numpy as np
import pytest

from fieldvae import cli
from fieldvae.checkpoint import read_manifest
from fieldvae.schemas import validate_output
from fieldvae.uncertainty import mse, r2_score

SMALL_MODEL = {"latent_dim": 3, "epochs": 5, "batch_size": 64,
               "enc_widths": [24, 18, 12], "dec_widths": [12, 18, 24],
               "reg_widths": [16, 12, 8], "seed": 0}


def write_config(path, doc):
    with open(path, "w") as f:
        json.dump(doc, f)
    return str(path)


def run_cli(command, config_path, out_dir, extra=()):
    return cli.main([command, "--config", str(config_path),
                     "--out", str(out_dir), *extra])


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Generated dataset + trained checkpoint shared by the CLI tests."""
    ws = tmp_path_factory.mktemp("cli_ws")
    out = ws / "out"
    gen = write_config(ws / "gen.json", {
        "name": "d1", "n": 400, "objective": "wcf", "sampler": "uniform",
        "seed": 3, "field": {"seed": 5}})
    assert run_cli("generate", gen, out) == 0
    trn = write_config(ws / "train.json", {
        "name": "m1", "dataset": "d1", "model": SMALL_MODEL})
    assert run_cli("train", trn, out) == 0
    return ws, out


class TestGenerate:
    def test_row_count_and_files(self, workspace):
        ws, out = workspace
        lines = (out / "d1.csv").read_text().splitlines()
        assert len(lines) == 401
        assert (out / "d1.json").exists()
        assert (out / "field_5.json").exists()

    def test_rerun_is_byte_identical(self, workspace, tmp_path):
        ws, out = workspace
        gen = write_config(tmp_path / "gen.json", {
            "name": "d1", "n": 400, "objective": "wcf", "sampler": "uniform",
            "seed": 3, "field": {"seed": 5}})
        out2 = tmp_path / "out2"
        assert run_cli("generate", gen, out2) == 0
        assert (out2 / "d1.csv").read_bytes() == (out / "d1.csv").read_bytes()
        assert (out2 / "d1.json").read_bytes() == (out / "d1.json").read_bytes()

    def test_npv_with_wcf_economics_matches_wcf(self, tmp_path):
        base = {"n": 60, "sampler": "uniform", "seed": 9,
                "field": {"seed": 5}}
        wcf_cfg = write_config(tmp_path / "w.json",
                               dict(base, name="dw", objective="wcf"))
        npv_cfg = write_config(tmp_path / "n.json", dict(
            base, name="dn", objective="npv",
            econ={"oil_price": 1.0, "water_prod_cost": -0.1,
                  "water_inj_cost": -0.1, "discount_oil": 0.0,
                  "discount_water_prod": 0.0, "discount_water_inj": 0.0,
                  "drill_cash": []}))
        out = tmp_path / "out"
        assert run_cli("generate", wcf_cfg, out) == 0
        assert run_cli("generate", npv_cfg, out) == 0
        w = np.loadtxt(out / "dw.csv", delimiter=",", skiprows=1)
        n = np.loadtxt(out / "dn.csv", delimiter=",", skiprows=1)
        np.testing.assert_allclose(n[:, -1], w[:, -1], rtol=1e-12)

    def test_sidecar_validates(self, workspace):
        _, out = workspace
        doc = json.loads((out / "d1.json").read_text())
        validate_output(doc, "dataset_sidecar")


class TestTrain:
    def test_artifacts_exist(self, workspace):
        _, out = workspace
        for suffix in (".ckpt", "_history.csv", "_metrics.json", ".log"):
            assert (out / f"m1{suffix}").exists()
        doc = json.loads((out / "m1_metrics.json").read_text())
        validate_output(doc, "train_metrics")

    def test_history_has_epoch_rows(self, workspace):
        _, out = workspace
        lines = (out / "m1_history.csv").read_text().splitlines()
        assert lines[0].startswith("epoch,lr,train_recon")
        assert len(lines) == 1 + SMALL_MODEL["epochs"]

    def test_layer_kind_routed_from_config(self, workspace, tmp_path):
        ws, out = workspace
        trn = write_config(tmp_path / "t.json", {
            "name": "mprob", "dataset": "d1",
            "model": dict(SMALL_MODEL, epochs=2, layer_kind="probabilistic",
                          latent_kind="fullcov")})
        assert run_cli("train", trn, out) == 0
        manifest = read_manifest(out / "mprob.ckpt")
        assert manifest["config"]["layer_kind"] == "probabilistic"
        assert any("W_mean" in t["name"] for t in manifest["tensors"])

    def test_beta_sweep_emits_per_beta_checkpoints(self, workspace, tmp_path):
        ws, out = workspace
        trn = write_config(tmp_path / "sweep.json", {
            "name": "sw", "dataset": "d1",
            "model": dict(SMALL_MODEL, epochs=2, beta=[1, 3, 10])})
        assert run_cli("train", trn, out) == 0
        for beta in (1, 3, 10):
            manifest = read_manifest(out / f"sw_b{beta}.ckpt")
            assert manifest["config"]["beta"] == float(beta)

    def test_rerun_is_bit_identical(self, workspace, tmp_path):
        ws, out = workspace
        trn = write_config(tmp_path / "t.json", {
            "name": "m1", "dataset": str(out / "d1"), "model": SMALL_MODEL})
        out2 = tmp_path / "out2"
        assert run_cli("train", trn, out2) == 0
        assert (out2 / "m1.ckpt").read_bytes() == (out / "m1.ckpt").read_bytes()
        assert (out2 / "m1_history.csv").read_bytes() \
            == (out / "m1_history.csv").read_bytes()


@pytest.fixture(scope="module")
def evaluated(workspace, tmp_path_factory):
    ws, out = workspace
    tmp = tmp_path_factory.mktemp("eval")
    cfg = write_config(tmp / "e.json", {
        "name": "e1", "checkpoint": "m1", "dataset": "d1",
        "mc_samples": 24, "seed": 1})
    assert run_cli("evaluate", cfg, out) == 0
    return out


class TestEvaluate:
    def test_metrics_bounds_and_schema(self, evaluated):
        doc = json.loads((evaluated / "e1_metrics.json").read_text())
        validate_output(doc, "evaluation")
        assert np.isfinite(doc["mse"]) and doc["mse"] >= 0
        assert doc["r2"] <= 1.0
        assert doc["mc_samples"] == 24

    def test_self_consistency_with_crossplot(self, evaluated):
        doc = json.loads((evaluated / "e1_metrics.json").read_text())
        rows = (evaluated / "e1_crossplot.csv").read_text().splitlines()[1:]
        truth = np.array([float(r.split(",")[0]) for r in rows])
        mean = np.array([float(r.split(",")[1]) for r in rows])
        assert mse(truth, mean) == pytest.approx(doc["mse"], abs=1e-9)
        assert r2_score(truth, mean) == pytest.approx(doc["r2"], abs=1e-9)

    def test_normalization_mismatch_is_data_error(self, workspace, tmp_path):
        ws, out = workspace
        gen = write_config(tmp_path / "g.json", {
            "name": "dother", "n": 80, "objective": "wcf", "seed": 77,
            "field": {"seed": 5}})
        assert run_cli("generate", gen, out) == 0
        cfg = write_config(tmp_path / "e.json", {
            "name": "ebad", "checkpoint": "m1", "dataset": "dother"})
        assert run_cli("evaluate", cfg, out) == cli.EXIT_DATA


class TestEmbed:
    def test_both_methods_share_checkpoint_hash(self, workspace, tmp_path):
        ws, out = workspace
        cfg = write_config(tmp_path / "p.json", {
            "name": "p1", "checkpoint": "m1", "dataset": "d1",
            "methods": ["pca", "tsne"], "subsample": 60, "perplexity": 10.0,
            "iterations": 80, "seed": 2})
        assert run_cli("embed", cfg, out) == 0
        metas = [json.loads((out / f"p1_{m}_meta.json").read_text())
                 for m in ("pca", "tsne")]
        for doc in metas:
            validate_output(doc, "projection_meta")
        assert metas[0]["checkpoint_sha256"] == metas[1]["checkpoint_sha256"]
        pca_rows = (out / "p1_pca.csv").read_text().splitlines()
        assert pca_rows[0] == "id,dim1,dim2,target_scaled"
        assert len(pca_rows) == 61

    def test_tsne_rerun_identical(self, workspace, tmp_path):
        ws, out = workspace
        doc = {"name": "p2", "checkpoint": "m1", "dataset": "d1",
               "methods": ["tsne"], "subsample": 50, "perplexity": 8.0,
               "iterations": 60, "seed": 4}
        cfg = write_config(tmp_path / "p.json", doc)
        assert run_cli("embed", cfg, out) == 0
        first = (out / "p2_tsne.csv").read_bytes()
        assert run_cli("embed", cfg, out) == 0
        assert (out / "p2_tsne.csv").read_bytes() == first

    def test_over_cap_without_subsample_names_flag(self, workspace, tmp_path,
                                                   monkeypatch):
        ws, out = workspace
        monkeypatch.setattr("fieldvae.cli.TSNE_MAX_POINTS", 50)
        cfg = write_config(tmp_path / "p.json", {
            "name": "p3", "checkpoint": "m1", "dataset": "d1",
            "methods": ["tsne"], "seed": 0})
        assert run_cli("embed", cfg, out) == cli.EXIT_CONFIG


class TestOptimize:
    def _cfg(self, tmp_path, name, **opt):
        base = {"population_size": 12, "generations": 3, "mc_samples": 8,
                "seed": 6}
        base.update(opt)
        return write_config(tmp_path / f"{name}.json", {
            "name": name, "checkpoint": "m1", "field": {"seed": 5},
            "objective": "wcf", "optimizer": base})

    def test_threshold_zero_reports_no_accepts(self, workspace, tmp_path):
        ws, out = workspace
        cfg = self._cfg(tmp_path, "oz", gate_threshold=0.0)
        assert run_cli("optimize", cfg, out) == 0
        doc = json.loads((out / "oz_report.json").read_text())
        validate_output(doc, "optimization_report")
        assert doc["counts"]["surrogate_accepts"] == 0
        assert doc["counts"]["simulator_calls"] == doc["counts"]["total_evaluations"]

    def test_paired_runs_share_seed_for_comparison(self, workspace, tmp_path):
        ws, out = workspace
        gated = self._cfg(tmp_path, "og", gate_quantile=0.5)
        ungated = self._cfg(tmp_path, "ou", gate_threshold=0.0)
        assert run_cli("optimize", gated, out) == 0
        assert run_cli("optimize", ungated, out) == 0
        g = json.loads((out / "og_report.json").read_text())
        u = json.loads((out / "ou_report.json").read_text())
        assert g["optimizer_config"]["seed"] == u["optimizer_config"]["seed"]
        assert g["counts"]["simulator_calls"] < u["counts"]["simulator_calls"]

    def test_zero_generations_still_valid(self, workspace, tmp_path):
        ws, out = workspace
        cfg = self._cfg(tmp_path, "o0", generations=0, gate_threshold=0.0)
        assert run_cli("optimize", cfg, out) == 0
        doc = json.loads((out / "o0_report.json").read_text())
        validate_output(doc, "optimization_report")
        assert doc["counts"]["total_evaluations"] == 13

    def test_trace_matches_counts(self, workspace, tmp_path):
        ws, out = workspace
        cfg = self._cfg(tmp_path, "ot", gate_quantile=0.5)
        assert run_cli("optimize", cfg, out) == 0
        doc = json.loads((out / "ot_report.json").read_text())
        rows = (out / "ot_trace.csv").read_text().splitlines()
        assert len(rows) - 1 == doc["counts"]["total_evaluations"]
        sources = [r.rsplit(",", 1)[1] for r in rows[1:]]
        assert sources.count("surrogate") == doc["counts"]["surrogate_accepts"]


class TestExitCodesAndSafety:
    def test_unknown_key_rejected_before_any_output(self, tmp_path):
        out = tmp_path / "fresh"
        cfg = write_config(tmp_path / "bad.json", {
            "name": "x", "n": 10, "objective": "wcf", "field": {"seed": 1},
            "frobnicate": True})
        assert run_cli("generate", cfg, out) == cli.EXIT_CONFIG
        assert not out.exists() or not any(out.iterdir())

    def test_invalid_json_is_config_error(self, tmp_path):
        bad = tmp_path / "broken.json"
        bad.write_text("{nope")
        assert run_cli("generate", bad, tmp_path / "o") == cli.EXIT_CONFIG

    def test_missing_dataset_is_data_error(self, tmp_path):
        cfg = write_config(tmp_path / "t.json", {
            "name": "m", "dataset": "missing_ds", "model": {"epochs": 1}})
        assert run_cli("train", cfg, tmp_path / "o") == cli.EXIT_DATA

    def test_seed_flag_overrides_config(self, workspace, tmp_path):
        ws, out = workspace
        cfg = write_config(tmp_path / "g.json", {
            "name": "dseed", "n": 30, "objective": "wcf", "seed": 1,
            "field": {"seed": 5}})
        o1, o2, o3 = (tmp_path / f"o{i}" for i in (1, 2, 3))
        assert run_cli("generate", cfg, o1) == 0
        assert run_cli("generate", cfg, o2, extra=["--seed", "1"]) == 0
        assert run_cli("generate", cfg, o3, extra=["--seed", "2"]) == 0
        a = (o1 / "dseed.csv").read_bytes()
        assert (o2 / "dseed.csv").read_bytes() == a
        assert (o3 / "dseed.csv").read_bytes() != a


class TestRepro:
    def test_small_preset_chains_and_validates(self, tmp_path):
        cfg = write_config(tmp_path / "r.json", {
            "name": "r1", "preset": "small", "n": 600, "epochs": 3,
            "tsne_points": 80, "tsne_iterations": 60, "generations": 2,
            "mc_samples": 16, "seed": 9})
        out = tmp_path / "out"
        assert run_cli("repro", cfg, out) == 0
        manifest = json.loads((out / "r1_repro.json").read_text())
        validate_output(manifest, "repro_manifest")
        for artifact in manifest["artifacts"]:
            assert (out / artifact).exists(), artifact
        assert manifest["steps"] == ["generate", "train", "evaluate",
                                     "embed", "optimize"]
