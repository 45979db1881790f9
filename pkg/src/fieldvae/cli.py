"""Command-line pipeline driver.

    fieldvae {generate|train|evaluate|embed|optimize|repro}
             --config <path> [--out <dir>] [--seed <u64>] [--threads <n>]

All subcommands are driven by JSON configs (schema-validated before any
work starts, unknown keys rejected) and are reproducible from
(config, seed): primary outputs are byte-identical across reruns, with
timings segregated into a .log file. Exit codes: 0 success, 2 config
error, 3 data error, 4 numeric failure.

Default output directory: $FIELDVAE_OUT, falling back to ./out. Input
references (datasets, checkpoints, field descriptors) resolve against the
output directory first, then the current directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, proxy
from .checkpoint import load_model, save_model
from .data import LabeledDataset, generate_dataset, load_dataset, save_dataset
from .embedding import (TSNE_MAX_POINTS, export_crossplot,
                        export_projection, extract_embeddings, pca_project,
                        tsne_project)
from .errors import ConfigError, DataError, FieldVaeError, NumericError
from .model import Model, ModelConfig, build_model, train
from .optimize import OptimizerConfig, optimize
from .schemas import validate_config, validate_output
from .uncertainty import mc_predict_batch, mse, r2_score
from .utils import rng_from_seed, sha256_of_file, sha256_of_json

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class _Run:
    """Resolved invocation context: config, output dir, seed override."""

    def __init__(self, kind: str, args):
        self.kind = kind
        self.out = Path(args.out or Path(os_environ_out()))
        cfg_path = Path(args.config)
        try:
            with open(cfg_path) as f:
                doc = json.load(f)
        except OSError as e:
            raise ConfigError(f"cannot read config {cfg_path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {cfg_path} is not valid JSON: {e}") from e
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        self.config = validate_config(doc, kind)
        if args.seed is not None:
            self.config["seed"] = args.seed
        self.threads = args.threads  # recorded for provenance; single proc
        self.out.mkdir(parents=True, exist_ok=True)
        self._log_lines = []
        self._t0 = time.perf_counter()

    def seed(self, default: int = 0) -> int:
        return int(self.config.get("seed", default))

    def provenance(self) -> dict:
        return {"config_sha256": sha256_of_json(self.config),
                "seed": self.seed(), "tool_version": __version__}

    def resolve_input(self, ref: str) -> Path:
        """Input paths resolve against the out dir, then the CWD."""
        p = Path(ref)
        if p.is_absolute():
            return p
        for base in (self.out, Path.cwd()):
            if (base / p).exists():
                return base / p
        return self.out / p

    def log(self, msg: str) -> None:
        self._log_lines.append(f"[{time.perf_counter() - self._t0:9.3f}s] {msg}")

    def write_log(self, name: str) -> None:
        path = self.out / f"{name}.log"
        path.write_text("\n".join(self._log_lines) + "\n")

    def write_json(self, filename: str, doc: dict, schema: str) -> Path:
        validate_output(doc, schema)
        path = self.out / filename
        with open(path, "w") as f:
            json.dump(doc, f, sort_keys=True, indent=1)
        return path


def os_environ_out() -> str:
    return os.environ.get("FIELDVAE_OUT", "out")


def _load_field(run: _Run, spec: dict) -> proxy.ProxyField:
    if "path" in spec:
        path = run.resolve_input(spec["path"])
        if not path.exists():
            raise DataError(f"field descriptor not found: {path}")
        return proxy.ProxyField.load(path)
    if "seed" not in spec:
        raise ConfigError("field reference needs either 'path' or 'seed'")
    return proxy.ProxyField.random(spec["seed"],
                                   n_bumps=spec.get("n_bumps", 12))


def _load_dataset(run: _Run, ref: str) -> tuple[LabeledDataset, str]:
    """Returns the dataset and the reference as given (environment-free,
    so emitted reports stay byte-identical across output directories)."""
    base = run.resolve_input(ref)
    csv, sidecar = base.with_suffix(".csv"), base.with_suffix(".json")
    if not csv.exists() or not sidecar.exists():
        raise DataError(f"dataset '{ref}' not found (expected {csv} and "
                        f"{sidecar})")
    return load_dataset(csv, sidecar), ref


def _load_checkpoint(run: _Run, ref: str) -> tuple[Model, Path]:
    path = run.resolve_input(ref)
    if path.suffix != ".ckpt":
        path = path.with_suffix(".ckpt")
    if not path.exists():
        raise DataError(f"checkpoint '{ref}' not found at {path}")
    return load_model(path), path


def _check_normalization(model: Model, ds: LabeledDataset) -> None:
    if model.normalizer is None:
        raise DataError("checkpoint carries no normalization statistics")
    if not model.normalizer.close_to(ds.normalizer):
        raise DataError("checkpoint and dataset normalization statistics "
                        "disagree; the model was trained on different data")


def _econ_from(cfg: dict):
    if "econ" not in cfg:
        return None
    return proxy.EconomicParams.from_dict(cfg["econ"])


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_generate(run: _Run) -> int:
    cfg = run.config
    fld = _load_field(run, cfg["field"])
    ds = generate_dataset(cfg["n"], fld, cfg["objective"],
                          sampler=cfg.get("sampler", "uniform"),
                          noise_std=cfg.get("noise_std", 0.0),
                          seed=run.seed(), econ=_econ_from(cfg),
                          target_scale=cfg.get("target_scale", 1.0))
    name = cfg["name"]
    run.log(f"generated {ds.n} samples ({cfg['objective']}, "
            f"{cfg.get('sampler', 'uniform')})")
    save_dataset(ds, run.out / f"{name}.csv", run.out / f"{name}.json")
    field_path = run.out / f"field_{fld.seed}.json"
    fld.save(field_path)
    with open(run.out / f"{name}.json") as f:
        validate_output(json.load(f), "dataset_sidecar")
    validate_output(fld.to_dict(), "field")
    y = ds.targets
    print(f"dataset {name}: n={ds.n} objective={cfg['objective']} "
          f"y_min={y.min():.6g} y_median={np.median(y):.6g} "
          f"y_max={y.max():.6g}")
    run.write_log(name)
    return EXIT_OK


def _train_one(run: _Run, ds: LabeledDataset, dataset_ref: str, name: str,
               model_cfg: dict) -> None:
    config = ModelConfig.from_dict(model_cfg)
    model = build_model(config)
    xtr, ytr = ds.train_arrays()
    xho, yho = ds.holdout_arrays()
    run.log(f"training {name}: beta={config.beta:g} latent={config.latent_dim} "
            f"{config.layer_kind}/{config.latent_kind} epochs={config.epochs}")
    history = train(model, xtr, ytr, xho, yho, log=run.log)
    model.normalizer = ds.normalizer
    save_model(model, run.out / f"{name}.ckpt")

    with open(run.out / f"{name}_history.csv", "w") as f:
        f.write(",".join(history.CSV_FIELDS) + "\n")
        for row in history.rows():
            f.write(",".join(repr(float(v)) if isinstance(v, float)
                             else str(v) for v in row) + "\n")
    seconds = sum(r.seconds for r in history.records)
    run.log(f"trained {name} in {seconds:.1f}s of epoch time")

    fr_tr = model.forward(xtr, training=False)
    fr_ho = model.forward(xho, training=False)
    metrics = {
        "format_version": 1,
        "kind": "train_metrics",
        "name": name,
        "model_config": config.to_dict(),
        "dataset": dataset_ref,
        "epochs_run": len(history),
        "final": {
            "train_mse": mse(ytr, fr_tr.y_hat),
            "train_r2": r2_score(ytr, fr_tr.y_hat),
            "val_mse": mse(yho, fr_ho.y_hat),
            "val_r2": r2_score(yho, fr_ho.y_hat),
        },
        "provenance": run.provenance(),
    }
    run.write_json(f"{name}_metrics.json", metrics, "train_metrics")


def cmd_train(run: _Run) -> int:
    cfg = run.config
    ds, dataset_ref = _load_dataset(run, cfg["dataset"])
    model_cfg = dict(cfg["model"])
    if "seed" in cfg:
        model_cfg.setdefault("seed", cfg["seed"])
    betas = model_cfg.get("beta", 1.0)
    name = cfg["name"]
    if isinstance(betas, list):
        for beta in betas:
            sweep_cfg = dict(model_cfg, beta=float(beta))
            _train_one(run, ds, dataset_ref, f"{name}_b{beta:g}", sweep_cfg)
    else:
        _train_one(run, ds, dataset_ref, name, model_cfg)
    run.write_log(name)
    return EXIT_OK


def cmd_evaluate(run: _Run) -> int:
    cfg = run.config
    model, ckpt_path = _load_checkpoint(run, cfg["checkpoint"])
    ds, dataset_ref = _load_dataset(run, cfg["dataset"])
    _check_normalization(model, ds)
    split = cfg.get("split", "holdout")
    x, y = ds.holdout_arrays() if split == "holdout" else ds.train_arrays()
    n_samples = cfg.get("mc_samples", 1000)
    run.log(f"evaluating {ckpt_path.name} on {split} split "
            f"({len(y)} samples, T={n_samples})")
    means, stds, _ = mc_predict_batch(model, x, n_samples, seed=run.seed())
    name = cfg["name"]
    crossplot = f"{name}_crossplot.csv"
    export_crossplot(y, means, stds, [split] * len(y), run.out / crossplot)
    doc = {
        "format_version": 1,
        "kind": "evaluation",
        "name": name,
        "checkpoint": str(cfg["checkpoint"]),
        "dataset": dataset_ref,
        "split": split,
        "mc_samples": n_samples,
        "mse": mse(y, means),
        "r2": r2_score(y, means),
        "mse_original_units": mse(y, means) * ds.normalizer.target_std ** 2,
        "std_summary": {"min": float(stds.min()), "mean": float(stds.mean()),
                        "max": float(stds.max())},
        "per_sample": [[float(t), float(m), float(s)]
                       for t, m, s in zip(y, means, stds)],
        "crossplot_csv": crossplot,
        "provenance": run.provenance(),
    }
    run.write_json(f"{name}_metrics.json", doc, "evaluation")
    print(f"evaluation {name}: split={split} mse={doc['mse']:.6g} "
          f"r2={doc['r2']:.6g} mean_std={doc['std_summary']['mean']:.6g}")
    run.write_log(name)
    return EXIT_OK


def cmd_embed(run: _Run) -> int:
    cfg = run.config
    model, ckpt_path = _load_checkpoint(run, cfg["checkpoint"])
    ds, dataset_ref = _load_dataset(run, cfg["dataset"])
    _check_normalization(model, ds)
    split = cfg.get("split", "holdout")
    if split == "all":
        x = ds.normalizer.transform_features(ds.features)
        y = ds.normalizer.transform_target(ds.targets)
    else:
        x, y = ds.holdout_arrays() if split == "holdout" else ds.train_arrays()
    subsample = cfg.get("subsample")
    if subsample is not None and subsample < len(y):
        idx = rng_from_seed(run.seed()).choice(len(y), size=subsample,
                                               replace=False)
        idx.sort()
        x, y = x[idx], y[idx]
    if "tsne" in cfg["methods"] and len(y) > TSNE_MAX_POINTS:
        raise ConfigError(
            f"t-SNE input has {len(y)} points (cap {TSNE_MAX_POINTS}); "
            "set the 'subsample' config key to project a subset")
    emb = extract_embeddings(model, x, y, meta={"dataset": dataset_ref})
    ckpt_hash = sha256_of_file(ckpt_path)
    name = cfg["name"]
    for method in cfg["methods"]:
        if method == "pca":
            proj = pca_project(emb)
        else:
            proj = tsne_project(emb, perplexity=cfg.get("perplexity", 30.0),
                                iterations=cfg.get("iterations", 1000),
                                seed=run.seed())
        csv_name = f"{name}_{method}.csv"
        export_projection(proj, emb.targets, run.out / csv_name)
        meta = {
            "format_version": 1,
            "kind": "projection_meta",
            "method": method,
            "params": proj.params,
            "seed": proj.seed,
            "checkpoint_sha256": ckpt_hash,
            "dataset": dataset_ref,
            "n_points": int(len(emb.targets)),
            "csv": csv_name,
            "info": proj.info,
            "provenance": run.provenance(),
        }
        run.write_json(f"{name}_{method}_meta.json", meta, "projection_meta")
        run.log(f"wrote {method} projection of {len(emb.targets)} points")
    run.write_log(name)
    return EXIT_OK


def cmd_optimize(run: _Run) -> int:
    cfg = run.config
    model, _ = _load_checkpoint(run, cfg["checkpoint"])
    fld = _load_field(run, cfg["field"])
    opt_cfg = OptimizerConfig.from_dict(cfg["optimizer"])
    trace: list = []
    run.log(f"optimizing {cfg['objective']} with population "
            f"{opt_cfg.population_size} x {opt_cfg.generations} generations")
    stats = optimize(fld, cfg["objective"], model, opt_cfg,
                     econ=_econ_from(cfg), trace=trace)
    name = cfg["name"]
    trace_csv = f"{name}_trace.csv"
    with open(run.out / trace_csv, "w") as f:
        f.write(",".join([f"x{i:03d}" for i in range(90)]
                         + ["value", "source"]) + "\n")
        for decision, value, source in trace:
            f.write(",".join(repr(float(v)) for v in decision)
                    + f",{value!r},{source}\n")
    doc = {
        "format_version": 1,
        "kind": "optimization_report",
        "name": name,
        "objective": cfg["objective"],
        "optimizer_config": opt_cfg.to_dict(),
        "gate_threshold_used": stats.gate_threshold_used,
        "best": {"decision": stats.best_decision.tolist(),
                 "true_objective": stats.best_true_objective},
        "counts": {"simulator_calls": stats.simulator_calls,
                   "surrogate_accepts": stats.surrogate_accepts,
                   "total_evaluations": stats.total_evaluations},
        "per_generation": [{"generation": g.generation, "best": g.best,
                            "mean": g.mean,
                            "simulator_calls": g.simulator_calls,
                            "surrogate_accepts": g.surrogate_accepts}
                           for g in stats.per_generation],
        "trace_csv": trace_csv,
        "provenance": run.provenance(),
    }
    run.write_json(f"{name}_report.json", doc, "optimization_report")
    print(f"optimize {name}: best={stats.best_true_objective:.6g} "
          f"simulator_calls={stats.simulator_calls} "
          f"surrogate_accepts={stats.surrogate_accepts}")
    run.write_log(name)
    return EXIT_OK


REPRO_SMALL = {
    "n": 4000,
    "objective": "npv",
    "field_seed": 11,
    "noise_std": 0.01,
    "latent_dim": 3,
    "betas": [1.0, 3.0],
    "epochs": 40,
    "mc_samples": 200,
    "tsne_points": 600,
    "tsne_iterations": 500,
    "population_size": 24,
    "generations": 10,
}


def cmd_repro(run: _Run) -> int:
    """Chained preset: generate -> train (beta sweep) -> evaluate -> embed
    -> optimize, at reduced sizes."""
    cfg = dict(REPRO_SMALL)
    cfg.update({k: v for k, v in run.config.items()
                if k not in ("name", "preset")})
    name = run.config["name"]
    seed = run.seed()
    artifacts = []
    steps = []

    def sub(kind: str, doc: dict) -> _Run:
        sub_run = object.__new__(_Run)
        sub_run.kind = kind
        sub_run.out = run.out
        sub_run.config = validate_config(doc, kind)
        sub_run.threads = run.threads
        sub_run._log_lines = run._log_lines
        sub_run._t0 = run._t0
        return sub_run

    ds_name = f"{name}_data"
    cmd_generate(sub("generate", {
        "name": ds_name, "n": cfg["n"], "objective": cfg["objective"],
        "sampler": "optimizer-trace", "noise_std": cfg["noise_std"],
        "seed": seed, "field": {"seed": cfg["field_seed"]}}))
    steps.append("generate")
    artifacts += [f"{ds_name}.csv", f"{ds_name}.json",
                  f"field_{cfg['field_seed']}.json"]

    cmd_train(sub("train", {
        "name": f"{name}_model", "dataset": ds_name, "seed": seed,
        "model": {"latent_dim": cfg["latent_dim"], "beta": cfg["betas"],
                  "epochs": cfg["epochs"], "seed": seed}}))
    # a full-width latent run completes the beta/latent-dim grid
    cmd_train(sub("train", {
        "name": f"{name}_model_J90", "dataset": ds_name, "seed": seed,
        "model": {"latent_dim": 90, "beta": cfg["betas"][0],
                  "epochs": cfg["epochs"], "seed": seed}}))
    steps.append("train")
    model_names = [f"{name}_model_b{b:g}" for b in cfg["betas"]]
    model_names.append(f"{name}_model_J90")
    for m in model_names:
        artifacts += [f"{m}.ckpt", f"{m}_history.csv", f"{m}_metrics.json"]

    first = model_names[0]
    cmd_evaluate(sub("evaluate", {
        "name": f"{name}_eval", "checkpoint": first, "dataset": ds_name,
        "mc_samples": cfg["mc_samples"], "seed": seed}))
    steps.append("evaluate")
    artifacts += [f"{name}_eval_metrics.json", f"{name}_eval_crossplot.csv"]

    perplexity = min(30.0, (cfg["tsne_points"] - 1) / 3.0)
    cmd_embed(sub("embed", {
        "name": f"{name}_emb", "checkpoint": first, "dataset": ds_name,
        "methods": ["pca", "tsne"], "subsample": cfg["tsne_points"],
        "iterations": cfg["tsne_iterations"], "split": "all",
        "perplexity": perplexity, "seed": seed}))
    steps.append("embed")
    for method in ("pca", "tsne"):
        artifacts += [f"{name}_emb_{method}.csv",
                      f"{name}_emb_{method}_meta.json"]

    cmd_optimize(sub("optimize", {
        "name": f"{name}_opt", "checkpoint": first,
        "field": {"seed": cfg["field_seed"]}, "objective": cfg["objective"],
        "optimizer": {"population_size": cfg["population_size"],
                      "generations": cfg["generations"],
                      "gate_quantile": 0.3, "mc_samples": 32, "seed": seed}}))
    steps.append("optimize")
    artifacts += [f"{name}_opt_report.json", f"{name}_opt_trace.csv"]

    manifest = {
        "format_version": 1,
        "kind": "repro_manifest",
        "name": name,
        "steps": steps,
        "artifacts": sorted(artifacts),
        "provenance": run.provenance(),
    }
    run.write_json(f"{name}_repro.json", manifest, "repro_manifest")
    missing = [a for a in artifacts if not (run.out / a).exists()]
    if missing:
        raise DataError(f"repro finished but artifacts are missing: {missing}")
    print(f"repro {name}: {len(artifacts)} artifacts in {run.out}")
    run.write_log(name)
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "embed": cmd_embed,
    "optimize": cmd_optimize,
    "repro": cmd_repro,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fieldvae",
        description="VAE regression surrogates for field optimization")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in COMMANDS:
        p = sub.add_parser(kind)
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", default=None,
                       help="output directory (default $FIELDVAE_OUT or ./out)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--threads", type=int, default=1,
                       help="reserved; recorded for provenance")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run = _Run(args.command, args)
        return COMMANDS[args.command](run)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except FieldVaeError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
