"""JSON schemas for CLI configs and emitted report files.

Configs are validated before any work starts; unknown keys are rejected.
Output schemas double as the acceptance contract for emitted files.
"""

from __future__ import annotations

import jsonschema

from .errors import ConfigError, DataError

_NAME = {"type": "string", "minLength": 1, "pattern": r"^[A-Za-z0-9._-]+$"}
_SEED = {"type": "integer", "minimum": 0}
_POSINT = {"type": "integer", "minimum": 1}

_FIELD_REF = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "seed": _SEED,
        "n_bumps": _POSINT,
        "path": {"type": "string"},
    },
}

_ECON = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "oil_price": {"type": "number"},
        "water_prod_cost": {"type": "number"},
        "water_inj_cost": {"type": "number"},
        "discount_oil": {"type": "number", "minimum": 0},
        "discount_water_prod": {"type": "number", "minimum": 0},
        "discount_water_inj": {"type": "number", "minimum": 0},
        "drill_cash": {"type": "array", "items": {"type": "number"}},
    },
}

_WIDTHS = {"type": "array", "items": _POSINT, "minItems": 3, "maxItems": 3}

_MODEL = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "input_dim": _POSINT,
        "latent_dim": _POSINT,
        "enc_widths": _WIDTHS,
        "dec_widths": _WIDTHS,
        "reg_widths": _WIDTHS,
        "latent_kind": {"enum": ["meanfield", "fullcov"]},
        "layer_kind": {"enum": ["deterministic", "probabilistic"]},
        "beta": {"anyOf": [{"type": "number", "minimum": 0},
                           {"type": "array", "minItems": 1,
                            "items": {"type": "number", "minimum": 0}}]},
        "gamma": {"type": "number", "minimum": 0},
        "dropout_rate": {"type": "number", "minimum": 0,
                         "exclusiveMaximum": 1},
        "leaky_slope": {"type": "number", "exclusiveMinimum": 0,
                        "exclusiveMaximum": 1},
        "epochs": {"type": "integer", "minimum": 0},
        "batch_size": {"type": "integer", "minimum": 2},
        "lr_initial": {"type": "number", "exclusiveMinimum": 0},
        "lr_decay_factor": {"type": "number", "exclusiveMinimum": 0,
                            "maximum": 1},
        "lr_decay_every": _POSINT,
        "prior_std": {"type": "number", "exclusiveMinimum": 0},
        "beta_scales_weight_kl": {"type": "boolean"},
        "early_stop_patience": {"anyOf": [{"type": "null"}, _POSINT]},
        "seed": _SEED,
    },
}

_OPTIMIZER = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "population_size": {"type": "integer", "minimum": 4},
        "generations": {"type": "integer", "minimum": 0},
        "de_weight": {"type": "number", "exclusiveMinimum": 0,
                      "exclusiveMaximum": 2},
        "crossover_rate": {"type": "number", "exclusiveMinimum": 0,
                           "maximum": 1},
        "gate_threshold": {"type": "number", "minimum": 0},
        "gate_quantile": {"type": "number", "minimum": 0, "maximum": 1},
        "mc_samples": {"type": "integer", "minimum": 2},
        "seed": _SEED,
    },
}

CONFIG_SCHEMAS = {
    "generate": {
        "type": "object",
        "additionalProperties": False,
        "required": ["name", "n", "objective", "field"],
        "properties": {
            "name": _NAME,
            "n": _POSINT,
            "objective": {"enum": ["wcf", "npv"]},
            "sampler": {"enum": ["uniform", "optimizer-trace"]},
            "noise_std": {"type": "number", "minimum": 0},
            "target_scale": {"type": "number", "exclusiveMinimum": 0},
            "seed": _SEED,
            "field": _FIELD_REF,
            "econ": _ECON,
        },
    },
    "train": {
        "type": "object",
        "additionalProperties": False,
        "required": ["name", "dataset", "model"],
        "properties": {
            "name": _NAME,
            "dataset": {"type": "string"},
            "model": _MODEL,
            "seed": _SEED,
        },
    },
    "evaluate": {
        "type": "object",
        "additionalProperties": False,
        "required": ["name", "checkpoint", "dataset"],
        "properties": {
            "name": _NAME,
            "checkpoint": {"type": "string"},
            "dataset": {"type": "string"},
            "split": {"enum": ["holdout", "train"]},
            "mc_samples": {"type": "integer", "minimum": 2},
            "seed": _SEED,
            "report_original_units": {"type": "boolean"},
        },
    },
    "embed": {
        "type": "object",
        "additionalProperties": False,
        "required": ["name", "checkpoint", "dataset", "methods"],
        "properties": {
            "name": _NAME,
            "checkpoint": {"type": "string"},
            "dataset": {"type": "string"},
            "methods": {"type": "array", "minItems": 1,
                        "items": {"enum": ["pca", "tsne"]},
                        "uniqueItems": True},
            "split": {"enum": ["holdout", "train", "all"]},
            "subsample": _POSINT,
            "perplexity": {"type": "number", "minimum": 5},
            "iterations": _POSINT,
            "seed": _SEED,
        },
    },
    "optimize": {
        "type": "object",
        "additionalProperties": False,
        "required": ["name", "checkpoint", "field", "objective", "optimizer"],
        "properties": {
            "name": _NAME,
            "checkpoint": {"type": "string"},
            "field": _FIELD_REF,
            "objective": {"enum": ["wcf", "npv"]},
            "optimizer": _OPTIMIZER,
            "econ": _ECON,
        },
    },
    "repro": {
        "type": "object",
        "additionalProperties": False,
        "required": ["name"],
        "properties": {
            "name": _NAME,
            "preset": {"enum": ["small"]},
            "n": _POSINT,
            "objective": {"enum": ["wcf", "npv"]},
            "field_seed": _SEED,
            "noise_std": {"type": "number", "minimum": 0},
            "latent_dim": _POSINT,
            "betas": {"type": "array", "minItems": 1,
                      "items": {"type": "number", "minimum": 0}},
            "epochs": {"type": "integer", "minimum": 0},
            "mc_samples": {"type": "integer", "minimum": 2},
            "tsne_points": _POSINT,
            "tsne_iterations": _POSINT,
            "population_size": {"type": "integer", "minimum": 4},
            "generations": {"type": "integer", "minimum": 0},
            "seed": _SEED,
        },
    },
}

_PROVENANCE = {
    "type": "object",
    "additionalProperties": False,
    "required": ["config_sha256", "seed", "tool_version"],
    "properties": {
        "config_sha256": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        "seed": _SEED,
        "tool_version": {"type": "string"},
    },
}

_PER_GENERATION = {
    "type": "array",
    "items": {
        "type": "object",
        "additionalProperties": False,
        "required": ["generation", "best", "mean", "simulator_calls",
                     "surrogate_accepts"],
        "properties": {
            "generation": {"type": "integer", "minimum": 0},
            "best": {"type": "number"},
            "mean": {"type": "number"},
            "simulator_calls": {"type": "integer", "minimum": 0},
            "surrogate_accepts": {"type": "integer", "minimum": 0},
        },
    },
}

_COORD3 = {"type": "array", "minItems": 3, "maxItems": 3,
           "items": {"type": "number"}}

OUTPUT_SCHEMAS = {
    "dataset_sidecar": {
        "type": "object",
        "additionalProperties": False,
        "required": ["format_version", "csv_columns", "n", "meta", "bounds",
                     "normalization", "train_idx", "holdout_idx"],
        "properties": {
            "format_version": {"const": 1},
            "csv_columns": {"const": 91},
            "n": {"type": "integer", "minimum": 1},
            "meta": {
                "type": "object",
                "additionalProperties": False,
                "required": ["objective", "sampler", "noise_std", "seed",
                             "field_seed", "n", "target_scale", "econ"],
                "properties": {
                    "objective": {"enum": ["wcf", "npv"]},
                    "sampler": {"enum": ["uniform", "optimizer-trace"]},
                    "noise_std": {"type": "number", "minimum": 0},
                    "seed": _SEED,
                    "field_seed": _SEED,
                    "n": {"type": "integer", "minimum": 1},
                    "target_scale": {"type": "number", "exclusiveMinimum": 0},
                    "econ": {"anyOf": [{"type": "null"}, {"type": "object"}]},
                },
            },
            "bounds": {"type": "array", "minItems": 90, "maxItems": 90,
                       "items": {"type": "array", "minItems": 2, "maxItems": 2,
                                 "items": {"type": "number"}}},
            "normalization": {
                "type": "object",
                "additionalProperties": False,
                "required": ["feature_mean", "feature_std", "target_mean",
                             "target_std", "scaled"],
                "properties": {
                    "feature_mean": {"type": "array",
                                     "items": {"type": "number"}},
                    "feature_std": {"type": "array",
                                    "items": {"type": "number"}},
                    "target_mean": {"type": "number"},
                    "target_std": {"type": "number"},
                    "scaled": {"type": "array",
                               "items": {"type": "integer"}},
                },
            },
            "train_idx": {"type": "array",
                          "items": {"type": "integer", "minimum": 0}},
            "holdout_idx": {"type": "array",
                            "items": {"type": "integer", "minimum": 0}},
        },
    },
    "field": {
        "type": "object",
        "additionalProperties": False,
        "required": ["format_version", "bump_centers", "bump_amps",
                     "bump_radii", "existing_heels", "existing_toes", "p0",
                     "decline", "tau_w", "rate_coef", "seed"],
        "properties": {
            "format_version": {"const": 1},
            "bump_centers": {"type": "array", "items": _COORD3},
            "bump_amps": {"type": "array",
                          "items": {"type": "number", "exclusiveMinimum": 0}},
            "bump_radii": {"type": "array",
                           "items": {"type": "number", "exclusiveMinimum": 0}},
            "existing_heels": {"type": "array", "minItems": 15, "maxItems": 15,
                               "items": _COORD3},
            "existing_toes": {"type": "array", "minItems": 15, "maxItems": 15,
                              "items": _COORD3},
            "p0": {"type": "number", "exclusiveMinimum": 0},
            "decline": {"type": "number", "minimum": 0},
            "tau_w": {"type": "number", "exclusiveMinimum": 0},
            "rate_coef": {"type": "number", "exclusiveMinimum": 0},
            "seed": _SEED,
        },
    },
    "train_metrics": {
        "type": "object",
        "additionalProperties": False,
        "required": ["format_version", "kind", "name", "model_config",
                     "dataset", "epochs_run", "final", "provenance"],
        "properties": {
            "format_version": {"const": 1},
            "kind": {"const": "train_metrics"},
            "name": {"type": "string"},
            "model_config": {"type": "object"},
            "dataset": {"type": "string"},
            "epochs_run": {"type": "integer", "minimum": 0},
            "final": {
                "type": "object",
                "additionalProperties": False,
                "required": ["train_mse", "train_r2", "val_mse", "val_r2"],
                "properties": {k: {"type": "number"} for k in
                               ("train_mse", "train_r2", "val_mse", "val_r2")},
            },
            "provenance": _PROVENANCE,
        },
    },
    "evaluation": {
        "type": "object",
        "additionalProperties": False,
        "required": ["format_version", "kind", "name", "checkpoint", "dataset",
                     "split", "mc_samples", "mse", "r2", "mse_original_units",
                     "std_summary", "per_sample", "crossplot_csv",
                     "provenance"],
        "properties": {
            "format_version": {"const": 1},
            "kind": {"const": "evaluation"},
            "name": {"type": "string"},
            "checkpoint": {"type": "string"},
            "dataset": {"type": "string"},
            "split": {"type": "string"},
            "mc_samples": {"type": "integer", "minimum": 2},
            "mse": {"type": "number", "minimum": 0},
            "r2": {"type": "number", "maximum": 1},
            "mse_original_units": {"type": "number", "minimum": 0},
            "std_summary": {
                "type": "object",
                "additionalProperties": False,
                "required": ["min", "mean", "max"],
                "properties": {k: {"type": "number"} for k in
                               ("min", "mean", "max")},
            },
            "per_sample": {"type": "array",
                           "items": {"type": "array", "minItems": 3,
                                     "maxItems": 3,
                                     "items": {"type": "number"}}},
            "crossplot_csv": {"type": "string"},
            "provenance": _PROVENANCE,
        },
    },
    "projection_meta": {
        "type": "object",
        "additionalProperties": False,
        "required": ["format_version", "kind", "method", "params", "seed",
                     "checkpoint_sha256", "dataset", "n_points", "csv",
                     "info", "provenance"],
        "properties": {
            "format_version": {"const": 1},
            "kind": {"const": "projection_meta"},
            "method": {"enum": ["pca", "tsne"]},
            "params": {"type": "object"},
            "seed": {"anyOf": [{"type": "null"}, _SEED]},
            "checkpoint_sha256": {"type": "string",
                                  "pattern": "^[0-9a-f]{64}$"},
            "dataset": {"type": "string"},
            "n_points": {"type": "integer", "minimum": 1},
            "csv": {"type": "string"},
            "info": {"type": "object"},
            "provenance": _PROVENANCE,
        },
    },
    "optimization_report": {
        "type": "object",
        "additionalProperties": False,
        "required": ["format_version", "kind", "name", "objective",
                     "optimizer_config", "gate_threshold_used", "best",
                     "counts", "per_generation", "trace_csv", "provenance"],
        "properties": {
            "format_version": {"const": 1},
            "kind": {"const": "optimization_report"},
            "name": {"type": "string"},
            "objective": {"enum": ["wcf", "npv"]},
            "optimizer_config": {"type": "object"},
            "gate_threshold_used": {"type": "number", "minimum": 0},
            "best": {
                "type": "object",
                "additionalProperties": False,
                "required": ["decision", "true_objective"],
                "properties": {
                    "decision": {"type": "array", "minItems": 90,
                                 "maxItems": 90, "items": {"type": "number"}},
                    "true_objective": {"type": "number"},
                },
            },
            "counts": {
                "type": "object",
                "additionalProperties": False,
                "required": ["simulator_calls", "surrogate_accepts",
                             "total_evaluations"],
                "properties": {k: {"type": "integer", "minimum": 0} for k in
                               ("simulator_calls", "surrogate_accepts",
                                "total_evaluations")},
            },
            "per_generation": _PER_GENERATION,
            "trace_csv": {"type": "string"},
            "provenance": _PROVENANCE,
        },
    },
    "repro_manifest": {
        "type": "object",
        "additionalProperties": False,
        "required": ["format_version", "kind", "name", "steps", "artifacts",
                     "provenance"],
        "properties": {
            "format_version": {"const": 1},
            "kind": {"const": "repro_manifest"},
            "name": {"type": "string"},
            "steps": {"type": "array", "items": {"type": "string"}},
            "artifacts": {"type": "array", "items": {"type": "string"}},
            "provenance": _PROVENANCE,
        },
    },
}


def validate_config(doc: dict, kind: str) -> dict:
    try:
        jsonschema.validate(doc, CONFIG_SCHEMAS[kind])
    except jsonschema.ValidationError as e:
        raise ConfigError(f"invalid {kind} config: {e.message}") from e
    return doc


def validate_output(doc: dict, kind: str) -> dict:
    try:
        jsonschema.validate(doc, OUTPUT_SCHEMAS[kind])
    except jsonschema.ValidationError as e:
        raise DataError(f"{kind} document failed schema: {e.message}") from e
    return doc
