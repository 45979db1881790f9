"""Uncertainty-aware VAE regression surrogates for field development
optimization: a from-scratch dense-network engine, mean-field and
full-covariance latent heads, variational dense layers, Monte Carlo
dropout prediction with an accept-or-simulate gate, a synthetic field
proxy with WCF/NPV objectives, a gated differential-evolution optimizer,
and latent-embedding projection tools.
"""

from .checkpoint import load_model, save_model
from .data import LabeledDataset, Normalizer, generate_dataset, load_dataset, save_dataset
from .model import (JointLossBreakdown, Model, ModelConfig, TrainingHistory,
                    build_model, joint_loss, train)
from .optimize import OptimizerConfig, OptRunStats, gated_evaluate, optimize
from .proxy import (EconomicParams, FluidVolumes, ProxyField, decision_bounds,
                    npv, simulate, wcf)
from .uncertainty import (GateDecision, UncertainPrediction, gate, mc_predict,
                          mc_predict_batch, mse, r2_score)

__version__ = "0.1.0"

__all__ = [
    "EconomicParams", "FluidVolumes", "GateDecision", "JointLossBreakdown",
    "LabeledDataset", "Model", "ModelConfig", "Normalizer", "OptRunStats",
    "OptimizerConfig", "ProxyField", "TrainingHistory", "UncertainPrediction",
    "build_model", "decision_bounds", "gate", "gated_evaluate",
    "generate_dataset", "joint_loss", "load_dataset", "load_model",
    "mc_predict", "mc_predict_batch", "mse", "npv", "optimize", "r2_score",
    "save_dataset", "save_model", "simulate", "train", "wcf",
]
