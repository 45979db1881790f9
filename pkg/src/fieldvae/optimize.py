"""Uncertainty-gated differential-evolution field optimizer.

Each generation's trial candidates get a cheap surrogate prediction with
an MC uncertainty estimate; candidates whose predictive std clears the
gate threshold use the (denormalized) surrogate mean, the rest fall back
to the proxy simulator. The initial population is always simulated, and
the reported best decision is re-verified with a true simulator call, so
the headline objective is never a surrogate estimate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import proxy
from .de import de_init, de_select, de_trials
from .errors import ConfigError
from .model import Model
from .uncertainty import mc_predict_batch
from .utils import rng_from_seed


@dataclass
class OptimizerConfig:
    population_size: int = 60
    generations: int = 50
    de_weight: float = 0.7
    crossover_rate: float = 0.9
    gate_threshold: float | None = None   # absolute, standardized-target units
    gate_quantile: float | None = None    # fraction of most-uncertain cases simulated
    mc_samples: int = 100
    seed: int = 0

    def validate(self) -> "OptimizerConfig":
        if self.population_size < 4:
            raise ConfigError("population_size must be >= 4")
        if self.generations < 0:
            raise ConfigError("generations must be >= 0")
        if not 0.0 < self.crossover_rate <= 1.0:
            raise ConfigError("crossover_rate must be in (0,1]")
        if not 0.0 < self.de_weight < 2.0:
            raise ConfigError("de_weight must be in (0,2)")
        if (self.gate_threshold is None) == (self.gate_quantile is None):
            raise ConfigError("set exactly one of gate_threshold or "
                              "gate_quantile")
        if self.gate_threshold is not None and self.gate_threshold < 0:
            raise ConfigError("gate_threshold must be >= 0")
        if self.gate_quantile is not None \
                and not 0.0 <= self.gate_quantile <= 1.0:
            raise ConfigError("gate_quantile must be in [0,1]")
        if self.mc_samples < 2:
            raise ConfigError("mc_samples must be >= 2")
        return self

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizerConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown optimizer config keys: {sorted(unknown)}")
        return cls(**d).validate()


@dataclass
class GenerationStats:
    generation: int
    best: float
    mean: float
    simulator_calls: int
    surrogate_accepts: int


@dataclass
class OptRunStats:
    best_decision: np.ndarray
    best_true_objective: float
    simulator_calls: int
    surrogate_accepts: int
    total_evaluations: int
    gate_threshold_used: float
    per_generation: list[GenerationStats] = field(default_factory=list)


def gated_evaluate(candidates: np.ndarray, model: Model, simulator_fn,
                   threshold: float, mc_samples: int, seed: int):
    """Evaluate candidates through the gate.

    Returns (values, sources, n_simulated, n_accepted); sources is an array
    of 'surrogate'/'simulator' tags. The surrogate consumes normalized
    features and its accepted means are denormalized to objective units.
    """
    if model.normalizer is None:
        raise ConfigError("surrogate model carries no normalization "
                          "statistics; train it through the pipeline")
    norm = model.normalizer
    x_n = norm.transform_features(candidates)
    means, stds, _ = mc_predict_batch(model, x_n, mc_samples, seed)
    accept = stds <= threshold
    values = np.empty(candidates.shape[0])
    values[accept] = norm.inverse_target(means[accept])
    if np.any(~accept):
        values[~accept] = simulator_fn(candidates[~accept])
    sources = np.where(accept, "surrogate", "simulator")
    return values, sources, int(np.sum(~accept)), int(np.sum(accept))


def optimize(fld: proxy.ProxyField, objective: str, model: Model,
             config: OptimizerConfig,
             econ: proxy.EconomicParams | None = None,
             trace: list | None = None) -> OptRunStats:
    """Run gated DE on the proxy objective (maximizing).

    With gate_quantile set, the absolute threshold is resolved against the
    surrogate's predictive stds on the initial population, so a run is
    self-contained. Pass a list as ``trace`` to collect one
    (decision, value, source) record per evaluation.
    """
    config.validate()
    bounds = proxy.decision_bounds()
    rng = rng_from_seed(config.seed)
    mc_seed_root = np.random.SeedSequence(config.seed).spawn(1)[0]
    mc_seeds = [int(s.generate_state(1)[0])
                for s in mc_seed_root.spawn(config.generations + 1)]

    def simulator_fn(d):
        return proxy.objective_batch(d, fld, objective, econ)

    pop = de_init(bounds, config.population_size, rng)
    values = simulator_fn(pop)
    sim_calls = config.population_size
    accepts = 0
    _record(trace, pop, values, "simulator")

    if config.gate_quantile is not None:
        norm = model.normalizer
        if norm is None:
            raise ConfigError("surrogate model carries no normalization "
                              "statistics")
        _, stds, _ = mc_predict_batch(model, norm.transform_features(pop),
                                      config.mc_samples, mc_seeds[0])
        threshold = float(np.quantile(stds, 1.0 - config.gate_quantile))
    else:
        threshold = float(config.gate_threshold)

    stats = OptRunStats(best_decision=pop[np.argmax(values)].copy(),
                        best_true_objective=float(np.max(values)),
                        simulator_calls=sim_calls, surrogate_accepts=0,
                        total_evaluations=config.population_size,
                        gate_threshold_used=threshold)
    stats.per_generation.append(GenerationStats(
        generation=0, best=float(np.max(values)), mean=float(np.mean(values)),
        simulator_calls=sim_calls, surrogate_accepts=0))

    for gen in range(1, config.generations + 1):
        trials = de_trials(pop, bounds, config.de_weight,
                           config.crossover_rate, rng)
        t_values, t_sources, n_sim, n_acc = gated_evaluate(
            trials, model, simulator_fn, threshold, config.mc_samples,
            mc_seeds[gen])
        sim_calls += n_sim
        accepts += n_acc
        _record(trace, trials, t_values, t_sources)
        pop, values, _ = de_select(pop, values, trials, t_values)
        stats.per_generation.append(GenerationStats(
            generation=gen, best=float(np.max(values)),
            mean=float(np.mean(values)),
            simulator_calls=sim_calls, surrogate_accepts=accepts))

    best_idx = int(np.argmax(values))
    best = pop[best_idx].copy()
    best_true = float(simulator_fn(best[None, :])[0])
    sim_calls += 1
    _record(trace, best[None, :], np.array([best_true]), "simulator")

    stats.best_decision = best
    stats.best_true_objective = best_true
    stats.simulator_calls = sim_calls
    stats.surrogate_accepts = accepts
    stats.total_evaluations = sim_calls + accepts
    return stats


def _record(trace, decisions, values, sources) -> None:
    if trace is None:
        return
    if isinstance(sources, str):
        sources = [sources] * len(values)
    for d, v, s in zip(decisions, values, sources):
        trace.append((np.array(d), float(v), str(s)))
