"""Differential evolution primitives (rand/1/bin, maximization).

Kept free of any surrogate/gating logic so the dataset generator can run
short searches with them; the gated optimizer composes them with its own
evaluation strategy.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError

MIN_POPULATION = 4  # rand/1 needs three distinct partners per candidate


def de_init(bounds: np.ndarray, pop_size: int,
            rng: np.random.Generator) -> np.ndarray:
    """Uniform random population within the (dim, 2) bounds box."""
    if pop_size < MIN_POPULATION:
        raise ConfigError(f"population must be >= {MIN_POPULATION}, got {pop_size}")
    return rng.uniform(bounds[:, 0], bounds[:, 1],
                       size=(pop_size, bounds.shape[0]))


def de_trials(population: np.ndarray, bounds: np.ndarray, f_weight: float,
              crossover_rate: float, rng: np.random.Generator) -> np.ndarray:
    """Trial population: v = a + F (b - c) with distinct partners, binomial
    crossover with one guaranteed mutated coordinate, clamped to bounds."""
    pop, dim = population.shape
    if pop < MIN_POPULATION:
        raise ConfigError(f"population must be >= {MIN_POPULATION}, got {pop}")
    if not 0.0 < crossover_rate <= 1.0:
        raise ConfigError(f"crossover rate must be in (0,1], got {crossover_rate}")
    if not 0.0 <= f_weight < 2.0:
        raise ConfigError(f"differential weight must be in [0,2), got {f_weight}")
    trials = np.empty_like(population)
    for i in range(pop):
        others = np.delete(np.arange(pop), i)
        a, b, c = population[rng.choice(others, size=3, replace=False)]
        mutant = a + f_weight * (b - c)
        cross = rng.random(dim) < crossover_rate
        cross[rng.integers(dim)] = True
        trials[i] = np.where(cross, mutant, population[i])
    return np.clip(trials, bounds[:, 0], bounds[:, 1])


def de_select(population: np.ndarray, values: np.ndarray,
              trials: np.ndarray, trial_values: np.ndarray):
    """Greedy selection, maximizing; ties go to the trial vector."""
    better = trial_values >= values
    new_pop = np.where(better[:, None], trials, population)
    new_vals = np.where(better, trial_values, values)
    return new_pop, new_vals, better


def de_step(population: np.ndarray, values: np.ndarray, evaluate,
            bounds: np.ndarray, f_weight: float, crossover_rate: float,
            rng: np.random.Generator):
    """One generation: mutate+cross, evaluate trials, select. Returns
    (population, values, trials, trial_values)."""
    trials = de_trials(population, bounds, f_weight, crossover_rate, rng)
    trial_values = np.asarray(evaluate(trials), dtype=np.float64)
    new_pop, new_vals, _ = de_select(population, values, trials, trial_values)
    return new_pop, new_vals, trials, trial_values
