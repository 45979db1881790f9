import numpy as np
import pytest

from fieldvae import proxy
from fieldvae.de import de_init, de_select, de_step, de_trials
from fieldvae.errors import ConfigError
from fieldvae.optimize import OptimizerConfig, gated_evaluate, optimize
from fieldvae.utils import rng_from_seed


class TestDeOperators:
    def test_population_too_small_rejected(self):
        bounds = np.tile([0.0, 1.0], (4, 1))
        with pytest.raises(ConfigError):
            de_init(bounds, 3, rng_from_seed(0))
        with pytest.raises(ConfigError):
            de_trials(np.zeros((3, 4)), bounds, 0.5, 0.9, rng_from_seed(0))

    def test_degenerate_operator_changes_at_most_one_coordinate(self):
        # F=0 makes the mutant a population member; CR ~ 0 crosses only the
        # forced coordinate, which takes that member's value
        rng = rng_from_seed(1)
        bounds = np.tile([-5.0, 5.0], (6, 1))
        pop = de_init(bounds, 8, rng)
        trials = de_trials(pop, bounds, f_weight=0.0, crossover_rate=1e-12,
                           rng=rng)
        for parent, trial in zip(pop, trials):
            diffs = np.flatnonzero(parent != trial)
            assert len(diffs) <= 1
            if len(diffs) == 1:
                assert trial[diffs[0]] in pop[:, diffs[0]]

    def test_selection_keeps_better_maximizing(self):
        pop = np.zeros((4, 2))
        trials = np.ones((4, 2))
        vals = np.array([1.0, 3.0, 2.0, 2.0])
        tvals = np.array([2.0, 1.0, 2.0, 5.0])
        new_pop, new_vals, accepted = de_select(pop, vals, trials, tvals)
        np.testing.assert_array_equal(new_vals, [2.0, 3.0, 2.0, 5.0])
        np.testing.assert_array_equal(accepted, [True, False, True, True])

    def test_sphere_convergence(self):
        # maximize -sum(x^2): 40 members, 100 generations
        dim = 6
        bounds = np.tile([-5.0, 5.0], (dim, 1))
        rng = rng_from_seed(2)
        pop = de_init(bounds, 40, rng)

        def evaluate(x):
            return -np.sum(x ** 2, axis=1)

        vals = evaluate(pop)
        initial_best_sse = -vals.max()
        for _ in range(100):
            pop, vals, _, _ = de_step(pop, vals, evaluate, bounds, 0.7, 0.9, rng)
        assert -vals.max() < 1e-3 * initial_best_sse

    def test_trials_respect_bounds(self):
        bounds = np.tile([0.0, 1.0], (5, 1))
        rng = rng_from_seed(3)
        pop = de_init(bounds, 10, rng)
        for _ in range(20):
            trials = de_trials(pop, bounds, 1.9, 0.9, rng)
            assert np.all(trials >= 0.0) and np.all(trials <= 1.0)
            pop = trials

    def test_same_seed_same_trajectory(self):
        bounds = np.tile([-2.0, 2.0], (4, 1))

        def run():
            rng = rng_from_seed(4)
            pop = de_init(bounds, 12, rng)
            vals = -np.sum(pop ** 2, axis=1)
            for _ in range(10):
                pop, vals, _, _ = de_step(
                    pop, vals, lambda x: -np.sum(x ** 2, axis=1),
                    bounds, 0.7, 0.9, rng)
            return pop, vals

        (pa, va), (pb, vb) = run(), run()
        np.testing.assert_array_equal(pa, pb)
        np.testing.assert_array_equal(va, vb)


class TestOptimizerConfig:
    def test_requires_exactly_one_gate_form(self):
        with pytest.raises(ConfigError):
            OptimizerConfig().validate()
        with pytest.raises(ConfigError):
            OptimizerConfig(gate_threshold=0.1, gate_quantile=0.2).validate()
        OptimizerConfig(gate_threshold=0.1).validate()
        OptimizerConfig(gate_quantile=0.2).validate()

    def test_bounds_on_parameters(self):
        with pytest.raises(ConfigError):
            OptimizerConfig(population_size=3, gate_threshold=0.0).validate()
        with pytest.raises(ConfigError):
            OptimizerConfig(crossover_rate=0.0, gate_threshold=0.0).validate()
        with pytest.raises(ConfigError):
            OptimizerConfig(de_weight=2.0, gate_threshold=0.0).validate()


class TestGatedEvaluate:
    def test_threshold_zero_equals_ungated(self, field, trained_model):
        rng = rng_from_seed(5)
        bounds = proxy.decision_bounds()
        cands = rng.uniform(bounds[:, 0], bounds[:, 1], size=(16, 90))

        def sim(d):
            return proxy.objective_batch(d, field, "wcf")

        values, sources, n_sim, n_acc = gated_evaluate(
            cands, trained_model, sim, threshold=0.0, mc_samples=16, seed=0)
        assert n_sim == 16 and n_acc == 0
        assert all(s == "simulator" for s in sources)
        np.testing.assert_array_equal(values, sim(cands))

    def test_infinite_threshold_never_simulates(self, field, trained_model):
        rng = rng_from_seed(6)
        bounds = proxy.decision_bounds()
        cands = rng.uniform(bounds[:, 0], bounds[:, 1], size=(16, 90))
        calls = []

        def sim(d):
            calls.append(len(d))
            return proxy.objective_batch(d, field, "wcf")

        values, sources, n_sim, n_acc = gated_evaluate(
            cands, trained_model, sim, threshold=np.inf, mc_samples=16, seed=0)
        assert n_sim == 0 and n_acc == 16 and not calls
        assert all(s == "surrogate" for s in sources)

    def test_intermediate_threshold_mixes_sources(self, field, trained_model,
                                                  wcf_dataset):
        # half in-distribution, half far outside the training box
        rng = rng_from_seed(7)
        bounds = proxy.decision_bounds()
        inside = rng.uniform(bounds[:, 0], bounds[:, 1], size=(12, 90))
        kind = wcf_dataset.normalizer
        far = kind.inverse_features(rng.uniform(4, 8, size=(12, 90)))
        cands = np.concatenate([inside, far])

        def sim(d):
            return proxy.objective_batch(d, field, "wcf")

        x_in = kind.transform_features(inside)
        from fieldvae.uncertainty import mc_predict_batch
        _, stds, _ = mc_predict_batch(trained_model, x_in, 64, seed=1)
        threshold = float(np.quantile(stds, 0.9))
        _, sources, n_sim, n_acc = gated_evaluate(
            cands, trained_model, sim, threshold=threshold, mc_samples=64,
            seed=1)
        assert 0 < n_sim < 24 and 0 < n_acc < 24

    def test_monotone_accepts_in_threshold(self, field, trained_model):
        rng = rng_from_seed(8)
        bounds = proxy.decision_bounds()
        cands = rng.uniform(bounds[:, 0], bounds[:, 1], size=(20, 90))

        def sim(d):
            return proxy.objective_batch(d, field, "wcf")

        sims = []
        for thr in (0.0, 0.05, 0.1, 0.5, np.inf):
            _, _, n_sim, _ = gated_evaluate(cands, trained_model, sim,
                                            threshold=thr, mc_samples=32,
                                            seed=2)
            sims.append(n_sim)
        assert sims == sorted(sims, reverse=True)


class TestOptimize:
    def _config(self, **kw):
        base = dict(population_size=12, generations=4, mc_samples=8, seed=0)
        base.update(kw)
        return OptimizerConfig(**base)

    def test_zero_generations_returns_verified_initial_best(self, field,
                                                            trained_model):
        cfg = self._config(generations=0, gate_threshold=0.0)
        stats = optimize(field, "wcf", trained_model, cfg)
        assert stats.simulator_calls == 13  # 12 initial + 1 verification
        assert stats.surrogate_accepts == 0
        assert stats.total_evaluations == 13
        direct = proxy.objective_batch(stats.best_decision[None, :], field,
                                       "wcf")[0]
        assert stats.best_true_objective == pytest.approx(direct)

    def test_threshold_zero_accounting(self, field, trained_model):
        cfg = self._config(gate_threshold=0.0)
        stats = optimize(field, "wcf", trained_model, cfg)
        assert stats.surrogate_accepts == 0
        assert stats.simulator_calls == 12 * 5 + 1
        assert stats.total_evaluations == stats.simulator_calls

    def test_evaluation_count_identity_per_generation(self, field,
                                                      trained_model):
        cfg = self._config(gate_quantile=0.5)
        trace = []
        stats = optimize(field, "wcf", trained_model, cfg, trace=trace)
        assert stats.simulator_calls + stats.surrogate_accepts \
            == stats.total_evaluations
        assert len(trace) == stats.total_evaluations
        for gen in stats.per_generation:
            assert gen.simulator_calls + gen.surrogate_accepts \
                <= stats.total_evaluations

    def test_best_is_simulator_verified(self, field, trained_model):
        cfg = self._config(gate_quantile=0.9)
        stats = optimize(field, "wcf", trained_model, cfg)
        direct = proxy.objective_batch(stats.best_decision[None, :], field,
                                       "wcf")[0]
        assert stats.best_true_objective == pytest.approx(direct)

    def test_deterministic_per_seed(self, field, trained_model):
        cfg = self._config(gate_quantile=0.5, seed=3)
        a = optimize(field, "wcf", trained_model, cfg)
        b = optimize(field, "wcf", trained_model, cfg)
        np.testing.assert_array_equal(a.best_decision, b.best_decision)
        assert a.best_true_objective == b.best_true_objective
        assert a.simulator_calls == b.simulator_calls

    def test_decisions_stay_in_bounds(self, field, trained_model):
        cfg = self._config(gate_quantile=0.5, generations=6)
        trace = []
        optimize(field, "wcf", trained_model, cfg, trace=trace)
        bounds = proxy.decision_bounds()
        for decision, _, _ in trace:
            assert np.all(decision >= bounds[:, 0] - 1e-12)
            assert np.all(decision <= bounds[:, 1] + 1e-12)
