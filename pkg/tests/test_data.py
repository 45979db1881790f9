import numpy as np
import pytest
from scipy import stats

from fieldvae import proxy
from fieldvae.data import (Normalizer, generate_dataset, load_dataset,
                           save_dataset)
from fieldvae.errors import ConfigError, DataError


class TestNormalizer:
    def test_round_trip_identity(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-5, 5, size=(200, 7))
        y = rng.normal(3, 2, size=200)
        norm = Normalizer.fit(x, y)
        np.testing.assert_allclose(norm.inverse_features(norm.transform_features(x)),
                                   x, atol=1e-12)
        np.testing.assert_allclose(norm.inverse_target(norm.transform_target(y)),
                                   y, atol=1e-12)

    def test_train_columns_centered(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(0, 100, size=(500, 4))
        norm = Normalizer.fit(x, rng.normal(size=500))
        xn = norm.transform_features(x)
        assert np.all(np.abs(xn.mean(axis=0)) < 1e-10)
        np.testing.assert_allclose(xn.std(axis=0), 1.0, atol=1e-9)

    def test_constant_feature_passes_through_with_warning(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(50, 3))
        x[:, 1] = 7.5
        with pytest.warns(UserWarning, match="zero-variance"):
            norm = Normalizer.fit(x, rng.normal(size=50))
        xn = norm.transform_features(x)
        np.testing.assert_array_equal(xn[:, 1], x[:, 1])
        assert not norm.scaled[1] and norm.scaled[0] and norm.scaled[2]

    def test_constant_target_rejected(self):
        rng = np.random.default_rng(3)
        with pytest.raises(DataError):
            Normalizer.fit(rng.normal(size=(20, 2)), np.full(20, 1.0))

    def test_dict_round_trip(self):
        rng = np.random.default_rng(4)
        norm = Normalizer.fit(rng.normal(size=(30, 3)), rng.normal(size=30))
        again = Normalizer.from_dict(norm.to_dict())
        assert norm.close_to(again)


class TestGenerateDataset:
    def test_single_row_reproducible(self, field):
        a = generate_dataset(1, field, "wcf", seed=5)
        b = generate_dataset(1, field, "wcf", seed=5)
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.targets, b.targets)
        assert a.n == 1

    def test_uniform_marginals(self, field):
        ds = generate_dataset(10_000, field, "wcf", sampler="uniform", seed=6)
        bounds = proxy.decision_bounds()
        for col in (0, 17, 18, 45, 89):
            lo, hi = bounds[col]
            ks = stats.kstest(ds.features[:, col], "uniform",
                              args=(lo, hi - lo)).statistic
            assert ks < 0.05

    def test_optimizer_trace_skew(self, field):
        ds = generate_dataset(6000, field, "wcf", sampler="optimizer-trace",
                              seed=7)
        y = ds.targets
        lo, hi = y.min(), y.max()
        top_decile_fraction = float(np.mean(y >= lo + 0.9 * (hi - lo)))
        assert top_decile_fraction > 0.10

    def test_split_is_80_20(self, field):
        ds = generate_dataset(1000, field, "npv", seed=8)
        assert len(ds.holdout_idx) == 200
        assert len(ds.train_idx) == 800
        together = np.sort(np.concatenate([ds.train_idx, ds.holdout_idx]))
        np.testing.assert_array_equal(together, np.arange(1000))

    def test_label_noise_is_per_row(self, field):
        clean = generate_dataset(50, field, "wcf", seed=9)
        noisy = generate_dataset(50, field, "wcf", noise_std=0.05, seed=9)
        np.testing.assert_array_equal(clean.features, noisy.features)
        assert np.all(clean.targets != noisy.targets)

    def test_bad_args_rejected(self, field):
        with pytest.raises(ConfigError):
            generate_dataset(0, field, "wcf")
        with pytest.raises(ConfigError):
            generate_dataset(10, field, "volume")
        with pytest.raises(ConfigError):
            generate_dataset(10, field, "wcf", sampler="sobol")


class TestPersistence:
    def test_round_trip_bit_exact(self, field, tmp_path):
        ds = generate_dataset(120, field, "npv", noise_std=0.02, seed=10)
        csv, sidecar = tmp_path / "d.csv", tmp_path / "d.json"
        save_dataset(ds, csv, sidecar)
        loaded = load_dataset(csv, sidecar)
        np.testing.assert_array_equal(loaded.features, ds.features)
        np.testing.assert_array_equal(loaded.targets, ds.targets)
        np.testing.assert_array_equal(loaded.train_idx, ds.train_idx)
        assert loaded.normalizer.close_to(ds.normalizer, tol=0.0)
        assert loaded.meta["objective"] == "npv"

    def test_save_is_byte_stable(self, field, tmp_path):
        ds = generate_dataset(60, field, "wcf", seed=11)
        paths = [(tmp_path / f"{i}.csv", tmp_path / f"{i}.json") for i in (0, 1)]
        for csv, sidecar in paths:
            save_dataset(ds, csv, sidecar)
        assert paths[0][0].read_bytes() == paths[1][0].read_bytes()
        assert paths[0][1].read_bytes() == paths[1][1].read_bytes()

    def test_header_contract(self, field, tmp_path):
        ds = generate_dataset(3, field, "wcf", seed=12)
        csv, sidecar = tmp_path / "d.csv", tmp_path / "d.json"
        save_dataset(ds, csv, sidecar)
        lines = csv.read_text().splitlines()
        assert lines[0] == ",".join([f"x{i:03d}" for i in range(90)] + ["y"])
        assert len(lines) == 4

    def test_corrupt_sidecar_raises_data_error(self, field, tmp_path):
        ds = generate_dataset(5, field, "wcf", seed=13)
        csv, sidecar = tmp_path / "d.csv", tmp_path / "d.json"
        save_dataset(ds, csv, sidecar)
        sidecar.write_text("{broken")
        with pytest.raises(DataError):
            load_dataset(csv, sidecar)

    def test_row_count_mismatch_raises(self, field, tmp_path):
        ds = generate_dataset(5, field, "wcf", seed=14)
        csv, sidecar = tmp_path / "d.csv", tmp_path / "d.json"
        save_dataset(ds, csv, sidecar)
        lines = csv.read_text().splitlines()
        csv.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(DataError):
            load_dataset(csv, sidecar)
