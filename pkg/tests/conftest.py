import pytest

from fieldvae import proxy
from fieldvae.data import generate_dataset
from fieldvae.model import ModelConfig, build_model, train

SMALL_WIDTHS = dict(enc_widths=(24, 18, 12), dec_widths=(12, 18, 24),
                    reg_widths=(16, 12, 8))


def small_config(**overrides) -> ModelConfig:
    base = dict(latent_dim=3, epochs=30, batch_size=128, seed=0,
                **SMALL_WIDTHS)
    base.update(overrides)
    return ModelConfig(**base)


@pytest.fixture(scope="session")
def field():
    return proxy.ProxyField.random(5)


@pytest.fixture(scope="session")
def wcf_dataset(field):
    return generate_dataset(1500, field, "wcf", sampler="uniform", seed=7)


@pytest.fixture(scope="session")
def trained_model(wcf_dataset):
    """Small deterministic surrogate trained on the WCF dataset."""
    model = build_model(small_config(epochs=40))
    xtr, ytr = wcf_dataset.train_arrays()
    xho, yho = wcf_dataset.holdout_arrays()
    train(model, xtr, ytr, xho, yho)
    model.normalizer = wcf_dataset.normalizer
    return model


@pytest.fixture(scope="session")
def trained_prob_model(wcf_dataset):
    """Small probabilistic (full-covariance) surrogate on the same data."""
    model = build_model(small_config(epochs=25, latent_kind="fullcov",
                                     layer_kind="probabilistic", seed=1))
    xtr, ytr = wcf_dataset.train_arrays()
    xho, yho = wcf_dataset.holdout_arrays()
    train(model, xtr, ytr, xho, yho)
    model.normalizer = wcf_dataset.normalizer
    return model
