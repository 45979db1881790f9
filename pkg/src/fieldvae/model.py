"""The VAE-based regression model: encoder -> latent head -> decoder and
regressor, trained jointly on

    loss = recon_mse + beta * kl + gamma * regression_mse

with every hidden dense layer followed by batch norm, leaky ReLU, and
dropout in that order. Probabilistic variants swap each dense layer for a
variational one and add a 1/N_train-scaled weight-KL regularizer.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, asdict

import numpy as np

from .bayes import VarDense
from .errors import ConfigError, NumericError
from .latent import make_head
from .layers import BatchNorm, Dense, Dropout, LeakyReLU
from .optim import Adam
from .utils import as_matrix, check_finite

LATENT_KINDS = ("meanfield", "fullcov")
LAYER_KINDS = ("deterministic", "probabilistic")


@dataclass
class ModelConfig:
    input_dim: int = 90
    latent_dim: int = 90
    enc_widths: tuple[int, int, int] = (128, 96, 64)
    dec_widths: tuple[int, int, int] = (64, 96, 128)
    reg_widths: tuple[int, int, int] = (64, 32, 16)
    latent_kind: str = "meanfield"
    layer_kind: str = "deterministic"
    beta: float = 1.0
    gamma: float = 25.0
    dropout_rate: float = 0.1
    leaky_slope: float = 0.2
    epochs: int = 1500
    batch_size: int = 256
    lr_initial: float = 1e-3
    lr_decay_factor: float = 0.5
    lr_decay_every: int = 300
    prior_std: float = 1.0
    beta_scales_weight_kl: bool = False
    early_stop_patience: int | None = None
    seed: int = 0

    def validate(self) -> "ModelConfig":
        if self.latent_kind not in LATENT_KINDS:
            raise ConfigError(f"latent_kind must be one of {LATENT_KINDS}")
        if self.layer_kind not in LAYER_KINDS:
            raise ConfigError(f"layer_kind must be one of {LAYER_KINDS}")
        if self.beta < 0 or self.gamma < 0:
            raise ConfigError("beta and gamma must be >= 0")
        if self.input_dim < 1 or self.latent_dim < 1:
            raise ConfigError("input_dim and latent_dim must be >= 1")
        for name in ("enc_widths", "dec_widths", "reg_widths"):
            widths = getattr(self, name)
            if len(widths) != 3 or any(w < 1 for w in widths):
                raise ConfigError(f"{name} must be three widths >= 1, got {widths}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError("dropout_rate must be in [0,1)")
        if not 0.0 < self.leaky_slope < 1.0:
            raise ConfigError("leaky_slope must be in (0,1)")
        if self.epochs < 0 or self.batch_size < 2:
            raise ConfigError("epochs must be >= 0 and batch_size >= 2")
        if self.lr_initial <= 0 or not 0.0 < self.lr_decay_factor <= 1.0 \
                or self.lr_decay_every < 1:
            raise ConfigError("invalid learning-rate schedule")
        if self.prior_std <= 0:
            raise ConfigError("prior_std must be > 0")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        for name in ("enc_widths", "dec_widths", "reg_widths"):
            d[name] = list(d[name])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        kwargs = dict(d)
        for name in ("enc_widths", "dec_widths", "reg_widths"):
            if name in kwargs:
                kwargs[name] = tuple(kwargs[name])
        return cls(**kwargs).validate()


@dataclass
class JointLossBreakdown:
    reconstruction_mse: float
    kl: float
    regression_mse: float
    total: float


def joint_loss(x: np.ndarray, x_hat: np.ndarray, kl_per_sample: np.ndarray,
               y: np.ndarray, y_hat: np.ndarray,
               beta: float, gamma: float) -> JointLossBreakdown:
    """Batch-mean loss components. Reconstruction error is averaged over
    features as well as the batch; KL is the per-sample sum over latent
    dimensions, averaged over the batch."""
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    y_hat = np.asarray(y_hat, dtype=np.float64).reshape(-1)
    if x.shape != x_hat.shape or y.shape != y_hat.shape \
            or len(y) != x.shape[0] or len(kl_per_sample) != x.shape[0]:
        raise ConfigError("joint_loss: inconsistent component lengths")
    recon = float(np.mean((x - x_hat) ** 2))
    kl = max(float(np.mean(kl_per_sample)), 0.0)
    reg = float(np.mean((y - y_hat) ** 2))
    return JointLossBreakdown(recon, kl, reg, recon + beta * kl + gamma * reg)


class _Block:
    """dense -> batch norm -> leaky ReLU -> dropout."""

    def __init__(self, in_dim: int, out_dim: int, cfg: ModelConfig,
                 rng: np.random.Generator):
        if cfg.layer_kind == "probabilistic":
            self.dense = VarDense(in_dim, out_dim, rng, prior_std=cfg.prior_std)
        else:
            self.dense = Dense(in_dim, out_dim, rng)
        self.bn = BatchNorm(out_dim)
        self.act = LeakyReLU(cfg.leaky_slope)
        self.drop = Dropout(cfg.dropout_rate)

    def forward(self, x, training, dropout_active, sample_weights, rng):
        if isinstance(self.dense, VarDense):
            h = self.dense.forward(x, sample=sample_weights, rng=rng)
        else:
            h = self.dense.forward(x)
        h = self.bn.forward(h, training)
        h = self.act.forward(h)
        return self.drop.forward(h, dropout_active, rng)

    def backward(self, g):
        g = self.drop.backward(g)
        g = self.act.backward(g)
        g = self.bn.backward(g)
        return self.dense.backward(g)

    @property
    def layers(self):
        return [self.dense, self.bn, self.act, self.drop]


class _Stack:
    """Three hidden blocks plus a plain (no activation) output layer."""

    def __init__(self, in_dim: int, widths, out_dim: int, cfg: ModelConfig,
                 rng: np.random.Generator):
        self.blocks = []
        prev = in_dim
        for w in widths:
            self.blocks.append(_Block(prev, w, cfg, rng))
            prev = w
        if cfg.layer_kind == "probabilistic":
            self.out = VarDense(prev, out_dim, rng, prior_std=cfg.prior_std)
        else:
            self.out = Dense(prev, out_dim, rng)

    def forward(self, x, training, dropout_active, sample_weights, rng):
        h = x
        for blk in self.blocks:
            h = blk.forward(h, training, dropout_active, sample_weights, rng)
        if isinstance(self.out, VarDense):
            return self.out.forward(h, sample=sample_weights, rng=rng)
        return self.out.forward(h)

    def backward(self, g):
        g = self.out.backward(g)
        for blk in reversed(self.blocks):
            g = blk.backward(g)
        return g

    def var_layers(self):
        return [l for blk in self.blocks for l in blk.layers
                if isinstance(l, VarDense)] + \
            ([self.out] if isinstance(self.out, VarDense) else [])

    def param_layers(self):
        out = []
        for blk in self.blocks:
            out.extend([blk.dense, blk.bn])
        out.append(self.out)
        return out


@dataclass
class ForwardResult:
    x_hat: np.ndarray
    y_hat: np.ndarray
    z: np.ndarray
    kl: np.ndarray
    posterior_mean: np.ndarray
    head_out: np.ndarray


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    train_recon: float
    train_kl: float
    train_reg: float
    train_total: float
    train_weight_kl: float
    val_recon: float
    val_kl: float
    val_reg: float
    val_total: float
    seconds: float


@dataclass
class TrainingHistory:
    records: list[EpochRecord] = field(default_factory=list)

    CSV_FIELDS = ("epoch", "lr", "train_recon", "train_kl", "train_reg",
                  "train_total", "train_weight_kl", "val_recon", "val_kl",
                  "val_reg", "val_total")

    def __len__(self):
        return len(self.records)

    def rows(self):
        """CSV rows; wall-clock seconds are deliberately excluded so the
        file is byte-identical across reruns (timings go to the log)."""
        for r in self.records:
            yield [getattr(r, f) for f in self.CSV_FIELDS]


class Model:
    """Encoder + latent head + decoder + regressor."""

    def __init__(self, config: ModelConfig,
                 rng: np.random.Generator | None = None):
        config.validate()
        self.config = config
        self.head = make_head(config.latent_kind, config.latent_dim)
        seq = np.random.SeedSequence(config.seed)
        init_ss, train_ss, shuffle_ss = seq.spawn(3)
        self._train_ss = train_ss
        self._shuffle_ss = shuffle_ss
        if rng is None:
            rng = np.random.Generator(np.random.PCG64(init_ss))
        self.encoder = _Stack(config.input_dim, config.enc_widths,
                              self.head.head_width, config, rng)
        self.decoder = _Stack(config.latent_dim, config.dec_widths,
                              config.input_dim, config, rng)
        self.regressor = _Stack(config.latent_dim, config.reg_widths,
                                1, config, rng)
        self.trained = False
        self.normalizer = None  # attached by the training pipeline

    # ----------------------------------------------------------------- forward

    def forward(self, x, training: bool, rng: np.random.Generator | None = None,
                *, dropout_active: bool | None = None,
                sample_latent: bool | None = None,
                sample_weights: bool | None = None,
                latent_noise: np.ndarray | None = None) -> ForwardResult:
        x = as_matrix(x, "batch")
        if x.shape[1] != self.config.input_dim:
            raise ConfigError(f"batch has {x.shape[1]} columns, model expects "
                              f"{self.config.input_dim}")
        if dropout_active is None:
            dropout_active = training
        if sample_latent is None:
            sample_latent = training
        if sample_weights is None:
            sample_weights = training
        stochastic = dropout_active or sample_weights or \
            (sample_latent and latent_noise is None)
        if stochastic and rng is None:
            raise ConfigError("stochastic forward pass requires an RNG stream")
        h = self.encoder.forward(x, training, dropout_active, sample_weights, rng)
        z, kl = self.head.forward(h, latent_noise, sample_latent, rng)
        x_hat = self.decoder.forward(z, training, dropout_active,
                                     sample_weights, rng)
        y_hat = self.regressor.forward(z, training, dropout_active,
                                       sample_weights, rng)[:, 0]
        mu = h[:, :self.config.latent_dim]
        return ForwardResult(x_hat, y_hat, z, kl, mu, h)

    def backward(self, x, y, fr: ForwardResult) -> None:
        """Gradients of the joint loss for the batch of the last forward."""
        n = x.shape[0]
        d = self.config.input_dim
        d_xhat = 2.0 * (fr.x_hat - x) / (n * d)
        d_yhat = self.config.gamma * 2.0 * (fr.y_hat - np.asarray(y).reshape(-1)) / n
        dz = self.decoder.backward(d_xhat)
        dz = dz + self.regressor.backward(d_yhat[:, None])
        dkl = np.full(n, self.config.beta / n)
        dh = self.head.backward(dz, dkl)
        self.encoder.backward(dh)

    def weight_kl(self) -> float:
        return sum(l.kl() for l in self._var_layers())

    def add_weight_kl_grads(self, scale: float) -> None:
        for l in self._var_layers():
            l.add_kl_grads(scale)

    def _var_layers(self):
        return (self.encoder.var_layers() + self.decoder.var_layers()
                + self.regressor.var_layers())

    # ------------------------------------------------------------- parameters

    def params(self):
        out = []
        for stack in (self.encoder, self.decoder, self.regressor):
            for layer in stack.param_layers():
                out.extend(layer.params())
        return out

    def grads(self):
        out = []
        for stack in (self.encoder, self.decoder, self.regressor):
            for layer in stack.param_layers():
                out.extend(layer.grads())
        return out

    def named_tensors(self):
        """All persistent state (trainable params + batch-norm running
        statistics) with stable names, in a fixed order."""
        out = []
        for stack_name, stack in (("encoder", self.encoder),
                                  ("decoder", self.decoder),
                                  ("regressor", self.regressor)):
            for i, blk in enumerate(stack.blocks):
                prefix = f"{stack_name}.block{i}"
                out.extend(_dense_tensors(f"{prefix}.dense", blk.dense))
                bn = blk.bn
                out.extend([(f"{prefix}.bn.gamma", bn.gamma),
                            (f"{prefix}.bn.beta", bn.beta),
                            (f"{prefix}.bn.running_mean", bn.running_mean),
                            (f"{prefix}.bn.running_var", bn.running_var)])
            out.extend(_dense_tensors(f"{stack_name}.out", stack.out))
        return out

    def set_tensor(self, name: str, value: np.ndarray) -> None:
        for tname, arr in self.named_tensors():
            if tname == name:
                arr[...] = value
                return
        raise KeyError(name)

    # ---------------------------------------------------------------- training

    def loss_on(self, x, y, training: bool,
                rng: np.random.Generator | None = None,
                **forward_kwargs) -> JointLossBreakdown:
        fr = self.forward(x, training, rng, **forward_kwargs)
        return joint_loss(x, fr.x_hat, fr.kl, y, fr.y_hat,
                          self.config.beta, self.config.gamma)


def _dense_tensors(prefix: str, layer):
    if isinstance(layer, VarDense):
        return [(f"{prefix}.W_mean", layer.W_mean),
                (f"{prefix}.W_log_var", layer.W_log_var),
                (f"{prefix}.b_mean", layer.b_mean),
                (f"{prefix}.b_log_var", layer.b_log_var)]
    return [(f"{prefix}.W", layer.W), (f"{prefix}.b", layer.b)]


def build_model(config: ModelConfig,
                rng: np.random.Generator | None = None) -> Model:
    return Model(config, rng)


def train(model: Model, x_train, y_train, x_val, y_val,
          log=None) -> TrainingHistory:
    """Shuffled minibatch Adam on the joint loss.

    Inputs must already be normalized. Probabilistic models add the weight
    KL scaled by 1/N_train to every step. Deterministic for a fixed config
    seed. Raises NumericError with an epoch/batch diagnostic if the loss
    goes non-finite.
    """
    cfg = model.config
    x_train = as_matrix(x_train, "x_train")
    x_val = as_matrix(x_val, "x_val")
    y_train = np.asarray(y_train, dtype=np.float64).reshape(-1)
    y_val = np.asarray(y_val, dtype=np.float64).reshape(-1)
    n = x_train.shape[0]
    if len(y_train) != n:
        raise ConfigError("x_train and y_train disagree on sample count")
    history = TrainingHistory()
    if cfg.epochs == 0:
        return history

    probabilistic = cfg.layer_kind == "probabilistic"
    wkl_scale = (cfg.beta if cfg.beta_scales_weight_kl else 1.0) / n
    train_rng = np.random.Generator(np.random.PCG64(model._train_ss))
    shuffle_rng = np.random.Generator(np.random.PCG64(model._shuffle_ss))
    adam = Adam(model.params(), lr=cfg.lr_initial)

    best_val = np.inf
    since_best = 0
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        lr = cfg.lr_initial * cfg.lr_decay_factor ** (epoch // cfg.lr_decay_every)
        adam.lr = lr
        order = shuffle_rng.permutation(n)
        sums = np.zeros(3)
        wkl_value = 0.0
        n_batches = 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            if len(idx) < 2:
                continue  # batch norm cannot standardize a single row
            xb, yb = x_train[idx], y_train[idx]
            fr = model.forward(xb, training=True, rng=train_rng)
            lb = joint_loss(xb, fr.x_hat, fr.kl, yb, fr.y_hat,
                            cfg.beta, cfg.gamma)
            if not np.isfinite(lb.total):
                raise NumericError(f"non-finite loss at epoch {epoch}, "
                                   f"batch {n_batches}: {lb}")
            model.backward(xb, yb, fr)
            if probabilistic:
                wkl_value = model.weight_kl()
                model.add_weight_kl_grads(wkl_scale)
            adam.step(model.grads())
            sums += (lb.reconstruction_mse, lb.kl, lb.regression_mse)
            n_batches += 1
        tr_recon, tr_kl, tr_reg = sums / max(n_batches, 1)
        tr_total = tr_recon + cfg.beta * tr_kl + cfg.gamma * tr_reg
        vb = model.loss_on(x_val, y_val, training=False)
        check_finite(np.array([vb.total]), f"validation loss at epoch {epoch}")
        history.records.append(EpochRecord(
            epoch=epoch, lr=lr,
            train_recon=tr_recon, train_kl=tr_kl, train_reg=tr_reg,
            train_total=tr_total, train_weight_kl=wkl_value,
            val_recon=vb.reconstruction_mse, val_kl=vb.kl,
            val_reg=vb.regression_mse, val_total=vb.total,
            seconds=time.perf_counter() - t0))
        if log is not None and (epoch % 50 == 0 or epoch == cfg.epochs - 1):
            log(f"epoch {epoch}: lr={lr:g} train_total={tr_total:.5f} "
                f"val_total={vb.total:.5f} val_reg={vb.regression_mse:.5f}")
        if cfg.early_stop_patience is not None:
            if vb.total < best_val - 1e-12:
                best_val = vb.total
                since_best = 0
            else:
                since_best += 1
                if since_best > cfg.early_stop_patience:
                    break
    model.trained = True
    return history
