"""The 2D-latent variational autoencoder that carries the whole workflow.

Encoder: D -> 512 relu -> 32 relu -> two parallel linear heads of width 2
(posterior mean and log-variance). Decoder: 2 -> 32 relu -> 512 relu ->
D sigmoid. Training minimizes per-sample reconstruction cross-entropy
(summed over features) plus beta times the closed-form KL divergence
from the standard normal prior, with the reparameterization trick.

The latent plane maps onto the unit square through the standard normal
CDF per axis ("uniformed" coordinates); decoding accepts either space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .design import (
    Design,
    EncodedMatrix,
    NoiseConfig,
    decode_vector,
    duplicate_and_split,
)
from .errors import NumericError, ShapeError, TrainingError, ValidationError
from .stats import normal_cdf, normal_quantile

LATENT_DIM = 2
ENCODER_WIDTHS = (512, 32)

UNIFORM_CLAMP = 1e-9


def kl_divergence(mu, logvar) -> float:
    """KL(N(mu, diag(exp(logvar))) || N(0, I)) in closed form."""
    mu = np.asarray(mu, dtype=float)
    logvar = np.asarray(logvar, dtype=float)
    if mu.shape != logvar.shape:
        raise ShapeError("mu and logvar must have equal shapes")
    if not (np.isfinite(mu).all() and np.isfinite(logvar).all()):
        raise NumericError("kl_divergence requires finite inputs")
    return float(0.5 * np.sum(mu * mu + np.exp(logvar) - 1.0 - logvar))


@dataclass(frozen=True)
class TrainingConfig:
    beta: float = 0.3
    batch_size: int = 256
    epochs: int = 500
    seed: int = 0
    train_dup: int = 50
    test_dup: int = 30
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    learning_rate: float = 0.001

    def __post_init__(self):
        if self.beta < 0:
            raise ValidationError("beta must be nonnegative")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be at least 1")
        if self.epochs < 1:
            raise ValidationError("epochs must be at least 1")
        if self.train_dup < 1 or self.test_dup < 1:
            raise ValidationError("duplication counts must be at least 1")

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "seed": self.seed,
            "train_dup": self.train_dup,
            "test_dup": self.test_dup,
            "noise": {"enabled": self.noise.enabled, "alpha": self.noise.alpha},
            "learning_rate": self.learning_rate,
        }

    @staticmethod
    def from_dict(d: dict) -> "TrainingConfig":
        noise = d.get("noise", {})
        return TrainingConfig(
            beta=d.get("beta", 0.3),
            batch_size=d.get("batch_size", 256),
            epochs=d.get("epochs", 500),
            seed=d.get("seed", 0),
            train_dup=d.get("train_dup", 50),
            test_dup=d.get("test_dup", 30),
            noise=NoiseConfig(enabled=noise.get("enabled", False), alpha=noise.get("alpha", 0.0)),
            learning_rate=d.get("learning_rate", 0.001),
        )


@dataclass
class VaeModel:
    """Trained encoder/decoder pair plus the encoding metadata to decode with."""

    trunk: nn.DenseNet
    mu_head: nn.DenseNet
    logvar_head: nn.DenseNet
    decoder: nn.DenseNet
    column_map: list
    config: TrainingConfig
    factors: list | None = None

    def __post_init__(self):
        if self.mu_head.output_width != LATENT_DIM or self.logvar_head.output_width != LATENT_DIM:
            raise ShapeError("latent dimension must be exactly 2")
        if self.decoder.output_width != self.trunk.input_width:
            raise ShapeError("decoder output width must equal encoder input width")

    @property
    def input_width(self) -> int:
        return self.trunk.input_width

    def encode_mean(self, rows: np.ndarray):
        """Posterior mean and log-variance for a batch of encoded rows."""
        h, _ = nn.forward(self.trunk, rows)
        mu, _ = nn.forward(self.mu_head, h)
        logvar, _ = nn.forward(self.logvar_head, h)
        return mu, logvar

    def decode_rows(self, z: np.ndarray) -> np.ndarray:
        out, _ = nn.forward(self.decoder, np.asarray(z, dtype=float))
        return out

    def to_dict(self) -> dict:
        return {
            "trunk": nn.net_to_dict(self.trunk),
            "mu_head": nn.net_to_dict(self.mu_head),
            "logvar_head": nn.net_to_dict(self.logvar_head),
            "decoder": nn.net_to_dict(self.decoder),
            "column_map": [b.to_dict() for b in self.column_map],
            "config": self.config.to_dict(),
            "factors": [f.to_dict() for f in self.factors] if self.factors else None,
        }

    @staticmethod
    def from_dict(d: dict) -> "VaeModel":
        from .design import ColumnBlock, FactorSpec

        return VaeModel(
            trunk=nn.net_from_dict(d["trunk"]),
            mu_head=nn.net_from_dict(d["mu_head"]),
            logvar_head=nn.net_from_dict(d["logvar_head"]),
            decoder=nn.net_from_dict(d["decoder"]),
            column_map=[ColumnBlock.from_dict(b) for b in d["column_map"]],
            config=TrainingConfig.from_dict(d["config"]),
            factors=[FactorSpec.from_dict(f) for f in d["factors"]] if d.get("factors") else None,
        )


@dataclass
class LatentEmbedding:
    """Per-trial latent coordinates: posterior mean and its uniformed image."""

    trial_ids: list
    mu: np.ndarray  # (n, 2)
    u: np.ndarray   # (n, 2), u = normal_cdf(mu)

    def __len__(self) -> int:
        return len(self.trial_ids)


def _batch_loss_terms(model: VaeModel, x: np.ndarray, z_from):
    """Forward pass returning (bce_mean, kl_mean); z_from maps (mu, logvar) -> z."""
    mu, logvar = model.encode_mean(x)
    z = z_from(mu, logvar)
    recon = model.decode_rows(z)
    bce, _ = nn.binary_crossentropy(recon, x)
    kl = float(0.5 * np.sum(mu * mu + np.exp(logvar) - 1.0 - logvar) / x.shape[0])
    return bce, kl


def vae_loss_and_grads(trunk, mu_head, logvar_head, decoder, x, eps, beta):
    """One training-step loss and its gradients for a frozen noise draw.

    loss = D * mean-elementwise BCE(decoder(mu + sigma*eps), x)
         + beta * mean-per-sample KL(mu, logvar); gradients flow through
    the reparameterized sample into both encoder heads and the trunk.
    """
    b, d = x.shape
    h, trunk_cache = nn.forward(trunk, x)
    mu, mu_cache = nn.forward(mu_head, h)
    logvar, lv_cache = nn.forward(logvar_head, h)
    sigma = np.exp(0.5 * logvar)
    z = mu + sigma * eps
    recon, dec_cache = nn.forward(decoder, z)

    bce, bce_grad = nn.binary_crossentropy(recon, x)
    kl = float(0.5 * np.sum(mu * mu + np.exp(logvar) - 1.0 - logvar) / b)
    loss = d * bce + beta * kl

    dec_grads, g_z = nn.backward(decoder, dec_cache, d * bce_grad)
    g_mu = g_z + (beta / b) * mu
    g_lv = g_z * eps * 0.5 * sigma + (beta / b) * 0.5 * (np.exp(logvar) - 1.0)
    mu_grads, g_h_mu = nn.backward(mu_head, mu_cache, g_mu)
    lv_grads, g_h_lv = nn.backward(logvar_head, lv_cache, g_lv)
    trunk_grads, _ = nn.backward(trunk, trunk_cache, g_h_mu + g_h_lv)
    return loss, (bce, kl), (trunk_grads, mu_grads, lv_grads, dec_grads)


def train(m: EncodedMatrix, cfg: TrainingConfig, factors=None, on_epoch=None):
    """Fit the autoencoder on an encoded design; returns (model, history).

    The reconstruction term is the per-sample sum of feature-wise binary
    cross-entropies (D times the elementwise mean), which keeps beta=0.3
    meaningful against the KL term at these input widths. History entries
    carry total loss plus the bce (elementwise mean) and kl components
    for both splits; test evaluation uses z = mu, no sampling. on_epoch,
    when given, receives each history entry as it is produced.
    """
    d = m.width
    if d < 2:
        raise ValidationError("need at least 2 encoded columns")
    if np.unique(m.rows, axis=0).shape[0] < 2:
        raise ValidationError("need at least 2 distinct rows to train on")

    root = np.random.SeedSequence(cfg.seed)
    ss_init, ss_data, ss_eps = root.spawn(3)
    rng_init = np.random.default_rng(ss_init)
    rng_eps = np.random.default_rng(ss_eps)

    trunk = nn.dense_net([d, *ENCODER_WIDTHS], ["relu", "relu"], rng_init)
    mu_head = nn.dense_net([ENCODER_WIDTHS[-1], LATENT_DIM], ["linear"], rng_init)
    logvar_head = nn.dense_net([ENCODER_WIDTHS[-1], LATENT_DIM], ["linear"], rng_init)
    decoder = nn.dense_net([LATENT_DIM, *reversed(ENCODER_WIDTHS), d],
                           ["relu", "relu", "sigmoid"], rng_init)
    model = VaeModel(trunk=trunk, mu_head=mu_head, logvar_head=logvar_head,
                     decoder=decoder, column_map=m.column_map, config=cfg,
                     factors=list(factors) if factors else None)

    train_rows, test_rows = duplicate_and_split(
        m, cfg.train_dup, cfg.test_dup, cfg.noise, seed=ss_data)

    nets = (trunk, mu_head, logvar_head, decoder)
    states = [nn.AdamState.for_net(net, cfg.learning_rate) for net in nets]
    beta = cfg.beta

    history = []
    n_train = train_rows.shape[0]
    for epoch in range(cfg.epochs):
        epoch_bce = 0.0
        epoch_kl = 0.0
        n_batches = 0
        for start in range(0, n_train, cfg.batch_size):
            x = train_rows[start:start + cfg.batch_size]
            eps = rng_eps.standard_normal(size=(x.shape[0], LATENT_DIM))
            loss, (bce, kl), all_grads = vae_loss_and_grads(
                trunk, mu_head, logvar_head, decoder, x, eps, beta)
            if not np.isfinite(loss):
                raise TrainingError(f"training diverged at epoch {epoch}", epoch=epoch)
            for net, grads, state in zip(nets, all_grads, states):
                nn.adam_step(net, grads, state)

            epoch_bce += bce
            epoch_kl += kl
            n_batches += 1

        train_bce = epoch_bce / n_batches
        train_kl = epoch_kl / n_batches
        test_bce, test_kl = _batch_loss_terms(model, test_rows, lambda mu, lv: mu)
        entry = {
            "epoch": epoch,
            "train_loss": d * train_bce + beta * train_kl,
            "train_bce": train_bce,
            "train_kl": train_kl,
            "test_loss": d * test_bce + beta * test_kl,
            "test_bce": test_bce,
            "test_kl": test_kl,
        }
        history.append(entry)
        if on_epoch is not None:
            on_epoch(entry)
    return model, history


def embed(model: VaeModel, m: EncodedMatrix, trial_ids=None) -> LatentEmbedding:
    """Posterior-mean coordinates (no sampling) plus their uniformed image."""
    if m.width != model.input_width:
        raise ShapeError(
            f"matrix width {m.width} does not match model input width {model.input_width}"
        )
    mu, _ = model.encode_mean(m.rows)
    ids = list(trial_ids) if trial_ids is not None else list(range(m.rows.shape[0]))
    if len(ids) != mu.shape[0]:
        raise ShapeError("trial_ids length does not match row count")
    return LatentEmbedding(trial_ids=ids, mu=mu, u=normal_cdf(mu))


def to_latent(points, space: str) -> np.ndarray:
    """Map grid points into the original latent plane.

    Uniformed coordinates must lie strictly inside the open unit square;
    they pass through the inverse normal CDF (clamped near 0 and 1).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != LATENT_DIM:
        raise ShapeError("points must be an (n, 2) array")
    if space == "original":
        return pts
    if space != "uniformed":
        raise ValidationError(f"unknown space {space!r}")
    if pts.size and (pts.min() <= 0.0 or pts.max() >= 1.0):
        raise ValidationError("uniformed coordinates must lie strictly inside (0, 1)")
    clipped = np.clip(pts, UNIFORM_CLAMP, 1.0 - UNIFORM_CLAMP)
    return normal_quantile(clipped)


def decode_latent(model: VaeModel, points, space: str = "uniformed",
                  snap: bool = True) -> Design:
    """Decode latent points into a trial matrix (provenance generated-grid)."""
    if model.factors is None:
        raise ValidationError("model has no factor specs attached; pass them to train()")
    z = to_latent(points, space)
    rows = model.decode_rows(z)
    trials = [decode_vector(row, model.column_map, snap=snap) for row in rows]
    return Design(factors=list(model.factors), trials=trials, provenance="generated-grid")
