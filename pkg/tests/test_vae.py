import math

import numpy as np
import pytest

from gdoe import nn
from gdoe.design import FactorSpec, build_full_factorial, encode_design
from gdoe.errors import NumericError, ShapeError, TrainingError, ValidationError
from gdoe.stats import normal_cdf
from gdoe.synthetic import two_level_factors
from gdoe.vae import (
    TrainingConfig,
    decode_latent,
    embed,
    kl_divergence,
    to_latent,
    train,
    vae_loss_and_grads,
)


def test_kl_unit_cases():
    assert kl_divergence([0.0, 0.0], [0.0, 0.0]) == pytest.approx(0.0, abs=1e-12)
    assert kl_divergence([1.0, 0.0], [0.0, 0.0]) == pytest.approx(0.5, abs=1e-12)
    lv = math.log(4.0)
    expected = 3.0 - math.log(4.0)
    assert kl_divergence([0.0, 0.0], [lv, lv]) == pytest.approx(expected, abs=1e-12)


def test_kl_rejects_bad_input():
    with pytest.raises(ShapeError):
        kl_divergence([0.0], [0.0, 0.0])
    with pytest.raises(NumericError):
        kl_divergence([np.nan, 0.0], [0.0, 0.0])


def test_kl_matches_monte_carlo():
    # independent oracle: sample z ~ q and average the log density ratio
    rng = np.random.default_rng(99)
    for _ in range(20):
        mu = rng.uniform(-2.0, 2.0, size=2)
        logvar = rng.uniform(-1.5, 1.5, size=2)
        sigma = np.exp(0.5 * logvar)
        z = mu + sigma * rng.standard_normal(size=(100_000, 2))
        log_q = (-0.5 * ((z - mu) / sigma) ** 2 - 0.5 * math.log(2 * math.pi)
                 - 0.5 * logvar).sum(axis=1)
        log_p = (-0.5 * z ** 2 - 0.5 * math.log(2 * math.pi)).sum(axis=1)
        estimate = float((log_q - log_p).mean())
        exact = kl_divergence(mu, logvar)
        assert estimate == pytest.approx(exact, rel=0.02, abs=0.02)


def test_uniformization_ks_statistic():
    rng = np.random.default_rng(42)
    samples = np.sort(normal_cdf(rng.standard_normal(10_000)))
    n = len(samples)
    grid = np.arange(1, n + 1) / n
    ks = max(np.abs(grid - samples).max(), np.abs(samples - (grid - 1.0 / n)).max())
    assert ks < 0.02


def test_reparameterization_gradients_match_finite_differences():
    rng = np.random.default_rng(17)
    d = 3
    trunk = nn.dense_net([d, 6, 4], ["relu", "relu"], rng)
    mu_head = nn.dense_net([4, 2], ["linear"], rng)
    lv_head = nn.dense_net([4, 2], ["linear"], rng)
    decoder = nn.dense_net([2, 4, 6, d], ["relu", "relu", "sigmoid"], rng)
    # soften the relus so probes stay off the kinks
    for net in (trunk, decoder):
        for layer in net.layers:
            layer.weights *= 0.6
            layer.bias += 0.05
    x = rng.uniform(0.1, 0.9, size=(5, d))
    eps = rng.standard_normal(size=(5, 2))
    beta = 0.3

    def total_loss():
        loss, _, _ = vae_loss_and_grads(trunk, mu_head, lv_head, decoder, x, eps, beta)
        return loss

    _, _, analytic = vae_loss_and_grads(trunk, mu_head, lv_head, decoder, x, eps, beta)
    nets = (trunk, mu_head, lv_head, decoder)
    h = 1e-6
    worst = 0.0
    for net, grads in zip(nets, analytic):
        for layer, (dw, db) in zip(net.layers, grads):
            for arr, g in ((layer.weights, dw), (layer.bias, db)):
                it = np.nditer(arr, flags=["multi_index"])
                for _ in it:
                    idx = it.multi_index
                    orig = arr[idx]
                    arr[idx] = orig + h
                    up = total_loss()
                    arr[idx] = orig - h
                    down = total_loss()
                    arr[idx] = orig
                    fd = (up - down) / (2 * h)
                    denom = max(abs(fd), abs(g[idx]), 1e-6)
                    worst = max(worst, abs(fd - g[idx]) / denom)
    assert worst < 1e-2  # relu nets measured at the neural-core kink tolerance


@pytest.fixture(scope="module")
def tiny_run(binary4_design_module=None):
    factors = two_level_factors(3)
    design = build_full_factorial(factors)
    m = encode_design(design)
    cfg = TrainingConfig(epochs=40, train_dup=10, test_dup=5, seed=1)
    model, history = train(m, cfg, factors=factors)
    return design, m, model, history


def test_history_length_and_fields(tiny_run):
    _, _, _, history = tiny_run
    assert len(history) == 40
    assert {"train_loss", "train_bce", "train_kl", "test_loss", "test_bce",
            "test_kl", "epoch"} <= set(history[0])


def test_beta_zero_contributes_no_kl():
    factors = two_level_factors(2)
    design = build_full_factorial(factors)
    m = encode_design(design)
    cfg = TrainingConfig(beta=0.0, epochs=5, train_dup=4, test_dup=2, seed=0)
    model, history = train(m, cfg, factors=factors)
    for entry in history:
        assert entry["train_loss"] == pytest.approx(
            m.width * entry["train_bce"], rel=1e-12)


def test_training_determinism(tiny_run):
    factors = two_level_factors(3)
    design = build_full_factorial(factors)
    m = encode_design(design)
    cfg = TrainingConfig(epochs=40, train_dup=10, test_dup=5, seed=1)
    model2, history2 = train(m, cfg, factors=factors)
    _, _, model1, history1 = tiny_run
    assert history1 == history2
    for a, b in zip(model1.decoder.layers, model2.decoder.layers):
        assert np.array_equal(a.weights, b.weights)


def test_embed_shapes_and_determinism(tiny_run):
    design, m, model, _ = tiny_run
    emb1 = embed(model, m, design.trial_ids)
    emb2 = embed(model, m, design.trial_ids)
    assert emb1.mu.shape == (len(design), 2)
    assert np.array_equal(emb1.mu, emb2.mu)
    assert np.array_equal(emb1.u, normal_cdf(emb1.mu))
    # identical rows embed identically
    row = np.vstack([m.rows[0], m.rows[0]])
    from gdoe.design import EncodedMatrix

    pair = embed(model, EncodedMatrix(rows=row, column_map=m.column_map))
    assert np.array_equal(pair.mu[0], pair.mu[1])


def test_embed_width_mismatch(tiny_run):
    _, _, model, _ = tiny_run
    factors = two_level_factors(4)
    m4 = encode_design(build_full_factorial(factors))
    with pytest.raises(ShapeError):
        embed(model, m4)


def test_decode_latent_uniformed_equals_origin(tiny_run):
    _, _, model, _ = tiny_run
    a = decode_latent(model, [(0.5, 0.5)], space="uniformed", snap=True)
    b = decode_latent(model, [(0.0, 0.0)], space="original", snap=True)
    assert a.trials == b.trials
    assert a.provenance == "generated-grid"


def test_decode_latent_domain_checks(tiny_run):
    _, _, model, _ = tiny_run
    with pytest.raises(ValidationError):
        decode_latent(model, [(0.0, 0.5)], space="uniformed")
    with pytest.raises(ValidationError):
        decode_latent(model, [(1.0, 0.5)], space="uniformed")
    with pytest.raises(ShapeError):
        to_latent([(0.1, 0.2, 0.3)], "uniformed")


def test_decode_latent_lattice_count(tiny_run):
    _, _, model, _ = tiny_run
    g = (np.arange(10) + 0.5) / 10
    pts = np.array([(x, y) for x in g for y in g])
    d = decode_latent(model, pts, space="uniformed", snap=True)
    assert len(d) == 100


def test_train_rejects_degenerate_input():
    factors = two_level_factors(2)
    design = build_full_factorial(factors)
    m = encode_design(design)
    m.rows = np.zeros_like(m.rows)
    with pytest.raises(ValidationError):
        train(m, TrainingConfig(epochs=1), factors=factors)


@pytest.mark.filterwarnings("ignore:overflow|ignore:invalid value")
def test_train_divergence_reports_epoch():
    factors = two_level_factors(2)
    design = build_full_factorial(factors)
    m = encode_design(design)
    cfg = TrainingConfig(epochs=3, train_dup=2, test_dup=1, seed=0, learning_rate=1e6)
    with pytest.raises((TrainingError, NumericError)):
        train(m, cfg, factors=factors)
