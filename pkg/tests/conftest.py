"""Shared fixtures: demo factor spaces and disk-cached trained models.

Training is deterministic for a given config, so trained models are
cached as JSON under .cache/ and reused across test runs.
"""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from gdoe.design import build_full_factorial, encode_design, filter_by_constraints
from gdoe.synthetic import cnn_tuning_factors, funnel_constraints, two_level_factors
from gdoe.vae import TrainingConfig, VaeModel, train

CACHE_DIR = Path(__file__).resolve().parent.parent / ".cache"


@pytest.fixture(scope="session")
def binary4_design():
    return build_full_factorial(two_level_factors(4))


@pytest.fixture(scope="session")
def binary4_matrix(binary4_design):
    return encode_design(binary4_design)


@pytest.fixture(scope="session")
def cnn_factors():
    return cnn_tuning_factors()


@pytest.fixture(scope="session")
def cnn_full(cnn_factors):
    return build_full_factorial(cnn_factors)


@pytest.fixture(scope="session")
def cnn_constraints(cnn_factors):
    return funnel_constraints(cnn_factors)


@pytest.fixture(scope="session")
def cnn_design(cnn_full, cnn_constraints):
    return filter_by_constraints(cnn_full, cnn_constraints)


@pytest.fixture(scope="session")
def cnn_matrix(cnn_design):
    return encode_design(cnn_design)


def cached_model(label: str, matrix, cfg: TrainingConfig, factors):
    """Train once per (label, config) and reuse the JSON-cached weights."""
    CACHE_DIR.mkdir(exist_ok=True)
    key = (f"{label}-b{cfg.beta}-e{cfg.epochs}-bs{cfg.batch_size}-s{cfg.seed}"
           f"-d{cfg.train_dup}x{cfg.test_dup}-lr{cfg.learning_rate}")
    path = CACHE_DIR / f"{key}.json"
    if path.exists():
        return VaeModel.from_dict(json.loads(path.read_text()))
    model, _ = train(matrix, cfg, factors=factors)
    path.write_text(json.dumps(model.to_dict()))
    return model


@pytest.fixture(scope="session")
def binary4_model(binary4_design, binary4_matrix):
    """The small-space model most tests share (seed 0, full defaults)."""
    cfg = TrainingConfig(seed=0)
    return cached_model("binary4", binary4_matrix, cfg, binary4_design.factors)


@pytest.fixture(scope="session")
def cnn_model(cnn_design, cnn_matrix):
    """The nine-factor study model (500 epochs, duplication x5/x3, seed 0)."""
    cfg = TrainingConfig(epochs=500, train_dup=5, test_dup=3, seed=0)
    return cached_model("cnn9", cnn_matrix, cfg, cnn_design.factors)
