"""Built-in demo spaces and a deterministic response oracle.

The nine-factor CNN-tuning space (mixed levels, two funnel constraints)
is the package's working example of a complex constrained experiment.
Because actually training 1,920 x 3 CNNs is out of reach for tests and
demos, a synthetic accuracy-like response stands in: a smooth function
over the encoded factor space with two local maxima.

Oracle shape, over per-factor encoded coordinates e in [0, 1]:

    response(e) = 0.90 + 0.004 e_n1
                + 0.030 exp(-q1(e) / 2.0)     q1 = sum_i w_i (e_i - c1_i)^2
                + 0.0165 exp(-q2(e) / 2.4)    q2 = sum_i w_i (e_i - c2_i)^2

with weights w = (3, 1.5, 0.75, 0.5, 3, 1.5, 0.75, 0.5, 0.5) over
(n1, k1, a1, p1, n2, k2, a2, p2, d). The dominant peak c1 sits at large
n1, mid n2, kernel 7 over 5 (a funnel-shaped configuration); the
secondary peak c2 is a smaller-filter configuration about 1.5% below.
The heavy n1/n2 weights make the filter counts the most important
factors. Replicate measurements add N(0, 0.0005^2) noise.
"""

from __future__ import annotations

import numpy as np

from .constraints import parse_constraint
from .design import Design, FactorSpec, column_map_for, encode_design

REPLICATE_NOISE_STD = 0.0005

ORACLE_WEIGHTS = np.array([3.0, 1.5, 0.75, 0.5, 3.0, 1.5, 0.75, 0.5, 0.5])
ORACLE_PEAK_MAIN = np.array([1.0, 1.0, 0.0, 1.0, 0.5, 0.5, 1.0, 1.0, 0.0])
ORACLE_PEAK_SECOND = np.array([0.25, 0.5, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0])
ORACLE_AMPLITUDES = (0.030, 0.0165)
ORACLE_SCALES = (2.0, 2.4)


def cnn_tuning_factors() -> list:
    """Nine CNN hyperparameters with mixed levels (filters on a log scale)."""
    return [
        FactorSpec("n1", "numeric-discrete", (8, 32, 128, 512, 2048), "log10"),
        FactorSpec("k1", "numeric-discrete", (3, 5, 7)),
        FactorSpec("a1", "categorical", ("relu", "tanh")),
        FactorSpec("p1", "numeric-discrete", (2, 4)),
        FactorSpec("n2", "numeric-discrete", (8, 32, 128, 512, 2048), "log10"),
        FactorSpec("k2", "numeric-discrete", (3, 5, 7)),
        FactorSpec("a2", "categorical", ("relu", "tanh")),
        FactorSpec("p2", "numeric-discrete", (2, 4)),
        FactorSpec("d", "numeric-discrete", (0.25, 0.5)),
    ]


def funnel_constraint_sources() -> list:
    """The two conditions that keep the architecture funnel shaped."""
    return ["n1 > n2", "k1 >= k2"]


def funnel_constraints(factors=None) -> list:
    factors = factors if factors is not None else cnn_tuning_factors()
    return [parse_constraint(src, factors) for src in funnel_constraint_sources()]


def two_level_factors(n: int = 4) -> list:
    """n two-level categorical factors, the classic small screening space."""
    return [FactorSpec(f"F{i + 1}", "categorical", ("lo", "hi")) for i in range(n)]


def _encoded_rows(design: Design) -> np.ndarray:
    rows = encode_design(design).rows
    if rows.shape[1] != ORACLE_WEIGHTS.shape[0]:
        raise ValueError(
            "the synthetic response is defined over the nine-factor tuning space"
        )
    return rows


def response_values(design: Design) -> np.ndarray:
    """Noiseless oracle response per trial."""
    rows = _encoded_rows(design)
    q1 = ((rows - ORACLE_PEAK_MAIN) ** 2 * ORACLE_WEIGHTS).sum(axis=1)
    q2 = ((rows - ORACLE_PEAK_SECOND) ** 2 * ORACLE_WEIGHTS).sum(axis=1)
    return (0.90 + 0.004 * rows[:, 0]
            + ORACLE_AMPLITUDES[0] * np.exp(-q1 / ORACLE_SCALES[0])
            + ORACLE_AMPLITUDES[1] * np.exp(-q2 / ORACLE_SCALES[1]))


def replicate_responses(design: Design, replicates: int = 3, seed: int = 0) -> dict:
    """trial_id -> list of noisy replicate measurements."""
    truth = response_values(design)
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, REPLICATE_NOISE_STD, size=(len(design), replicates))
    return {
        tid: (truth[i] + noise[i]).tolist()
        for i, tid in enumerate(design.trial_ids)
    }
