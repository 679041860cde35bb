import numpy as np
import pytest

from gdoe.constraints import evaluate, parse_constraint
from gdoe.design import Design, FactorSpec, build_full_factorial
from gdoe.errors import ValidationError
from gdoe.generate import diagnose, generate, random_subset
from gdoe.grids import GridSpec
from gdoe.synthetic import two_level_factors


def test_diagnose_full_factorial_is_perfect():
    d = build_full_factorial(two_level_factors(2))
    diag = diagnose(d)
    assert diag.orthogonality == pytest.approx(0.0, abs=1e-12)
    assert all(v == pytest.approx(0.0) for v in diag.balance.values())
    assert all(v == 1.0 for v in diag.level_coverage.values())
    assert diag.n_unique == diag.n_trials == 4
    assert not diag.flagged


def test_diagnose_full_factorials_exhaustive():
    # every full factorial with <= 5 factors and <= 3 levels is orthogonal and balanced
    for n_factors in (2, 3, 4, 5):
        for n_levels in (2, 3):
            factors = [
                FactorSpec(f"f{i}", "numeric-discrete", tuple(range(n_levels)))
                for i in range(n_factors)
            ]
            if n_levels ** n_factors > 300:
                continue
            diag = diagnose(build_full_factorial(factors))
            assert diag.orthogonality == pytest.approx(0.0, abs=1e-12)
            assert all(v == pytest.approx(0.0) for v in diag.balance.values())


def test_diagnose_confounded_pair():
    factors = two_level_factors(2)
    trials = [["lo", "lo"], ["hi", "hi"], ["lo", "lo"], ["hi", "hi"]]
    d = Design(factors=factors, trials=trials, provenance="initial-full")
    diag = diagnose(d)
    assert ("F1", "F2") in diag.confounded_pairs
    assert diag.n_unique == 2
    assert diag.flagged


def test_diagnose_fractional_factorial_2_4_1():
    # half fraction with defining relation F4 = F1 xor F2 xor F3
    factors = two_level_factors(4)
    full = build_full_factorial(factors)
    trials = [
        row for row in full.trials
        if (row[:3].count("hi") % 2 == 0) == (row[3] == "lo")
    ]
    assert len(trials) == 8
    d = Design(factors=factors, trials=trials, provenance="initial-full")
    diag = diagnose(d)
    assert diag.orthogonality == pytest.approx(0.0, abs=1e-12)
    assert all(v == pytest.approx(0.0) for v in diag.balance.values())
    assert all(v == 1.0 for v in diag.level_coverage.values())
    assert not diag.confounded_pairs


def test_diagnose_degenerate_single_level_columns():
    factors = two_level_factors(3)
    trials = [["lo", "lo", "lo"], ["lo", "lo", "hi"]]
    d = Design(factors=factors, trials=trials, provenance="initial-full")
    diag = diagnose(d)
    assert set(diag.degenerate_factors) == {"F1", "F2"}
    assert ("F1", "F2") in diag.confounded_pairs
    assert diag.level_coverage["F1"] == 0.5


def test_diagnose_violations_and_density():
    factors = [FactorSpec("a", "numeric-discrete", (1, 2)),
               FactorSpec("b", "numeric-discrete", (1, 2))]
    d = build_full_factorial(factors)
    expr = parse_constraint("a > b", factors)
    points = np.array([[0.1, 0.1], [0.4, 0.6], [0.6, 0.4], [0.9, 0.9]])
    diag = diagnose(d, [expr], points=points)
    flagged_ids = {tid for tid, _ in diag.violations}
    expected = {
        tid for tid, row in zip(d.trial_ids, d.trials)
        if not evaluate(expr, dict(zip(d.factor_names, row)))
    }
    assert flagged_ids == expected
    assert diag.density_uniformity is not None and diag.density_uniformity > 0


def test_generate_square_3x3_on_trained_model(binary4_model, cnn_constraints):
    design, diag = generate(binary4_model, GridSpec(type="square", nx=3, ny=3))
    assert diag.n_trials + len(diag.collapsed) == 9
    assert design.provenance == "generated-grid"
    # every factor is two-level on this model (verified on the frozen seed)
    assert all(v == 1.0 for v in diag.level_coverage.values())


def test_generate_polar_7_on_trained_model(binary4_model):
    design, diag = generate(binary4_model, GridSpec(type="polar", rings=2, angles=3))
    assert diag.n_trials + len(diag.collapsed) == 7


def test_generate_flags_never_drops(cnn_model, cnn_constraints):
    spec = GridSpec(type="square", nx=10, ny=10)
    design, diag = generate(cnn_model, spec, cnn_constraints)
    # violations, if any, stay in the design and are listed
    assert diag.n_trials == len(design)
    assert diag.n_trials + len(diag.collapsed) == 100
    listed = {tid for tid, _ in diag.violations}
    recheck = set()
    for tid, row in zip(design.trial_ids, design.trials):
        trial = dict(zip(design.factor_names, row))
        for c in cnn_constraints:
            if not evaluate(c, trial):
                recheck.add(tid)
    assert listed == recheck


def test_generate_matches_independent_reevaluation(binary4_model):
    # internal consistency: diagnostics violations equal a fresh evaluate() pass
    factors = binary4_model.factors
    expr = parse_constraint("F1 == 'lo'", factors)
    design, diag = generate(binary4_model, GridSpec(type="square", nx=4, ny=4), [expr])
    listed = {tid for tid, _ in diag.violations}
    fresh = {
        tid for tid, row in zip(design.trial_ids, design.trials)
        if not evaluate(expr, dict(zip(design.factor_names, row)))
    }
    assert listed == fresh


def test_random_subset_full_size_is_permutation(binary4_design):
    sub = random_subset(binary4_design, len(binary4_design), seed=3)
    assert sorted(sub.trial_ids) == sorted(binary4_design.trial_ids)
    assert sub.provenance == "random-subset"


def test_random_subset_counts_and_determinism(cnn_design):
    a = random_subset(cnn_design, 64, seed=1)
    b = random_subset(cnn_design, 64, seed=1)
    c = random_subset(cnn_design, 64, seed=2)
    assert len(a) == 64
    assert a.trial_ids == b.trial_ids
    assert a.trial_ids != c.trial_ids
    # original ids preserved
    assert set(a.trial_ids) <= set(cnn_design.trial_ids)


def test_random_subset_range_check(binary4_design):
    with pytest.raises(ValidationError):
        random_subset(binary4_design, 0)
    with pytest.raises(ValidationError):
        random_subset(binary4_design, 17)
