"""Turn latent grids into designs and score what came out.

Decoded designs are never silently repaired: duplicate trials are
collapsed (and the collapse recorded), constraint violations are
flagged trial by trial, and the diagnostics carry enough structure
for an operator to decide whether to reshape the grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constraints import evaluate
from .design import Design, column_map_for, encode_value
from .errors import ValidationError
from .grids import GridSpec, make_grid
from .vae import VaeModel, decode_latent, LATENT_DIM
from .stats import normal_cdf

CONFOUND_TOL = 1e-9


@dataclass
class DesignDiagnostics:
    n_trials: int
    n_unique: int
    violations: list               # (trial_id, constraint source text)
    confounded_pairs: list         # (factor, factor) with |corr| == 1
    level_coverage: dict           # factor -> fraction of declared levels present
    balance: dict                  # factor -> chi-square of level counts vs uniform
    orthogonality: float           # max |pairwise corr| over factor columns
    degenerate_factors: list       # single-level factors, excluded from correlation
    nn_distance: list              # per-trial nearest-neighbor distance, encoded space
    density_uniformity: float | None = None  # chi-square over a 4x4 latent partition
    collapsed: dict = field(default_factory=dict)  # duplicate trial_id -> kept trial_id

    @property
    def flagged(self) -> bool:
        return bool(self.violations or self.confounded_pairs)

    def to_dict(self) -> dict:
        return {
            "n_trials": self.n_trials,
            "n_unique": self.n_unique,
            "violations": [[tid, src] for tid, src in self.violations],
            "confounded_pairs": [list(p) for p in self.confounded_pairs],
            "level_coverage": self.level_coverage,
            "balance": self.balance,
            "orthogonality": self.orthogonality,
            "degenerate_factors": self.degenerate_factors,
            "nn_distance": self.nn_distance,
            "density_uniformity": self.density_uniformity,
            "collapsed": {str(k): v for k, v in self.collapsed.items()},
            "flagged": self.flagged,
        }


def _factor_scalar_matrix(design: Design) -> np.ndarray:
    """One encoded scalar per factor: minmax/binary value, or argmax index / (L-1)."""
    blocks = column_map_for(design.factors)
    out = np.zeros((len(design), len(blocks)))
    for r, row in enumerate(design.trials):
        for c, (block, value) in enumerate(zip(blocks, row)):
            if block.rule == "onehot":
                out[r, c] = block.levels.index(value) / (block.width - 1)
            else:
                out[r, c] = encode_value(block, value)[0]
    return out


def diagnose(design: Design, constraints=(), points=None) -> DesignDiagnostics:
    """Compute every diagnostic for a design.

    points, when given, are the uniformed latent coordinates of the
    trials and enable the density-uniformity statistic (a chi-square of
    trial counts over a fixed 4x4 partition of the unit square).
    """
    if len(design) == 0:
        raise ValidationError("cannot diagnose an empty design")
    names = design.factor_names
    n = len(design)

    keys = [tuple(row) for row in design.trials]
    n_unique = len(set(keys))

    violations = []
    for tid, row in zip(design.trial_ids, design.trials):
        trial = dict(zip(names, row))
        for c in constraints:
            if not evaluate(c, trial):
                violations.append((tid, c.source))

    coverage = {}
    balance = {}
    for j, f in enumerate(design.factors):
        values = [row[j] for row in design.trials]
        counts = np.array([sum(1 for v in values if v == lv) for lv in f.levels], dtype=float)
        present = int((counts > 0).sum())
        off_level = sum(1 for v in values if v not in f.levels)
        coverage[f.name] = present / len(f.levels)
        expected = (n - off_level) / len(f.levels)
        if expected > 0:
            balance[f.name] = float(((counts - expected) ** 2 / expected).sum())
        else:
            balance[f.name] = 0.0

    scalars = _factor_scalar_matrix(design)
    stds = scalars.std(axis=0)
    degenerate = [names[j] for j in range(len(names)) if stds[j] < 1e-12]
    confounded = []
    orthogonality = 0.0
    live = [j for j in range(len(names)) if stds[j] >= 1e-12]
    if len(live) >= 2:
        corr = np.corrcoef(scalars[:, live], rowvar=False)
        for a in range(len(live)):
            for b in range(a + 1, len(live)):
                c = abs(float(corr[a, b]))
                orthogonality = max(orthogonality, c)
                if c >= 1.0 - CONFOUND_TOL:
                    confounded.append((names[live[a]], names[live[b]]))
    # two factors pinned to single levels are jointly fixed
    for a in range(len(degenerate)):
        for b in range(a + 1, len(degenerate)):
            confounded.append((degenerate[a], degenerate[b]))

    if n >= 2:
        diff = scalars[:, None, :] - scalars[None, :, :]
        dist = np.sqrt((diff ** 2).sum(axis=2))
        np.fill_diagonal(dist, np.inf)
        nn = dist.min(axis=1).tolist()
    else:
        nn = [float("inf")]

    density_uniformity = None
    if points is not None:
        pts = np.asarray(points, dtype=float)
        cells = np.zeros(16)
        ix = np.clip((pts[:, 0] * 4).astype(int), 0, 3)
        iy = np.clip((pts[:, 1] * 4).astype(int), 0, 3)
        for a, b in zip(ix, iy):
            cells[4 * b + a] += 1
        expected = len(pts) / 16.0
        density_uniformity = float(((cells - expected) ** 2 / expected).sum())

    return DesignDiagnostics(
        n_trials=n,
        n_unique=n_unique,
        violations=violations,
        confounded_pairs=confounded,
        level_coverage=coverage,
        balance=balance,
        orthogonality=float(orthogonality),
        degenerate_factors=degenerate,
        nn_distance=nn,
        density_uniformity=density_uniformity,
    )


def generate(model: VaeModel, spec: GridSpec, constraints=(), snap: bool = True):
    """Decode a grid into a design plus its diagnostics.

    Exact duplicate trials are collapsed, keeping the first occurrence;
    violating trials are flagged in the diagnostics, never dropped.
    """
    points = make_grid(spec)
    raw = decode_latent(model, points, space=spec.space, snap=snap)

    seen = {}
    collapsed = {}
    kept_rows, kept_ids, kept_points = [], [], []
    for tid, row, pt in zip(raw.trial_ids, raw.trials, points):
        key = tuple(row)
        if key in seen:
            collapsed[tid] = seen[key]
            continue
        seen[key] = tid
        kept_rows.append(row)
        kept_ids.append(tid)
        kept_points.append(pt)

    design = Design(factors=raw.factors, trials=kept_rows,
                    provenance="generated-grid", trial_ids=kept_ids)
    upoints = np.asarray(kept_points, dtype=float)
    if spec.space == "original":
        upoints = normal_cdf(upoints)
    diagnostics = diagnose(design, constraints, points=upoints)
    diagnostics.collapsed = collapsed
    return design, diagnostics


def random_subset(design: Design, n: int, seed: int = 0) -> Design:
    """Uniform sample of trials without replacement, order of the draw."""
    if not 1 <= n <= len(design):
        raise ValidationError(f"subset size {n} out of range 1..{len(design)}")
    rng = np.random.default_rng(seed)
    idx = rng.permutation(len(design))[:n]
    return Design(
        factors=design.factors,
        trials=[list(design.trials[i]) for i in idx],
        provenance="random-subset",
        trial_ids=[design.trial_ids[i] for i in idx],
    )
