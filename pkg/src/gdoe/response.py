"""Response ingestion, surface interpolation, optimum location, importance.

Replicated measurements reduce to one-sided lower confidence limits via
the Student-t interval. Responses interpolate linearly over a Delaunay
triangulation of the embedded trials (nearest neighbor outside the
hull), and factor importance comes from permuting factor columns under
a small regularized regressor and watching the loss move.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .design import Design, encode_design
from .errors import TriangulationError, ValidationError
from .fields import FieldMap, lattice_points
from .stats import student_t_quantile
from .triangulate import TriangleLocator, Triangulation, delaunay


@dataclass
class ResponseRecord:
    """Replicate measurements for one trial, summarized."""

    trial_id: int | None
    replicates: list
    mean: float
    std: float
    lcl: float
    confidence: float

    def to_dict(self) -> dict:
        return {
            "trial_id": self.trial_id,
            "replicates": list(self.replicates),
            "mean": self.mean,
            "std": self.std,
            "lcl": self.lcl,
            "confidence": self.confidence,
        }


def compute_lcl(replicates, confidence: float = 0.90, trial_id=None) -> ResponseRecord:
    """mean - t(confidence, n-1) * s / sqrt(n), s with the n-1 denominator."""
    values = [float(v) for v in replicates]
    n = len(values)
    if n < 2:
        raise ValidationError("need at least 2 replicates for a confidence limit")
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    std = math.sqrt(var)
    t = student_t_quantile(confidence, n - 1)
    lcl = mean - t * std / math.sqrt(n)
    return ResponseRecord(trial_id=trial_id, replicates=values, mean=mean,
                          std=std, lcl=lcl, confidence=confidence)


@dataclass
class Surface:
    """Interpolated response over the uniformed square."""

    fmap: FieldMap
    interior: np.ndarray     # (H, W) bool, True where barycentric interpolation applied
    points: np.ndarray       # (n, 2) trial coordinates (duplicates merged)
    values: np.ndarray       # (n,) responses at those coordinates
    trial_ids: list
    nearest_only: bool = False
    triangulation: Triangulation | None = None


def _merge_duplicates(points: np.ndarray, values: np.ndarray, ids):
    seen = {}
    out_pts, out_vals, out_ids = [], [], []
    for p, v, tid in zip(points, values, ids):
        key = (float(p[0]), float(p[1]))
        if key in seen:
            idx = seen[key]
            out_vals[idx].append(v)
        else:
            seen[key] = len(out_pts)
            out_pts.append(p)
            out_vals.append([v])
            out_ids.append(tid)
    merged = np.array([sum(vs) / len(vs) for vs in out_vals])
    return np.array(out_pts), merged, out_ids


def evaluate_points(surface: Surface, queries) -> np.ndarray:
    """Surface value at arbitrary uniformed coordinates."""
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    out = np.empty(queries.shape[0])
    locator = (TriangleLocator(surface.triangulation)
               if surface.triangulation is not None else None)
    for i, q in enumerate(queries):
        out[i] = _value_at(surface.points, surface.values, locator, q)[0]
    return out


def _value_at(points, values, locator, q):
    """(value, interior) with exact reproduction at the sites themselves."""
    d2 = ((points - q) ** 2).sum(axis=1)
    nearest = int(np.argmin(d2))
    if d2[nearest] < 1e-24:
        return float(values[nearest]), True
    if locator is not None:
        hit = locator.locate(q)
        if hit is not None:
            t_idx, w = hit
            tri = locator.tri.triangles[t_idx]
            return float((values[tri] * w).sum()), True
    return float(values[nearest]), False


def interpolate(embedding, responses: dict, resolution: int = 100) -> Surface:
    """Linear interpolation of trial responses over the unit square.

    embedding is a LatentEmbedding; responses maps trial_id to a scalar.
    Trials sharing exact coordinates are merged by averaging first. When
    every point is collinear the surface falls back to nearest-neighbor
    values everywhere and is flagged nearest_only.
    """
    ids = [tid for tid in embedding.trial_ids if tid in responses]
    if len(ids) < 1:
        raise ValidationError("no responses match the embedding's trial ids")
    index = {tid: i for i, tid in enumerate(embedding.trial_ids)}
    pts = np.array([embedding.u[index[tid]] for tid in ids])
    vals = np.array([float(responses[tid]) for tid in ids])
    pts, vals, ids = _merge_duplicates(pts, vals, ids)

    tri = None
    nearest_only = False
    if len(pts) >= 3:
        try:
            tri = delaunay(pts)
        except TriangulationError:
            nearest_only = True
    else:
        nearest_only = True

    locator = TriangleLocator(tri) if tri is not None else None
    queries = lattice_points(resolution, resolution)
    grid_vals = np.empty(queries.shape[0])
    interior = np.zeros(queries.shape[0], dtype=bool)
    for i, q in enumerate(queries):
        if locator is None:
            d2 = ((pts - q) ** 2).sum(axis=1)
            grid_vals[i] = vals[int(np.argmin(d2))]
        else:
            grid_vals[i], interior[i] = _value_at(pts, vals, locator, q)

    fmap = FieldMap(values=grid_vals.reshape(resolution, resolution),
                    name="response", meta={"resolution": resolution})
    return Surface(fmap=fmap, interior=interior.reshape(resolution, resolution),
                   points=pts, values=vals, trial_ids=ids,
                   nearest_only=nearest_only, triangulation=tri)


@dataclass
class OptimumReport:
    """Lattice optimum of the surface, next to the best executed trial."""

    goal: str
    point: tuple             # uniformed (x, y) of the winning cell center
    value: float
    cell: tuple              # (row, col)
    best_trial_id: int
    best_trial_point: tuple
    best_trial_value: float

    def to_dict(self) -> dict:
        return {
            "goal": self.goal,
            "point": list(self.point),
            "value": self.value,
            "cell": list(self.cell),
            "best_trial_id": self.best_trial_id,
            "best_trial_point": list(self.best_trial_point),
            "best_trial_value": self.best_trial_value,
        }


def find_optimum(surface: Surface, goal: str = "max") -> OptimumReport:
    """Arg-extremum over lattice cells; ties break at the lowest (row, col)."""
    if goal not in ("max", "min"):
        raise ValidationError("goal must be 'max' or 'min'")
    values = surface.fmap.values
    flat = values.argmax() if goal == "max" else values.argmin()
    row, col = np.unravel_index(int(flat), values.shape)
    xs, ys = surface.fmap.cell_centers()
    best = int(surface.values.argmax() if goal == "max" else surface.values.argmin())
    return OptimumReport(
        goal=goal,
        point=(float(xs[col]), float(ys[row])),
        value=float(values[row, col]),
        cell=(int(row), int(col)),
        best_trial_id=surface.trial_ids[best],
        best_trial_point=(float(surface.points[best, 0]), float(surface.points[best, 1])),
        best_trial_value=float(surface.values[best]),
    )


IMPORTANCE_REG = nn.Regularization(
    weight_l1=1e-5, weight_l2=1e-4, bias_l2=1e-4, activity_l2=1e-5,
)


@dataclass
class ImportanceReport:
    scores: dict             # factor -> mean relative loss increase
    ranking: list            # factor names, most important first
    base_loss: float
    replications: int

    def to_dict(self) -> dict:
        return {
            "scores": self.scores,
            "ranking": self.ranking,
            "base_loss": self.base_loss,
            "replications": self.replications,
        }


def _fit_importance_net(x: np.ndarray, y: np.ndarray, seed,
                        epochs: int = 100, batch_size: int = 128):
    root = np.random.SeedSequence(seed) if not isinstance(seed, np.random.SeedSequence) else seed
    ss_init, ss_shuffle = root.spawn(2)
    rng = np.random.default_rng(ss_init)
    net = nn.dense_net([x.shape[1], 16, 4, 1], ["relu", "relu", "linear"],
                       rng, init=0.05, reg=IMPORTANCE_REG)
    state = nn.AdamState.for_net(net)
    order = np.random.default_rng(ss_shuffle).permutation(x.shape[0])
    xs, ys = x[order], y[order]
    for _ in range(epochs):
        for start in range(0, xs.shape[0], batch_size):
            xb = xs[start:start + batch_size]
            yb = ys[start:start + batch_size]
            out, cache = nn.forward(net, xb)
            _, grad = nn.mse(out, yb)
            grads, _ = nn.backward(net, cache, grad)
            nn.adam_step(net, grads, state)
    return net


def importance(design: Design, responses: dict, replications: int = 10,
               seed: int = 0) -> ImportanceReport:
    """Relative loss increase per factor under column permutation.

    Fits a small regularized regressor (16 relu, 4 relu, 1 linear) on the
    encoded design, duplicating rows x50 train / x30 eval for designs of
    up to 64 trials and x5 / x3 otherwise, then permutes each factor's
    encoded block within the evaluation split and reports the mean
    (permuted loss - base loss) / base loss over the replications.
    """
    if replications < 1:
        raise ValidationError("replications must be at least 1")
    ids = [tid for tid in design.trial_ids if tid in responses]
    if len(ids) != len(design.trial_ids):
        missing = set(design.trial_ids) - set(ids)
        raise ValidationError(f"missing responses for trials {sorted(missing)[:5]}")
    y = np.array([float(responses[tid]) for tid in design.trial_ids])
    if np.unique(y).size < 2:
        raise ValidationError("responses are constant; importance is undefined")

    encoded = encode_design(design)
    x = encoded.rows
    y_mean, y_std = y.mean(), y.std()
    y_norm = ((y - y_mean) / y_std).reshape(-1, 1)

    train_dup, test_dup = (50, 30) if len(design) <= 64 else (5, 3)
    root = np.random.SeedSequence(seed)
    ss_fit, ss_split, ss_perm = root.spawn(3)
    rng_split = np.random.default_rng(ss_split)

    def duplicated(dup):
        idx = np.tile(np.arange(x.shape[0]), dup)
        rng_split.shuffle(idx)
        return x[idx], y_norm[idx]

    x_train, y_train = duplicated(train_dup)
    x_eval, y_eval = duplicated(test_dup)

    net = _fit_importance_net(x_train, y_train, ss_fit)
    out, _ = nn.forward(net, x_eval)
    base_loss, _ = nn.mse(out, y_eval)

    rng_perm = np.random.default_rng(ss_perm)
    scores = {}
    for block in encoded.column_map:
        cols = slice(block.start, block.start + block.width)
        increases = []
        for _ in range(replications):
            perm = rng_perm.permutation(x_eval.shape[0])
            x_mut = x_eval.copy()
            x_mut[:, cols] = x_eval[perm, cols]
            out, _ = nn.forward(net, x_mut)
            loss, _ = nn.mse(out, y_eval)
            increases.append((loss - base_loss) / base_loss)
        scores[block.name] = float(np.mean(increases))
    ranking = sorted(scores, key=lambda name: scores[name], reverse=True)
    return ImportanceReport(scores=scores, ranking=ranking,
                            base_loss=float(base_loss), replications=replications)
