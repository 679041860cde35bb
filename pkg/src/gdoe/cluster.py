"""Aggregate latent points into k clusters whose centroids can seed a grid.

Both methods report member means as centroids so the result feeds the
decoder directly. Everything is deterministic: k-means uses k-means++
seeding from an explicit stream, Ward breaks merge-cost ties by the
lowest pair of cluster indices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass
class Clustering:
    method: str
    k: int
    assignments: np.ndarray  # (n,) cluster index per point
    centroids: np.ndarray    # (k, d) member means
    inertia: float           # total within-cluster squared distance

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "k": self.k,
            "assignments": self.assignments.tolist(),
            "centroids": self.centroids.tolist(),
            "inertia": self.inertia,
        }


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValidationError("points must form a non-empty (n, d) array")
    return pts


def _inertia(pts, assignments, centroids) -> float:
    return float(((pts - centroids[assignments]) ** 2).sum())


def kmeans(points, k: int, seed: int = 0, max_iter: int = 300) -> Clustering:
    """Lloyd iterations from k-means++ seeds until the assignment fixpoint."""
    pts = _as_points(points)
    n_distinct = np.unique(pts, axis=0).shape[0]
    if k < 1 or k > n_distinct:
        raise ValidationError(f"k={k} exceeds the {n_distinct} distinct points")
    rng = np.random.default_rng(seed)

    # k-means++ seeding
    centroids = np.empty((k, pts.shape[1]))
    centroids[0] = pts[rng.integers(len(pts))]
    closest = ((pts - centroids[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = closest.sum()
        if total <= 0:
            # remaining mass sits on already-chosen seeds; take any new distinct point
            fresh = np.nonzero(closest > 0)[0]
            if fresh.size == 0:
                fresh = np.arange(len(pts))
            centroids[c] = pts[fresh[0]]
        else:
            r = rng.uniform(0.0, total)
            idx = int(np.searchsorted(np.cumsum(closest), r))
            centroids[c] = pts[min(idx, len(pts) - 1)]
        closest = np.minimum(closest, ((pts - centroids[c]) ** 2).sum(axis=1))

    assignments = np.full(len(pts), -1, dtype=int)
    for _ in range(max_iter):
        dists = ((pts[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_assignments = dists.argmin(axis=1)

        # repair empty clusters by stealing the farthest point from the largest
        counts = np.bincount(new_assignments, minlength=k)
        while (counts == 0).any():
            empty = int(np.argmin(counts))
            largest = int(np.argmax(counts))
            candidates = np.nonzero(new_assignments == largest)[0]
            far = candidates[dists[candidates, largest].argmax()]
            new_assignments[far] = empty
            counts = np.bincount(new_assignments, minlength=k)

        for c in range(k):
            centroids[c] = pts[new_assignments == c].mean(axis=0)
        if (new_assignments == assignments).all():
            break
        assignments = new_assignments

    return Clustering(method="kmeans", k=k, assignments=assignments,
                      centroids=centroids, inertia=_inertia(pts, assignments, centroids))


def ward(points, k: int) -> Clustering:
    """Agglomerative merging minimizing the increase in within-cluster variance.

    Pairwise merge costs (the ESS increase of the union) are maintained
    with the Lance-Williams recurrence; cost ties break on the lowest
    (id, id) pair, where singletons carry ids 0..n-1 and each merge
    creates id n + step.
    """
    pts = _as_points(points)
    n = len(pts)
    if k < 1 or k > n:
        raise ValidationError(f"k={k} exceeds the {n} points")

    # slot arrays; a merge reuses slot a and kills slot b
    sizes = np.ones(n)
    ids = np.arange(n)
    alive = np.ones(n, dtype=bool)
    members = [[i] for i in range(n)]

    diff = pts[:, None, :] - pts[None, :, :]
    cost = 0.5 * (diff ** 2).sum(axis=2)  # ESS increase for singleton pairs
    np.fill_diagonal(cost, np.inf)

    for step in range(n - k):
        best = cost.min()
        ties = np.argwhere(cost <= best + 1e-15)
        # pick the tie with the lowest (min id, max id) pair
        best_pair = None
        best_key = None
        for r, c in ties:
            if r >= c:
                continue
            key = (min(ids[r], ids[c]), max(ids[r], ids[c]))
            if best_key is None or key < best_key:
                best_key = key
                best_pair = (int(r), int(c))
        a, b = best_pair
        na, nb, d_ab = sizes[a], sizes[b], cost[a, b]

        active = alive.copy()
        active[a] = active[b] = False
        nc = sizes[active]
        d_ac = cost[a, active]
        d_bc = cost[b, active]
        new_costs = ((na + nc) * d_ac + (nb + nc) * d_bc - nc * d_ab) / (na + nb + nc)
        cost[a, active] = new_costs
        cost[active, a] = new_costs

        sizes[a] = na + nb
        ids[a] = n + step
        members[a] = members[a] + members[b]
        alive[b] = False
        cost[b, :] = np.inf
        cost[:, b] = np.inf

    slots = sorted(np.nonzero(alive)[0], key=lambda s: ids[s])
    assignments = np.zeros(n, dtype=int)
    centroids = np.zeros((k, pts.shape[1]))
    for out_idx, slot in enumerate(slots):
        assignments[members[slot]] = out_idx
        centroids[out_idx] = pts[members[slot]].mean(axis=0)
    return Clustering(method="ward", k=k, assignments=assignments,
                      centroids=centroids, inertia=_inertia(pts, assignments, centroids))
