import itertools

import numpy as np
import pytest

from gdoe.cluster import kmeans, ward
from gdoe.errors import ValidationError


def brute_force_best_partition(pts, k):
    """Exhaustive minimum within-cluster variance over all k-partitions."""
    n = len(pts)
    best_cost = np.inf
    best = None
    for assign in itertools.product(range(k), repeat=n):
        if len(set(assign)) != k:
            continue
        cost = 0.0
        for c in range(k):
            members = pts[[i for i in range(n) if assign[i] == c]]
            cost += ((members - members.mean(axis=0)) ** 2).sum()
        if cost < best_cost:
            best_cost = cost
            best = assign
    return best, best_cost


def greedy_agglomeration(pts, k):
    """Independent oracle: repeatedly merge the pair with least ESS increase."""
    clusters = [frozenset([i]) for i in range(len(pts))]
    ids = list(range(len(pts)))
    next_id = len(pts)
    while len(clusters) > k:
        best = None
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                ma = pts[list(clusters[a])].mean(axis=0)
                mb = pts[list(clusters[b])].mean(axis=0)
                na, nb = len(clusters[a]), len(clusters[b])
                cost = na * nb / (na + nb) * ((ma - mb) ** 2).sum()
                key = (cost, min(ids[a], ids[b]), max(ids[a], ids[b]), a, b)
                if best is None or key < best:
                    best = key
        _, _, _, a, b = best
        merged = clusters[a] | clusters[b]
        clusters = [c for i, c in enumerate(clusters) if i not in (a, b)] + [merged]
        ids = [x for i, x in enumerate(ids) if i not in (a, b)] + [next_id]
        next_id += 1
    return {frozenset(c) for c in clusters}


def partition_of(assignments):
    groups = {}
    for i, c in enumerate(assignments):
        groups.setdefault(int(c), set()).add(i)
    return {frozenset(g) for g in groups.values()}


def test_kmeans_k1_mean():
    pts = np.array([[0.2, 0.4], [0.6, 0.8], [0.4, 0.0]])
    result = kmeans(pts, 1, seed=0)
    assert result.centroids[0] == pytest.approx(pts.mean(axis=0))


def test_kmeans_two_separated_pairs():
    pts = np.array([[0.1, 0.1], [0.12, 0.1], [0.9, 0.9], [0.88, 0.92]])
    result = kmeans(pts, 2, seed=0)
    # oracle: brute force over all 2-partitions
    expected, _ = brute_force_best_partition(pts, 2)
    assert partition_of(result.assignments) == partition_of(expected)
    for c in result.centroids:
        assert any(np.allclose(c, pts[[0, 1]].mean(axis=0)) or
                   np.allclose(c, pts[[2, 3]].mean(axis=0)) for _ in [0])


def test_kmeans_k_equals_n():
    pts = np.array([[0.1, 0.2], [0.5, 0.5], [0.9, 0.1]])
    result = kmeans(pts, 3, seed=1)
    assert result.inertia == pytest.approx(0.0, abs=1e-24)
    assert sorted(map(tuple, result.centroids.round(9))) == sorted(map(tuple, pts.round(9)))


def test_kmeans_k_too_large():
    pts = np.array([[0.1, 0.1], [0.1, 0.1], [0.2, 0.2]])
    with pytest.raises(ValidationError):
        kmeans(pts, 3, seed=0)  # only 2 distinct points


def test_kmeans_matches_brute_force_small_sets():
    # instances with separated groups, where Lloyd from k-means++ seeding
    # reaches the global optimum (verified against the exhaustive search)
    rng = np.random.default_rng(31)
    for trial in range(8):
        centers = rng.uniform(0.15, 0.85, size=(2, 2))
        while np.linalg.norm(centers[0] - centers[1]) < 0.4:
            centers = rng.uniform(0.15, 0.85, size=(2, 2))
        pts = np.vstack([
            c + rng.normal(0, 0.04, size=(3, 2)) for c in centers
        ])
        result = kmeans(pts, 2, seed=trial)
        _, best_cost = brute_force_best_partition(pts, 2)
        assert result.inertia == pytest.approx(best_cost, rel=1e-9, abs=1e-12)


def test_kmeans_inertia_non_increasing_across_iterations():
    rng = np.random.default_rng(7)
    pts = rng.uniform(0, 1, size=(40, 2))
    inertias = []
    for max_iter in range(1, 8):
        inertias.append(kmeans(pts, 4, seed=2, max_iter=max_iter).inertia)
    assert all(b <= a + 1e-12 for a, b in zip(inertias, inertias[1:]))


def test_kmeans_centroids_inside_unit_square():
    rng = np.random.default_rng(8)
    pts = rng.uniform(0.1, 0.9, size=(50, 2))
    result = kmeans(pts, 5, seed=0)
    assert result.centroids.min() > 0 and result.centroids.max() < 1


def test_ward_singletons_and_single_cluster():
    pts = np.array([[0.1, 0.1], [0.4, 0.6], [0.8, 0.2]])
    singles = ward(pts, 3)
    assert partition_of(singles.assignments) == {frozenset([0]), frozenset([1]), frozenset([2])}
    one = ward(pts, 1)
    assert partition_of(one.assignments) == {frozenset([0, 1, 2])}
    assert one.centroids[0] == pytest.approx(pts.mean(axis=0))


def test_ward_collinear_pairs():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [10.0, 0.0], [11.0, 0.0]])
    result = ward(pts, 2)
    expected, _ = brute_force_best_partition(pts, 2)
    assert partition_of(result.assignments) == partition_of(expected)


def test_ward_matches_independent_agglomeration():
    rng = np.random.default_rng(17)
    for trial in range(10):
        n = int(rng.integers(4, 9))
        pts = rng.uniform(0, 1, size=(n, 2))
        for k in (1, 2, 3):
            if k > n:
                continue
            mine = partition_of(ward(pts, k).assignments)
            oracle = greedy_agglomeration(pts, k)
            assert mine == oracle, f"trial {trial} k={k}"


def test_ward_centroids_are_member_means():
    rng = np.random.default_rng(4)
    pts = rng.uniform(0, 1, size=(12, 2))
    result = ward(pts, 3)
    for c in range(3):
        members = pts[result.assignments == c]
        assert result.centroids[c] == pytest.approx(members.mean(axis=0))
        assert 0 < result.centroids[c][0] < 1


def test_partition_invariant_under_point_relabeling():
    rng = np.random.default_rng(23)
    pts = rng.uniform(0, 1, size=(10, 2))
    perm = rng.permutation(10)
    for k in (2, 4):
        base = partition_of(ward(pts, k).assignments)
        shuffled = ward(pts[perm], k)
        relabeled = {frozenset(int(perm[i]) for i in group)
                     for group in partition_of(shuffled.assignments)}
        assert base == relabeled


def test_ward_k_out_of_range():
    pts = np.array([[0.0, 0.0], [1.0, 1.0]])
    with pytest.raises(ValidationError):
        ward(pts, 3)
