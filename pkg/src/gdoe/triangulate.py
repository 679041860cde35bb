"""Bowyer-Watson Delaunay triangulation of scattered 2D points.

Coordinates are normalized into the unit box internally, which keeps the
circumcircle tests well scaled regardless of whether the caller works in
uniformed or original latent coordinates. Insertion order is the input
order, so results are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TriangulationError, ValidationError

EPS = 1e-12


@dataclass
class Triangulation:
    points: np.ndarray     # (n, 2)
    triangles: np.ndarray  # (m, 3) vertex indices, counterclockwise

    @property
    def n_triangles(self) -> int:
        return int(self.triangles.shape[0])


def _circumcircle(a, b, c):
    """Center and squared radius; infinite radius for degenerate triangles."""
    d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]))
    if abs(d) < 1e-24:
        return np.array([0.0, 0.0]), np.inf
    a2 = a[0] * a[0] + a[1] * a[1]
    b2 = b[0] * b[0] + b[1] * b[1]
    c2 = c[0] * c[0] + c[1] * c[1]
    ux = (a2 * (b[1] - c[1]) + b2 * (c[1] - a[1]) + c2 * (a[1] - b[1])) / d
    uy = (a2 * (c[0] - b[0]) + b2 * (a[0] - c[0]) + c2 * (b[0] - a[0])) / d
    center = np.array([ux, uy])
    r2 = (a[0] - ux) ** 2 + (a[1] - uy) ** 2
    return center, r2


def delaunay(points) -> Triangulation:
    """Triangulate distinct points; raises if they are all collinear."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValidationError("points must be an (n, 2) array")
    n = pts.shape[0]
    if n < 3:
        raise TriangulationError(f"need at least 3 points, got {n}")
    if np.unique(pts, axis=0).shape[0] != n:
        raise ValidationError("points must be distinct; merge duplicates first")

    lo = pts.min(axis=0)
    span = pts.max(axis=0) - lo
    scale = max(span.max(), 1e-9)
    work = (pts - lo) / scale  # unit box

    # super-triangle comfortably containing the unit box
    sup = np.array([[-10.0, -10.0], [20.0, -10.0], [0.5, 20.0]])
    verts = np.vstack([work, sup])
    tris = [(n, n + 1, n + 2)]
    centers = [None]
    radii2 = [None]
    centers[0], radii2[0] = _circumcircle(*verts[list(tris[0])])
    alive = [True]

    centers_arr = np.array([centers[0]])
    radii_arr = np.array([radii2[0]])

    for p_idx in range(n):
        p = verts[p_idx]
        d2 = ((centers_arr - p) ** 2).sum(axis=1)
        bad = [t for t in np.nonzero((d2 < radii_arr - EPS) & np.array(alive))[0]]
        if not bad:
            # numerically on every boundary; fall back to containing-alive scan
            bad = [i for i, ok in enumerate(alive) if ok and d2[i] < radii_arr[i] + EPS]
        if not bad:
            raise TriangulationError("insertion found no cavity; degenerate input")

        edge_count = {}
        for t in bad:
            a, b, c = tris[t]
            for e in ((a, b), (b, c), (c, a)):
                key = (min(e), max(e))
                edge_count[key] = edge_count.get(key, 0) + 1
            alive[t] = False
        boundary = [e for e, cnt in edge_count.items() if cnt == 1]

        new_entries = []
        for a, b in boundary:
            # orient counterclockwise
            ax, ay = verts[a]
            bx, by = verts[b]
            cross = (bx - ax) * (p[1] - ay) - (by - ay) * (p[0] - ax)
            tri = (a, b, p_idx) if cross > 0 else (b, a, p_idx)
            center, r2 = _circumcircle(verts[tri[0]], verts[tri[1]], verts[tri[2]])
            tris.append(tri)
            alive.append(True)
            new_entries.append((center, r2))
        if new_entries:
            centers_arr = np.vstack([centers_arr, [e[0] for e in new_entries]])
            radii_arr = np.concatenate([radii_arr, [e[1] for e in new_entries]])

        # compact occasionally to keep the scan short
        if len(tris) > 4 * max(64, n):
            keep = [i for i, ok in enumerate(alive) if ok]
            tris = [tris[i] for i in keep]
            centers_arr = centers_arr[keep]
            radii_arr = radii_arr[keep]
            alive = [True] * len(tris)

    final = [t for t, ok in zip(tris, alive) if ok and max(t) < n]
    if not final:
        raise TriangulationError("all points are collinear")
    return Triangulation(points=pts, triangles=np.array(final, dtype=int))


class TriangleLocator:
    """Bucketed point location plus barycentric evaluation over a triangulation."""

    def __init__(self, tri: Triangulation, grid: int = 32):
        self.tri = tri
        self.grid = grid
        pts = tri.points
        self.lo = pts.min(axis=0)
        span = pts.max(axis=0) - self.lo
        self.span = np.maximum(span, 1e-12)
        self.buckets = {}
        for t_idx, (a, b, c) in enumerate(tri.triangles):
            corners = pts[[a, b, c]]
            cell_lo = self._cell(corners.min(axis=0))
            cell_hi = self._cell(corners.max(axis=0))
            for gx in range(cell_lo[0], cell_hi[0] + 1):
                for gy in range(cell_lo[1], cell_hi[1] + 1):
                    self.buckets.setdefault((gx, gy), []).append(t_idx)

    def _cell(self, p):
        rel = (np.asarray(p) - self.lo) / self.span
        return (int(np.clip(rel[0] * self.grid, 0, self.grid - 1)),
                int(np.clip(rel[1] * self.grid, 0, self.grid - 1)))

    def barycentric(self, t_idx: int, p) -> np.ndarray | None:
        a, b, c = self.tri.triangles[t_idx]
        pa, pb, pc = self.tri.points[a], self.tri.points[b], self.tri.points[c]
        det = (pb[1] - pc[1]) * (pa[0] - pc[0]) + (pc[0] - pb[0]) * (pa[1] - pc[1])
        if abs(det) < 1e-300:
            return None
        w0 = ((pb[1] - pc[1]) * (p[0] - pc[0]) + (pc[0] - pb[0]) * (p[1] - pc[1])) / det
        w1 = ((pc[1] - pa[1]) * (p[0] - pc[0]) + (pa[0] - pc[0]) * (p[1] - pc[1])) / det
        return np.array([w0, w1, 1.0 - w0 - w1])

    def locate(self, p, tol: float = 1e-9) -> tuple | None:
        """(triangle index, barycentric weights) or None when outside the hull."""
        for t_idx in self.buckets.get(self._cell(p), ()):
            w = self.barycentric(t_idx, p)
            if w is not None and (w >= -tol).all():
                return t_idx, np.clip(w, 0.0, 1.0)
        return None
