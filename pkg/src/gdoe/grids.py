"""Latent-space point patterns: square, polar, double-square, explicit.

Square grids live on the uniformed unit square; polar and double-square
patterns live on the original (unbounded) latent plane where the prior
is an isotropic 2D normal. Polar ring radii are chosen so each annulus
(and the inner disc) encloses equal prior probability mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

GRID_TYPES = ("square", "polar", "double-square", "explicit")


@dataclass(frozen=True)
class GridSpec:
    """Declarative description of a latent point pattern."""

    type: str
    nx: int = 3
    ny: int = 3
    rings: int = 2
    angles: int = 3
    include_center: bool = True
    inner_radius: float = 0.9005
    outer_radius: float = 1.4823
    rotation: float = 0.0
    points: tuple = ()
    space: str = ""  # "" means the default for the grid type

    def __post_init__(self):
        if self.type not in GRID_TYPES:
            raise ValidationError(f"unknown grid type {self.type!r}")
        resolved = self.space or DEFAULT_SPACES[self.type]
        if resolved not in ("uniformed", "original"):
            raise ValidationError(f"unknown space {self.space!r}")
        object.__setattr__(self, "space", resolved)

    @property
    def count(self) -> int:
        if self.type == "square":
            return self.nx * self.ny
        if self.type == "polar":
            return self.rings * self.angles + (1 if self.include_center else 0)
        if self.type == "double-square":
            return 8
        return len(self.points)

    def to_dict(self) -> dict:
        d = {"type": self.type, "space": self.space, "rotation": self.rotation}
        if self.type == "square":
            d.update(nx=self.nx, ny=self.ny)
        elif self.type == "polar":
            d.update(rings=self.rings, angles=self.angles, include_center=self.include_center)
        elif self.type == "double-square":
            d.update(inner_radius=self.inner_radius, outer_radius=self.outer_radius)
        else:
            d.update(points=[list(p) for p in self.points])
        return d

    @staticmethod
    def from_dict(d: dict) -> "GridSpec":
        return GridSpec(
            type=d["type"],
            nx=d.get("nx", 3),
            ny=d.get("ny", 3),
            rings=d.get("rings", 2),
            angles=d.get("angles", 3),
            include_center=d.get("include_center", True),
            inner_radius=d.get("inner_radius", 0.9005),
            outer_radius=d.get("outer_radius", 1.4823),
            rotation=d.get("rotation", 0.0),
            points=tuple(tuple(p) for p in d.get("points", ())),
            space=d.get("space", ""),
        )


DEFAULT_SPACES = {
    "square": "uniformed",
    "polar": "original",
    "double-square": "original",
    "explicit": "uniformed",
}


def _rotate(points: np.ndarray, angle: float, center) -> np.ndarray:
    if angle == 0.0:
        return points
    c, s = math.cos(angle), math.sin(angle)
    rel = points - center
    return np.column_stack([
        rel[:, 0] * c - rel[:, 1] * s,
        rel[:, 0] * s + rel[:, 1] * c,
    ]) + center


def equal_mass_radii(rings: int) -> np.ndarray:
    """Radii r_k = sqrt(-2 ln(1 - k/(rings+1))), k = 1..rings.

    The standard 2D normal mass inside r_1, between consecutive rings,
    and outside r_rings is 1/(rings+1) each.
    """
    k = np.arange(1, rings + 1)
    return np.sqrt(-2.0 * np.log(1.0 - k / (rings + 1.0)))


def make_grid(spec: GridSpec) -> np.ndarray:
    """Materialize the point pattern; coordinates are in spec.space."""
    if spec.type == "square":
        if spec.nx < 1 or spec.ny < 1:
            raise ValidationError("square grid counts must be at least 1")
        xs = (np.arange(spec.nx) + 0.5) / spec.nx
        ys = (np.arange(spec.ny) + 0.5) / spec.ny
        pts = np.array([(x, y) for x in xs for y in ys])
        pts = _rotate(pts, spec.rotation, np.array([0.5, 0.5]))
        if pts.min() <= 0.0 or pts.max() >= 1.0:
            raise ValidationError(
                "rotation pushes square grid points outside the open unit square"
            )
        return pts

    if spec.type == "polar":
        if spec.rings < 0 or spec.angles < 1:
            raise ValidationError("polar grid needs rings >= 0 and angles >= 1")
        pts = []
        if spec.include_center:
            pts.append((0.0, 0.0))
        radii = equal_mass_radii(spec.rings)
        for r in radii:
            for a in range(spec.angles):
                theta = spec.rotation + 2.0 * math.pi * a / spec.angles
                pts.append((r * math.cos(theta), r * math.sin(theta)))
        return np.array(pts) if pts else np.empty((0, 2))

    if spec.type == "double-square":
        if spec.inner_radius <= 0 or spec.outer_radius <= 0:
            raise ValidationError("double-square radii must be positive")
        pts = []
        for radius, offset in ((spec.inner_radius, 0.0), (spec.outer_radius, math.pi / 4)):
            for a in range(4):
                theta = spec.rotation + offset + a * math.pi / 2
                pts.append((radius * math.cos(theta), radius * math.sin(theta)))
        return np.array(pts)

    pts = np.asarray([list(p) for p in spec.points], dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValidationError("explicit grid points must be (n, 2)")
    return pts
