"""Lattice-valued diagnostics over the uniformed unit square.

A FieldMap holds one value per cell of an H x W lattice whose cell
centers sit at ((i + 0.5) / W, (j + 0.5) / H). Three producers live
here: kernel density of embedded trials, decoded factor levels, and the
aggregated gradient metric that segments the plane into regions of
stable factor levels.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .design import decode_vector, encode_value
from .errors import ValidationError
from .vae import VaeModel, decode_latent, to_latent

AGGREGATIONS = ("sum", "max")


@dataclass
class FieldMap:
    """values[j, i] belongs to the cell centered at ((i+0.5)/W, (j+0.5)/H)."""

    values: np.ndarray
    name: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValidationError("field values must form a 2D lattice")

    @property
    def height(self) -> int:
        return int(self.values.shape[0])

    @property
    def width(self) -> int:
        return int(self.values.shape[1])

    def cell_centers(self):
        xs = (np.arange(self.width) + 0.5) / self.width
        ys = (np.arange(self.height) + 0.5) / self.height
        return xs, ys

    def to_csv(self) -> str:
        xs, ys = self.cell_centers()
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "y", "value"])
        for j, y in enumerate(ys):
            for i, x in enumerate(xs):
                writer.writerow([repr(float(x)), repr(float(y)), repr(float(self.values[j, i]))])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "width": self.width,
            "height": self.height,
            "values": self.values.tolist(),
            "meta": self.meta,
        }


def lattice_points(width: int, height: int) -> np.ndarray:
    """Cell centers in row-major (j, i) order, as (n, 2) uniformed coords."""
    xs = (np.arange(width) + 0.5) / width
    ys = (np.arange(height) + 0.5) / height
    xx, yy = np.meshgrid(xs, ys)
    return np.column_stack([xx.ravel(), yy.ravel()])


def density_map(points, resolution: int = 100) -> FieldMap:
    """Gaussian KDE of uniformed points, reflected at the square boundary.

    Bandwidth per axis follows Scott's 2D rule, n^(-1/6) times the sample
    standard deviation of that axis; the result is normalized to
    integrate to one over the square.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] == 0:
        raise ValidationError("density_map needs at least one (x, y) point")
    n = pts.shape[0]
    factor = n ** (-1.0 / 6.0)
    bandwidths = []
    for axis in range(2):
        std = pts[:, axis].std(ddof=1) if n > 1 else 0.0
        h = factor * std
        if h < 1e-9:
            h = 0.1 * factor if factor > 0 else 0.1
        bandwidths.append(h)

    xs = (np.arange(resolution) + 0.5) / resolution
    ys = (np.arange(resolution) + 0.5) / resolution

    def axis_kernel(grid, data, h):
        # reflect at 0 and 1 so mass does not leak outside the square
        d0 = grid[:, None] - data[None, :]
        d1 = grid[:, None] + data[None, :]
        d2 = grid[:, None] - (2.0 - data[None, :])
        k = (np.exp(-0.5 * (d0 / h) ** 2)
             + np.exp(-0.5 * (d1 / h) ** 2)
             + np.exp(-0.5 * (d2 / h) ** 2))
        return k / (h * math.sqrt(2.0 * math.pi))

    kx = axis_kernel(xs, pts[:, 0], bandwidths[0])  # (W, n)
    ky = axis_kernel(ys, pts[:, 1], bandwidths[1])  # (H, n)
    values = ky @ kx.T / n  # (H, W)
    cell_area = 1.0 / (resolution * resolution)
    total = values.sum() * cell_area
    values /= total
    return FieldMap(values=values, name="density",
                    meta={"bandwidths": bandwidths, "points": n})


def _normalized_factor_columns(model: VaeModel, rows: np.ndarray) -> dict:
    """Decode rows and re-express each factor as one scalar in [0, 1]."""
    columns = {b.name: np.empty(rows.shape[0]) for b in model.column_map}
    for r, row in enumerate(rows):
        levels = decode_vector(row, model.column_map, snap=False)
        for block, value in zip(model.column_map, levels):
            if block.rule == "onehot":
                idx = block.levels.index(value)
                columns[block.name][r] = idx / (block.width - 1)
            else:
                columns[block.name][r] = encode_value(block, value)[0]
    return columns


def factor_map(model: VaeModel, name: str, resolution: int = 100) -> FieldMap:
    """Decoded level of one factor over the lattice, scaled to [0, 1]."""
    blocks = {b.name: b for b in model.column_map}
    if name not in blocks:
        raise ValidationError(f"unknown factor {name!r}")
    pts = lattice_points(resolution, resolution)
    rows = model.decode_rows(to_latent(pts, "uniformed"))
    columns = _normalized_factor_columns(model, rows)
    values = columns[name].reshape(resolution, resolution)
    return FieldMap(values=values, name=f"factor:{name}",
                    meta={"levels": list(blocks[name].levels)})


def gradient_map(model: VaeModel, resolution: int = 100,
                 aggregation: str = "sum") -> FieldMap:
    """Aggregate |change of decoded level| per unit step along both axes.

    Each factor's decoded level is normalized to [0, 1] over its declared
    range (one-hot blocks contribute their argmax index scaled to [0, 1]);
    differences are central in the interior and one-sided at the edges,
    divided by the lattice spacing.
    """
    if aggregation not in AGGREGATIONS:
        raise ValidationError(f"aggregation must be one of {AGGREGATIONS}")
    if resolution < 3:
        raise ValidationError("gradient_map needs a resolution of at least 3 per axis")
    pts = lattice_points(resolution, resolution)
    rows = model.decode_rows(to_latent(pts, "uniformed"))
    columns = _normalized_factor_columns(model, rows)
    h = 1.0 / resolution
    total = np.zeros((resolution, resolution))
    for series in columns.values():
        f = series.reshape(resolution, resolution)
        for axis in (0, 1):
            grad = np.empty_like(f)
            # central differences over 2h; one-sided over h at the edges
            if axis == 0:
                grad[1:-1, :] = np.abs(f[2:, :] - f[:-2, :]) / (2.0 * h)
                grad[0, :] = np.abs(f[1, :] - f[0, :]) / h
                grad[-1, :] = np.abs(f[-1, :] - f[-2, :]) / h
            else:
                grad[:, 1:-1] = np.abs(f[:, 2:] - f[:, :-2]) / (2.0 * h)
                grad[:, 0] = np.abs(f[:, 1] - f[:, 0]) / h
                grad[:, -1] = np.abs(f[:, -1] - f[:, -2]) / h
            if aggregation == "sum":
                total += grad
            else:
                np.maximum(total, grad, out=total)
    return FieldMap(values=total, name=f"gradient:{aggregation}",
                    meta={"aggregation": aggregation})


@dataclass(frozen=True)
class BorderCell:
    i: int
    j: int
    x: float
    y: float
    value: float


def extract_borders(fmap: FieldMap, threshold: float) -> list:
    """Cells whose value reaches the threshold, with lattice and uniformed coords."""
    if threshold < 0:
        raise ValidationError("threshold must be nonnegative")
    xs, ys = fmap.cell_centers()
    out = []
    jj, ii = np.nonzero(fmap.values >= threshold)
    for j, i in zip(jj.tolist(), ii.tolist()):
        out.append(BorderCell(i=i, j=j, x=float(xs[i]), y=float(ys[j]),
                              value=float(fmap.values[j, i])))
    return out
