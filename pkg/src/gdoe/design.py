"""Factor definitions, factorial enumeration, and unit-interval encoding.

A design is a plain trial matrix over raw factor levels. Numeric factors
are encoded to [0, 1] by an optional log10 transform followed by min-max
scaling anchored on the declared level range, so the coordinate system
does not move when trials are filtered out. Categorical factors encode
to a single 0/1 column when they have two levels and to a one-hot block
otherwise.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError, SizeError, ValidationError

NUMERIC_KINDS = ("numeric-discrete", "numeric-continuous")
KINDS = NUMERIC_KINDS + ("categorical",)
TRANSFORMS = ("identity", "log10")

DEFAULT_ENUMERATION_CAP = 10_000_000


@dataclass(frozen=True)
class FactorSpec:
    """One experimental factor: name, kind, declared levels, numeric transform."""

    name: str
    kind: str
    levels: tuple
    transform: str = "identity"

    def __post_init__(self):
        if not self.name or not isinstance(self.name, str):
            raise ValidationError("factor name must be a non-empty string")
        if self.kind not in KINDS:
            raise ValidationError(f"unknown factor kind {self.kind!r}")
        levels = tuple(self.levels)
        object.__setattr__(self, "levels", levels)
        if len(levels) < 2:
            raise ValidationError(f"factor {self.name!r} needs at least 2 levels")
        if len(set(levels)) != len(levels):
            raise ValidationError(f"factor {self.name!r} has duplicate levels")
        if self.kind in NUMERIC_KINDS:
            if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in levels):
                raise ValidationError(f"numeric factor {self.name!r} has non-numeric levels")
            if any(b <= a for a, b in zip(levels, levels[1:])):
                raise ValidationError(f"numeric factor {self.name!r} levels must be strictly increasing")
            if self.transform not in TRANSFORMS:
                raise ValidationError(f"unknown transform {self.transform!r}")
            if self.transform == "log10" and any(v <= 0 for v in levels):
                raise ValidationError(f"log10 transform on {self.name!r} requires positive levels")
        else:
            if not all(isinstance(v, str) for v in levels):
                raise ValidationError(f"categorical factor {self.name!r} levels must be strings")
            if self.transform != "identity":
                raise ValidationError(f"categorical factor {self.name!r} cannot have a transform")

    @property
    def is_numeric(self) -> bool:
        return self.kind in NUMERIC_KINDS

    def apply_transform(self, value):
        if self.transform == "log10":
            return math.log10(value)
        return float(value)

    def invert_transform(self, value: float):
        if self.transform == "log10":
            return 10.0 ** value
        return value

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "levels": list(self.levels),
            "transform": self.transform,
        }

    @staticmethod
    def from_dict(d: dict) -> "FactorSpec":
        return FactorSpec(
            name=d["name"],
            kind=d["kind"],
            levels=tuple(d["levels"]),
            transform=d.get("transform", "identity"),
        )


PROVENANCES = (
    "initial-full",
    "initial-constrained",
    "generated-grid",
    "generated-cluster",
    "random-subset",
)


def _check_factor_names(factors) -> None:
    names = [f.name for f in factors]
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise ValidationError(f"duplicate factor names: {', '.join(dupes)}")


@dataclass
class Design:
    """A trial matrix: one row per trial, one column per factor, raw levels."""

    factors: list
    trials: list
    provenance: str
    trial_ids: list = field(default_factory=list)

    def __post_init__(self):
        _check_factor_names(self.factors)
        if self.provenance not in PROVENANCES:
            raise ValidationError(f"unknown provenance {self.provenance!r}")
        if not self.trial_ids:
            self.trial_ids = list(range(len(self.trials)))
        if len(self.trial_ids) != len(self.trials):
            raise ValidationError("trial_ids length does not match trial count")
        if len(set(self.trial_ids)) != len(self.trial_ids):
            raise ValidationError("trial_ids must be unique")
        off_level_ok = self.provenance.startswith("generated-")
        for row in self.trials:
            if len(row) != len(self.factors):
                raise ShapeError("trial row width does not match factor count")
            for f, v in zip(self.factors, row):
                if f.kind == "numeric-continuous" and off_level_ok:
                    continue
                if v not in f.levels:
                    raise ValidationError(
                        f"trial value {v!r} is not a declared level of factor {f.name!r}"
                    )

    def __len__(self) -> int:
        return len(self.trials)

    @property
    def factor_names(self) -> list:
        return [f.name for f in self.factors]

    def column(self, name: str) -> list:
        idx = self.factor_names.index(name)
        return [row[idx] for row in self.trials]

    def to_csv(self, include_trial_id: bool = True) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = (["trial_id"] if include_trial_id else []) + self.factor_names
        writer.writerow(header)
        for tid, row in zip(self.trial_ids, self.trials):
            cells = [format_level(v) for v in row]
            writer.writerow(([tid] if include_trial_id else []) + cells)
        return buf.getvalue()

    @staticmethod
    def from_csv(text: str, factors: list, provenance: str = "initial-full") -> "Design":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        has_id = header and header[0] == "trial_id"
        names = header[1:] if has_id else header
        expected = [f.name for f in factors]
        if names != expected:
            raise ValidationError(
                f"CSV columns {names} do not match declared factors {expected}"
            )
        by_name = {f.name: f for f in factors}
        trials, ids = [], []
        for i, cells in enumerate(reader):
            if not cells:
                continue
            if has_id:
                ids.append(int(cells[0]))
                cells = cells[1:]
            trials.append([parse_level(by_name[n], c) for n, c in zip(names, cells)])
        return Design(factors=factors, trials=trials, provenance=provenance,
                      trial_ids=ids if has_id else list(range(len(trials))))


def format_level(value) -> str:
    if isinstance(value, str):
        return value
    f = float(value)
    if f.is_integer():
        return str(int(f))
    return repr(f)


def parse_level(factor: FactorSpec, text: str):
    if not factor.is_numeric:
        return text
    value = float(text)
    # keep declared integer levels as ints so equality checks stay exact
    for lv in factor.levels:
        if value == lv:
            return lv
    return value


def build_full_factorial(factors, cap: int = DEFAULT_ENUMERATION_CAP) -> Design:
    """Enumerate every level combination in row-major declaration order."""
    factors = list(factors)
    if not factors:
        raise ValidationError("at least one factor is required")
    _check_factor_names(factors)
    total = math.prod(len(f.levels) for f in factors)
    if total > cap:
        raise SizeError(
            f"full factorial would have {total} trials, over the cap of {cap}"
        )
    trials = [list(combo) for combo in itertools.product(*(f.levels for f in factors))]
    return Design(factors=factors, trials=trials, provenance="initial-full")


def filter_by_constraints(design: Design, constraints) -> Design:
    """Keep exactly the trials satisfying all constraints, ids and order preserved."""
    from .constraints import evaluate

    kept_rows, kept_ids = [], []
    for tid, row in zip(design.trial_ids, design.trials):
        trial = dict(zip(design.factor_names, row))
        if all(evaluate(c, trial) for c in constraints):
            kept_rows.append(list(row))
            kept_ids.append(tid)
    return Design(
        factors=design.factors,
        trials=kept_rows,
        provenance="initial-constrained",
        trial_ids=kept_ids,
    )


@dataclass(frozen=True)
class ColumnBlock:
    """Where one factor lives in the encoded matrix and how it is encoded.

    rule is one of "minmax" (numeric, transform then scale to [0,1]),
    "binary" (two-level categorical, single 0/1 column), or "onehot".
    """

    name: str
    kind: str
    start: int
    width: int
    rule: str
    levels: tuple
    transform: str = "identity"
    tmin: float = 0.0
    tmax: float = 1.0

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "start": self.start,
            "width": self.width,
            "rule": self.rule,
            "levels": list(self.levels),
            "transform": self.transform,
            "tmin": self.tmin,
            "tmax": self.tmax,
        }

    @staticmethod
    def from_dict(d: dict) -> "ColumnBlock":
        return ColumnBlock(
            name=d["name"],
            kind=d["kind"],
            start=d["start"],
            width=d["width"],
            rule=d["rule"],
            levels=tuple(d["levels"]),
            transform=d.get("transform", "identity"),
            tmin=d.get("tmin", 0.0),
            tmax=d.get("tmax", 1.0),
        )


@dataclass
class EncodedMatrix:
    """Design rows mapped into [0,1]^D plus the per-factor column map."""

    rows: np.ndarray
    column_map: list

    @property
    def width(self) -> int:
        return int(self.rows.shape[1])

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=float)
        if self.rows.ndim != 2:
            raise ShapeError("encoded matrix must be 2D")
        total = sum(b.width for b in self.column_map)
        if total != self.rows.shape[1]:
            raise ShapeError(
                f"column map width {total} does not match matrix width {self.rows.shape[1]}"
            )
        if self.rows.size and (self.rows.min() < 0.0 or self.rows.max() > 1.0):
            raise ValidationError("encoded entries must lie in [0, 1]")


def column_map_for(factors) -> list:
    blocks = []
    start = 0
    for f in factors:
        if f.is_numeric:
            tvals = [f.apply_transform(v) for v in f.levels]
            blocks.append(ColumnBlock(
                name=f.name, kind=f.kind, start=start, width=1, rule="minmax",
                levels=tuple(f.levels), transform=f.transform,
                tmin=min(tvals), tmax=max(tvals),
            ))
            start += 1
        elif len(f.levels) == 2:
            blocks.append(ColumnBlock(
                name=f.name, kind=f.kind, start=start, width=1, rule="binary",
                levels=tuple(f.levels),
            ))
            start += 1
        else:
            blocks.append(ColumnBlock(
                name=f.name, kind=f.kind, start=start, width=len(f.levels), rule="onehot",
                levels=tuple(f.levels),
            ))
            start += len(f.levels)
    return blocks


def encode_value(block: ColumnBlock, value) -> np.ndarray:
    if block.rule == "minmax":
        t = math.log10(value) if block.transform == "log10" else float(value)
        return np.array([(t - block.tmin) / (block.tmax - block.tmin)])
    if block.rule == "binary":
        return np.array([0.0 if value == block.levels[0] else 1.0])
    out = np.zeros(block.width)
    out[block.levels.index(value)] = 1.0
    return out


def encode_design(design: Design) -> EncodedMatrix:
    """Encode every trial into [0,1]^D using declared level ranges."""
    if not design.trials:
        raise ValidationError("cannot encode an empty design")
    blocks = column_map_for(design.factors)
    width = sum(b.width for b in blocks)
    rows = np.zeros((len(design.trials), width))
    for i, row in enumerate(design.trials):
        for block, value in zip(blocks, row):
            rows[i, block.start:block.start + block.width] = encode_value(block, value)
    return EncodedMatrix(rows=rows, column_map=blocks)


def _snap_to_level(block: ColumnBlock, t: float):
    """Nearest declared level on the transformed scale, ties to the lower level."""
    transform = (lambda v: math.log10(v)) if block.transform == "log10" else float
    best = block.levels[0]
    best_d = abs(transform(best) - t)
    for lv in block.levels[1:]:
        d = abs(transform(lv) - t)
        if d < best_d - 1e-12:
            best, best_d = lv, d
    return best


def decode_vector(v, column_map, snap: bool) -> list:
    """Invert the encoding of one row back to raw factor levels.

    Numeric columns are unscaled and the transform inverted; discrete
    numeric factors always snap to the nearest declared level, continuous
    ones only when snap is requested. Binary columns threshold at 0.5,
    one-hot blocks take the argmax (ties to the lowest index).
    """
    v = np.asarray(v, dtype=float).ravel()
    width = sum(b.width for b in column_map)
    if v.shape[0] != width:
        raise ShapeError(f"vector length {v.shape[0]} does not match column map width {width}")
    out = []
    for block in column_map:
        seg = v[block.start:block.start + block.width]
        if block.rule == "minmax":
            t = block.tmin + float(seg[0]) * (block.tmax - block.tmin)
            if snap or block.kind == "numeric-discrete":
                out.append(_snap_to_level(block, t))
            else:
                raw = 10.0 ** t if block.transform == "log10" else t
                out.append(raw)
        elif block.rule == "binary":
            out.append(block.levels[1] if seg[0] >= 0.5 else block.levels[0])
        else:
            out.append(block.levels[int(np.argmax(seg))])
    return out


@dataclass(frozen=True)
class NoiseConfig:
    """Additive Gaussian noise applied to duplicated training inputs."""

    enabled: bool = False
    alpha: float = 0.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValidationError("noise alpha must be nonnegative")

    @property
    def active(self) -> bool:
        return self.enabled and self.alpha > 0


def duplicate_and_split(m: EncodedMatrix, train_dup: int, test_dup: int,
                        noise: NoiseConfig | None = None, seed: int = 0):
    """Repeat the encoded rows into shuffled train/test matrices.

    Noise, when enabled, is independent N(0, alpha^2) per entry, clamped
    back to [0, 1]. Fully deterministic for a given seed.
    """
    if train_dup < 1 or test_dup < 1:
        raise ValidationError("duplication counts must be at least 1")
    noise = noise or NoiseConfig()
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    streams = root.spawn(2)

    def build(dup: int, ss) -> np.ndarray:
        rng = np.random.default_rng(ss)
        out = np.tile(m.rows, (dup, 1))
        rng.shuffle(out, axis=0)
        if noise.active:
            out = out + rng.normal(0.0, noise.alpha, size=out.shape)
            np.clip(out, 0.0, 1.0, out=out)
        return out

    return build(train_dup, streams[0]), build(test_dup, streams[1])
