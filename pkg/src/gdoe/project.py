"""Single-file JSON persistence for the whole workflow.

A project carries the factor specs, constraint sources, the initial
design, the trained model (weights embedded as plain arrays so files
stay diffable), saved grids, generated designs with their diagnostics,
and response records. Model weights round-trip exactly: floats are
serialized with repr precision.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .constraints import parse_constraint
from .design import Design, FactorSpec
from .errors import ProjectError
from .generate import DesignDiagnostics
from .grids import GridSpec
from .response import ResponseRecord
from .vae import VaeModel

SCHEMA_VERSION = 1


@dataclass
class GdoeEntry:
    """One generated design plus the diagnostics and model generation behind it."""

    design: Design
    diagnostics: DesignDiagnostics
    grid_name: str
    model_generation: int


@dataclass
class Project:
    factors: list = field(default_factory=list)
    constraint_sources: list = field(default_factory=list)
    full_trials: int | None = None
    design: Design | None = None
    model: VaeModel | None = None
    history: list = field(default_factory=list)
    model_generation: int = 0
    grids: dict = field(default_factory=dict)    # name -> GridSpec
    gdoes: dict = field(default_factory=dict)    # name -> GdoeEntry
    responses: dict = field(default_factory=dict)  # trial_id -> ResponseRecord
    seeds_used: list = field(default_factory=list)

    def constraints(self) -> list:
        return [parse_constraint(src, self.factors) for src in self.constraint_sources]

    def require_factors(self) -> list:
        if not self.factors:
            raise ProjectError("project has no factors; create it with a factor list first")
        return self.factors

    def require_design(self) -> Design:
        if self.design is None:
            raise ProjectError("project has no initial design; run the design build step first")
        return self.design

    def require_model(self) -> VaeModel:
        if self.model is None:
            raise ProjectError("project has no trained model; run the train step first")
        return self.model

    def require_grid(self, name: str) -> GridSpec:
        if name not in self.grids:
            known = ", ".join(sorted(self.grids)) or "none saved"
            raise ProjectError(f"unknown grid {name!r} (saved grids: {known})")
        return self.grids[name]

    def to_dict(self) -> dict:
        def design_dict(d: Design) -> dict:
            return {
                "provenance": d.provenance,
                "trial_ids": list(d.trial_ids),
                "trials": [list(row) for row in d.trials],
            }

        return {
            "schema_version": SCHEMA_VERSION,
            "factors": [f.to_dict() for f in self.factors],
            "constraints": list(self.constraint_sources),
            "full_trials": self.full_trials,
            "design": design_dict(self.design) if self.design else None,
            "model": self.model.to_dict() if self.model else None,
            "history": self.history,
            "model_generation": self.model_generation,
            "grids": {name: g.to_dict() for name, g in self.grids.items()},
            "gdoes": {
                name: {
                    "design": design_dict(e.design),
                    "diagnostics": e.diagnostics.to_dict(),
                    "grid_name": e.grid_name,
                    "model_generation": e.model_generation,
                }
                for name, e in self.gdoes.items()
            },
            "responses": {str(tid): r.to_dict() for tid, r in self.responses.items()},
            "seeds_used": self.seeds_used,
        }

    @staticmethod
    def from_dict(data: dict) -> "Project":
        version = data.get("schema_version")
        if not isinstance(version, int) or version < 1:
            raise ProjectError(f"project file has no valid schema version ({version!r})")
        if version > SCHEMA_VERSION:
            raise ProjectError(
                f"project schema version {version} is newer than the supported {SCHEMA_VERSION}"
            )
        factors = [FactorSpec.from_dict(f) for f in data.get("factors", [])]

        def design_from(d) -> Design | None:
            if d is None:
                return None
            return Design(factors=factors, trials=[list(r) for r in d["trials"]],
                          provenance=d["provenance"], trial_ids=list(d["trial_ids"]))

        project = Project(
            factors=factors,
            constraint_sources=list(data.get("constraints", [])),
            full_trials=data.get("full_trials"),
            design=design_from(data.get("design")),
            model=VaeModel.from_dict(data["model"]) if data.get("model") else None,
            history=data.get("history", []),
            model_generation=data.get("model_generation", 0),
            grids={name: GridSpec.from_dict(g) for name, g in data.get("grids", {}).items()},
            responses={
                int(tid): ResponseRecord(**r) for tid, r in data.get("responses", {}).items()
            },
            seeds_used=data.get("seeds_used", []),
        )
        for name, e in data.get("gdoes", {}).items():
            diag = e["diagnostics"]
            project.gdoes[name] = GdoeEntry(
                design=Design(factors=factors,
                              trials=[list(r) for r in e["design"]["trials"]],
                              provenance=e["design"]["provenance"],
                              trial_ids=list(e["design"]["trial_ids"])),
                diagnostics=DesignDiagnostics(
                    n_trials=diag["n_trials"],
                    n_unique=diag["n_unique"],
                    violations=[(tid, src) for tid, src in diag["violations"]],
                    confounded_pairs=[tuple(p) for p in diag["confounded_pairs"]],
                    level_coverage=diag["level_coverage"],
                    balance=diag["balance"],
                    orthogonality=diag["orthogonality"],
                    degenerate_factors=diag["degenerate_factors"],
                    nn_distance=diag["nn_distance"],
                    density_uniformity=diag.get("density_uniformity"),
                    collapsed={int(k): v for k, v in diag.get("collapsed", {}).items()},
                ),
                grid_name=e["grid_name"],
                model_generation=e["model_generation"],
            )
        return project

    def save(self, path) -> None:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=None, separators=(",", ":")) + "\n")

    @staticmethod
    def load(path) -> "Project":
        path = Path(path)
        if not path.exists():
            raise ProjectError(f"project file {path} does not exist")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ProjectError(f"project file {path} is not valid JSON: {exc}") from exc
        return Project.from_dict(data)
