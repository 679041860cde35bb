"""Local JSON-over-HTTP service consumed by the studio UI.

One project per process. Reads run concurrently; mutations serialize
through a single lock; training runs as one exclusive background job
whose progress is polled via /api/train/status.
"""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel, Field

from .cluster import kmeans, ward
from .constraints import parse_constraint
from .design import NoiseConfig, build_full_factorial, encode_design, filter_by_constraints
from .errors import GdoeError, ProjectError, ValidationError
from .fields import density_map, extract_borders, factor_map, gradient_map
from .generate import generate as generate_design
from .generate import diagnose
from .grids import GridSpec, make_grid
from .project import GdoeEntry, Project
from .response import compute_lcl, find_optimum, importance, interpolate
from .vae import TrainingConfig, decode_latent, embed, train


class TrainRequest(BaseModel):
    beta: float = 0.3
    epochs: int = 500
    batch_size: int = 256
    seed: int = 0
    train_dup: int = 50
    test_dup: int = 30
    noise_alpha: float = 0.0
    learning_rate: float = 0.001


class BuildRequest(BaseModel):
    constraints: list[str] = Field(default_factory=list)
    cap: int = 10_000_000


class GridRequest(BaseModel):
    type: str
    nx: int = 3
    ny: int = 3
    rings: int = 2
    angles: int = 3
    include_center: bool = True
    inner_radius: float = 0.9005
    outer_radius: float = 1.4823
    rotation: float = 0.0
    points: list[list[float]] = Field(default_factory=list)
    space: str = ""
    snap: bool = True

    def to_spec(self) -> GridSpec:
        return GridSpec(
            type=self.type, nx=self.nx, ny=self.ny, rings=self.rings,
            angles=self.angles, include_center=self.include_center,
            inner_radius=self.inner_radius, outer_radius=self.outer_radius,
            rotation=self.rotation, points=tuple(tuple(p) for p in self.points),
            space=self.space,
        )


class SaveGridRequest(GridRequest):
    name: str


class ClusterRequest(BaseModel):
    method: str
    k: int
    seed: int = 0
    name: str = ""


class ResponseRow(BaseModel):
    trial_id: int
    replicates: list[float]


class ResponsesRequest(BaseModel):
    records: list[ResponseRow]
    confidence: float = 0.90


class ProjectStore:
    """Serializes mutations and owns the single background training job."""

    def __init__(self, path):
        self.path = Path(path)
        self.project = Project.load(self.path)
        self.lock = threading.Lock()
        self.training = False
        self.train_status = {"state": "idle"}
        self._train_thread = None

    def save(self):
        self.project.save(self.path)

    def start_training(self, cfg: TrainingConfig):
        with self.lock:
            if self.training:
                raise TrainingBusy("a training job is already running")
            design = self.project.require_design()
            self.training = True
            self.train_status = {"state": "running", "epoch": 0, "epochs": cfg.epochs}

        def job():
            try:
                def on_epoch(entry):
                    self.train_status = {
                        "state": "running",
                        "epoch": entry["epoch"] + 1,
                        "epochs": cfg.epochs,
                        "train_loss": entry["train_loss"],
                        "test_loss": entry["test_loss"],
                    }

                model, history = train(encode_design(design), cfg,
                                       factors=design.factors, on_epoch=on_epoch)
                with self.lock:
                    self.project.model = model
                    self.project.history = history
                    self.project.model_generation += 1
                    self.project.seeds_used.append({"step": "train", "seed": cfg.seed})
                    self.save()
                    self.train_status = {
                        "state": "done", "epoch": cfg.epochs, "epochs": cfg.epochs,
                        "train_loss": history[-1]["train_loss"],
                        "test_loss": history[-1]["test_loss"],
                    }
            except Exception as exc:
                self.train_status = {"state": "error", "message": str(exc)}
            finally:
                self.training = False

        self._train_thread = threading.Thread(target=job, daemon=True)
        self._train_thread.start()

    def mutate(self):
        """Context guard refusing mutations while training runs."""
        if self.training:
            raise TrainingBusy("project is locked by a running training job")
        return self.lock


class TrainingBusy(GdoeError):
    code = "training-busy"


def create_app(project_path, frontend_dir=None) -> FastAPI:
    app = FastAPI(title="gdoe service", docs_url=None, redoc_url=None)
    store = ProjectStore(project_path)
    app.state.store = store

    @app.exception_handler(GdoeError)
    async def gdoe_error_handler(request: Request, exc: GdoeError):
        status = 422
        if isinstance(exc, TrainingBusy):
            status = 409
        elif isinstance(exc, ProjectError):
            status = 404
        return JSONResponse(status_code=status,
                            content={"code": exc.code, "message": str(exc)})

    @app.get("/api/project")
    def project_summary():
        p = store.project
        return {
            "factors": [f.to_dict() for f in p.factors],
            "constraints": p.constraint_sources,
            "full_trials": p.full_trials,
            "design_trials": len(p.design) if p.design else None,
            "has_model": p.model is not None,
            "model_generation": p.model_generation,
            "grids": {name: g.to_dict() for name, g in p.grids.items()},
            "gdoes": sorted(p.gdoes),
            "responses": len(p.responses),
            "history_tail": p.history[-1] if p.history else None,
        }

    @app.post("/api/design/build")
    def design_build(req: BuildRequest):
        with store.mutate():
            p = store.project
            factors = p.require_factors()
            parsed = [parse_constraint(src, factors) for src in req.constraints]
            full = build_full_factorial(factors, cap=req.cap)
            constrained = filter_by_constraints(full, parsed) if parsed else full
            p.constraint_sources = list(req.constraints)
            p.full_trials = len(full)
            p.design = constrained if parsed else full
            store.save()
            return {"full_trials": len(full), "kept_trials": len(constrained)}

    @app.post("/api/train", status_code=202)
    def train_endpoint(req: TrainRequest):
        cfg = TrainingConfig(
            beta=req.beta, batch_size=req.batch_size, epochs=req.epochs,
            seed=req.seed, train_dup=req.train_dup, test_dup=req.test_dup,
            noise=NoiseConfig(enabled=req.noise_alpha > 0, alpha=req.noise_alpha),
            learning_rate=req.learning_rate,
        )
        store.start_training(cfg)
        return {"state": "running"}

    @app.get("/api/train/status")
    def train_status():
        return store.train_status

    @app.get("/api/embedding")
    def embedding():
        p = store.project
        d = p.require_design()
        model = p.require_model()
        emb = embed(model, encode_design(d), d.trial_ids)
        return {
            "trial_ids": emb.trial_ids,
            "mu": emb.mu.tolist(),
            "u": emb.u.tolist(),
            "factor_names": d.factor_names,
            "trials": [list(row) for row in d.trials],
        }

    @app.get("/api/map/density")
    def map_density(res: int = 100):
        p = store.project
        d = p.require_design()
        model = p.require_model()
        emb = embed(model, encode_design(d), d.trial_ids)
        return density_map(emb.u, resolution=res).to_dict()

    @app.get("/api/map/gradient")
    def map_gradient(res: int = 100, agg: str = "sum", threshold: float | None = None):
        model = store.project.require_model()
        fmap = gradient_map(model, resolution=res, aggregation=agg)
        payload = fmap.to_dict()
        if threshold is not None:
            payload["borders"] = [vars(b) for b in extract_borders(fmap, threshold)]
        return payload

    @app.get("/api/map/factor/{name}")
    def map_factor(name: str, res: int = 100):
        model = store.project.require_model()
        return factor_map(model, name, resolution=res).to_dict()

    @app.post("/api/grid/preview")
    def grid_preview(req: GridRequest):
        p = store.project
        model = p.require_model()
        spec = req.to_spec()
        points = make_grid(spec)
        gdoe, diagnostics = generate_design(model, spec, p.constraints(), snap=req.snap)
        return {
            "points": points.tolist(),
            "space": spec.space,
            "count": len(points),
            "trial_ids": gdoe.trial_ids,
            "trials": [list(row) for row in gdoe.trials],
            "factor_names": gdoe.factor_names,
            "diagnostics": diagnostics.to_dict(),
        }

    @app.post("/api/grid/save")
    def grid_save(req: SaveGridRequest):
        with store.mutate():
            spec = req.to_spec()
            make_grid(spec)  # validate
            store.project.grids[req.name] = spec
            store.save()
            return {"saved": req.name}

    @app.post("/api/cluster")
    def cluster_endpoint(req: ClusterRequest):
        with store.mutate():
            p = store.project
            d = p.require_design()
            model = p.require_model()
            if req.method not in ("kmeans", "ward"):
                raise ValidationError(f"unknown clustering method {req.method!r}")
            emb = embed(model, encode_design(d), d.trial_ids)
            result = (kmeans(emb.u, req.k, seed=req.seed) if req.method == "kmeans"
                      else ward(emb.u, req.k))
            name = req.name or f"{req.method}-{req.k}"
            p.grids[name] = GridSpec(
                type="explicit",
                points=tuple(tuple(c) for c in result.centroids),
                space="uniformed",
            )
            p.seeds_used.append({"step": "cluster", "seed": req.seed})
            store.save()
            return {"saved": name, "clustering": result.to_dict()}

    @app.post("/api/responses")
    def responses_endpoint(req: ResponsesRequest):
        with store.mutate():
            p = store.project
            p.require_design()
            for row in req.records:
                p.responses[row.trial_id] = compute_lcl(
                    row.replicates, req.confidence, trial_id=row.trial_id)
            store.save()
            return {"stored": len(req.records), "total": len(p.responses)}

    @app.get("/api/surface")
    def surface_endpoint(res: int = 100, goal: str = "max"):
        p = store.project
        d = p.require_design()
        model = p.require_model()
        if not p.responses:
            raise ProjectError("no responses ingested yet")
        emb = embed(model, encode_design(d), d.trial_ids)
        lcls = {tid: r.lcl for tid, r in p.responses.items()}
        surf = interpolate(emb, lcls, resolution=res)
        optimum = find_optimum(surf, goal=goal)
        decoded = decode_latent(model, [optimum.point], space="uniformed", snap=True)
        return {
            "surface": surf.fmap.to_dict(),
            "interior": surf.interior.astype(int).tolist(),
            "nearest_only": surf.nearest_only,
            "optimum": optimum.to_dict(),
            "decoded_optimum": dict(zip(decoded.factor_names,
                                        [_jsonable(v) for v in decoded.trials[0]])),
            "trial_points": surf.points.tolist(),
            "trial_values": surf.values.tolist(),
            "trial_ids": surf.trial_ids,
        }

    @app.get("/api/importance")
    def importance_endpoint(reps: int = 10, seed: int = 0):
        p = store.project
        d = p.require_design()
        if not p.responses:
            raise ProjectError("no responses ingested yet")
        lcls = {tid: r.lcl for tid, r in p.responses.items()}
        return importance(d, lcls, replications=reps, seed=seed).to_dict()

    @app.get("/api/export/design.csv")
    def export_design(gdoe: str | None = None):
        p = store.project
        if gdoe is not None:
            if gdoe not in p.gdoes:
                raise ProjectError(f"no generated design named {gdoe!r}")
            d = p.gdoes[gdoe].design
        else:
            d = p.require_design()
        return PlainTextResponse(d.to_csv(), media_type="text/csv")

    if frontend_dir and Path(frontend_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="studio")

    return app


def _jsonable(v):
    if isinstance(v, (int, float, str)):
        return v
    return float(v)
