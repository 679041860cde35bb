"""Command-line workflow: one subcommand per step of the process flow.

Exit codes: 0 success, 1 validation problem, 2 generated design carries
flags (constraint violations or confounded factors) without
--allow-flagged, 3 internal error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .constraints import parse_constraint
from .design import (
    Design,
    FactorSpec,
    build_full_factorial,
    encode_design,
    filter_by_constraints,
    format_level,
)
from .errors import GdoeError, ValidationError
from .fields import density_map, extract_borders, factor_map, gradient_map
from .generate import generate as generate_design
from .cluster import kmeans, ward
from .grids import GridSpec
from .project import GdoeEntry, Project
from .response import compute_lcl, find_optimum, importance, interpolate
from .synthetic import cnn_tuning_factors, two_level_factors
from .vae import TrainingConfig, embed, train
from .design import NoiseConfig

EXIT_VALIDATION = 1
EXIT_FLAGGED = 2
EXIT_INTERNAL = 3


class FlaggedDesign(Exception):
    pass


@click.group()
@click.option("--project", "-p", "project_path", default="project.json",
              show_default=True, help="Path of the project file.")
@click.pass_context
def cli(ctx, project_path):
    """Generative design of experiments on a 2D latent space."""
    ctx.obj = Path(project_path)


def _load(ctx) -> Project:
    return Project.load(ctx.obj)


def _save(ctx, project: Project) -> None:
    project.save(ctx.obj)


@cli.command()
@click.argument("file", type=click.Path())
@click.option("--factors", "factors_file", type=click.Path(exists=True),
              help="JSON file with a list of factor specs.")
@click.option("--demo", type=click.Choice(["cnn9", "binary4"]),
              help="Seed the project with a built-in demo factor space.")
def init(file, factors_file, demo):
    """Create a project skeleton at FILE."""
    if factors_file and demo:
        raise ValidationError("use either --factors or --demo, not both")
    factors = []
    if factors_file:
        data = json.loads(Path(factors_file).read_text())
        factors = [FactorSpec.from_dict(d) for d in data]
    elif demo == "cnn9":
        factors = cnn_tuning_factors()
    elif demo == "binary4":
        factors = two_level_factors(4)
    project = Project(factors=factors)
    project.save(file)
    click.echo(f"created {file} with {len(factors)} factors")


@cli.group()
def design():
    """Initial design construction."""


@design.command("build")
@click.option("--constraint", "constraints", multiple=True,
              help="Constraint expression; repeatable.")
@click.option("--cap", default=10_000_000, show_default=True,
              help="Maximum full-factorial size.")
@click.pass_context
def design_build(ctx, constraints, cap):
    """Build the full factorial and filter it by the constraints."""
    project = _load(ctx)
    factors = project.require_factors()
    parsed = [parse_constraint(src, factors) for src in constraints]
    full = build_full_factorial(factors, cap=cap)
    constrained = filter_by_constraints(full, parsed) if parsed else full
    project.constraint_sources = list(constraints)
    project.full_trials = len(full)
    project.design = constrained if parsed else full
    _save(ctx, project)
    click.echo(f"{len(full)} -> {len(constrained)}")


@cli.command("train")
@click.option("--beta", default=0.3, show_default=True)
@click.option("--epochs", default=500, show_default=True)
@click.option("--batch", default=256, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--dup-train", default=50, show_default=True)
@click.option("--dup-test", default=30, show_default=True)
@click.option("--noise-alpha", default=0.0, show_default=True)
@click.option("--learning-rate", default=0.001, show_default=True)
@click.pass_context
def train_cmd(ctx, beta, epochs, batch, seed, dup_train, dup_test, noise_alpha, learning_rate):
    """Fit the autoencoder on the initial design."""
    project = _load(ctx)
    d = project.require_design()
    cfg = TrainingConfig(
        beta=beta, batch_size=batch, epochs=epochs, seed=seed,
        train_dup=dup_train, test_dup=dup_test,
        noise=NoiseConfig(enabled=noise_alpha > 0, alpha=noise_alpha),
        learning_rate=learning_rate,
    )
    model, history = train(encode_design(d), cfg, factors=d.factors)
    project.model = model
    project.history = history
    project.model_generation += 1
    project.seeds_used.append({"step": "train", "seed": seed})
    _save(ctx, project)
    last = history[-1]
    click.echo(
        f"trained {epochs} epochs; final test loss {last['test_loss']:.4f} "
        f"(bce {last['test_bce']:.4f}, kl {last['test_kl']:.4f})"
    )


@cli.command("embed")
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Write CSV here instead of stdout.")
@click.pass_context
def embed_cmd(ctx, out_path):
    """Latent and uniformed coordinates for every trial of the initial design."""
    project = _load(ctx)
    d = project.require_design()
    model = project.require_model()
    emb = embed(model, encode_design(d), d.trial_ids)
    lines = ["trial_id,lat1,lat2,lat1u,lat2u"]
    for i, tid in enumerate(emb.trial_ids):
        cells = [float(emb.mu[i, 0]), float(emb.mu[i, 1]),
                 float(emb.u[i, 0]), float(emb.u[i, 1])]
        lines.append(",".join([str(tid)] + [repr(c) for c in cells]))
    text = "\n".join(lines) + "\n"
    if out_path:
        Path(out_path).write_text(text)
        click.echo(f"wrote {len(emb)} rows to {out_path}")
    else:
        click.echo(text, nl=False)


def _grid_from_options(gtype, nx, ny, rings, angles, center, inner, outer, rotation, space):
    return GridSpec(
        type=gtype, nx=nx, ny=ny, rings=rings, angles=angles,
        include_center=center, inner_radius=inner, outer_radius=outer,
        rotation=rotation, space=space or "",
    )


@cli.command("grid")
@click.option("--type", "gtype", type=click.Choice(["square", "polar", "double-square"]),
              required=True)
@click.option("--nx", default=3, show_default=True)
@click.option("--ny", default=3, show_default=True)
@click.option("--rings", default=2, show_default=True)
@click.option("--angles", default=3, show_default=True)
@click.option("--center/--no-center", default=True, show_default=True)
@click.option("--inner", default=0.9005, show_default=True)
@click.option("--outer", default=1.4823, show_default=True)
@click.option("--rotation", default=0.0, show_default=True,
              help="Rotation in radians.")
@click.option("--space", type=click.Choice(["uniformed", "original"]), default=None)
@click.option("--name", required=True, help="Name to save the grid under.")
@click.pass_context
def grid_cmd(ctx, gtype, nx, ny, rings, angles, center, inner, outer, rotation, space, name):
    """Define and save a latent grid."""
    project = _load(ctx)
    spec = _grid_from_options(gtype, nx, ny, rings, angles, center, inner, outer, rotation, space)
    from .grids import make_grid

    points = make_grid(spec)  # validates the spec
    project.grids[name] = spec
    _save(ctx, project)
    click.echo(f"saved grid {name!r} with {len(points)} points")


@cli.command("cluster")
@click.option("--method", type=click.Choice(["kmeans", "ward"]), required=True)
@click.option("-k", "k", type=int, required=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--name", default=None, help="Grid name; defaults to method-k.")
@click.pass_context
def cluster_cmd(ctx, method, k, seed, name):
    """Cluster the embedded initial design; centroids become an explicit grid."""
    project = _load(ctx)
    d = project.require_design()
    model = project.require_model()
    emb = embed(model, encode_design(d), d.trial_ids)
    result = kmeans(emb.u, k, seed=seed) if method == "kmeans" else ward(emb.u, k)
    grid_name = name or f"{method}-{k}"
    project.grids[grid_name] = GridSpec(
        type="explicit", points=tuple(tuple(c) for c in result.centroids),
        space="uniformed",
    )
    project.seeds_used.append({"step": "cluster", "seed": seed})
    _save(ctx, project)
    click.echo(f"saved grid {grid_name!r} with {k} centroids (inertia {result.inertia:.5f})")


@cli.command("generate")
@click.option("--grid", "grid_name", required=True, help="Name of a saved grid.")
@click.option("--snap/--no-snap", default=True, show_default=True)
@click.option("--allow-flagged", is_flag=True, default=False)
@click.option("--out", "out_prefix", type=click.Path(), default=None,
              help="Prefix for the design CSV and diagnostics JSON files.")
@click.pass_context
def generate_cmd(ctx, grid_name, snap, allow_flagged, out_prefix):
    """Decode a saved grid into a design plus diagnostics."""
    project = _load(ctx)
    model = project.require_model()
    spec = project.require_grid(grid_name)
    constraints = project.constraints()
    gdoe, diagnostics = generate_design(model, spec, constraints, snap=snap)
    project.gdoes[grid_name] = GdoeEntry(
        design=gdoe, diagnostics=diagnostics, grid_name=grid_name,
        model_generation=project.model_generation,
    )
    _save(ctx, project)
    if out_prefix:
        Path(f"{out_prefix}.csv").write_text(gdoe.to_csv())
        Path(f"{out_prefix}.diagnostics.json").write_text(
            json.dumps(diagnostics.to_dict(), indent=2) + "\n")
    click.echo(
        f"{diagnostics.n_trials} trials ({diagnostics.n_unique} unique), "
        f"{len(diagnostics.violations)} violations, "
        f"{len(diagnostics.confounded_pairs)} confounded pairs"
    )
    if diagnostics.flagged:
        if allow_flagged:
            click.echo("warning: design is flagged", err=True)
        else:
            raise FlaggedDesign(
                "design is flagged; rerun with --allow-flagged to accept it"
            )


@cli.command("maps")
@click.option("--density", "kind", flag_value="density")
@click.option("--gradient", "kind", flag_value="gradient")
@click.option("--factor", "factor_name", default=None,
              help="Decode one factor's level over the lattice instead.")
@click.option("--res", default=100, show_default=True)
@click.option("--agg", type=click.Choice(["sum", "max"]), default="sum", show_default=True)
@click.option("--threshold", default=None, type=float,
              help="Also report border cells at this gradient threshold.")
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.pass_context
def maps_cmd(ctx, kind, factor_name, res, agg, threshold, out_path):
    """Field maps over the uniformed latent square (CSV)."""
    project = _load(ctx)
    model = project.require_model()
    if factor_name:
        fmap = factor_map(model, factor_name, resolution=res)
    elif kind == "density":
        d = project.require_design()
        emb = embed(model, encode_design(d), d.trial_ids)
        fmap = density_map(emb.u, resolution=res)
    elif kind == "gradient":
        fmap = gradient_map(model, resolution=res, aggregation=agg)
    else:
        raise ValidationError("choose --density, --gradient, or --factor NAME")
    text = fmap.to_csv()
    if threshold is not None and kind == "gradient":
        borders = extract_borders(fmap, threshold)
        click.echo(f"{len(borders)} border cells at threshold {threshold}", err=True)
    if out_path:
        Path(out_path).write_text(text)
        click.echo(f"wrote {fmap.height}x{fmap.width} map to {out_path}")
    else:
        click.echo(text, nl=False)


@cli.command("respond")
@click.option("--csv", "csv_path", type=click.Path(exists=True), required=True,
              help="CSV of trial_id followed by replicate columns.")
@click.option("--confidence", default=0.90, show_default=True)
@click.pass_context
def respond_cmd(ctx, csv_path, confidence):
    """Ingest replicated responses and compute lower confidence limits."""
    import csv as csv_mod

    project = _load(ctx)
    project.require_design()
    with open(csv_path, newline="") as f:
        reader = csv_mod.reader(f)
        header = next(reader)
        if not header or header[0] != "trial_id":
            raise ValidationError("response CSV must start with a trial_id column")
        count = 0
        for cells in reader:
            if not cells:
                continue
            tid = int(cells[0])
            replicates = [float(c) for c in cells[1:] if c != ""]
            project.responses[tid] = compute_lcl(replicates, confidence, trial_id=tid)
            count += 1
    _save(ctx, project)
    click.echo(f"ingested {count} response records at confidence {confidence}")


@cli.command("surface")
@click.option("--res", default=100, show_default=True)
@click.option("--goal", type=click.Choice(["max", "min"]), default="max", show_default=True)
@click.option("--source", type=click.Choice(["initial", "gdoe"]), default="initial",
              help="Which design's responses to interpolate.")
@click.option("--gdoe", "gdoe_name", default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.pass_context
def surface_cmd(ctx, res, goal, source, gdoe_name, out_path):
    """Interpolate responses over the latent square and locate the optimum."""
    project = _load(ctx)
    model = project.require_model()
    if source == "gdoe":
        if not gdoe_name:
            raise ValidationError("--source gdoe needs --gdoe NAME")
        if gdoe_name not in project.gdoes:
            raise ValidationError(f"no generated design named {gdoe_name!r}")
        d = project.gdoes[gdoe_name].design
    else:
        d = project.require_design()
    if not project.responses:
        raise ValidationError("no responses ingested; run the respond step first")
    emb = embed(model, encode_design(d), d.trial_ids)
    lcls = {tid: r.lcl for tid, r in project.responses.items()}
    surf = interpolate(emb, lcls, resolution=res)
    optimum = find_optimum(surf, goal=goal)
    decoded = None
    from .vae import decode_latent

    decoded_design = decode_latent(model, [optimum.point], space="uniformed", snap=True)
    decoded = dict(zip(decoded_design.factor_names, decoded_design.trials[0]))
    report = {"optimum": optimum.to_dict(), "decoded": decoded,
              "nearest_only": surf.nearest_only}
    if out_path:
        Path(out_path).write_text(surf.fmap.to_csv())
        Path(str(out_path) + ".optimum.json").write_text(json.dumps(report, default=str, indent=2) + "\n")
        click.echo(f"wrote surface to {out_path}")
    click.echo(json.dumps(report, default=str))


@cli.command("importance")
@click.option("--reps", default=10, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--source", type=click.Choice(["initial", "gdoe"]), default="initial")
@click.option("--gdoe", "gdoe_name", default=None)
@click.pass_context
def importance_cmd(ctx, reps, seed, source, gdoe_name):
    """Per-factor relative loss increase under column permutation."""
    project = _load(ctx)
    if source == "gdoe":
        if not gdoe_name or gdoe_name not in project.gdoes:
            raise ValidationError("--source gdoe needs a valid --gdoe NAME")
        d = project.gdoes[gdoe_name].design
    else:
        d = project.require_design()
    if not project.responses:
        raise ValidationError("no responses ingested; run the respond step first")
    lcls = {tid: r.lcl for tid, r in project.responses.items()}
    report = importance(d, lcls, replications=reps, seed=seed)
    project.seeds_used.append({"step": "importance", "seed": seed})
    _save(ctx, project)
    click.echo(json.dumps(report.to_dict()))


@cli.command("serve")
@click.option("--port", default=None, type=int,
              help="Port; defaults to GDOE_PORT or 8321.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--static", "static_dir", type=click.Path(), default="frontend/dist",
              show_default=True, help="Directory of built UI assets to serve.")
@click.pass_context
def serve_cmd(ctx, port, host, static_dir):
    """Start the local HTTP service for the studio UI."""
    import os

    import uvicorn

    from .server import create_app

    if port is None:
        port = int(os.environ.get("GDOE_PORT", "8321"))
    frontend = static_dir if Path(static_dir).is_dir() else None
    app = create_app(ctx.obj, frontend_dir=frontend)
    uvicorn.run(app, host=host, port=port, log_level="warning")


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except FlaggedDesign as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_FLAGGED
    except (GdoeError, click.ClickException, click.UsageError) as exc:
        message = getattr(exc, "message", None) or str(exc)
        click.echo(f"error: {message}", err=True)
        return EXIT_VALIDATION
    except click.exceptions.Abort:
        return EXIT_VALIDATION
    except Exception as exc:  # pragma: no cover - defensive
        click.echo(f"internal error: {exc}", err=True)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
