"""Command line interface: transform, simulate, frames, template, replay, serve."""
from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import click
import numpy as np

from .evolution import CouplingSpec, TrotterSchedule, build_params, simulate_trace
from .gates import StateVector, prepare_ry_product
from .imaging import Region, load_image, read_palette_file, read_pin_file
from .pipeline import RunRequest, frame_images, run_transform
from .sidecar import SIDECAR_SUFFIX, Sidecar, replay_image
from .service import DEFAULT_WORKSPACE_ENV, default_workspace


def parse_coupling(text: str) -> CouplingSpec:
    """"uniform[:lo,hi]", a scalar, or a comma list of per-site values."""
    t = text.strip().lower()
    if t.startswith("uniform"):
        if ":" in t:
            lo, hi = t.split(":", 1)[1].split(",")
            return CouplingSpec.uniform(float(lo), float(hi))
        return CouplingSpec.uniform()
    values = [float(v) for v in t.split(",")]
    return CouplingSpec.fixed(values[0] if len(values) == 1 else values)


class CouplingParam(click.ParamType):
    name = "coupling"

    def convert(self, value, param, ctx):
        if isinstance(value, CouplingSpec):
            return value
        try:
            return parse_coupling(value)
        except ValueError as exc:
            self.fail(str(exc), param, ctx)


COUPLING = CouplingParam()


def run_options(fn):
    """Options shared by the commands that execute a full run."""
    opts = [
        click.option("--image", type=click.Path(exists=True, dir_okay=False), help="Input image (PNG/JPEG)."),
        click.option("--mode", type=click.Choice(["row", "mirrored", "colors"]), help="Transformation protocol."),
        click.option("--rows", type=int, help="Grid rows."),
        click.option("--cols", "columns", type=int, help="Grid columns (= simulated sites)."),
        click.option("--region", type=str, help="x,y,width,height region; default whole image."),
        click.option("--origin", "origin_row", type=click.Choice(["bottom", "top"]), help="Image row carrying time slice 0."),
        click.option("--couplings", type=COUPLING, help="Spec for j, hz and hx at once: 'uniform[:lo,hi]', scalar or list."),
        click.option("--j", type=COUPLING, help="Neighbor coupling spec (overrides --couplings)."),
        click.option("--hz", type=COUPLING, help="Longitudinal field spec."),
        click.option("--hx", type=COUPLING, help="Transverse field spec."),
        click.option("--open-boundary", is_flag=True, default=False, help="Drop the wrap-around neighbor pair."),
        click.option("--seed", type=int, help="Master seed for random couplings."),
        click.option("--seed-a", type=int, help="Shot-sampling seed (run A in mirrored mode)."),
        click.option("--seed-b", type=int, help="Shot-sampling seed for mirrored run B."),
        click.option("--steps", "num_steps", type=int, help="Trotter step count; default derived from the grid."),
        click.option("--dt", type=float, help="Time per step (default 0.1)."),
        click.option("--time", "total_time", type=float, help="Total evolution time (alternative to --dt)."),
        click.option("--shots", type=int, help="Measurements per slice; omit for exact expectation values."),
        click.option("--exact", is_flag=True, default=False, help="Force exact expectation values (cancels config shots)."),
        click.option("--c", "--shift-strength", "shift_strength", type=float, help="Weight of expectations against tile indices (default 10)."),
        click.option("--pins", "pins_file", type=click.Path(exists=True, dir_okay=False), help="File of row,col cells excluded from reordering."),
        click.option("--palette", "palette_file", type=click.Path(exists=True, dir_okay=False), help="Palette file (one hex color per line) for colors mode."),
        click.option("--keep-initial-slice", is_flag=True, default=False, help="Mirrored mode: map slice 0 to a row instead of dropping it."),
        click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False), help="JSON request (same shape as the sidecar request section); flags override it."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def build_request(
    config_file,
    mode,
    rows,
    columns,
    region,
    origin_row,
    couplings,
    j,
    hz,
    hx,
    open_boundary,
    seed,
    seed_a,
    seed_b,
    num_steps,
    dt,
    total_time,
    shots,
    exact,
    shift_strength,
    pins_file,
    palette_file,
    keep_initial_slice,
) -> RunRequest:
    """Merge config-file values and flags (flags win) into a RunRequest."""
    if config_file:
        base = RunRequest.from_dict(json.loads(Path(config_file).read_text()))
    else:
        missing = [n for n, v in (("--mode", mode), ("--rows", rows), ("--cols", columns)) if v is None]
        if missing:
            raise click.UsageError(f"missing {', '.join(missing)} (or provide --config)")
        base = RunRequest(mode=mode, rows=rows, columns=columns)

    updates: dict = {}
    if config_file:
        for name, value in (("mode", mode), ("rows", rows), ("columns", columns)):
            if value is not None:
                updates[name] = value
    if region is not None:
        updates["region"] = Region.parse(region)
    if origin_row is not None:
        updates["origin_row"] = origin_row
    if couplings is not None:
        updates.update({"j": couplings, "hz": couplings, "hx": couplings})
    for name, value in (("j", j), ("hz", hz), ("hx", hx)):
        if value is not None:
            updates[name] = value
    if open_boundary:
        updates["periodic"] = False
    for name, value in (
        ("seed", seed),
        ("seed_a", seed_a),
        ("seed_b", seed_b),
        ("num_steps", num_steps),
        ("dt", dt),
        ("total_time", total_time),
        ("shift_strength", shift_strength),
    ):
        if value is not None:
            updates[name] = value
    if shots is not None:
        updates["shots"] = shots
    if exact:
        updates["shots"] = None
    if pins_file:
        updates["pins"] = read_pin_file(pins_file)
    if palette_file:
        updates["palette"] = read_palette_file(palette_file)
    if keep_initial_slice:
        updates["drop_initial_slice"] = False
    return dataclasses.replace(base, **updates)


def _require_image(image) -> str:
    if not image:
        raise click.UsageError("missing --image")
    return image


def _sidecar_path(out: Path) -> Path:
    return out.with_suffix(SIDECAR_SUFFIX)


@click.group()
@click.version_option(package_name="isingart")
def main() -> None:
    """Quantum-transform images with Ising-chain time evolution."""


@main.command()
@run_options
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Output PNG; sidecar lands next to it.")
def transform(image, out, **options) -> None:
    """Run the full pipeline and write the output image plus sidecar."""
    request = build_request(**options)
    image = _require_image(image)
    try:
        result = run_transform(request, image)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(result.png_bytes)
    sidecar_path = _sidecar_path(out)
    sidecar_path.write_text(result.sidecar_text)
    click.echo(f"wrote {out} and {sidecar_path}")
    if result.sidecar.resampled:
        click.echo("note: uneven tile sizes, moved tiles were resampled", err=True)


@main.command()
@click.option("--sites", type=int, required=True, help="Number of chain sites / qubits.")
@click.option("--steps", "num_steps", type=int, required=True, help="Trotter steps; the trace has steps+1 slices.")
@click.option("--dt", type=float, default=None, help="Time per step (default 0.1).")
@click.option("--time", "total_time", type=float, default=None, help="Total time (alternative to --dt).")
@click.option("--couplings", type=COUPLING, default=None, help="Spec for all three coupling arrays.")
@click.option("--j", type=COUPLING, default=None)
@click.option("--hz", type=COUPLING, default=None)
@click.option("--hx", type=COUPLING, default=None)
@click.option("--open-boundary", is_flag=True, default=False)
@click.option("--seed", type=int, default=0, help="Master seed for couplings (and sampling unless --sample-seed).")
@click.option("--sample-seed", type=int, default=None)
@click.option("--shots", type=int, default=None, help="Sample each slice; omit for exact values.")
@click.option("--init", "init_spec", type=str, default="zeros", help="'zeros' or 'ramp:<denom>' for P(n=1) = n/denom.")
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Trace JSON output.")
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None, help="Also write the expectations as CSV.")
@click.option("--plot", "plot_path", type=click.Path(dir_okay=False), default=None, help="Also render a heatmap figure.")
def simulate(
    sites, num_steps, dt, total_time, couplings, j, hz, hx, open_boundary,
    seed, sample_seed, shots, init_spec, out, csv_path, plot_path,
) -> None:
    """Run the chain evolution alone and write the expectation trace."""
    if dt is not None and total_time is not None:
        raise click.UsageError("give --dt or --time, not both")
    base = couplings or CouplingSpec.uniform()
    try:
        params = build_params(
            sites, j or base, hz or base, hx or base, seed=seed,
            periodic=not open_boundary,
        )
        if total_time is not None:
            schedule = TrotterSchedule(total_time, num_steps)
        else:
            schedule = TrotterSchedule.from_dt(dt if dt is not None else 0.1, num_steps)
        if init_spec == "zeros":
            initial = StateVector.zero(sites)
        elif init_spec.startswith("ramp:"):
            denom = float(init_spec.split(":", 1)[1])
            initial = prepare_ry_product(sites, np.arange(sites) / denom)
        else:
            raise click.UsageError(f"unknown --init {init_spec!r}")
        trace = simulate_trace(
            initial, params, schedule, shots=shots,
            seed=sample_seed if sample_seed is not None else seed,
        )
    except ValueError as exc:
        raise click.ClickException(str(exc))
    doc = {
        "format": "qmtrace/1",
        "sites": sites,
        "schedule": {"dt": schedule.dt, "num_steps": schedule.num_steps, "total_time": schedule.total_time},
        "couplings": {
            "j": params.j.tolist(),
            "hz": params.hz.tolist(),
            "hx": params.hx.tolist(),
            "periodic": params.periodic,
        },
        "seed": seed,
        "shots": shots,
        "trace": trace.to_dict(),
    }
    Path(out).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    click.echo(f"wrote {out} ({trace.num_slices} slices x {trace.num_sites} sites)")
    if csv_path:
        from .report import write_trace_csv

        write_trace_csv(trace, csv_path)
        click.echo(f"wrote {csv_path}")
    if plot_path:
        from .report import save_trace_heatmap

        save_trace_heatmap(trace, plot_path)
        click.echo(f"wrote {plot_path}")


@main.command()
@run_options
@click.option("--outdir", type=click.Path(file_okay=False), required=True, help="Directory for frame_NNN.png files.")
def frames(image, outdir, **options) -> None:
    """Write one PNG per time slice, progressively applying the plan."""
    request = build_request(**options)
    image = _require_image(image)
    try:
        result = run_transform(request, image)
        images = frame_images(result)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for k, frame in enumerate(images):
        frame.save(outdir / f"frame_{k:03d}.png")
    (outdir / f"frames{SIDECAR_SUFFIX}").write_text(result.sidecar_text)
    click.echo(f"wrote {len(images)} frames to {outdir}")


@main.command()
@click.option("--sidecar", "sidecar_file", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--image", type=click.Path(exists=True, dir_okay=False), required=True, help="The original input image.")
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Template PNG with grid overlay and labels.")
@click.option("--legend", "legend_path", type=click.Path(dir_okay=False), default=None, help="Legend CSV (default: next to --out).")
def template(sidecar_file, image, out, legend_path) -> None:
    """Render the numbered hand-painting template for a completed run."""
    from .imaging import slice_grid
    from .report import save_template, write_legend_csv

    try:
        sidecar = Sidecar.from_text(Path(sidecar_file).read_text())
        img = load_image(image)
        output = replay_image(sidecar, img)
        req = sidecar.request
        region = Region(*req["region"]) if req.get("region") else None
        grid = slice_grid(img.size, region, req["grid"]["rows"], req["grid"]["columns"])
        out = Path(out)
        save_template(output, grid, sidecar.plan, out)
        legend = Path(legend_path) if legend_path else out.with_suffix(".legend.csv")
        write_legend_csv(sidecar.plan, legend)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"wrote {out} and {legend}")


@main.command()
@click.option("--sidecar", "sidecar_file", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--image", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def replay(sidecar_file, image, out) -> None:
    """Re-apply a sidecar's stored plan to the input image."""
    try:
        sidecar = Sidecar.from_text(Path(sidecar_file).read_text())
        result = replay_image(sidecar, load_image(image))
    except ValueError as exc:
        raise click.ClickException(str(exc))
    result.save(out)
    click.echo(f"wrote {out}")


@main.command()
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", type=str, default="127.0.0.1", show_default=True)
@click.option("--workspace", type=click.Path(file_okay=False), default=None,
              help=f"Run storage directory (default ${DEFAULT_WORKSPACE_ENV} or ./isingart-workspace).")
@click.option("--ui", "ui_dir", type=click.Path(file_okay=False), default=None,
              help="Static frontend directory to serve at /.")
def serve(port, host, workspace, ui_dir) -> None:
    """Start the HTTP job service."""
    import uvicorn

    from .service import create_app

    app = create_app(
        workspace=Path(workspace) if workspace else default_workspace(),
        ui_dir=Path(ui_dir) if ui_dir else None,
    )
    click.echo(f"workspace: {app.state.manager.workspace}", err=True)
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    main(prog_name="isingart")
