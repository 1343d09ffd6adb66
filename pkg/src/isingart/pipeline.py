"""End-to-end runs: request in, transformed image plus sidecar out.

This is the single execution path shared by the CLI and the HTTP service,
so the two produce byte-identical artifacts for identical requests.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from PIL import Image

from .evolution import (
    CouplingSpec,
    EvolutionTrace,
    TrotterSchedule,
    build_params,
    simulate_trace,
)
from .gates import StateVector, prepare_ry_product
from .imaging import (
    Region,
    TileGrid,
    apply_plan,
    encode_png,
    extract_palette,
    load_image,
    plan_resamples,
    slice_grid,
)
from .reorder import (
    GridSpec,
    TransformPlan,
    plan_global_color,
    plan_mirrored,
    plan_row_evolution,
)
from .sidecar import Sidecar, image_sha256

__all__ = ["RunRequest", "RunResult", "run_transform", "frame_images", "template_labels", "template_legend"]

MODES = ("row", "mirrored", "colors")
DEFAULT_DT = 0.1
DEFAULT_SHIFT = 10.0


@dataclass
class RunRequest:
    """Everything that determines one transformation run."""

    mode: str
    rows: int
    columns: int
    region: Region | None = None
    origin_row: str = "bottom"
    j: CouplingSpec = field(default_factory=CouplingSpec.uniform)
    hz: CouplingSpec = field(default_factory=CouplingSpec.uniform)
    hx: CouplingSpec = field(default_factory=CouplingSpec.uniform)
    periodic: bool = True
    seed: int = 0
    seed_a: int | None = None  # shot-sampling seed (run A for mirrored)
    seed_b: int | None = None  # shot-sampling seed, run B
    dt: float | None = None
    total_time: float | None = None
    num_steps: int | None = None
    shots: int | None = None  # None = exact expectation values
    shift_strength: float = DEFAULT_SHIFT
    pins: frozenset = frozenset()
    drop_initial_slice: bool = True
    palette: list[str] | None = None  # colors mode; None extracts from the image

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.rows < 1 or self.columns < 1:
            raise ValueError("grid must be at least 1x1")
        if self.mode == "mirrored" and self.rows % 2:
            raise ValueError("mirrored mode needs an even row count")
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be positive")
        if self.dt is not None and self.total_time is not None:
            steps = self.num_steps if self.num_steps is not None else self.default_steps()
            if self.dt * steps != self.total_time:
                raise ValueError(
                    f"dt={self.dt} over {steps} steps is not total_time={self.total_time}; "
                    "give one of the two"
                )

    def default_steps(self) -> int:
        if self.mode == "mirrored":
            half = self.rows // 2
            return half if self.drop_initial_slice else half - 1
        return self.rows - 1

    def resolve(self) -> "RunRequest":
        """Fill every default so the recorded request has no hidden values."""
        self.validate()
        steps = self.num_steps if self.num_steps is not None else self.default_steps()
        if steps < 0:
            raise ValueError(f"invalid step count {steps}")
        if self.total_time is not None and self.dt is None:
            dt = self.total_time / steps if steps else 0.0
            total = self.total_time
        else:
            dt = self.dt if self.dt is not None else DEFAULT_DT
            total = dt * steps
        seed_a = self.seed_a if self.seed_a is not None else self.seed
        seed_b = self.seed_b if self.seed_b is not None else seed_a + 1
        return replace(
            self,
            num_steps=steps,
            dt=dt,
            total_time=total,
            seed_a=seed_a,
            seed_b=seed_b,
        )

    # ---------------------------------------------------------- serialization

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "grid": {
                "rows": self.rows,
                "columns": self.columns,
                "origin_row": self.origin_row,
            },
            "region": list(self.region.as_tuple()) if self.region else None,
            "couplings": {
                "j": self.j.to_dict(),
                "hz": self.hz.to_dict(),
                "hx": self.hx.to_dict(),
                "periodic": self.periodic,
            },
            "seed": self.seed,
            "seed_a": self.seed_a,
            "seed_b": self.seed_b,
            "schedule": {
                "dt": self.dt,
                "num_steps": self.num_steps,
                "total_time": self.total_time,
            },
            "shots": self.shots,
            "shift_strength": self.shift_strength,
            "pins": sorted(list(p) for p in self.pins),
            "drop_initial_slice": self.drop_initial_slice,
            "palette": self.palette,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunRequest":
        grid = d.get("grid", {})
        couplings = d.get("couplings", {})
        schedule = d.get("schedule", {})

        def spec(key):
            raw = couplings.get(key)
            return CouplingSpec.from_dict(raw) if raw else CouplingSpec.uniform()

        return cls(
            mode=d["mode"],
            rows=grid["rows"],
            columns=grid["columns"],
            origin_row=grid.get("origin_row", "bottom"),
            region=Region(*d["region"]) if d.get("region") else None,
            j=spec("j"),
            hz=spec("hz"),
            hx=spec("hx"),
            periodic=couplings.get("periodic", True),
            seed=d.get("seed", 0),
            seed_a=d.get("seed_a"),
            seed_b=d.get("seed_b"),
            dt=schedule.get("dt"),
            total_time=schedule.get("total_time"),
            num_steps=schedule.get("num_steps"),
            shots=d.get("shots"),
            shift_strength=d.get("shift_strength", DEFAULT_SHIFT),
            pins=frozenset(tuple(p) for p in d.get("pins", [])),
            drop_initial_slice=d.get("drop_initial_slice", True),
            palette=d.get("palette"),
        )


@dataclass
class RunResult:
    request: RunRequest  # resolved
    input_image: Image.Image
    image: Image.Image
    png_bytes: bytes
    sidecar: Sidecar
    sidecar_text: str
    grid: TileGrid
    plan: TransformPlan
    traces: dict[str, EvolutionTrace]

    @property
    def total_slices(self) -> int:
        return sum(t.num_slices for t in self.traces.values())


def _initial_state(req: RunRequest) -> StateVector:
    if req.mode == "colors":
        probs = np.arange(req.columns) / (req.rows * req.columns)
        return prepare_ry_product(req.columns, probs)
    return StateVector.zero(req.columns)


def run_transform(request: RunRequest, image_source, progress=None) -> RunResult:
    """Simulate, plan and composite one run. `progress(done, total)` tracks slices."""
    req = request.resolve()
    image = load_image(image_source)
    grid_spec = GridSpec(req.rows, req.columns, req.origin_row)
    tile_grid = slice_grid(image.size, req.region, req.rows, req.columns)
    params = build_params(
        req.columns, req.j, req.hz, req.hx, seed=req.seed, periodic=req.periodic
    )
    schedule = TrotterSchedule.from_dt(req.dt, req.num_steps)
    initial = _initial_state(req)
    slices_per_trace = req.num_steps + 1
    total = 2 * slices_per_trace if req.mode == "mirrored" else slices_per_trace

    def tracker(offset):
        if progress is None:
            return None
        return lambda done: progress(offset + done, total)

    traces: dict[str, EvolutionTrace] = {}
    if req.mode == "mirrored":
        traces["trace_a"] = simulate_trace(
            initial, params, schedule, shots=req.shots, seed=req.seed_a,
            progress=tracker(0),
        )
        traces["trace_b"] = simulate_trace(
            initial, params, schedule, shots=req.shots, seed=req.seed_b,
            progress=tracker(slices_per_trace),
        )
        plan = plan_mirrored(
            traces["trace_a"],
            traces["trace_b"],
            grid_spec,
            shift_strength=req.shift_strength,
            pins=req.pins,
            drop_initial_slice=req.drop_initial_slice,
        )
    else:
        traces["trace"] = simulate_trace(
            initial, params, schedule, shots=req.shots, seed=req.seed_a,
            progress=tracker(0),
        )
        if req.mode == "row":
            plan = plan_row_evolution(
                traces["trace"], grid_spec, shift_strength=req.shift_strength,
                pins=req.pins,
            )
        else:
            palette = req.palette or extract_palette(image, tile_grid, req.origin_row)
            if len(palette) != req.rows * req.columns:
                raise ValueError(
                    f"palette has {len(palette)} colors, the grid needs "
                    f"{req.rows * req.columns}"
                )
            plan = plan_global_color(
                traces["trace"], grid_spec, req.rows * req.columns
            )
            plan.palette = palette
            req = replace(req, palette=palette)

    plan.provenance = {"request": req.to_dict()}
    output = apply_plan(image, tile_grid, plan)
    sidecar = Sidecar(
        request=req.to_dict(),
        input_info={
            "sha256": image_sha256(image),
            "width": image.size[0],
            "height": image.size[1],
        },
        plan=plan,
        traces=traces,
        resampled=plan_resamples(tile_grid, plan),
    )
    return RunResult(
        request=req,
        input_image=image,
        image=output,
        png_bytes=encode_png(output),
        sidecar=sidecar,
        sidecar_text=sidecar.to_text(),
        grid=tile_grid,
        plan=plan,
        traces=traces,
    )


# ---------------------------------------------------------------------------
# frames: progressive application, one image per time slice


def _plan_limited_to(plan: TransformPlan, max_slice: int) -> TransformPlan:
    """Copy of a permutation plan where rows of later slices stay in place."""
    rows = []
    for perm in plan.rows:
        if perm.slice_index <= max_slice:
            rows.append(perm)
        else:
            rows.append(replace(perm, order=tuple(range(len(perm.order)))))
    return TransformPlan(plan.mode, plan.grid, rows=rows)


def frame_images(result: RunResult) -> list[Image.Image]:
    """One frame per time slice, applying the plan up to that slice.

    Frame 0 shows only slice 0 (the untouched input for an all-zeros start);
    the last frame equals the full transform output.
    """
    plan, grid, req = result.plan, result.grid, result.request
    original = result.input_image

    if plan.rows is not None:
        slices = sorted({perm.slice_index for perm in plan.rows})
        if 0 not in slices:
            slices = [0] + slices  # dropped initial slice still yields a frame
        return [
            apply_plan(original, grid, _plan_limited_to(plan, s)) for s in slices
        ]

    # colors mode: repaint cells one slice at a time, starting at the origin row
    from .imaging import parse_hex_color

    colors = [parse_hex_color(c) for c in plan.palette]
    grid_spec = GridSpec(req.rows, req.columns, req.origin_row)
    out = np.asarray(original).copy()
    frames = []
    for s in range(req.rows):
        row = req.rows - 1 - s if grid_spec.origin_row == "bottom" else s
        for col in range(grid.columns):
            x0, y0, x1, y1 = grid.tile_box(row, col)
            out[y0:y1, x0:x1] = colors[plan.color_assignment[row, col]]
        frames.append(Image.fromarray(out.copy()))
    return frames


# ---------------------------------------------------------------------------
# template labels and legend


def template_labels(plan: TransformPlan) -> list[list[str]]:
    """Per-tile labels naming each tile's source, image-row major."""
    grid = plan.grid
    if plan.rows is not None:
        return [
            [f"r{row}c{perm.order[col]}" for col in range(grid.columns)]
            for row, perm in enumerate(plan.rows)
        ]
    return [
        [str(plan.color_assignment[row, col]) for col in range(grid.columns)]
        for row in range(grid.rows)
    ]


def template_legend(plan: TransformPlan) -> list[dict]:
    """Structured rows mapping destination cells to their sources."""
    grid = plan.grid
    legend = []
    if plan.rows is not None:
        for row, perm in enumerate(plan.rows):
            for col in range(grid.columns):
                legend.append(
                    {
                        "dest_row": row,
                        "dest_col": col,
                        "label": f"r{row}c{perm.order[col]}",
                        "src_row": row,
                        "src_col": perm.order[col],
                    }
                )
    else:
        for row in range(grid.rows):
            for col in range(grid.columns):
                idx = int(plan.color_assignment[row, col])
                legend.append(
                    {
                        "dest_row": row,
                        "dest_col": col,
                        "label": str(idx),
                        "palette_index": idx,
                        "color": plan.palette[idx] if plan.palette else None,
                    }
                )
    return legend
