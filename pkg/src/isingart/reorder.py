"""Turning expectation traces into tile permutations or color assignments.

Three plan builders, one per transformation protocol:

* row evolution — each image row takes the permutation of one time slice,
  sorting i_n = n + c * <O_n> ascending;
* mirrored evolution — two independent traces meet in the middle of the
  image, most-evolved content at the center;
* global color reorder — every (slice, site) cell is ranked by its scaled
  expectation value and repainted with the palette color of that rank.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .evolution import EvolutionTrace

__all__ = [
    "GridSpec",
    "RowPermutation",
    "TransformPlan",
    "reorder_row",
    "plan_row_evolution",
    "plan_mirrored",
    "plan_global_color",
]

PinMask = frozenset  # of (row, column) grid cells


@dataclass(frozen=True)
class GridSpec:
    """Shape of the transformation grid and where slice 0 lands."""

    rows: int
    columns: int
    origin_row: str = "bottom"  # image row holding slice 0: "bottom" | "top"

    def __post_init__(self) -> None:
        if self.rows < 1 or self.columns < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.rows}x{self.columns}")
        if self.origin_row not in ("bottom", "top"):
            raise ValueError(f"origin_row must be 'bottom' or 'top', got {self.origin_row!r}")

    def slice_for_row(self, row: int) -> int:
        """Time slice shown on image row `row` (0 = top of the image)."""
        return self.rows - 1 - row if self.origin_row == "bottom" else row

    def scan_cell(self, scan_index: int) -> tuple[int, int]:
        """(image row, column) of a scan position counted from the origin row."""
        s, col = divmod(scan_index, self.columns)
        row = self.rows - 1 - s if self.origin_row == "bottom" else s
        return row, col


@dataclass(frozen=True)
class RowPermutation:
    """Sorted positions of one row: order[dest] = source column."""

    slice_index: int
    order: tuple[int, ...]
    i_values: tuple[float, ...]

    def is_identity(self) -> bool:
        return self.order == tuple(range(len(self.order)))

    def inverted(self) -> "RowPermutation":
        inv = [0] * len(self.order)
        for dest, src in enumerate(self.order):
            inv[src] = dest
        return RowPermutation(self.slice_index, tuple(inv), self.i_values)

    def to_dict(self) -> dict:
        return {
            "slice": self.slice_index,
            "order": list(self.order),
            "i_values": list(self.i_values),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RowPermutation":
        return cls(d["slice"], tuple(d["order"]), tuple(d["i_values"]))


@dataclass
class TransformPlan:
    """Complete recipe for transforming an image; deterministic to apply."""

    mode: str  # "row" | "mirrored" | "colors"
    grid: GridSpec
    rows: list[RowPermutation] | None = None  # indexed by image row
    color_assignment: np.ndarray | None = None  # (rows, cols) palette index per cell
    palette: list[str] | None = None  # "#rrggbb" entries, colors mode
    provenance: dict = field(default_factory=dict)

    def is_identity(self) -> bool:
        if self.rows is None:
            return False
        return all(p.is_identity() for p in self.rows)

    def inverted(self) -> "TransformPlan":
        if self.rows is None:
            raise ValueError("only permutation plans can be inverted")
        return TransformPlan(
            mode=self.mode,
            grid=self.grid,
            rows=[p.inverted() for p in self.rows],
            provenance=dict(self.provenance),
        )

    def to_dict(self) -> dict:
        d: dict = {
            "mode": self.mode,
            "grid": {
                "rows": self.grid.rows,
                "columns": self.grid.columns,
                "origin_row": self.grid.origin_row,
            },
        }
        if self.rows is not None:
            d["rows"] = [p.to_dict() for p in self.rows]
        if self.color_assignment is not None:
            d["color_assignment"] = self.color_assignment.tolist()
        if self.palette is not None:
            d["palette"] = list(self.palette)
        if self.provenance:
            d["provenance"] = self.provenance
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TransformPlan":
        g = d["grid"]
        grid = GridSpec(g["rows"], g["columns"], g.get("origin_row", "bottom"))
        rows = [RowPermutation.from_dict(p) for p in d["rows"]] if "rows" in d else None
        assignment = (
            np.asarray(d["color_assignment"], dtype=int)
            if "color_assignment" in d
            else None
        )
        return cls(
            mode=d["mode"],
            grid=grid,
            rows=rows,
            color_assignment=assignment,
            palette=d.get("palette"),
            provenance=d.get("provenance", {}),
        )


def _shift_values(expectations, shift_strength: float) -> np.ndarray:
    exp = np.asarray(expectations, dtype=float)
    if exp.ndim != 1:
        raise ValueError("expectations must be a flat per-site vector")
    if np.any((exp < 0) | (exp > 1)):
        raise ValueError("expectations must lie in [0, 1]")
    if shift_strength <= 0:
        raise ValueError(f"shift strength must be positive, got {shift_strength}")
    return np.arange(exp.size) + shift_strength * exp


def _pinned_order(i_values: np.ndarray, pinned_cols: set[int]) -> tuple[int, ...]:
    """Sort unpinned columns by i value (ties to the lower index), pins stay put."""
    order = list(range(i_values.size))
    unpinned = [c for c in order if c not in pinned_cols]
    ranked = sorted(unpinned, key=lambda c: (i_values[c], c))
    for pos, src in zip(unpinned, ranked):
        order[pos] = src
    return tuple(order)


def reorder_row(
    expectations, shift_strength: float = 10.0, slice_index: int = 0
) -> RowPermutation:
    """Ascending sort of i_n = n + c * expectation[n]; stable on ties."""
    i_values = _shift_values(expectations, shift_strength)
    order = _pinned_order(i_values, set())
    return RowPermutation(slice_index, order, tuple(i_values))


def _check_pins(pins, grid: GridSpec) -> None:
    for row, col in pins:
        if not (0 <= row < grid.rows and 0 <= col < grid.columns):
            raise ValueError(f"pinned cell {(row, col)} outside {grid.rows}x{grid.columns} grid")


def _pins_by_row(pins) -> dict[int, set[int]]:
    by_row: dict[int, set[int]] = {}
    for row, col in pins:
        by_row.setdefault(row, set()).add(col)
    return by_row


def plan_row_evolution(
    trace: EvolutionTrace,
    grid: GridSpec,
    shift_strength: float = 10.0,
    pins=frozenset(),
) -> TransformPlan:
    """One permutation per image row; the origin row shows slice 0."""
    if grid.rows != trace.num_slices:
        raise ValueError(
            f"grid has {grid.rows} rows but trace has {trace.num_slices} slices"
        )
    if grid.columns != trace.num_sites:
        raise ValueError(
            f"grid has {grid.columns} columns but trace has {trace.num_sites} sites"
        )
    _check_pins(pins, grid)
    pinned = _pins_by_row(pins)
    rows = []
    for row in range(grid.rows):
        s = grid.slice_for_row(row)
        i_values = _shift_values(trace.expectations[s], shift_strength)
        order = _pinned_order(i_values, pinned.get(row, set()))
        rows.append(RowPermutation(s, order, tuple(i_values)))
    return TransformPlan(mode="row", grid=grid, rows=rows)


def plan_mirrored(
    trace_a: EvolutionTrace,
    trace_b: EvolutionTrace,
    grid: GridSpec,
    shift_strength: float = 10.0,
    pins=frozenset(),
    drop_initial_slice: bool = True,
) -> TransformPlan:
    """Two runs meeting in the middle: row 0 and the last row carry step 1,
    the two middle rows carry the deepest step of each run.

    With drop_initial_slice the trivial slice 0 is skipped and rows show
    steps 1..rows/2; otherwise slices 0..rows/2-1 are used directly.
    """
    if grid.rows % 2:
        raise ValueError(f"mirrored layout needs an even row count, got {grid.rows}")
    half = grid.rows // 2
    needed = half + 1 if drop_initial_slice else half
    for name, trace in (("trace_a", trace_a), ("trace_b", trace_b)):
        if trace.num_slices < needed:
            raise ValueError(
                f"{name} has {trace.num_slices} slices, needs at least {needed}"
            )
        if trace.num_sites != grid.columns:
            raise ValueError(
                f"{name} has {trace.num_sites} sites but grid has {grid.columns} columns"
            )
    _check_pins(pins, grid)
    pinned = _pins_by_row(pins)
    offset = 1 if drop_initial_slice else 0
    rows = []
    for row in range(grid.rows):
        if row < half:
            step, trace = row + 1, trace_a
        else:
            step, trace = grid.rows - row, trace_b
        s = step - 1 + offset
        i_values = _shift_values(trace.expectations[s], shift_strength)
        order = _pinned_order(i_values, pinned.get(row, set()))
        rows.append(RowPermutation(s, order, tuple(i_values)))
    return TransformPlan(mode="mirrored", grid=grid, rows=rows)


def plan_global_color(
    trace: EvolutionTrace, grid: GridSpec, palette_size: int
) -> TransformPlan:
    """Rank every cell's scaled expectation; rank r gets palette color r.

    Scan order starts at the origin row, runs left to right and proceeds
    away from it, both for the ranking ties and for palette indexing.
    """
    if grid.rows * grid.columns != palette_size:
        raise ValueError(
            f"{grid.rows}x{grid.columns} grid has {grid.rows * grid.columns} cells, "
            f"palette has {palette_size}"
        )
    if trace.num_slices != grid.rows or trace.num_sites != grid.columns:
        raise ValueError(
            f"trace is {trace.num_slices}x{trace.num_sites}, grid wants "
            f"{grid.rows}x{grid.columns}"
        )
    indices = trace.expectations * palette_size
    # ravel is slice-major, so the stable sort breaks ties by slice then site
    ascending = np.argsort(indices.ravel(), kind="stable")
    ranks = np.empty(palette_size, dtype=int)
    ranks[ascending] = np.arange(palette_size)
    assignment = np.empty((grid.rows, grid.columns), dtype=int)
    for scan_index in range(palette_size):
        row, col = grid.scan_cell(scan_index)
        assignment[row, col] = ranks[scan_index]
    return TransformPlan(mode="colors", grid=grid, color_assignment=assignment)
