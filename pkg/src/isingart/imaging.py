"""Image slicing, plan application and the small file formats around them.

All compositing runs on RGB pixel arrays; PNG is the canonical output format
so permutations stay provably lossless. Tiles partition the target region
exactly: when the region does not divide evenly the leading tiles are one
pixel larger, and a permutation that moves tiles of unequal size falls back
to nearest-neighbor resampling (recorded by the caller in the sidecar).
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .reorder import TransformPlan

__all__ = [
    "Region",
    "TileGrid",
    "slice_grid",
    "apply_plan",
    "plan_resamples",
    "extract_palette",
    "load_image",
    "encode_png",
    "parse_hex_color",
    "read_palette_file",
    "write_palette_file",
    "read_pin_file",
    "write_pin_file",
]


@dataclass(frozen=True)
class Region:
    """Pixel rectangle inside an image."""

    x: int
    y: int
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError(f"region must have positive size, got {self}")
        if self.x < 0 or self.y < 0:
            raise ValueError(f"region offset must be non-negative, got {self}")

    @classmethod
    def full(cls, width: int, height: int) -> "Region":
        return cls(0, 0, width, height)

    @classmethod
    def parse(cls, text: str) -> "Region":
        """Parse "x,y,width,height"."""
        parts = text.split(",")
        if len(parts) != 4:
            raise ValueError(f"region must be x,y,width,height, got {text!r}")
        return cls(*(int(p) for p in parts))

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x, self.y, self.width, self.height)


def _edges(start: int, length: int, parts: int) -> list[int]:
    """Cut `length` into `parts` integer spans, larger spans first."""
    base, rem = divmod(length, parts)
    edges = [start]
    for k in range(parts):
        edges.append(edges[-1] + base + (1 if k < rem else 0))
    return edges


@dataclass(frozen=True)
class TileGrid:
    """Integer tile partition of a region within an image."""

    image_width: int
    image_height: int
    region: Region
    rows: int
    columns: int
    x_edges: tuple[int, ...]
    y_edges: tuple[int, ...]

    def tile_box(self, row: int, col: int) -> tuple[int, int, int, int]:
        """(x0, y0, x1, y1) pixel bounds of one tile, end-exclusive."""
        return (
            self.x_edges[col],
            self.y_edges[row],
            self.x_edges[col + 1],
            self.y_edges[row + 1],
        )

    @property
    def uniform(self) -> bool:
        """True when every tile has the same pixel size."""
        return (
            self.region.width % self.columns == 0
            and self.region.height % self.rows == 0
        )


def slice_grid(image_size: tuple[int, int], region: Region | None, rows: int, columns: int) -> TileGrid:
    """Partition `region` (or the whole image) into rows x columns tiles."""
    width, height = image_size
    if region is None:
        region = Region.full(width, height)
    if rows < 1 or columns < 1:
        raise ValueError(f"grid must be at least 1x1, got {rows}x{columns}")
    if region.x + region.width > width or region.y + region.height > height:
        raise ValueError(
            f"region {region.as_tuple()} exceeds image bounds {width}x{height}"
        )
    if region.width < columns or region.height < rows:
        raise ValueError(
            f"{rows}x{columns} grid needs at least that many pixels, "
            f"region is {region.width}x{region.height}"
        )
    return TileGrid(
        image_width=width,
        image_height=height,
        region=region,
        rows=rows,
        columns=columns,
        x_edges=tuple(_edges(region.x, region.width, columns)),
        y_edges=tuple(_edges(region.y, region.height, rows)),
    )


def load_image(source) -> Image.Image:
    """Decode a path or raw bytes to RGB once; later stages stay lossless."""
    if isinstance(source, (bytes, bytearray)):
        img = Image.open(io.BytesIO(source))
    else:
        img = Image.open(source)
    return img.convert("RGB")


def encode_png(image: Image.Image) -> bytes:
    buf = io.BytesIO()
    image.save(buf, format="PNG")
    return buf.getvalue()


def parse_hex_color(text: str) -> tuple[int, int, int]:
    text = text.strip().lstrip("#")
    if len(text) != 6:
        raise ValueError(f"expected rrggbb hex color, got {text!r}")
    return tuple(int(text[k : k + 2], 16) for k in (0, 2, 4))


def _to_hex(rgb) -> str:
    return "#%02x%02x%02x" % tuple(int(v) for v in rgb)


def extract_palette(
    image: Image.Image, grid: TileGrid, origin_row: str = "bottom"
) -> list[str]:
    """Mean tile colors as hex strings, scanned from the origin row outward."""
    pixels = np.asarray(image, dtype=np.float64)
    palette = []
    row_order = (
        range(grid.rows - 1, -1, -1) if origin_row == "bottom" else range(grid.rows)
    )
    for row in row_order:
        for col in range(grid.columns):
            x0, y0, x1, y1 = grid.tile_box(row, col)
            mean = pixels[y0:y1, x0:x1].reshape(-1, 3).mean(axis=0)
            palette.append(_to_hex(np.rint(mean)))
    return palette


def plan_resamples(grid: TileGrid, plan: TransformPlan) -> bool:
    """True when applying the plan must resample at least one moved tile."""
    if plan.rows is None:
        return False
    widths = np.diff(grid.x_edges)
    for perm in plan.rows:
        for dest, src in enumerate(perm.order):
            if widths[dest] != widths[src]:
                return True
    return False


def apply_plan(image: Image.Image, grid: TileGrid, plan: TransformPlan) -> Image.Image:
    """Render a plan: permute tile blocks, or repaint cells from the palette.

    Pixels outside the grid region are untouched.
    """
    if plan.grid.rows != grid.rows or plan.grid.columns != grid.columns:
        raise ValueError(
            f"plan is {plan.grid.rows}x{plan.grid.columns}, grid is "
            f"{grid.rows}x{grid.columns}"
        )
    if image.size != (grid.image_width, grid.image_height):
        raise ValueError(
            f"image is {image.size}, grid was built for "
            f"{(grid.image_width, grid.image_height)}"
        )
    src = np.asarray(image.convert("RGB"))
    out = src.copy()

    if plan.mode in ("row", "mirrored"):
        for row, perm in enumerate(plan.rows):
            for dest_col, src_col in enumerate(perm.order):
                sx0, sy0, sx1, sy1 = grid.tile_box(row, src_col)
                dx0, dy0, dx1, dy1 = grid.tile_box(row, dest_col)
                block = src[sy0:sy1, sx0:sx1]
                if block.shape[:2] != (dy1 - dy0, dx1 - dx0):
                    resized = Image.fromarray(block).resize(
                        (dx1 - dx0, dy1 - dy0), Image.NEAREST
                    )
                    block = np.asarray(resized)
                out[dy0:dy1, dx0:dx1] = block
    elif plan.mode == "colors":
        if plan.palette is None:
            raise ValueError("color plan carries no palette")
        if len(plan.palette) != grid.rows * grid.columns:
            raise ValueError(
                f"palette has {len(plan.palette)} colors, grid has "
                f"{grid.rows * grid.columns} cells"
            )
        colors = [parse_hex_color(c) for c in plan.palette]
        for row in range(grid.rows):
            for col in range(grid.columns):
                x0, y0, x1, y1 = grid.tile_box(row, col)
                out[y0:y1, x0:x1] = colors[plan.color_assignment[row, col]]
    else:
        raise ValueError(f"unknown plan mode {plan.mode!r}")
    return Image.fromarray(out)


# ---------------------------------------------------------------------------
# small text formats


def read_palette_file(path) -> list[str]:
    """One rrggbb hex color per line, in scan order."""
    palette = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                palette.append(_to_hex(parse_hex_color(line)))
    return palette


def write_palette_file(path, palette) -> None:
    with open(path, "w") as fh:
        for color in palette:
            fh.write(color + "\n")


def read_pin_file(path) -> frozenset:
    """Text list of `row,col` pairs; blank lines and # comments ignored."""
    pins = set()
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#")[0].strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'row,col', got {line!r}")
            pins.add((int(parts[0]), int(parts[1])))
    return frozenset(pins)


def write_pin_file(path, pins) -> None:
    with open(path, "w") as fh:
        for row, col in sorted(pins):
            fh.write(f"{row},{col}\n")
