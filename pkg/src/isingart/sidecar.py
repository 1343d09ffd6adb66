"""Sidecar files: the reproducibility record written next to every output.

A sidecar holds the fully-resolved run request, the measured trace(s) and the
transform plan, as versioned JSON. Replaying it against the same input image
regenerates the output bit-exactly without rerunning the simulation.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from PIL import Image

from .evolution import EvolutionTrace
from .imaging import Region, apply_plan, slice_grid
from .reorder import TransformPlan

__all__ = ["Sidecar", "FORMAT_VERSION", "SIDECAR_SUFFIX", "image_sha256", "replay_image"]

FORMAT_VERSION = "qmplan/1"
SIDECAR_SUFFIX = ".qmplan"


def image_sha256(image: Image.Image) -> str:
    """Hash of the decoded RGB pixels, so recompressed copies still match."""
    return hashlib.sha256(image.convert("RGB").tobytes()).hexdigest()


@dataclass
class Sidecar:
    request: dict
    input_info: dict
    plan: TransformPlan
    traces: dict[str, EvolutionTrace]  # "trace", or "trace_a"/"trace_b"
    resampled: bool = False
    format_version: str = FORMAT_VERSION

    def to_text(self) -> str:
        doc = {
            "format": self.format_version,
            "request": self.request,
            "input": self.input_info,
            "plan": self.plan.to_dict(),
            "resampled": self.resampled,
        }
        for key, trace in self.traces.items():
            doc[key] = trace.to_dict()
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Sidecar":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"sidecar is not valid JSON: {exc}") from exc
        version = doc.get("format")
        if version != FORMAT_VERSION:
            raise ValueError(
                f"unsupported sidecar format {version!r}, expected {FORMAT_VERSION!r}"
            )
        traces = {
            key: EvolutionTrace.from_dict(doc[key])
            for key in ("trace", "trace_a", "trace_b")
            if key in doc
        }
        return cls(
            request=doc["request"],
            input_info=doc["input"],
            plan=TransformPlan.from_dict(doc["plan"]),
            traces=traces,
            resampled=doc.get("resampled", False),
        )


def replay_image(sidecar: Sidecar, image: Image.Image) -> Image.Image:
    """Apply the stored plan to an image of the recorded geometry."""
    req = sidecar.request
    expected = (sidecar.input_info["width"], sidecar.input_info["height"])
    if image.size != expected:
        raise ValueError(f"image is {image.size}, sidecar was made for {expected}")
    region = Region(*req["region"]) if req.get("region") else None
    grid = slice_grid(image.size, region, req["grid"]["rows"], req["grid"]["columns"])
    return apply_plan(image, grid, sidecar.plan)
