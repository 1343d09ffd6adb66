import hashlib

import numpy as np
import pytest
from PIL import Image

from isingart.evolution import CouplingSpec
from isingart.imaging import Region, encode_png, extract_palette, load_image, slice_grid
from isingart.pipeline import (
    RunRequest,
    frame_images,
    run_transform,
    template_labels,
    template_legend,
)
from isingart.reorder import GridSpec, plan_row_evolution
from isingart.evolution import EvolutionTrace
from isingart.sidecar import Sidecar, replay_image


def checkerboard(width=64, height=48):
    rng = np.random.default_rng(12)
    arr = rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
    return Image.fromarray(arr)


def narciso_request(**overrides):
    base = dict(mode="row", rows=13, columns=16, seed=7, shots=4096)
    base.update(overrides)
    return RunRequest(**base)


# ---------------------------------------------------------------- requests


def test_request_validation():
    with pytest.raises(ValueError):
        RunRequest(mode="spiral", rows=2, columns=2).validate()
    with pytest.raises(ValueError):
        RunRequest(mode="mirrored", rows=5, columns=4).validate()
    with pytest.raises(ValueError):
        RunRequest(mode="row", rows=2, columns=2, shots=0).validate()
    with pytest.raises(ValueError):
        RunRequest(mode="row", rows=2, columns=2, dt=0.1, total_time=1.0).validate()


def test_request_resolution_defaults():
    req = narciso_request().resolve()
    assert req.num_steps == 12
    assert req.dt == 0.1
    assert req.total_time == pytest.approx(1.2)
    assert req.seed_a == 7 and req.seed_b == 8
    mirrored = RunRequest(mode="mirrored", rows=20, columns=16).resolve()
    assert mirrored.num_steps == 10
    colors = RunRequest(mode="colors", rows=16, columns=12).resolve()
    assert colors.num_steps == 15


def test_request_total_time_overrides_dt():
    req = RunRequest(mode="row", rows=5, columns=4, total_time=2.0).resolve()
    assert req.num_steps == 4
    assert req.dt == pytest.approx(0.5)


def test_request_roundtrip():
    req = narciso_request(
        region=Region(2, 3, 40, 26),
        j=CouplingSpec.fixed(1),
        pins=frozenset({(1, 2)}),
    ).resolve()
    again = RunRequest.from_dict(req.to_dict())
    assert again.resolve().to_dict() == req.to_dict()


# ---------------------------------------------------------------- runs


def test_row_run_end_to_end():
    img = checkerboard()
    req = RunRequest(mode="row", rows=3, columns=4, seed=5)
    result = run_transform(req, encode_png(img))
    assert result.image.size == img.size
    assert result.traces["trace"].num_slices == 3
    assert len(result.plan.rows) == 3
    # slice 0 at the bottom is identity for the all-zeros start
    assert result.plan.rows[2].is_identity()
    # sidecar replays to the same bytes
    clone = Sidecar.from_text(result.sidecar_text)
    replayed = replay_image(clone, img)
    assert encode_png(replayed) == result.png_bytes


def test_run_determinism():
    img = checkerboard()
    req = dict(mode="row", rows=4, columns=5, seed=3, shots=128)
    a = run_transform(RunRequest(**req), encode_png(img))
    b = run_transform(RunRequest(**req), encode_png(img))
    assert a.png_bytes == b.png_bytes
    assert a.sidecar_text == b.sidecar_text


def test_mirrored_run_uses_two_sampling_streams():
    img = checkerboard(64, 40)
    req = RunRequest(
        mode="mirrored", rows=4, columns=4, seed=1, seed_a=10, seed_b=20, shots=64
    )
    result = run_transform(req, encode_png(img))
    assert set(result.traces) == {"trace_a", "trace_b"}
    assert result.traces["trace_a"].shot_counts != result.traces["trace_b"].shot_counts
    assert result.request.num_steps == 2


def test_mirrored_exact_traces_match():
    img = checkerboard(64, 40)
    req = RunRequest(mode="mirrored", rows=4, columns=4, seed=1)
    result = run_transform(req, encode_png(img))
    assert np.array_equal(
        result.traces["trace_a"].expectations, result.traces["trace_b"].expectations
    )


def test_colors_run_extracts_palette():
    rng = np.random.default_rng(9)
    swatches = rng.integers(0, 256, size=(4, 3, 3), dtype=np.uint8)
    img = Image.fromarray(np.repeat(np.repeat(swatches, 8, axis=0), 8, axis=1))
    req = RunRequest(
        mode="colors",
        rows=4,
        columns=3,
        j=CouplingSpec.fixed(1),
        hz=CouplingSpec.fixed(1),
        hx=CouplingSpec.fixed(1),
        seed=2,
    )
    result = run_transform(req, encode_png(img))
    assert len(result.plan.palette) == 12
    assert result.request.palette == result.plan.palette
    grid = slice_grid(img.size, None, 4, 3)
    assert sorted(extract_palette(result.image, grid)) == sorted(result.plan.palette)


def test_progress_reports_all_slices():
    img = checkerboard()
    seen = []
    run_transform(
        RunRequest(mode="row", rows=3, columns=4, seed=1),
        encode_png(img),
        progress=lambda done, total: seen.append((done, total)),
    )
    assert seen == [(1, 3), (2, 3), (3, 3)]
    seen.clear()
    run_transform(
        RunRequest(mode="mirrored", rows=4, columns=4, seed=1),
        encode_png(img),
        progress=lambda done, total: seen.append((done, total)),
    )
    assert seen == [(k, 6) for k in range(1, 7)]


def test_pins_survive_the_full_pipeline():
    img = checkerboard(80, 60)
    pins = frozenset({(0, 1), (2, 3)})
    req = RunRequest(mode="row", rows=3, columns=4, seed=11, pins=pins)
    result = run_transform(req, encode_png(img))
    for row, col in pins:
        assert result.plan.rows[row].order[col] == col
    src = np.asarray(img)
    out = np.asarray(result.image)
    for row, col in pins:
        x0, y0, x1, y1 = result.grid.tile_box(row, col)
        assert np.array_equal(out[y0:y1, x0:x1], src[y0:y1, x0:x1])


# ---------------------------------------------------------------- frames


def test_frames_row_mode():
    img = checkerboard()
    result = run_transform(RunRequest(mode="row", rows=3, columns=4, seed=5), encode_png(img))
    frames = frame_images(result)
    assert len(frames) == 3
    assert encode_png(frames[0]) == encode_png(img)  # slice 0 is identity
    assert encode_png(frames[-1]) == result.png_bytes


def test_frames_mirrored_mode():
    img = checkerboard(64, 40)
    result = run_transform(
        RunRequest(mode="mirrored", rows=4, columns=4, seed=2), encode_png(img)
    )
    frames = frame_images(result)
    # traces have steps 0..2; three frames, the first untouched
    assert len(frames) == 3
    assert encode_png(frames[0]) == encode_png(img)
    assert encode_png(frames[-1]) == result.png_bytes


def test_frames_colors_mode():
    img = checkerboard(60, 40)
    req = RunRequest(
        mode="colors", rows=4, columns=5,
        j=CouplingSpec.fixed(1), hz=CouplingSpec.fixed(1), hx=CouplingSpec.fixed(1),
        seed=1,
    )
    result = run_transform(req, encode_png(img))
    frames = frame_images(result)
    assert len(frames) == 4
    assert encode_png(frames[-1]) == result.png_bytes
    # frame 0 touches only the bottom grid row
    before = np.asarray(img)
    after = np.asarray(frames[0])
    assert np.array_equal(after[:30], before[:30])


# ---------------------------------------------------------------- templates


def test_template_labels_identity_natural_order():
    trace = EvolutionTrace(expectations=np.zeros((2, 3)))
    plan = plan_row_evolution(trace, GridSpec(2, 3))
    assert template_labels(plan) == [
        ["r0c0", "r0c1", "r0c2"],
        ["r1c0", "r1c1", "r1c2"],
    ]


def test_template_labels_swap():
    trace = EvolutionTrace(expectations=np.array([[0, 0, 1, 0.0]]))
    plan = plan_row_evolution(trace, GridSpec(1, 4))
    assert template_labels(plan)[0] == ["r0c0", "r0c1", "r0c3", "r0c2"]


def test_template_legend_is_bijective():
    rng = np.random.default_rng(14)
    trace = EvolutionTrace(expectations=rng.uniform(0, 1, (4, 6)))
    plan = plan_row_evolution(trace, GridSpec(4, 6))
    legend = template_legend(plan)
    assert len(legend) == 24
    sources = {(e["src_row"], e["src_col"]) for e in legend}
    dests = {(e["dest_row"], e["dest_col"]) for e in legend}
    assert len(sources) == 24 and len(dests) == 24
    labels = [e["label"] for e in legend]
    assert len(set(labels)) == 24
