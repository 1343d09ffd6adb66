"""Quantum-transformed artworks: Ising-chain time evolution drives image tiles.

A statevector simulator Trotterizes the evolution of a small periodic Ising
chain, per-site observable values become tile permutations or color
assignments, and those plans repaint an input image. A CLI and an HTTP job
service expose the full pipeline; every output comes with a replayable
sidecar.
"""
from .evolution import (
    CouplingSpec,
    EvolutionTrace,
    IsingParams,
    TrotterSchedule,
    build_params,
    build_trotter_step,
    evolve,
    exact_evolve,
    simulate_trace,
)
from .gates import (
    StateVector,
    apply_rx,
    apply_ry,
    apply_rz,
    apply_rzz,
    expect_from_counts,
    expect_obs,
    prepare_ry_product,
    sample_counts,
)
from .imaging import Region, TileGrid, apply_plan, extract_palette, slice_grid
from .pipeline import RunRequest, RunResult, run_transform
from .reorder import (
    GridSpec,
    RowPermutation,
    TransformPlan,
    plan_global_color,
    plan_mirrored,
    plan_row_evolution,
    reorder_row,
)
from .sidecar import Sidecar, replay_image

__version__ = "0.1.0"
