"""Ising-chain time evolution: Trotter circuit, exact oracle, expectation traces.

The Hamiltonian is H = sum_n J_n Z_n Z_{n+1} + sum_n hz_n Z_n + sum_n hx_n X_n
on N sites, with the ZZ sum wrapping around (site N-1 couples to site 0) when
the chain is periodic. One Trotter step applies exp(-i J_n ZZ dt),
exp(-i hz_n Z dt) and exp(-i hx_n X dt) for every site, in that gate order.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
import scipy.sparse as sp

from .gates import (
    StateVector,
    _apply_1q_inplace,
    _rot_matrix,
    _rz_inplace,
    _rzz_inplace,
    expect_all,
    expect_from_counts,
    sample_counts,
)

__all__ = [
    "IsingParams",
    "CouplingSpec",
    "TrotterSchedule",
    "Gate",
    "EvolutionTrace",
    "build_params",
    "build_trotter_step",
    "evolve",
    "exact_evolve",
    "simulate_trace",
]

EXACT_SITE_LIMIT = 12  # dense 2^N x 2^N diagonalization


@dataclass(frozen=True)
class IsingParams:
    """Site-resolved couplings of the chain."""

    num_sites: int
    j: np.ndarray
    hz: np.ndarray
    hx: np.ndarray
    periodic: bool = True

    def __post_init__(self) -> None:
        for name in ("j", "hz", "hx"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (self.num_sites,):
                raise ValueError(
                    f"{name} must have length {self.num_sites}, got shape {arr.shape}"
                )
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class TrotterSchedule:
    """Total evolution time split into equal steps."""

    total_time: float
    num_steps: int

    def __post_init__(self) -> None:
        if self.num_steps < 0:
            raise ValueError(f"num_steps must be >= 0, got {self.num_steps}")

    @property
    def dt(self) -> float:
        return self.total_time / self.num_steps if self.num_steps else 0.0

    @classmethod
    def from_dt(cls, dt: float, num_steps: int) -> "TrotterSchedule":
        return cls(total_time=dt * num_steps, num_steps=num_steps)


@dataclass(frozen=True)
class CouplingSpec:
    """How one coupling array (j, hz or hx) is produced.

    Either a fixed value list / scalar, or uniform draws on [low, high) that
    are fully determined by a seed.
    """

    mode: str  # "fixed" | "uniform"
    values: tuple[float, ...] | float | None = None
    low: float = -1.0
    high: float = 1.0
    seed: int | None = None

    @classmethod
    def fixed(cls, values) -> "CouplingSpec":
        if np.isscalar(values):
            return cls(mode="fixed", values=float(values))
        return cls(mode="fixed", values=tuple(float(v) for v in values))

    @classmethod
    def uniform(cls, low: float = -1.0, high: float = 1.0, seed: int | None = None) -> "CouplingSpec":
        return cls(mode="uniform", low=low, high=high, seed=seed)

    def realize(self, num_sites: int, fallback_seed=None) -> np.ndarray:
        if self.mode == "fixed":
            if np.isscalar(self.values):
                return np.full(num_sites, float(self.values))
            vals = np.asarray(self.values, dtype=float)
            if vals.shape != (num_sites,):
                raise ValueError(
                    f"fixed coupling list has length {vals.size}, expected {num_sites}"
                )
            return vals
        if self.mode == "uniform":
            seed = self.seed if self.seed is not None else fallback_seed
            if seed is None:
                raise ValueError("uniform coupling spec needs a seed")
            rng = np.random.default_rng(seed)
            return rng.uniform(self.low, self.high, size=num_sites)
        raise ValueError(f"unknown coupling mode {self.mode!r}")

    def to_dict(self) -> dict:
        if self.mode == "fixed":
            vals = self.values if np.isscalar(self.values) else list(self.values)
            return {"mode": "fixed", "values": vals}
        return {"mode": "uniform", "low": self.low, "high": self.high, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "CouplingSpec":
        if d["mode"] == "fixed":
            return cls.fixed(d["values"])
        if d["mode"] == "uniform":
            return cls.uniform(d.get("low", -1.0), d.get("high", 1.0), d.get("seed"))
        raise ValueError(f"unknown coupling mode {d.get('mode')!r}")


def build_params(
    num_sites: int,
    j: CouplingSpec,
    hz: CouplingSpec,
    hx: CouplingSpec,
    seed: int | None = None,
    periodic: bool = True,
) -> IsingParams:
    """Realize the three coupling arrays.

    Uniform specs without their own seed draw from streams derived from the
    master seed (one independent stream per array), so a single seed pins the
    whole parameter set.
    """
    fallbacks = [None, None, None]
    if seed is not None:
        fallbacks = [np.random.SeedSequence([seed, k]) for k in range(3)]
    return IsingParams(
        num_sites=num_sites,
        j=j.realize(num_sites, fallbacks[0]),
        hz=hz.realize(num_sites, fallbacks[1]),
        hx=hx.realize(num_sites, fallbacks[2]),
        periodic=periodic,
    )


@dataclass(frozen=True)
class Gate:
    kind: str  # "rzz" | "rz" | "rx"
    qubits: tuple[int, ...]
    theta: float


def build_trotter_step(params: IsingParams, dt: float) -> list[Gate]:
    """Gate list for one first-order step: all Rzz, then all Rz, then all Rx.

    Angles are theta = 2 * coupling * dt so each gate equals
    exp(-i coupling * P * dt). A single-site chain has no ZZ pair.
    """
    n = params.num_sites
    gates: list[Gate] = []
    if n >= 2:
        last_pair = n if params.periodic else n - 1
        for i in range(last_pair):
            gates.append(Gate("rzz", (i, (i + 1) % n), 2.0 * params.j[i] * dt))
    for i in range(n):
        gates.append(Gate("rz", (i,), 2.0 * params.hz[i] * dt))
    for i in range(n):
        gates.append(Gate("rx", (i,), 2.0 * params.hx[i] * dt))
    return gates


def _apply_gates_inplace(amps: np.ndarray, gates: Iterable[Gate]) -> None:
    for g in gates:
        if g.kind == "rzz":
            _rzz_inplace(amps, g.qubits[0], g.qubits[1], g.theta)
        elif g.kind == "rz":
            _rz_inplace(amps, g.qubits[0], g.theta)
        elif g.kind == "rx":
            _apply_1q_inplace(amps, g.qubits[0], _rot_matrix(g.theta, "x"))
        else:
            raise ValueError(f"unknown gate kind {g.kind!r}")


def evolve(
    initial: StateVector, params: IsingParams, schedule: TrotterSchedule
) -> list[StateVector]:
    """Trotterized evolution returning k+1 snapshots; snapshot 0 is the initial state."""
    if initial.num_qubits != params.num_sites:
        raise ValueError(
            f"state has {initial.num_qubits} qubits but params describe "
            f"{params.num_sites} sites"
        )
    step = build_trotter_step(params, schedule.dt)
    snapshots = [initial.copy()]
    amps = initial.amplitudes.copy()
    for _ in range(schedule.num_steps):
        _apply_gates_inplace(amps, step)
        amps /= np.sqrt(np.sum(np.abs(amps) ** 2))
        snapshots.append(StateVector(params.num_sites, amps.copy()))
    return snapshots


def _dense_hamiltonian(params: IsingParams) -> np.ndarray:
    """Explicit 2^N x 2^N Hamiltonian (real symmetric), little-endian kron order."""
    n = params.num_sites
    dim = 1 << n
    x_mat = sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))

    idx = np.arange(dim)
    bits = (idx[:, None] >> np.arange(n)[None, :]) & 1  # (dim, n)
    z = 1.0 - 2.0 * bits  # Z eigenvalue of each site per basis state

    diag = params.hz @ z.T
    if n >= 2:
        last_pair = n if params.periodic else n - 1
        for i in range(last_pair):
            diag += params.j[i] * z[:, i] * z[:, (i + 1) % n]

    h = sp.diags(diag, format="csr")
    for i in range(n):
        h = h + params.hx[i] * sp.kron(
            sp.identity(1 << (n - 1 - i), format="csr"),
            sp.kron(x_mat, sp.identity(1 << i, format="csr")),
            format="csr",
        )
    return h.toarray()


def exact_evolve(initial: StateVector, params: IsingParams, t: float) -> StateVector:
    """Apply exp(-iHt) via dense spectral decomposition. Oracle; N <= 12 only."""
    if initial.num_qubits != params.num_sites:
        raise ValueError("state/params size mismatch")
    if params.num_sites > EXACT_SITE_LIMIT:
        raise ValueError(
            f"exact evolution is dense and capped at {EXACT_SITE_LIMIT} sites, "
            f"got {params.num_sites}"
        )
    h = _dense_hamiltonian(params)
    evals, evecs = np.linalg.eigh(h)
    phases = np.exp(-1j * evals * t)
    amps = evecs @ (phases * (evecs.T @ initial.amplitudes))
    return StateVector(params.num_sites, amps)


@dataclass
class EvolutionTrace:
    """Per-slice, per-site observable values (P(site reads 1)) of one evolution.

    Slice 0 is the un-evolved initial state. For the shot-sampled backend the
    raw histograms are kept alongside the estimates.
    """

    expectations: np.ndarray  # (num_slices, num_sites), values in [0, 1]
    shots: int | None = None
    shot_counts: list[dict[str, int]] | None = None

    def __post_init__(self) -> None:
        self.expectations = np.atleast_2d(np.asarray(self.expectations, dtype=float))
        if np.any((self.expectations < 0) | (self.expectations > 1)):
            raise ValueError("expectation values must lie in [0, 1]")

    @property
    def num_slices(self) -> int:
        return self.expectations.shape[0]

    @property
    def num_sites(self) -> int:
        return self.expectations.shape[1]

    def to_dict(self) -> dict:
        d: dict = {"expectations": self.expectations.tolist()}
        if self.shots is not None:
            d["shots"] = self.shots
        if self.shot_counts is not None:
            d["shot_counts"] = self.shot_counts
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EvolutionTrace":
        return cls(
            expectations=np.asarray(d["expectations"], dtype=float),
            shots=d.get("shots"),
            shot_counts=d.get("shot_counts"),
        )


def simulate_trace(
    initial: StateVector,
    params: IsingParams,
    schedule: TrotterSchedule,
    shots: int | None = None,
    seed: int | None = None,
    progress=None,
) -> EvolutionTrace:
    """Evolve and measure every snapshot.

    shots=None reads exact expectation values off the statevector; otherwise
    each slice is sampled with `shots` measurements from a stream derived
    from (seed, slice index). `progress`, if given, is called with the number
    of completed slices.
    """
    if shots is not None and seed is None:
        raise ValueError("sampled traces need a seed")
    snapshots = evolve(initial, params, schedule)
    rows = []
    counts_per_slice: list[dict[str, int]] = []
    for s, snap in enumerate(snapshots):
        if shots is None:
            rows.append(expect_all(snap))
        else:
            slice_seed = np.random.SeedSequence([int(seed), s])
            counts = sample_counts(snap, shots, slice_seed)
            counts_per_slice.append(counts)
            rows.append(
                np.array(
                    [expect_from_counts(counts, n) for n in range(params.num_sites)]
                )
            )
        if progress is not None:
            progress(s + 1)
    if shots is None:
        return EvolutionTrace(expectations=np.array(rows))
    return EvolutionTrace(
        expectations=np.array(rows), shots=shots, shot_counts=counts_per_slice
    )
