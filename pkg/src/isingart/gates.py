"""Statevector register and the rotation-gate kernels acting on it.

Basis convention is little-endian: bit n of the integer basis index holds
qubit n. Bitstrings render most-significant qubit first (q_{N-1}..q_0), so
the string "0100" on four qubits means qubit 2 is set (index 4).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "StateVector",
    "apply_rx",
    "apply_ry",
    "apply_rz",
    "apply_rzz",
    "prepare_ry_product",
    "expect_obs",
    "expect_all",
    "sample_counts",
    "expect_from_counts",
]


@dataclass
class StateVector:
    """2^N complex amplitudes of an N-qubit register."""

    num_qubits: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.num_qubits < 1:
            raise ValueError(f"need at least one qubit, got {self.num_qubits}")
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (2**self.num_qubits,):
            raise ValueError(
                f"amplitude vector has shape {amps.shape}, "
                f"expected ({2**self.num_qubits},) for {self.num_qubits} qubits"
            )
        self.amplitudes = amps

    @classmethod
    def zero(cls, num_qubits: int) -> "StateVector":
        """All qubits in |0>."""
        amps = np.zeros(2**num_qubits, dtype=np.complex128)
        amps[0] = 1.0
        return cls(num_qubits, amps)

    @classmethod
    def from_bitstring(cls, bits: str) -> "StateVector":
        """Basis state from a q_{N-1}..q_0 string, e.g. "0100"."""
        if not bits or set(bits) - {"0", "1"}:
            raise ValueError(f"not a bitstring: {bits!r}")
        amps = np.zeros(2 ** len(bits), dtype=np.complex128)
        amps[int(bits, 2)] = 1.0
        return cls(len(bits), amps)

    def copy(self) -> "StateVector":
        return StateVector(self.num_qubits, self.amplitudes.copy())

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm_sq(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))


def _check_qubit(qubit: int, num_qubits: int) -> None:
    if not 0 <= qubit < num_qubits:
        raise IndexError(f"qubit {qubit} out of range for {num_qubits}-qubit state")


def _rot_matrix(theta: float, pauli: str) -> np.ndarray:
    """exp(-i theta/2 P) for P in {X, Y}."""
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    if pauli == "x":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def _apply_1q_inplace(amps: np.ndarray, qubit: int, u: np.ndarray) -> None:
    # Axis split: index = high * 2^(q+1) + bit * 2^q + low.
    view = amps.reshape(-1, 2, 1 << qubit)
    a0 = view[:, 0, :].copy()
    a1 = view[:, 1, :]
    view[:, 0, :] = u[0, 0] * a0 + u[0, 1] * a1
    view[:, 1, :] = u[1, 0] * a0 + u[1, 1] * a1


def _rz_inplace(amps: np.ndarray, qubit: int, theta: float) -> None:
    view = amps.reshape(-1, 2, 1 << qubit)
    view[:, 0, :] *= np.exp(-0.5j * theta)
    view[:, 1, :] *= np.exp(0.5j * theta)


def _rzz_inplace(amps: np.ndarray, qubit_a: int, qubit_b: int, theta: float) -> None:
    lo, hi = sorted((qubit_a, qubit_b))
    # Axes: (above hi, bit hi, between, bit lo, below lo).
    view = amps.reshape(-1, 2, 1 << (hi - lo - 1), 2, 1 << lo)
    same, diff = np.exp(-0.5j * theta), np.exp(0.5j * theta)
    view[:, 0, :, 0, :] *= same
    view[:, 1, :, 1, :] *= same
    view[:, 0, :, 1, :] *= diff
    view[:, 1, :, 0, :] *= diff


def apply_rx(state: StateVector, qubit: int, theta: float) -> StateVector:
    """Rotate one qubit about X: exp(-i theta/2 X)."""
    _check_qubit(qubit, state.num_qubits)
    out = state.amplitudes.copy()
    _apply_1q_inplace(out, qubit, _rot_matrix(theta, "x"))
    return StateVector(state.num_qubits, out)


def apply_ry(state: StateVector, qubit: int, theta: float) -> StateVector:
    """Rotate one qubit about Y: exp(-i theta/2 Y)."""
    _check_qubit(qubit, state.num_qubits)
    out = state.amplitudes.copy()
    _apply_1q_inplace(out, qubit, _rot_matrix(theta, "y"))
    return StateVector(state.num_qubits, out)


def apply_rz(state: StateVector, qubit: int, theta: float) -> StateVector:
    """Diagonal phase exp(-i theta/2 Z): e^{-i theta/2} on bit=0, e^{+i theta/2} on bit=1."""
    _check_qubit(qubit, state.num_qubits)
    out = state.amplitudes.copy()
    _rz_inplace(out, qubit, theta)
    return StateVector(state.num_qubits, out)


def apply_rzz(state: StateVector, qubit_a: int, qubit_b: int, theta: float) -> StateVector:
    """Two-qubit phase exp(-i theta/2 ZZ): e^{-i theta/2} where bits agree, else e^{+i theta/2}."""
    _check_qubit(qubit_a, state.num_qubits)
    _check_qubit(qubit_b, state.num_qubits)
    if qubit_a == qubit_b:
        raise ValueError(f"rzz needs two distinct qubits, got ({qubit_a}, {qubit_b})")
    out = state.amplitudes.copy()
    _rzz_inplace(out, qubit_a, qubit_b, theta)
    return StateVector(state.num_qubits, out)


def prepare_ry_product(num_qubits: int, probs) -> StateVector:
    """Product state with P(qubit n = 1) = probs[n], via theta_n = 2*arcsin(sqrt(p))."""
    probs = np.asarray(probs, dtype=float)
    if probs.shape != (num_qubits,):
        raise ValueError(f"need {num_qubits} probabilities, got shape {probs.shape}")
    if np.any((probs < 0) | (probs > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    state = StateVector.zero(num_qubits)
    for n, p in enumerate(probs):
        _apply_1q_inplace(
            state.amplitudes, n, _rot_matrix(2 * math.asin(math.sqrt(p)), "y")
        )
    return state


def expect_obs(state: StateVector, site: int) -> float:
    """P(qubit at `site` reads 1): expectation of (I - Z_site)/2."""
    _check_qubit(site, state.num_qubits)
    probs = state.probabilities().reshape(-1, 2, 1 << site)
    return float(min(max(probs[:, 1, :].sum(), 0.0), 1.0))


def expect_all(state: StateVector) -> np.ndarray:
    """expect_obs for every site, as a length-N array."""
    return np.array([expect_obs(state, n) for n in range(state.num_qubits)])


def sample_counts(state: StateVector, shots: int, seed: int) -> dict[str, int]:
    """Histogram of `shots` independent basis-state measurements.

    Deterministic for a fixed seed; keys are q_{N-1}..q_0 bitstrings and
    only outcomes that occurred appear.
    """
    if shots < 1:
        raise ValueError(f"shots must be positive, got {shots}")
    probs = state.probabilities()
    probs = probs / probs.sum()
    rng = np.random.default_rng(seed)
    hist = rng.multinomial(shots, probs)
    width = state.num_qubits
    return {format(i, f"0{width}b"): int(c) for i, c in enumerate(hist) if c > 0}


def expect_from_counts(counts: dict[str, int], site: int) -> float:
    """Fraction of shots with bit `site` = 1; the shot-based estimate of expect_obs."""
    if not counts:
        raise ValueError("empty counts")
    total = sum(counts.values())
    ones = sum(c for bits, c in counts.items() if bits[-1 - site] == "1")
    return ones / total
