"""Dense statevector simulator: state prep, RY/RZ/CNOT gates, Pauli-Z readout.

Qubit indices are 0-based here; qubit 0 is the most significant bit of the
basis index, so ``|10>`` means qubit 0 set and qubit 1 clear. Expectations are
exact by default; sampled estimation is available for shot-noise studies.
Statevectors are value types: every gate returns a new state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels

NORM_ATOL = 1e-10


@dataclass(frozen=True)
class Statevector:
    """Complex amplitude vector over n_qubits, unit norm."""

    amplitudes: np.ndarray
    n_qubits: int

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.ndim != 1 or amps.shape[0] != (1 << self.n_qubits):
            raise ValueError(
                f"amplitude vector of length {amps.shape} does not match "
                f"{self.n_qubits} qubits"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_ATOL:
            raise ValueError(f"statevector norm {norm!r} is not 1")
        amps = amps.copy()
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]


@dataclass(frozen=True)
class GateOp:
    """One gate: kind in {"ry", "rz", "cnot"}; angle for rotations, control for cnot."""

    kind: str
    target: int
    control: int | None = None
    angle: float | None = None

    def __post_init__(self):
        if self.kind not in ("ry", "rz", "cnot"):
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.kind == "cnot":
            if self.control is None:
                raise ValueError("cnot requires a control qubit")
            if self.control == self.target:
                raise ValueError("cnot control and target must differ")
        elif self.angle is None:
            raise ValueError(f"{self.kind} requires an angle")


def zero_state(n_qubits: int) -> Statevector:
    """|0...0> on n_qubits."""
    if n_qubits < 1:
        raise ValueError("need at least one qubit")
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return Statevector(amps, n_qubits)


def amplitude_encode(x) -> Statevector:
    """Embed a real vector as normalized amplitudes, zero-padding to 2**ceil(log2 d).

    Raises ValueError on a zero vector (the direction is undefined).
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("cannot encode empty vector")
    norm = np.linalg.norm(x)
    if norm == 0.0:
        raise ValueError("cannot amplitude-encode a zero vector")
    n = max(1, math.ceil(math.log2(x.size)))
    amps = np.zeros(1 << n, dtype=np.complex128)
    amps[: x.size] = x / norm
    return Statevector(amps, n)


def _check_qubit(state: Statevector, qubit: int) -> None:
    if not 0 <= qubit < state.n_qubits:
        raise ValueError(f"qubit {qubit} out of range for {state.n_qubits} qubits")


def _apply(state: Statevector, fn, *args) -> Statevector:
    work = state.amplitudes[np.newaxis, :].copy()
    fn(work, state.n_qubits, *args)
    return Statevector(work[0], state.n_qubits)


def apply_ry(state: Statevector, qubit: int, theta: float) -> Statevector:
    """RY(theta) = [[cos t/2, -sin t/2], [sin t/2, cos t/2]] on one wire."""
    _check_qubit(state, qubit)
    return _apply(state, _kernels.ry, qubit, float(theta))


def apply_rz(state: Statevector, qubit: int, theta: float) -> Statevector:
    """RZ(theta) = diag(exp(-i t/2), exp(+i t/2)) on one wire."""
    _check_qubit(state, qubit)
    return _apply(state, _kernels.rz, qubit, float(theta))


def apply_cnot(state: Statevector, control: int, target: int) -> Statevector:
    """Flip the target bit on basis states where the control bit is set."""
    _check_qubit(state, control)
    _check_qubit(state, target)
    if control == target:
        raise ValueError("cnot control and target must differ")
    return _apply(state, _kernels.cnot, control, target)


def expectation_z(state: Statevector, qubit: int) -> float:
    """<Z> on one qubit: P(bit=0) - P(bit=1), in [-1, 1]."""
    _check_qubit(state, qubit)
    ez = _kernels.expect_z_all(state.amplitudes[np.newaxis, :], state.n_qubits)
    return float(ez[0, qubit])


def expectation_z_all(state: Statevector) -> np.ndarray:
    """<Z_i> for every qubit, as a float vector."""
    return _kernels.expect_z_all(
        state.amplitudes[np.newaxis, :], state.n_qubits
    )[0].copy()


def expectation_z_sampled(
    state: Statevector, qubit: int, shots: int, rng: np.random.Generator
) -> float:
    """Shot-noise estimate of <Z> from `shots` basis-state samples."""
    _check_qubit(state, qubit)
    if shots < 1:
        raise ValueError("shots must be positive")
    probs = np.abs(state.amplitudes) ** 2
    probs = probs / probs.sum()
    draws = rng.choice(state.dim, size=shots, p=probs)
    bits = (draws >> (state.n_qubits - 1 - qubit)) & 1
    return float(1.0 - 2.0 * bits.mean())


def run_circuit(state: Statevector, ops: list[GateOp]) -> Statevector:
    """Apply gates in sequence. An empty list returns the input state."""
    work = state.amplitudes[np.newaxis, :].copy()
    n = state.n_qubits
    for op in ops:
        if not 0 <= op.target < n or (op.control is not None and not 0 <= op.control < n):
            raise ValueError(f"gate {op} out of range for {n} qubits")
        if op.kind == "ry":
            _kernels.ry(work, n, op.target, float(op.angle))
        elif op.kind == "rz":
            _kernels.rz(work, n, op.target, float(op.angle))
        else:
            _kernels.cnot(work, n, op.control, op.target)
    return Statevector(work[0], n)
