"""Layered variational circuit: encoding, forward expectations, parameter-shift grads.

One layer is RY(theta[l, i]) on every qubit followed by the open CNOT chain
(0,1), (1,2), ..., (n-2, n-1). The forward pass returns the vector of Pauli-Z
expectations. Gradients use the exact parameter-shift rule for Pauli
rotations: d<Z>/dtheta = (<Z>(theta + pi/2) - <Z>(theta - pi/2)) / 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels, qsim

# Composite angle layout used by the 6-qubit feature encoding: eight slots,
# six RY (one per qubit) plus RZ on qubits 3 and 5 (0-based).
HYBRID_SLOTS = 8
_HYBRID_RY = ((0, 0), (1, 1), (2, 2), (3, 3), (4, 5), (5, 6))  # (qubit, slot)
_HYBRID_RZ = ((3, 4), (5, 7))


@dataclass(frozen=True)
class VqcParams:
    """Rotation angles for one circuit: thetas has shape (n_layers, n_qubits)."""

    thetas: np.ndarray
    n_qubits: int
    n_layers: int
    encoding: str  # "amplitude" | "angle"

    def __post_init__(self):
        thetas = np.asarray(self.thetas, dtype=np.float64)
        if thetas.shape != (self.n_layers, self.n_qubits):
            raise ValueError(
                f"thetas shape {thetas.shape} != ({self.n_layers}, {self.n_qubits})"
            )
        if self.n_layers < 1 or self.n_qubits < 1:
            raise ValueError("need n_layers >= 1 and n_qubits >= 1")
        if not np.all(np.isfinite(thetas)):
            raise ValueError("non-finite angle in thetas")
        if self.encoding not in ("amplitude", "angle"):
            raise ValueError(f"unknown encoding {self.encoding!r}")
        thetas = thetas.copy()
        thetas.flags.writeable = False
        object.__setattr__(self, "thetas", thetas)

    def with_thetas(self, thetas: np.ndarray) -> "VqcParams":
        return VqcParams(thetas, self.n_qubits, self.n_layers, self.encoding)

    def to_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "n_layers": self.n_layers,
            "encoding": self.encoding,
            "thetas": [float(t) for t in self.thetas.ravel()],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VqcParams":
        thetas = np.asarray(d["thetas"], dtype=np.float64).reshape(
            d["n_layers"], d["n_qubits"]
        )
        return cls(thetas, d["n_qubits"], d["n_layers"], d["encoding"])


def init_params(n: int, L: int, seed: int, encoding: str = "amplitude") -> VqcParams:
    """Uniform angles in [-pi, pi), deterministic per seed."""
    rng = np.random.default_rng(seed)
    thetas = rng.uniform(-math.pi, math.pi, size=(L, n))
    return VqcParams(thetas, n, L, encoding)


def n_qubits_for_dim(d: int) -> int:
    """Qubit count for amplitude-encoding a d-dimensional input."""
    if d < 1:
        raise ValueError("input dimension must be positive")
    return max(1, math.ceil(math.log2(d)))


def encode_batch(x: np.ndarray, params: VqcParams) -> np.ndarray:
    """Encode a (B, d) batch of inputs into (B, 2**n) statevectors.

    Amplitude mode normalizes each row (zero rows are rejected). Angle mode
    accepts either one RY angle per qubit (d == n) or, for n == 6, the
    8-slot composite layout with RZ slots on qubits 3 and 5.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("expected a (batch, dim) array")
    n = params.n_qubits
    dim = 1 << n
    batch = x.shape[0]
    if params.encoding == "amplitude":
        if n_qubits_for_dim(x.shape[1]) > n:
            raise ValueError(
                f"input dim {x.shape[1]} needs more than {n} qubits"
            )
        norms = np.linalg.norm(x, axis=1)
        if np.any(norms == 0.0):
            bad = int(np.flatnonzero(norms == 0.0)[0])
            raise ValueError(f"cannot amplitude-encode zero vector at row {bad}")
        states = np.zeros((batch, dim), dtype=np.complex128)
        states[:, : x.shape[1]] = x / norms[:, np.newaxis]
        return states
    # angle encoding
    states = np.zeros((batch, dim), dtype=np.complex128)
    states[:, 0] = 1.0
    if x.shape[1] == n:
        for q in range(n):
            for b in range(batch):
                _kernels.ry(states[b : b + 1], n, q, x[b, q])
        return states
    if n == 6 and x.shape[1] == HYBRID_SLOTS:
        for b in range(batch):
            row = states[b : b + 1]
            for q, slot in _HYBRID_RY:
                _kernels.ry(row, n, q, x[b, slot])
            for q, slot in _HYBRID_RZ:
                _kernels.rz(row, n, q, x[b, slot])
        return states
    raise ValueError(
        f"angle encoding expects dim {n} (or {HYBRID_SLOTS} on 6 qubits), got {x.shape[1]}"
    )


def forward_states(states: np.ndarray, params: VqcParams) -> np.ndarray:
    """Run the variational layers on pre-encoded (B, 2**n) states; returns (B, n) <Z>."""
    work = states.copy()
    _kernels.vqc_layers(work, params.n_qubits, params.thetas)
    return _kernels.expect_z_all(work, params.n_qubits)


def vqc_forward(
    x,
    params: VqcParams,
    shots: int = 0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Expectation vector (<Z_1>, ..., <Z_n>) for one input.

    With shots > 0 each expectation is estimated from sampled measurements
    instead of computed exactly.
    """
    states = encode_batch(np.asarray(x, dtype=np.float64)[np.newaxis, :], params)
    if shots <= 0:
        return forward_states(states, params)[0]
    if rng is None:
        raise ValueError("sampled readout requires an rng")
    work = states.copy()
    _kernels.vqc_layers(work, params.n_qubits, params.thetas)
    state = qsim.Statevector(work[0], params.n_qubits)
    return np.array(
        [
            qsim.expectation_z_sampled(state, q, shots, rng)
            for q in range(params.n_qubits)
        ]
    )


def grad_states(
    states: np.ndarray, params: VqcParams, adjoints: np.ndarray
) -> np.ndarray:
    """Parameter-shift gradient contracted with per-row adjoints.

    states: (B, 2**n) pre-encoded inputs; adjoints: (B, n) weights dL/d<Z>.
    Returns the (L, n) gradient of sum_b adjoints[b] . <Z>(states[b]).
    """
    L, n = params.n_layers, params.n_qubits
    if adjoints.shape != (states.shape[0], n):
        raise ValueError("adjoint shape does not match batch/qubits")
    grad = np.zeros((L, n))
    base = np.asarray(params.thetas)
    for layer in range(L):
        for q in range(n):
            shifted = base.copy()
            shifted[layer, q] += 0.5 * math.pi
            plus = forward_states(states, params.with_thetas(shifted))
            shifted[layer, q] -= math.pi
            minus = forward_states(states, params.with_thetas(shifted))
            grad[layer, q] = float(np.sum(adjoints * (plus - minus))) * 0.5
    return grad


def parameter_shift_grad(x, params: VqcParams, loss_adjoint) -> np.ndarray:
    """(L, n) gradient of loss_adjoint . <Z>(x) with respect to every angle."""
    adj = np.asarray(loss_adjoint, dtype=np.float64)[np.newaxis, :]
    states = encode_batch(np.asarray(x, dtype=np.float64)[np.newaxis, :], params)
    return grad_states(states, params, adj)
