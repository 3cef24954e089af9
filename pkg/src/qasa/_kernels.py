"""Statevector gate kernels: numba-jitted loops with a vectorized numpy fallback.

All kernels operate in place on a batch of statevectors shaped (B, 2**n),
dtype complex128. Qubit 0 is the most significant bit of the basis index,
so qubit q owns bit position (n - 1 - q) and has block size
``half = dim >> (q + 1)``.

Backend selection: the env var ``QASA_NUMBA`` picks the path at import time.
Unset or "1" uses the numba kernels when numba is importable; "0"/"false"/"no"
forces the pure-numpy fallback. Both backends are always importable as
``numpy_backend`` / ``numba_backend`` so tests and benchmarks can compare them
directly.
"""

from __future__ import annotations

import logging
import os
from types import SimpleNamespace

import numpy as np

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# numpy backend (vectorized over the batch and the untouched qubits)
# ---------------------------------------------------------------------------

def _np_ry(states: np.ndarray, n: int, q: int, theta: float) -> None:
    half = states.shape[1] >> (q + 1)
    c, s = np.cos(0.5 * theta), np.sin(0.5 * theta)
    v = states.reshape(states.shape[0], -1, 2, half)
    a0 = v[:, :, 0, :].copy()
    a1 = v[:, :, 1, :]
    v[:, :, 0, :] = c * a0 - s * a1
    v[:, :, 1, :] = s * a0 + c * a1


def _np_rz(states: np.ndarray, n: int, q: int, theta: float) -> None:
    half = states.shape[1] >> (q + 1)
    v = states.reshape(states.shape[0], -1, 2, half)
    v[:, :, 0, :] *= np.exp(-0.5j * theta)
    v[:, :, 1, :] *= np.exp(0.5j * theta)


def _np_cnot(states: np.ndarray, n: int, control: int, target: int) -> None:
    dim = states.shape[1]
    cmask = dim >> (control + 1)
    tmask = dim >> (target + 1)
    idx = np.arange(dim)
    sel = idx[(idx & cmask) != 0]
    states[:, sel] = states[:, sel ^ tmask]


def _np_expect_z_all(states: np.ndarray, n: int) -> np.ndarray:
    probs = (states.real ** 2 + states.imag ** 2)
    out = np.empty((states.shape[0], n))
    for q in range(n):
        half = states.shape[1] >> (q + 1)
        v = probs.reshape(states.shape[0], -1, 2, half)
        p1 = v[:, :, 1, :].sum(axis=(1, 2))
        out[:, q] = 1.0 - 2.0 * p1
    return out


def _np_vqc_layers(states: np.ndarray, n: int, thetas: np.ndarray) -> None:
    for layer in range(thetas.shape[0]):
        for q in range(n):
            _np_ry(states, n, q, thetas[layer, q])
        for q in range(n - 1):
            _np_cnot(states, n, q, q + 1)


numpy_backend = SimpleNamespace(
    name="numpy",
    ry=_np_ry,
    rz=_np_rz,
    cnot=_np_cnot,
    expect_z_all=_np_expect_z_all,
    vqc_layers=_np_vqc_layers,
)


# ---------------------------------------------------------------------------
# numba backend (explicit loops, one JIT call per gate / per circuit)
# ---------------------------------------------------------------------------

def _make_numba_backend() -> SimpleNamespace | None:
    try:
        from numba import njit
    except ImportError:
        return None

    jit = njit(cache=True, nogil=True)

    @jit
    def nb_ry(states, n, q, theta):
        dim = states.shape[1]
        half = dim >> (q + 1)
        period = half << 1
        c = np.cos(0.5 * theta)
        s = np.sin(0.5 * theta)
        for b in range(states.shape[0]):
            for start in range(0, dim, period):
                for k in range(start, start + half):
                    a0 = states[b, k]
                    a1 = states[b, k + half]
                    states[b, k] = c * a0 - s * a1
                    states[b, k + half] = s * a0 + c * a1

    @jit
    def nb_rz(states, n, q, theta):
        dim = states.shape[1]
        half = dim >> (q + 1)
        period = half << 1
        ph0 = np.exp(-0.5j * theta)
        ph1 = np.exp(0.5j * theta)
        for b in range(states.shape[0]):
            for start in range(0, dim, period):
                for k in range(start, start + half):
                    states[b, k] = ph0 * states[b, k]
                    states[b, k + half] = ph1 * states[b, k + half]

    @jit
    def nb_cnot(states, n, control, target):
        dim = states.shape[1]
        cmask = dim >> (control + 1)
        tmask = dim >> (target + 1)
        for b in range(states.shape[0]):
            for i in range(dim):
                if (i & cmask) != 0 and (i & tmask) == 0:
                    j = i | tmask
                    tmp = states[b, i]
                    states[b, i] = states[b, j]
                    states[b, j] = tmp

    @jit
    def nb_expect_z_all(states, n):
        dim = states.shape[1]
        out = np.zeros((states.shape[0], n))
        for b in range(states.shape[0]):
            for i in range(dim):
                a = states[b, i]
                p = a.real * a.real + a.imag * a.imag
                for q in range(n):
                    if (i >> (n - 1 - q)) & 1:
                        out[b, q] -= p
                    else:
                        out[b, q] += p
        return out

    @jit
    def nb_vqc_layers(states, n, thetas):
        for layer in range(thetas.shape[0]):
            for q in range(n):
                nb_ry(states, n, q, thetas[layer, q])
            for q in range(n - 1):
                nb_cnot(states, n, q, q + 1)

    return SimpleNamespace(
        name="numba",
        ry=nb_ry,
        rz=nb_rz,
        cnot=nb_cnot,
        expect_z_all=nb_expect_z_all,
        vqc_layers=nb_vqc_layers,
    )


numba_backend = _make_numba_backend()

_flag = os.environ.get("QASA_NUMBA", "1").strip().lower()
_want_numba = _flag not in ("0", "false", "no", "off")
if _want_numba and numba_backend is None:
    logger.info("numba unavailable, falling back to numpy kernels")

_active = numba_backend if (_want_numba and numba_backend is not None) else numpy_backend

ry = _active.ry
rz = _active.rz
cnot = _active.cnot
expect_z_all = _active.expect_z_all
vqc_layers = _active.vqc_layers


def active_backend() -> str:
    """Name of the kernel backend selected at import time."""
    return _active.name


def warmup() -> None:
    """Trigger JIT compilation so timed sections measure steady-state cost."""
    states = np.zeros((2, 8), dtype=np.complex128)
    states[:, 0] = 1.0
    ry(states, 3, 0, 0.3)
    rz(states, 3, 1, 0.2)
    cnot(states, 3, 0, 1)
    vqc_layers(states, 3, np.zeros((1, 3)))
    expect_z_all(states, 3)
