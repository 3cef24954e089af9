"""Benchmark the statevector kernels: numba backend vs pure-numpy fallback.

Times the operations that dominate training: the fused variational-layer
kernel, Pauli-Z readout, and a full batched forward pass at both model sizes
(sequence: 3 qubits, hybrid: 6 qubits). Run with:

    python benchmarks/bench_kernels.py

Force the fallback for a single run with QASA_NUMBA=0 (this script times both
backends explicitly regardless of the env flag).
"""

from __future__ import annotations

import time

import numpy as np

from qasa._kernels import numba_backend, numpy_backend


def random_states(rng, batch, n):
    dim = 1 << n
    amps = rng.standard_normal((batch, dim)) + 1j * rng.standard_normal((batch, dim))
    return amps / np.linalg.norm(amps, axis=1, keepdims=True)


def time_fn(fn, repeats=30):
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_case(backend, rng, batch, n, layers):
    thetas = rng.uniform(-np.pi, np.pi, (layers, n))
    base = random_states(rng, batch, n)

    def layers_only():
        work = base.copy()
        backend.vqc_layers(work, n, thetas)

    def forward():
        work = base.copy()
        backend.vqc_layers(work, n, thetas)
        backend.expect_z_all(work, n)

    if backend.name == "numba":  # compile before timing
        layers_only()
        forward()
    return time_fn(layers_only), time_fn(forward)


def main():
    rng = np.random.default_rng(0)
    cases = [
        ("sequence W=8", 128, 3, 2),
        ("hybrid 6q", 128, 6, 2),
        ("hybrid 6q big batch", 1024, 6, 2),
    ]
    backends = [numpy_backend] + ([numba_backend] if numba_backend else [])
    print(f"{'case':<22} {'batch':>6} {'backend':>8} {'layers':>12} {'forward':>12} {'speedup':>8}")
    for label, batch, n, layers in cases:
        baseline = None
        for backend in backends:
            t_layers, t_forward = bench_case(backend, rng, batch, n, layers)
            if backend.name == "numpy":
                baseline = t_forward
            speedup = "" if baseline is None else f"{baseline / t_forward:6.1f}x"
            print(
                f"{label:<22} {batch:>6} {backend.name:>8} "
                f"{t_layers * 1e6:>10.1f}us {t_forward * 1e6:>10.1f}us {speedup:>8}"
            )


if __name__ == "__main__":
    main()
