import numpy as np
import pytest

from qasa import _kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # JIT compile once so individual tests time only the math
    _kernels.warmup()


@pytest.fixture(params=["active", "numpy"])
def kernel_backend(request, monkeypatch):
    """Run a test under the selected backend and under the numpy fallback."""
    if request.param == "numpy":
        for name in ("ry", "rz", "cnot", "expect_z_all", "vqc_layers"):
            monkeypatch.setattr(_kernels, name, getattr(_kernels.numpy_backend, name))
    return request.param


def random_statevector(rng: np.random.Generator, n: int) -> np.ndarray:
    amps = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
    return amps / np.linalg.norm(amps)
