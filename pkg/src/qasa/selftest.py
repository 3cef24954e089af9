"""Built-in verification suites: gate oracle, gradients, attention, metrics.

Each suite checks the production code against an independent second route:
dense Kronecker-product matrices for the simulator, central finite
differences for the gradients, naive loops and hand-built exact cases for
attention and the backtest metrics. Suites return (ok, detail) so the CLI
can print one pass/fail line each.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import attention, backtest, qsim, vqc
from .labeling import LabelConfig, label_series

_I2 = np.eye(2, dtype=np.complex128)


@dataclass
class SuiteResult:
    name: str
    ok: bool
    detail: str

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        return f"[{status}] {self.name}: {self.detail}"


def _ry_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def _rz_matrix(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def _single_qubit_full(mat: np.ndarray, qubit: int, n: int) -> np.ndarray:
    """I x ... x mat x ... x I with qubit 0 as the leftmost (most significant) factor."""
    full = np.eye(1, dtype=np.complex128)
    for q in range(n):
        full = np.kron(full, mat if q == qubit else _I2)
    return full


def _cnot_full(control: int, target: int, n: int) -> np.ndarray:
    dim = 1 << n
    full = np.zeros((dim, dim), dtype=np.complex128)
    for j in range(dim):
        if (j >> (n - 1 - control)) & 1:
            full[j ^ (1 << (n - 1 - target)), j] = 1.0
        else:
            full[j, j] = 1.0
    return full


def oracle_apply(state: np.ndarray, ops: list[qsim.GateOp], n: int) -> np.ndarray:
    """Matrix-chain reference: build each gate's full matrix and multiply."""
    out = state.astype(np.complex128).copy()
    for op in ops:
        if op.kind == "ry":
            full = _single_qubit_full(_ry_matrix(op.angle), op.target, n)
        elif op.kind == "rz":
            full = _single_qubit_full(_rz_matrix(op.angle), op.target, n)
        else:
            full = _cnot_full(op.control, op.target, n)
        out = full @ out
    return out


def random_circuit(rng: np.random.Generator, n: int, depth: int) -> list[qsim.GateOp]:
    ops = []
    for _ in range(depth):
        kind = rng.choice(["ry", "rz", "cnot"]) if n > 1 else rng.choice(["ry", "rz"])
        if kind == "cnot":
            control, target = rng.choice(n, size=2, replace=False)
            ops.append(qsim.GateOp("cnot", int(target), control=int(control)))
        else:
            ops.append(qsim.GateOp(kind, int(rng.integers(n)),
                                   angle=float(rng.uniform(-2 * math.pi, 2 * math.pi))))
    return ops


def random_state(rng: np.random.Generator, n: int) -> qsim.Statevector:
    amps = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
    return qsim.Statevector(amps / np.linalg.norm(amps), n)


def suite_gates(
    n_trials: int = 1000, max_qubits: int = 3, max_depth: int = 30, seed: int = 1234,
    atol: float = 1e-10,
) -> SuiteResult:
    """Simulator vs dense matrix-chain oracle on random circuits."""
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(n_trials):
        n = int(rng.integers(1, max_qubits + 1))
        depth = int(rng.integers(1, max_depth + 1))
        state = random_state(rng, n)
        ops = random_circuit(rng, n, depth)
        got = qsim.run_circuit(state, ops).amplitudes
        want = oracle_apply(state.amplitudes, ops, n)
        worst = max(worst, float(np.max(np.abs(got - want))))
        if worst > atol:
            return SuiteResult(
                "gate-oracle", False,
                f"amplitude error {worst:.3e} exceeds {atol:g}"
            )
    elapsed = time.perf_counter() - start
    return SuiteResult(
        "gate-oracle", True,
        f"{n_trials} circuits, max amplitude error {worst:.3e}, {elapsed:.2f}s"
    )


def suite_gradients(
    n_draws: int = 100, max_qubits: int = 4, max_layers: int = 3, seed: int = 99,
    h: float = 1e-5, atol: float = 1e-6,
) -> SuiteResult:
    """Parameter-shift of every <Z_i> vs central finite differences."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_draws):
        n = int(rng.integers(1, max_qubits + 1))
        L = int(rng.integers(1, max_layers + 1))
        encoding = "angle" if rng.random() < 0.5 else "amplitude"
        params = vqc.VqcParams(rng.uniform(-math.pi, math.pi, (L, n)), n, L, encoding)
        if encoding == "angle":
            x = rng.uniform(-math.pi, math.pi, n)
        else:
            x = rng.standard_normal(1 << n)
            while np.linalg.norm(x) == 0:
                x = rng.standard_normal(1 << n)
        shift = np.stack([
            vqc.parameter_shift_grad(x, params, np.eye(n)[k]) for k in range(n)
        ])  # (n, L, n)
        base = np.asarray(params.thetas)
        for layer in range(L):
            for i in range(n):
                up, down = base.copy(), base.copy()
                up[layer, i] += h
                down[layer, i] -= h
                fd = (
                    vqc.vqc_forward(x, params.with_thetas(up))
                    - vqc.vqc_forward(x, params.with_thetas(down))
                ) / (2 * h)
                worst = max(worst, float(np.max(np.abs(shift[:, layer, i] - fd))))
    # analytic case: <Z> after RY(theta)|0> is cos(theta), gradient -sin(theta)
    theta = 0.8137
    params = vqc.VqcParams(np.array([[theta]]), 1, 1, "angle")
    grad = vqc.parameter_shift_grad(np.array([0.0]), params, np.array([1.0]))[0, 0]
    analytic_err = abs(grad + math.sin(theta))
    ok = worst <= atol and analytic_err <= 1e-10
    return SuiteResult(
        "gradient-fd", ok,
        f"{n_draws} draws, max |shift - fd| {worst:.3e}, analytic err {analytic_err:.1e}"
    )


def suite_attention(n_trials: int = 10000, seed: int = 7, atol: float = 1e-12) -> SuiteResult:
    """Weight-row normalization, T=1 identity, identical-key averaging."""
    rng = np.random.default_rng(seed)
    combos = [(t, n) for t in range(1, 9) for n in range(1, 7)]
    per_combo = max(1, n_trials // len(combos))
    total = 0
    worst_sum, worst_mean = 0.0, 0.0
    for t, n in combos:
        q = rng.uniform(-1, 1, (per_combo, t, n))
        k = rng.uniform(-1, 1, (per_combo, t, n))
        v = rng.uniform(-1, 1, (per_combo, t, n))
        w = attention.attention_weights(q, k)
        worst_sum = max(worst_sum, float(np.max(np.abs(w.sum(axis=-1) - 1.0))))
        if w.min() < 0:
            return SuiteResult("attention", False, "negative attention weight")
        total += per_combo
        if t == 1:
            out = w @ v
            if not np.array_equal(out, v):
                return SuiteResult("attention", False, "T=1 did not return V exactly")
        # identical keys -> uniform weights -> column means of V
        k_same = np.repeat(k[:, :1, :], t, axis=1)
        out = attention.attention_weights(q, k_same) @ v
        want = np.repeat(v.mean(axis=1, keepdims=True), t, axis=1)
        worst_mean = max(worst_mean, float(np.max(np.abs(out - want))))
    ok = worst_sum <= atol and worst_mean <= atol
    return SuiteResult(
        "attention", ok,
        f"{total} draws, row-sum err {worst_sum:.2e}, identical-key err {worst_mean:.2e}"
    )


def suite_metrics() -> SuiteResult:
    """Exact backtest-metric cases plus LP dynamics, fees, cooldown, label boundary."""
    checks: list[tuple[str, bool]] = []

    checks.append(("maxdd [1,2,1] == -0.5", backtest.max_drawdown([1.0, 2.0, 1.0]) == -0.5))
    checks.append(("maxdd monotone rising == 0", backtest.max_drawdown([1.0, 1.5, 2.0]) == 0.0))
    # dyadic alternating curve: returns exactly +0.5, -0.5, mean exactly 0
    eq = [1.0, 1.5, 0.75, 1.125, 0.5625]
    checks.append(("sharpe alternating == 0", backtest.sharpe(eq) == 0.0))
    checks.append(("calmar zero return", backtest.calmar(0.0, -0.1, 252) == 0.0))
    checks.append((
        "calmar 10% / -10% over a year == 1",
        abs(backtest.calmar(0.10, -0.10, 252) - 1.0) < 1e-12,
    ))

    prices = np.linspace(100.0, 400.0, 40)
    prices[-1] = 400.0
    report = backtest.simulate(prices, np.zeros(40), backtest.BacktestConfig())
    checks.append((
        "zero-signal LP: price x4 -> value x2",
        abs(report.equity[-1] - 2.0) < 1e-12 and len(report.trades) == 0,
    ))

    rng = np.random.default_rng(3)
    walk = 100.0 * np.exp(np.cumsum(rng.normal(0, 0.02, 60)))
    preds = rng.uniform(0, 1, 60)
    rets = []
    for fee in (0.0, 10.0, 30.0, 100.0):
        rep = backtest.simulate(walk, preds, backtest.BacktestConfig(fee_bps=fee))
        rets.append(rep.total_return)
    checks.append(("fee monotonicity", all(a >= b for a, b in zip(rets, rets[1:]))))

    cooldown = 3
    rep = backtest.simulate(
        walk, np.ones(60), backtest.BacktestConfig(cooldown_bars=cooldown)
    )
    gaps = np.diff([t.bar for t in rep.trades])
    checks.append(("cooldown gaps respected", bool(np.all(gaps >= cooldown))))

    # strict-inequality boundary: deviation of exactly tau labels 0
    tau = 0.02
    hi = 64.0 * (1.0 + tau)
    prices2 = np.array([64.0 - (hi - 64.0), hi])
    labels = label_series(prices2, LabelConfig(ma_window=2, tau=tau))
    boundary_zero = labels[1] == 0.0
    labels_above = label_series(
        np.array([prices2[0], np.nextafter(hi, np.inf)]),
        LabelConfig(ma_window=2, tau=tau),
    )
    checks.append(("label boundary: ratio == tau -> 0", bool(boundary_zero)))
    checks.append(("label boundary: just above tau -> 1", labels_above[1] == 1.0))

    failed = [name for name, ok in checks if not ok]
    if failed:
        return SuiteResult("metric-oracle", False, "failed: " + "; ".join(failed))
    return SuiteResult("metric-oracle", True, f"{len(checks)} exact cases")


def run_all(fast: bool = False) -> list[SuiteResult]:
    """All four suites; fast mode trims trial counts for quick smoke runs."""
    if fast:
        return [
            suite_gates(n_trials=200),
            suite_gradients(n_draws=25),
            suite_attention(n_trials=2000),
            suite_metrics(),
        ]
    return [
        suite_gates(),
        suite_gradients(),
        suite_attention(),
        suite_metrics(),
    ]
