"""Quantum-attention rebalance detector: VQC-generated Q/K/V, classical softmax.

Three independent circuits map each token to query/key/value expectation
vectors; classical scaled dot-product attention mixes the value rows; the
mean-pooled output feeds an affine head with sigmoid output, the rebalance
probability. Two variants:

  sequence - tokens are sliding windows of log-returns, amplitude encoded;
  hybrid   - tokens are per-bar engineered-feature angle vectors on 6 qubits.

A prediction at bar t attends over the last `window` tokens ending at t.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import _kernels, qsim, vqc
from .featuremap import N_CHANNELS, MinMaxScaler
from .vqc import VqcParams

VARIANTS = ("sequence", "hybrid")


@dataclass(frozen=True)
class TokenBatch:
    """T tokens of dimension d, plus where they came from."""

    tokens: np.ndarray
    origin: str  # "price-window" | "engineered-features"

    def __post_init__(self):
        tok = np.asarray(self.tokens, dtype=np.float64)
        if tok.ndim != 2 or tok.shape[0] < 1:
            raise ValueError("tokens must be a (T, d) matrix with T >= 1")
        if not np.all(np.isfinite(tok)):
            raise ValueError("non-finite token entry")
        tok = tok.copy()
        tok.flags.writeable = False
        object.__setattr__(self, "tokens", tok)


@dataclass(frozen=True)
class QasaModel:
    """Q/K/V circuits plus the shallow sigmoid head."""

    vqc_q: VqcParams
    vqc_k: VqcParams
    vqc_v: VqcParams
    head_w: np.ndarray
    head_b: float
    variant: str
    window: int
    scaler: MinMaxScaler | None = None  # hybrid only

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        shapes = {
            (p.n_qubits, p.n_layers, p.encoding)
            for p in (self.vqc_q, self.vqc_k, self.vqc_v)
        }
        if len(shapes) != 1:
            raise ValueError("Q/K/V circuits must share (n_qubits, n_layers, encoding)")
        w = np.asarray(self.head_w, dtype=np.float64).copy()
        if w.shape != (self.vqc_q.n_qubits,):
            raise ValueError("head input dim must equal n_qubits")
        w.flags.writeable = False
        object.__setattr__(self, "head_w", w)
        if self.window < 1:
            raise ValueError("window must be >= 1")

    @property
    def n_qubits(self) -> int:
        return self.vqc_q.n_qubits

    def with_params(
        self,
        thetas_q: np.ndarray,
        thetas_k: np.ndarray,
        thetas_v: np.ndarray,
        head_w: np.ndarray,
        head_b: float,
    ) -> "QasaModel":
        return replace(
            self,
            vqc_q=self.vqc_q.with_thetas(thetas_q),
            vqc_k=self.vqc_k.with_thetas(thetas_k),
            vqc_v=self.vqc_v.with_thetas(thetas_v),
            head_w=head_w,
            head_b=float(head_b),
        )

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "window": self.window,
            "vqc_q": self.vqc_q.to_dict(),
            "vqc_k": self.vqc_k.to_dict(),
            "vqc_v": self.vqc_v.to_dict(),
            "head_w": [float(v) for v in self.head_w],
            "head_b": float(self.head_b),
            "scaler": None if self.scaler is None else self.scaler.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QasaModel":
        return cls(
            vqc_q=VqcParams.from_dict(d["vqc_q"]),
            vqc_k=VqcParams.from_dict(d["vqc_k"]),
            vqc_v=VqcParams.from_dict(d["vqc_v"]),
            head_w=np.asarray(d["head_w"], dtype=np.float64),
            head_b=float(d["head_b"]),
            variant=d["variant"],
            window=int(d["window"]),
            scaler=None if d.get("scaler") is None else MinMaxScaler.from_dict(d["scaler"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "QasaModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def new_model(
    variant: str,
    window: int = 8,
    n_layers: int = 2,
    seed: int = 0,
    scaler: MinMaxScaler | None = None,
) -> QasaModel:
    """Seeded model: angles uniform in [-pi, pi), small-normal head weights."""
    if variant == "sequence":
        n = vqc.n_qubits_for_dim(window)
        encoding = "amplitude"
    elif variant == "hybrid":
        n = 6
        encoding = "angle"
    else:
        raise ValueError(f"unknown variant {variant!r}")
    rng = np.random.default_rng(seed)
    params = [
        VqcParams(rng.uniform(-math.pi, math.pi, size=(n_layers, n)), n, n_layers, encoding)
        for _ in range(3)
    ]
    head_w = 0.1 * rng.standard_normal(n)
    return QasaModel(params[0], params[1], params[2], head_w, 0.0, variant, window,
                     scaler=scaler)


def make_tokens_sequence(prices: np.ndarray, window: int, stride: int = 1) -> TokenBatch:
    """Sliding windows of log-returns: token j holds the W returns ending at bar j+W."""
    p = np.asarray(prices, dtype=np.float64)
    if len(p) < window + 1:
        raise ValueError(f"need at least {window + 1} prices for window {window}")
    r = np.diff(np.log(p))
    windows = np.lib.stride_tricks.sliding_window_view(r, window)[::stride]
    return TokenBatch(windows, origin="price-window")


def softmax_rows(scores: np.ndarray) -> np.ndarray:
    """Row-wise softmax, max-shifted for stability."""
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def attention_weights(q: np.ndarray, k: np.ndarray) -> np.ndarray:
    """softmax(Q K^T / sqrt(d_v)) with d_v the value dimension."""
    d_v = q.shape[-1]
    scores = (q @ np.swapaxes(k, -1, -2)) / math.sqrt(d_v)
    return softmax_rows(scores)


def attention(q: np.ndarray, k: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Scaled dot-product attention output; every weight row sums to 1."""
    if q.shape != k.shape or q.shape != v.shape:
        raise ValueError(f"Q/K/V shapes differ: {q.shape}, {k.shape}, {v.shape}")
    return attention_weights(q, k) @ v


def qkv(tokens: TokenBatch, model: QasaModel) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-token expectation vectors from the three circuits: (T, n) each."""
    states = vqc.encode_batch(tokens.tokens, model.vqc_q)
    return (
        vqc.forward_states(states, model.vqc_q),
        vqc.forward_states(states, model.vqc_k),
        vqc.forward_states(states, model.vqc_v),
    )


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def predict_states(states: np.ndarray, model: QasaModel) -> float:
    """Probability from pre-encoded token states (T, 2**n)."""
    q = vqc.forward_states(states, model.vqc_q)
    k = vqc.forward_states(states, model.vqc_k)
    v = vqc.forward_states(states, model.vqc_v)
    pooled = attention(q, k, v).mean(axis=0)
    return _sigmoid(float(pooled @ model.head_w + model.head_b))


def forward(tokens: TokenBatch | np.ndarray, model: QasaModel) -> float:
    """P(rebalance) for one token window."""
    tok = tokens.tokens if isinstance(tokens, TokenBatch) else np.asarray(tokens, dtype=np.float64)
    states = vqc.encode_batch(tok, model.vqc_q)
    return predict_states(states, model)


def forward_hybrid(angle_rows: np.ndarray, model: QasaModel) -> float:
    """P(rebalance) from a (T, 8) matrix of per-bar encoded angles."""
    if model.variant != "hybrid":
        raise ValueError("forward_hybrid requires a hybrid-variant model")
    a = np.asarray(angle_rows, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != N_CHANNELS:
        raise ValueError(f"expected (T, {N_CHANNELS}) angles, got {a.shape}")
    return forward(a, model)


# ---------------------------------------------------------------------------
# dataset assembly and batched training math
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SampleSet:
    """Encoded per-prediction inputs: states (S, T, 2**n), labels, bar indices."""

    states: np.ndarray
    labels: np.ndarray
    bars: np.ndarray

    def __post_init__(self):
        if not (len(self.states) == len(self.labels) == len(self.bars)):
            raise ValueError("sample arrays disagree on length")

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, mask: np.ndarray) -> "SampleSet":
        return SampleSet(self.states[mask], self.labels[mask], self.bars[mask])


def build_sequence_samples(
    prices: np.ndarray, labels: np.ndarray, window: int
) -> SampleSet:
    """One sample per bar t >= 2W-1 with a finite label: W return-window tokens."""
    p = np.asarray(prices, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if len(p) != len(y):
        raise ValueError("prices and labels must align")
    tokens = make_tokens_sequence(p, window).tokens  # row j ends at bar j + window
    n_q = vqc.n_qubits_for_dim(window)
    template = VqcParams(np.zeros((1, n_q)), n_q, 1, "amplitude")
    token_states = vqc.encode_batch(tokens, template)

    first = 2 * window - 1
    usable = [t for t in range(first, len(p)) if np.isfinite(y[t])]
    if not usable:
        raise ValueError("no usable samples: labels all within warm-up")
    states = np.stack([
        token_states[t - 2 * window + 1 : t - window + 1] for t in usable
    ])
    return SampleSet(states, y[usable], np.asarray(usable, dtype=np.int64))


def build_hybrid_samples(
    angles: np.ndarray, labels: np.ndarray, window: int
) -> SampleSet:
    """One sample per bar with W consecutive finite angle rows ending at it."""
    a = np.asarray(angles, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if len(a) != len(y):
        raise ValueError("angles and labels must align")
    template = VqcParams(np.zeros((1, 6)), 6, 1, "angle")
    finite = np.all(np.isfinite(a), axis=1)
    usable = [
        t
        for t in range(window - 1, len(a))
        if np.isfinite(y[t]) and finite[t - window + 1 : t + 1].all()
    ]
    if not usable:
        raise ValueError("no usable samples: angle rows all within warm-up")
    encoded = {}
    states = []
    for t in usable:
        rows = []
        for u in range(t - window + 1, t + 1):
            if u not in encoded:
                encoded[u] = vqc.encode_batch(a[u : u + 1], template)[0]
            rows.append(encoded[u])
        states.append(np.stack(rows))
    return SampleSet(np.stack(states), y[usable], np.asarray(usable, dtype=np.int64))


def predict_batch(states: np.ndarray, model: QasaModel) -> np.ndarray:
    """Probabilities for (S, T, 2**n) encoded sample states."""
    s, t, dim = states.shape
    flat = states.reshape(s * t, dim)
    n = model.n_qubits
    q = vqc.forward_states(flat, model.vqc_q).reshape(s, t, n)
    k = vqc.forward_states(flat, model.vqc_k).reshape(s, t, n)
    v = vqc.forward_states(flat, model.vqc_v).reshape(s, t, n)
    weights = attention_weights(q, k)
    pooled = (weights @ v).mean(axis=1)
    z = pooled @ model.head_w + model.head_b
    return 1.0 / (1.0 + np.exp(-z))


def predict_batch_sampled(
    states: np.ndarray,
    model: QasaModel,
    shots: int,
    rng: np.random.Generator | None,
) -> np.ndarray:
    """Probabilities with shot-noise readout: every <Z> estimated from `shots` samples."""
    if rng is None:
        raise ValueError("sampled prediction requires an rng")
    s, t, dim = states.shape
    n = model.n_qubits
    probs = np.empty(s)
    for i in range(s):
        mats = []
        for params in (model.vqc_q, model.vqc_k, model.vqc_v):
            work = states[i].copy()
            _kernels.vqc_layers(work, n, params.thetas)
            mat = np.empty((t, n))
            for j in range(t):
                final = qsim.Statevector(work[j], n)
                mat[j] = [
                    qsim.expectation_z_sampled(final, q, shots, rng) for q in range(n)
                ]
            mats.append(mat)
        pooled = attention(*mats).mean(axis=0)
        probs[i] = _sigmoid(float(pooled @ model.head_w + model.head_b))
    return probs


def batch_loss_and_grads(
    states: np.ndarray,
    labels: np.ndarray,
    model: QasaModel,
    pos_weight: float = 1.0,
) -> tuple[float, dict[str, np.ndarray | float]]:
    """Mean weighted BCE over the batch plus gradients for every parameter.

    Head gradients are exact; circuit gradients chain the attention backward
    pass into per-token adjoints and apply the parameter-shift rule.
    """
    s, t, dim = states.shape
    n = model.n_qubits
    flat = states.reshape(s * t, dim)
    q = vqc.forward_states(flat, model.vqc_q).reshape(s, t, n)
    k = vqc.forward_states(flat, model.vqc_k).reshape(s, t, n)
    v = vqc.forward_states(flat, model.vqc_v).reshape(s, t, n)

    weights = attention_weights(q, k)      # (S, T, T)
    out = weights @ v                      # (S, T, n)
    pooled = out.mean(axis=1)              # (S, n)
    z = pooled @ model.head_w + model.head_b
    p = 1.0 / (1.0 + np.exp(-z))
    y = labels

    p_safe = np.clip(p, 1e-7, 1.0 - 1e-7)
    losses = -(pos_weight * y * np.log(p_safe) + (1.0 - y) * np.log(1.0 - p_safe))
    loss = float(losses.mean())

    # d loss / d logit, including the 1/S of the batch mean
    dz = (pos_weight * y * (p - 1.0) + (1.0 - y) * p) / s          # (S,)
    grad_w = dz @ pooled
    grad_b = float(dz.sum())
    d_pooled = np.outer(dz, model.head_w)                          # (S, n)
    d_out = np.repeat(d_pooled[:, np.newaxis, :], t, axis=1) / t   # (S, T, n)
    d_v = np.swapaxes(weights, 1, 2) @ d_out                       # (S, T, n)
    d_weights = d_out @ np.swapaxes(v, 1, 2)                       # (S, T, T)
    inner = np.sum(d_weights * weights, axis=2, keepdims=True)
    d_scores = weights * (d_weights - inner)
    scale = 1.0 / math.sqrt(n)
    d_q = (d_scores @ k) * scale
    d_k = (np.swapaxes(d_scores, 1, 2) @ q) * scale

    grads = {
        "thetas_q": vqc.grad_states(flat, model.vqc_q, d_q.reshape(s * t, n)),
        "thetas_k": vqc.grad_states(flat, model.vqc_k, d_k.reshape(s * t, n)),
        "thetas_v": vqc.grad_states(flat, model.vqc_v, d_v.reshape(s * t, n)),
        "head_w": grad_w,
        "head_b": grad_b,
    }
    return loss, grads
