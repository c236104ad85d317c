"""Biasless fully-connected ReLU classifiers.

Layer ``d`` (1-based) computes ``g^d = W_d f^{d-1}`` with ``f^0 = x`` and
``f^d = relu(g^d)`` for ``d < D``; the logits are ``g^D``. A unit whose
preactivation is exactly zero is treated as inactive.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .linalg import InvalidInput, make_rng

LOSS_KINDS = ("xent", "squared", "ascent")


@dataclass
class Mlp:
    weights: list[np.ndarray]
    init: list[np.ndarray] = field(default=None)

    def __post_init__(self):
        self.weights = [np.array(W, dtype=np.float64) for W in self.weights]
        if not self.weights:
            raise InvalidInput("an Mlp needs at least one layer")
        if self.init is None:
            self.init = [W.copy() for W in self.weights]
        else:
            self.init = [np.array(Z, dtype=np.float64) for Z in self.init]
        for d in range(1, len(self.weights)):
            if self.weights[d].shape[1] != self.weights[d - 1].shape[0]:
                raise InvalidInput(f"layer {d + 1} expects {self.weights[d].shape[1]} inputs, "
                                   f"layer {d} gives {self.weights[d - 1].shape[0]}")
        if [Z.shape for Z in self.init] != [W.shape for W in self.weights]:
            raise InvalidInput("init snapshot shapes differ from weight shapes")

    @property
    def depth(self) -> int:
        return len(self.weights)

    @property
    def widths(self) -> list[int]:
        return [self.weights[0].shape[1]] + [W.shape[0] for W in self.weights]

    @property
    def hidden_width(self) -> int:
        """H: the largest hidden layer (input width for a 1-layer net)."""
        ws = self.widths
        return max(ws[1:-1]) if len(ws) > 2 else ws[0]

    @property
    def n_outputs(self) -> int:
        return self.weights[-1].shape[0]

    def copy(self) -> "Mlp":
        return Mlp([W.copy() for W in self.weights], [Z.copy() for Z in self.init])

    def with_weights(self, weights) -> "Mlp":
        return Mlp(list(weights), [Z.copy() for Z in self.init])


def init_mlp(widths, seed, scale: float = 1.0) -> Mlp:
    """Gaussian init with std ``scale / sqrt(fan_in)``; the snapshot Z equals W."""
    rng = make_rng(seed)
    weights = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        weights.append(rng.standard_normal((fan_out, fan_in)) * (scale / np.sqrt(fan_in)))
    return Mlp(weights)


@dataclass
class ForwardTrace:
    x: np.ndarray
    preacts: list[np.ndarray]  # g^1 .. g^D
    acts: list[np.ndarray]  # f^0 .. f^{D-1}

    @property
    def logits(self) -> np.ndarray:
        return self.preacts[-1]

    def masks(self) -> list[np.ndarray]:
        """Activation pattern of hidden layers 1..D-1."""
        return [g > 0 for g in self.preacts[:-1]]


def forward_trace(net: Mlp, x) -> ForwardTrace:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != net.widths[0]:
        raise InvalidInput(f"input has dimension {x.shape[-1]}, net expects {net.widths[0]}")
    acts = [x]
    preacts = []
    f = x
    for d, W in enumerate(net.weights, start=1):
        g = f @ W.T
        preacts.append(g)
        if d < net.depth:
            f = np.maximum(g, 0.0)
            acts.append(f)
    return ForwardTrace(x, preacts, acts)


def forward(net: Mlp, X) -> np.ndarray:
    """Logits for a single input or a batch (rows)."""
    f = np.asarray(X, dtype=np.float64)
    for W in net.weights[:-1]:
        f = np.maximum(f @ W.T, 0.0)
    return f @ net.weights[-1].T


def margins(logits: np.ndarray, y) -> np.ndarray:
    """Vectorized margin: f[y] - max_{k != y} f[k], or y * f for one-logit nets."""
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y))
    n, K = logits.shape
    if K == 1:
        if not np.all(np.isin(y, (-1, 1))):
            raise InvalidInput("binary labels must be +-1")
        return logits[:, 0] * y
    if np.any(y < 0) or np.any(y >= K):
        raise InvalidInput(f"label out of range for {K} classes")
    idx = np.arange(n)
    true = logits[idx, y]
    others = logits.copy()
    others[idx, y] = -np.inf
    return true - others.max(axis=1)


def margin(logits, y) -> float:
    logits = np.ravel(np.asarray(logits, dtype=np.float64))
    return float(margins(logits[None, :], [y])[0])


def predict(net: Mlp, X) -> np.ndarray:
    """Class predictions: argmax for K > 1, sign (+-1, ties to +1) for one logit."""
    out = forward(net, X)
    if out.shape[-1] == 1:
        return np.where(out[..., 0] >= 0, 1, -1)
    return np.argmax(out, axis=-1)


def loss_zero_one(gamma_value: float) -> int:
    return int(gamma_value < 0)


def loss_margin(gamma_value: float, gamma: float) -> int:
    if gamma < 0:
        raise InvalidInput("margin threshold must be nonnegative")
    return int(gamma_value < gamma)


def loss_ramp(gamma_value: float, gamma: float) -> float:
    if gamma < 0:
        raise InvalidInput("margin threshold must be nonnegative")
    if gamma == 0:
        return float(gamma_value < 0)
    if gamma_value < 0:
        return 1.0
    if gamma_value > gamma:
        return 0.0
    return 1.0 - gamma_value / gamma


def interlayer_jacobian(trace: ForwardTrace, net: Mlp, d_from: int, d_to: int) -> np.ndarray:
    """d g^{d_to} / d g^{d_from}: activation-masked product of W_{d_from+1} .. W_{d_to}."""
    D = net.depth
    if not (1 <= d_from <= d_to <= D):
        raise InvalidInput(f"need 1 <= d_from <= d_to <= {D}, got ({d_from}, {d_to})")
    masks = trace.masks()
    J = np.eye(net.widths[d_from])
    for d in range(d_from + 1, d_to + 1):
        J = net.weights[d - 1] @ (masks[d - 2][:, None] * J)
    return J


def batch_jacobians(net: Mlp, masks: list[np.ndarray], d_from: int):
    """Yield (d, J) for d = d_from..D with J of shape (n, H_d, H_{d_from}).

    ``masks[k]`` is the (n, H_{k+1}) activation pattern of hidden layer k+1.
    """
    n = masks[0].shape[0] if masks else 1
    J = np.broadcast_to(np.eye(net.widths[d_from]), (n, net.widths[d_from], net.widths[d_from]))
    yield d_from, J
    for d in range(d_from + 1, net.depth + 1):
        J = np.einsum("ij,njk->nik", net.weights[d - 1], masks[d - 2][:, :, None] * J)
        yield d, J


def _targets(y, K):
    T = np.zeros((len(y), K))
    T[np.arange(len(y)), y] = 1.0
    return T


def loss_and_output_grad(out: np.ndarray, y: np.ndarray, loss_kind: str):
    """Mean loss over the batch and d(mean loss)/d(logits)."""
    n, K = out.shape
    if loss_kind == "xent":
        if K == 1:
            z = y * out[:, 0]
            loss = np.mean(np.logaddexp(0.0, -z))
            s = -y / (1.0 + np.exp(np.clip(z, -700, 700)))
            return loss, (s / n)[:, None]
        shifted = out - out.max(axis=1, keepdims=True)
        logp = shifted - np.log(np.sum(np.exp(shifted), axis=1, keepdims=True))
        loss = -np.mean(logp[np.arange(n), y])
        return loss, (np.exp(logp) - _targets(y, K)) / n
    if loss_kind == "squared":
        T = y[:, None].astype(np.float64) if K == 1 else _targets(y, K)
        diff = out - T
        return np.mean(np.sum(diff * diff, axis=1)), 2.0 * diff / n
    if loss_kind == "ascent":
        if K != 1:
            raise InvalidInput("the ascent objective needs a one-logit net")
        return -np.mean(y * out[:, 0]), (-y / n)[:, None].astype(np.float64)
    raise InvalidInput(f"unknown loss kind {loss_kind!r}; expected one of {LOSS_KINDS}")


def backprop_grad(net: Mlp, X, y, loss_kind: str = "xent"):
    """Mean loss and its exact gradients with respect to each W_d."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y)
    acts = [X]
    f = X
    for W in net.weights[:-1]:
        f = np.maximum(f @ W.T, 0.0)
        acts.append(f)
    out = f @ net.weights[-1].T
    loss, delta = loss_and_output_grad(out, y, loss_kind)
    grads = [None] * net.depth
    for d in range(net.depth - 1, -1, -1):
        grads[d] = delta.T @ acts[d]
        if d > 0:
            delta = (delta @ net.weights[d]) * (acts[d] > 0)
    return loss, grads


MAGIC = b"GLAB"
VERSION = 1


def save_checkpoint(net: Mlp, path) -> None:
    """Little-endian: magic, u32 version, u32 D, u32 widths[D+1], W_1..W_D, Z_1..Z_D."""
    parts = [MAGIC, struct.pack("<II", VERSION, net.depth), struct.pack(f"<{net.depth + 1}I", *net.widths)]
    for M in net.weights + net.init:
        parts.append(np.ascontiguousarray(M, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(path) -> Mlp:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise InvalidInput("not a GLAB checkpoint")
    version, D = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise InvalidInput(f"unsupported checkpoint version {version}")
    widths = struct.unpack_from(f"<{D + 1}I", data, 12)
    off = 12 + 4 * (D + 1)
    mats = []
    for _ in range(2):
        for d in range(D):
            r, c = widths[d + 1], widths[d]
            n = r * c * 8
            if off + n > len(data):
                raise InvalidInput(f"truncated checkpoint at byte {off}")
            mats.append(np.frombuffer(data, dtype="<f8", count=r * c, offset=off).reshape(r, c).copy())
            off += n
    return Mlp(mats[:D], mats[D:])
