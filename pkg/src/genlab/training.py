"""Minibatch SGD with heavy-ball momentum, stopping rules, and controlled run pairs."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from .linalg import InvalidInput, make_rng
from .network import (LOSS_KINDS, Mlp, backprop_grad, forward, init_mlp, loss_and_output_grad,
                      margins, predict)

DIVERGENCE_LIMIT = 1e12


class TrainingDiverged(RuntimeError):
    def __init__(self, message: str, last_finite: Mlp | None, epoch: int):
        super().__init__(message)
        self.last_finite = last_finite
        self.epoch = epoch


@dataclass
class StopRule:
    """``kind`` is one of "margin", "loss", "accuracy", "epochs"."""

    kind: str = "accuracy"
    margin_frac: float = 0.99
    margin: float = 10.0
    loss: float = 0.0

    def __post_init__(self):
        if self.kind not in ("margin", "loss", "accuracy", "epochs"):
            raise InvalidInput(f"unknown stop rule {self.kind!r}")
        if not 0 < self.margin_frac <= 1:
            raise InvalidInput("margin_frac must lie in (0, 1]")


@dataclass
class TrainConfig:
    lr: float = 0.1
    momentum: float = 0.0
    batch_size: int = 64
    loss_kind: str = "xent"
    stop: StopRule = field(default_factory=StopRule)
    max_epochs: int = 1000
    lr_decay_factor: float | None = None
    lr_decay_every: int | None = None
    seed_init: int = 0
    seed_order: int = 0
    init_scale: float = 1.0

    def __post_init__(self):
        if isinstance(self.stop, dict):
            self.stop = StopRule(**self.stop)
        if self.lr < 0:
            raise InvalidInput("lr must be nonnegative")
        if self.batch_size < 1:
            raise InvalidInput("batch_size must be at least 1")
        if self.loss_kind not in LOSS_KINDS:
            raise InvalidInput(f"unknown loss kind {self.loss_kind!r}")
        if (self.lr_decay_factor is None) != (self.lr_decay_every is None):
            raise InvalidInput("lr decay needs both a factor and a period")

    def lr_at(self, epoch: int) -> float:
        """Learning rate for 0-based ``epoch``."""
        if self.lr_decay_factor is None:
            return self.lr
        return self.lr * self.lr_decay_factor ** (epoch // self.lr_decay_every)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TrainConfig":
        return cls(**json.loads(text))


@dataclass
class TrainReport:
    epochs: int
    train_loss: float
    train_acc: float
    margin_frac: float
    stop_reason: str
    final_lr: float
    decay_events: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def margin_stop_check(net: Mlp, X, y, p: float, gamma_star: float) -> bool:
    X = np.asarray(X, dtype=np.float64)
    if len(X) == 0:
        raise InvalidInput("empty dataset")
    if not 0 < p <= 1:
        raise InvalidInput("p must lie in (0, 1]")
    return bool(np.mean(margins(forward(net, X), y) >= gamma_star) >= p)


def _stats(net, X, y, loss_kind, gamma):
    out = forward(net, X)
    loss, _ = loss_and_output_grad(out, y, loss_kind)
    mg = margins(out, y)
    return float(loss), float(np.mean(mg > 0)), float(np.mean(mg >= gamma))


def sgd_train(net: Mlp, X, y, cfg: TrainConfig) -> TrainReport:
    """Train ``net`` in place. Each epoch shuffles once and scans every batch, short last batch included."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y)
    if X.shape[1] != net.widths[0]:
        raise InvalidInput(f"data dimension {X.shape[1]} != net input {net.widths[0]}")
    m = len(X)
    if m == 0:
        raise InvalidInput("empty dataset")
    rng = make_rng(cfg.seed_order)
    vel = [np.zeros_like(W) for W in net.weights]
    rule = cfg.stop

    def done(stats):
        loss, acc, frac = stats
        if rule.kind == "margin":
            return frac >= rule.margin_frac
        if rule.kind == "loss":
            return loss <= rule.loss
        if rule.kind == "accuracy":
            return acc >= 1.0
        return False

    stats = _stats(net, X, y, cfg.loss_kind, rule.margin)
    epoch = 0
    reason = "max_epochs"
    if done(stats):
        reason = rule.kind
    else:
        while epoch < cfg.max_epochs:
            lr = cfg.lr_at(epoch)
            snapshot = net.copy()
            order = rng.permutation(m)
            for lo in range(0, m, cfg.batch_size):
                idx = order[lo:lo + cfg.batch_size]
                loss, grads = backprop_grad(net, X[idx], y[idx], cfg.loss_kind)
                if not math.isfinite(loss) or abs(loss) > DIVERGENCE_LIMIT:
                    raise TrainingDiverged(f"loss {loss} at epoch {epoch}", snapshot, epoch)
                for d in range(net.depth):
                    vel[d] = cfg.momentum * vel[d] - lr * grads[d]
                    net.weights[d] += vel[d]
            epoch += 1
            stats = _stats(net, X, y, cfg.loss_kind, rule.margin)
            if not math.isfinite(stats[0]) or abs(stats[0]) > DIVERGENCE_LIMIT:
                raise TrainingDiverged(f"loss {stats[0]} after epoch {epoch}", snapshot, epoch)
            if done(stats):
                reason = rule.kind
                break
    decays = 0 if cfg.lr_decay_factor is None else max(epoch - 1, 0) // cfg.lr_decay_every
    return TrainReport(epoch, stats[0], stats[1], stats[2], reason, cfg.lr_at(max(epoch - 1, 0)), decays)


class StochasticityMode(str, Enum):
    ALL_DIFF = "AllDiff"
    DIFF_DATA = "DiffData"
    DIFF_INIT = "DiffInit"
    DIFF_ORDER = "DiffOrder"
    SAME = "Same"  # control: both runs identical


@dataclass
class RunPair:
    net1: Mlp
    net2: Mlp
    idx1: np.ndarray
    idx2: np.ndarray
    report1: TrainReport
    report2: TrainReport


def make_run_pair(widths, X, y, cfg: TrainConfig, mode) -> RunPair:
    """Train two nets that differ only in the randomness ``mode`` names.

    The second run's init seed is ``seed_init + 1`` and its order seed is
    ``seed_order + 1`` when those sources differ. Data splits are a seeded
    permutation (by ``seed_order``) cut into two disjoint halves.
    """
    mode = StochasticityMode(mode)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    m = len(X)
    diff_init = mode in (StochasticityMode.ALL_DIFF, StochasticityMode.DIFF_INIT)
    diff_order = mode in (StochasticityMode.ALL_DIFF, StochasticityMode.DIFF_ORDER)
    diff_data = mode in (StochasticityMode.ALL_DIFF, StochasticityMode.DIFF_DATA)
    if diff_data:
        if m < 2:
            raise InvalidInput("splitting data needs at least 2 points")
        perm = make_rng((cfg.seed_order, 7919)).permutation(m)
        idx1, idx2 = np.sort(perm[: m // 2]), np.sort(perm[m // 2: 2 * (m // 2)])
    else:
        idx1 = idx2 = np.arange(m)
    cfg2 = TrainConfig(**{**asdict(cfg), "stop": cfg.stop,
                          "seed_init": cfg.seed_init + int(diff_init),
                          "seed_order": cfg.seed_order + int(diff_order)})
    net1 = init_mlp(widths, cfg.seed_init, cfg.init_scale)
    net2 = init_mlp(widths, cfg2.seed_init, cfg2.init_scale)
    r1 = sgd_train(net1, X[idx1], y[idx1], cfg)
    r2 = sgd_train(net2, X[idx2], y[idx2], cfg2)
    return RunPair(net1, net2, idx1, idx2, r1, r2)


def zero_one_error(net: Mlp, X, y) -> float:
    return float(np.mean(predict(net, X) != np.asarray(y)))


def interpolate_error(net1: Mlp, net2: Mlp, X, y, steps: int = 11) -> list[tuple[float, float]]:
    """0-1 error along (1 - t) W1 + t W2 at ``steps`` equispaced t in [0, 1]."""
    if steps < 2:
        raise InvalidInput("need at least 2 steps")
    if net1.widths != net2.widths:
        raise InvalidInput("nets have different shapes")
    rows = []
    for t in np.linspace(0.0, 1.0, steps):
        if t == 0.0:
            net = net1
        elif t == 1.0:
            net = net2
        else:
            net = net1.with_weights([(1 - t) * a + t * b for a, b in zip(net1.weights, net2.weights)])
        rows.append((float(t), zero_one_error(net, X, y)))
    return rows
