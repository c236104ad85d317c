"""Closed-form learners for the linear and exponential-kernel scenarios, and failure reports.

Each report trial draws a training set S, learns h_S, and measures the error on
S, on fresh test draws, and on the adversarial set S' built from S. When h_S
misclassifies S' completely while its test error is small, S' witnesses that
any algorithm-dependent uniform convergence bound is at least
``bad_error - test_error``.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .datagen import (LabeledDataset, LinearSetupParams, exp_bad_dataset, exp_conditions, gen_exp,
                      gen_hypersphere, hypersphere_bad_dataset, linear_conditions, linear_direction)
from .linalg import InvalidInput, make_rng
from .network import forward, init_mlp, margins, predict
from .training import TrainConfig, sgd_train


@dataclass
class LinearLearnerWeights:
    w1: np.ndarray
    w2: np.ndarray


def linear_learn(S: LabeledDataset) -> LinearLearnerWeights:
    """One gradient step (lr 1, from zero) on sum_i y_i h(x_i), with the known u for w1."""
    if not S.meta or "u" not in S.meta:
        raise InvalidInput("linear_learn needs the scenario direction u in the metadata")
    K = S.meta["K"]
    m = len(S)
    y = S.labels.astype(np.float64)
    return LinearLearnerWeights(2.0 * m * np.asarray(S.meta["u"]), y @ S.inputs[:, K:])


def linear_eval(w: LinearLearnerWeights, x) -> np.ndarray | float:
    x = np.asarray(x, dtype=np.float64)
    K = len(w.w1)
    out = x[..., :K] @ w.w1 + x[..., K:] @ w.w2
    return float(out) if out.ndim == 0 else out


def _sign_pred(h):
    return np.where(h >= 0, 1, -1)


@dataclass
class TrialRow:
    trial: int
    train_error: float
    test_error: float
    bad_error: float
    min_train_margin: float


def linear_trial_gram(m: int, N: int, K: int, rng, n_test: int = 10_000, chunk: int = 20_000) -> TrialRow:
    """One linear-scenario trial without materializing the m x (K+N) design matrix.

    The noise block X2 is drawn column chunk by column chunk to accumulate its
    Gram matrix G = X2 X2^T. On training points w2.x2_i = (G y)_i and on S'
    it is -(G y)_i. A fresh test point's noise block is independent of w2, so
    w2.x2 ~ N(0, (32/N) y^T G y) is sampled exactly.
    """
    rng = make_rng(rng)
    u = linear_direction(K, m, rng)
    y = np.where(rng.random(m) < 0.5, -1.0, 1.0)
    G = np.zeros((m, m))
    scale = math.sqrt(32.0 / N)
    for lo in range(0, N, chunk):
        B = rng.standard_normal((m, min(chunk, N - lo))) * scale
        G += B @ B.T
    w1 = 2.0 * m * u
    x1_dot = 2.0 * y * float(u @ w1)  # w1 . (2 y_i u)
    noise = G @ y
    h_train = x1_dot + noise
    h_bad = x1_dot - noise
    y_test = np.where(rng.random(n_test) < 0.5, -1.0, 1.0)
    h_test = 2.0 * y_test * float(u @ w1) + math.sqrt(32.0 / N * float(y @ noise)) * rng.standard_normal(n_test)
    return TrialRow(
        trial=0,
        train_error=float(np.mean(_sign_pred(h_train) != y)),
        test_error=float(np.mean(_sign_pred(h_test) != y_test)),
        bad_error=float(np.mean(_sign_pred(h_bad) != y)),
        min_train_margin=float(np.min(y * h_train)),
    )


@dataclass
class ExpModel:
    X: np.ndarray
    y: np.ndarray
    N: int

    @property
    def log_eta(self) -> float:
        return self.N * math.log(4 * math.pi)

    @classmethod
    def from_dataset(cls, S: LabeledDataset) -> "ExpModel":
        return cls(S.inputs.copy(), S.labels.astype(np.int64), S.meta["N"])


def _logsumexp(a: np.ndarray) -> np.ndarray:
    mx = np.max(a, axis=-1)
    safe = np.where(np.isfinite(mx), mx, 0.0)
    with np.errstate(divide="ignore"):
        return safe + np.log(np.sum(np.exp(a - safe[..., None]), axis=-1))


def _signed_logsumexp(t: np.ndarray, y: np.ndarray):
    """sign and log|sum_i y_i exp(t_i)| along the last axis of t (rows are queries)."""
    P = _logsumexp(np.where(y > 0, t, -np.inf))
    Q = _logsumexp(np.where(y < 0, t, -np.inf))
    sign = np.where(P == Q, 0, np.where(P > Q, 1, -1))
    hi, lo = np.maximum(P, Q), np.minimum(P, Q)
    with np.errstate(divide="ignore", invalid="ignore"):
        mag = hi + np.log1p(-np.exp(lo - hi))
    return sign.astype(np.int64), np.where(sign == 0, -np.inf, mag)


def exp_eval_batch(model: ExpModel, Z) -> tuple[np.ndarray, np.ndarray]:
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    if Z.shape[1] != 2 * model.N:
        raise InvalidInput(f"query dimension {Z.shape[1]} != {2 * model.N}")
    sq_z = np.sum(Z * Z, axis=1)[:, None]
    sq_x = np.sum(model.X * model.X, axis=1)[None, :]
    t = (sq_z + 2.0 * Z @ model.X.T + sq_x) / 4.0
    return _signed_logsumexp(t, model.y)


def exp_eval(model: ExpModel, z) -> tuple[int, float]:
    """(sign, natural log of |h(z)|) for h(z) = sum_i y_i exp(||(z + x_i)/2||^2)."""
    s, mag = exp_eval_batch(model, np.asarray(z)[None, :])
    return int(s[0]), float(mag[0])


def _exp_error(model, S, chunk=500):
    wrong = 0
    for lo in range(0, len(S), chunk):
        s, _ = exp_eval_batch(model, S.inputs[lo:lo + chunk])
        wrong += int(np.sum(np.where(s >= 0, 1, -1) != S.labels[lo:lo + chunk]))
    return wrong / len(S)


def exp_trial(m: int, N: int, rng, n_test: int = 10_000, chunk: int = 500) -> TrialRow:
    rng = make_rng(rng)
    S = gen_exp(m, N, rng)
    model = ExpModel.from_dataset(S)
    s, mag = exp_eval_batch(model, S.inputs)
    ok = s * S.labels > 0
    min_margin = float(np.min(np.where(ok, mag, -np.inf))) if np.all(ok) else -math.inf
    wrong = 0
    for lo in range(0, n_test, chunk):
        T = gen_exp(min(chunk, n_test - lo), N, rng, u=S.meta["u"])
        wrong += _exp_error(model, T) * len(T)
    return TrialRow(
        trial=0,
        train_error=float(np.mean(~ok)),
        test_error=wrong / n_test,
        bad_error=_exp_error(model, exp_bad_dataset(S)),
        min_train_margin=min_margin,  # log of the smallest y h(x) on S
    )


@dataclass
class HypersphereParams:
    """Desk-scale hypersphere run.

    A biasless ReLU net is positively homogeneous, so its decision depends only
    on the direction of x and cannot tell concentric spheres apart. Inputs are
    therefore extended with a constant coordinate ``bias_feature`` (a first
    layer bias in disguise). The init is scaled up (``train.init_scale``) to
    move the 4096-wide net toward the near-linearized regime of much wider
    nets; too large a scale lets it learn the radius at m = 2048 and S' stops
    being fooled. Training runs a fixed number of epochs because a margin of
    10 is out of reach at this width within the time budget.
    """

    dim: int = 100
    width: int = 4096
    r_in: float = 1.0
    r_out: float = 1.1
    bias_feature: float = 1.0
    train: TrainConfig = field(default_factory=lambda: TrainConfig(
        lr=0.1, batch_size=64, loss_kind="xent", max_epochs=200, init_scale=1.5,
        stop={"kind": "epochs"}))

    def __post_init__(self):
        if isinstance(self.train, dict):
            self.train = TrainConfig(**self.train)


def _with_constant(X, c):
    return np.hstack([X, np.full((len(X), 1), c)]) if c else X


def hypersphere_trial(m: int, params: HypersphereParams, rng, n_test: int = 10_000) -> TrialRow:
    rng = make_rng(rng)
    S = gen_hypersphere(m, params.dim, rng, params.r_in, params.r_out)
    seeds = rng.integers(0, 2**31, size=2)
    cfg = TrainConfig(**{**asdict(params.train), "stop": params.train.stop,
                         "seed_init": int(seeds[0]), "seed_order": int(seeds[1])})
    c = params.bias_feature
    n_in = params.dim + (1 if c else 0)
    net = init_mlp([n_in, params.width, 2], cfg.seed_init, cfg.init_scale)
    sgd_train(net, _with_constant(S.inputs, c), S.labels, cfg)
    T = gen_hypersphere(n_test, params.dim, rng, params.r_in, params.r_out)
    Sb = hypersphere_bad_dataset(S)

    def err(D):
        return float(np.mean(predict(net, _with_constant(D.inputs, c)) != D.labels))

    return TrialRow(
        trial=0,
        train_error=err(S),
        test_error=err(T),
        bad_error=err(Sb),
        min_train_margin=float(np.min(margins(forward(net, _with_constant(S.inputs, c)), S.labels))),
    )


@dataclass
class UcfailReport:
    scenario: str
    m: int
    params: dict
    epsilon: float
    delta: float
    conditions_met: bool
    rows: list[TrialRow]

    @property
    def mean_test_error(self) -> float:
        return float(np.mean([r.test_error for r in self.rows]))

    @property
    def frac_bad_fully_wrong(self) -> float:
        return float(np.mean([r.bad_error == 1.0 for r in self.rows]))

    @property
    def eps_unif_alg_lower(self) -> float:
        """Mean over trials of (error on S') - (test error); equals 1 - mean test error when S' is always fully wrong."""
        return float(np.mean([r.bad_error - r.test_error for r in self.rows]))

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "m": self.m,
            "params": self.params,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "conditions_met": self.conditions_met,
            "mean_test_error": self.mean_test_error,
            "frac_bad_fully_wrong": self.frac_bad_fully_wrong,
            "eps_unif_alg_lower": self.eps_unif_alg_lower,
            "trials": [asdict(r) for r in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["trial", "train_error", "test_error", "bad_error", "min_train_margin"])
            for r in self.rows:
                w.writerow([r.trial, repr(r.train_error), repr(r.test_error), repr(r.bad_error),
                            repr(r.min_train_margin)])


def ucfail_report(scenario: str, m: int, params: dict, epsilon: float, delta: float, trials: int,
                  rng, n_test: int = 10_000) -> UcfailReport:
    """Run ``trials`` independent trials; per-trial seeds derive from ``rng``.

    ``params``: linear {"N", "K"}; exp {"N"}; hypersphere HypersphereParams fields.
    """
    if trials < 1:
        raise InvalidInput("need at least one trial")
    master = make_rng(rng)
    seeds = master.integers(0, 2**63 - 1, size=trials)
    if scenario == "linear":
        N, K = int(params["N"]), int(params.get("K", 2))
        ok = linear_conditions(LinearSetupParams(m=m, N=N, K=K), epsilon, delta)
        run = lambda s: linear_trial_gram(m, N, K, s, n_test)  # noqa: E731
    elif scenario == "exp":
        N = int(params["N"])
        ok = exp_conditions(m, N, epsilon, delta)
        run = lambda s: exp_trial(m, N, s, n_test)  # noqa: E731
    elif scenario == "hypersphere":
        hp = params if isinstance(params, HypersphereParams) else HypersphereParams(**params)
        ok = True
        run = lambda s: hypersphere_trial(m, hp, s, n_test)  # noqa: E731
        params = {k: v for k, v in asdict(hp).items()}
    else:
        raise InvalidInput(f"unknown scenario {scenario!r}")
    if not ok:
        warnings.warn(f"{scenario} scenario: size conditions not met for m={m}", stacklevel=2)
    rows = []
    for t, s in enumerate(seeds):
        row = run(int(s))
        row.trial = t
        rows.append(row)
    return UcfailReport(scenario, m, dict(params), epsilon, delta, ok, rows)
