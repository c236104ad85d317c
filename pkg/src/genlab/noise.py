"""Analytic perturbation tolerances for ReLU nets and their Monte-Carlo counterparts.

Tolerances are indexed 1-based by layer: ``alpha[d]`` and ``gamma[d]`` for
d = 1..D (``alpha[0]`` is the input, always 0), and ``zeta[d_from, d_to]`` /
``psi[d_from, d_to]`` for the Jacobian of layer ``d_to`` with respect to
layer ``d_from``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import InvalidInput, make_rng, spectral_norms
from .network import Mlp, forward, forward_trace, interlayer_jacobian, margins


@dataclass
class ToleranceSet:
    alpha: np.ndarray
    gamma: np.ndarray
    zeta: np.ndarray
    psi: np.ndarray
    sigma: float = 0.0
    delta_hat: float = 0.05

    @classmethod
    def zeros(cls, depth: int, sigma: float = 0.0, delta_hat: float = 0.05) -> "ToleranceSet":
        n = depth + 1
        return cls(np.zeros(n), np.zeros(n), np.zeros((n, n)), np.zeros((n, n)), sigma, delta_hat)

    @property
    def depth(self) -> int:
        return len(self.alpha) - 1

    def to_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "delta_hat": self.delta_hat,
            "alpha": self.alpha.tolist(),
            "gamma": self.gamma.tolist(),
            "zeta": self.zeta.tolist(),
            "psi": self.psi.tolist(),
        }


def _units(net: Mlp) -> int:
    # number of units entering the union bound on any one layer
    return max(net.widths[1:])


class _TraceNorms:
    """Norms of the clean trace that the tolerance formulas consume."""

    def __init__(self, net: Mlp, trace):
        D = net.depth
        self.D = D
        self.f = [float(np.linalg.norm(a)) for a in trace.acts]
        self.fro = np.zeros((D + 1, D + 1))
        self.row = np.zeros((D + 1, D + 1))
        self.spec = np.zeros((D + 1, D + 1))
        for a in range(1, D + 1):
            for b in range(a, D + 1):
                J = interlayer_jacobian(trace, net, a, b)
                self.fro[a, b] = np.linalg.norm(J)
                self.row[a, b] = np.max(np.linalg.norm(J, axis=1))
                self.spec[a, b] = spectral_norms(J)
        self.w_row = [0.0] + [float(np.max(np.linalg.norm(W, axis=1))) for W in net.weights]
        self.w_spec = [0.0] + [float(spectral_norms(W)) for W in net.weights]


def analytic_tolerances(net: Mlp, trace, sigma: float, delta_hat: float,
                        input_tolerances: ToleranceSet | None = None, _norms=None) -> ToleranceSet:
    """One application of the tolerance map: output budgets from the input budgets."""
    if not 0 < delta_hat < 1:
        raise InvalidInput("delta_hat must lie in (0, 1)")
    if sigma < 0:
        raise InvalidInput("sigma must be nonnegative")
    D = net.depth
    H = _units(net)
    C = input_tolerances if input_tolerances is not None else ToleranceSet.zeros(D)
    tn = _norms if _norms is not None else _TraceNorms(net, trace)
    la = math.sqrt(2 * math.log(2 * D * H / delta_hat))
    lb = math.sqrt(4 * math.log(D * H / delta_hat))
    sH = math.sqrt(H)

    out = ToleranceSet.zeros(D, sigma, delta_hat)
    for d in range(1, D + 1):
        s_f = s_r = 0.0
        for dp in range(1, d + 1):
            inp = tn.f[dp - 1] + C.alpha[dp - 1]
            s_f += tn.fro[dp, d] * inp
            s_r += tn.row[dp, d] * inp
        out.alpha[d] = sigma * s_f * la
        out.gamma[d] = sigma * s_r * la
        for dp in range(1, d):
            z = (tn.fro[dp, d - 1] + C.zeta[dp, d - 1] * sH) * lb
            p = sH * (tn.spec[dp, d - 1] + C.psi[dp, d - 1]) * la
            for dpp in range(dp + 1, d):
                z += tn.w_row[d] * tn.spec[dpp, d - 1] * (tn.fro[dp, dpp - 1] + C.zeta[dp, dpp - 1] * sH) * lb
                p += sH * tn.w_spec[d] * tn.spec[dpp, d - 1] * (tn.spec[dp, dpp - 1] + C.psi[dp, dpp - 1]) * la
            out.zeta[dp, d] = sigma * z
            out.psi[dp, d] = sigma * p
    return out


def recursive_tolerances(net: Mlp, trace, sigma: float, delta_hat: float) -> ToleranceSet:
    """Self-consistent budgets: each layer's inputs are the outputs computed for earlier layers.

    Every formula only reads strictly earlier entries, so D applications from
    zero reach the fixed point.
    """
    tn = _TraceNorms(net, trace)
    C = ToleranceSet.zeros(net.depth, sigma, delta_hat)
    for _ in range(net.depth):
        C = analytic_tolerances(net, trace, sigma, delta_hat, C, _norms=tn)
    return C


@dataclass
class PerturbationStats:
    alpha: np.ndarray  # (trials, D+1)
    gamma: np.ndarray  # (trials, D+1)
    zeta: np.ndarray  # (trials, D+1, D+1)
    psi: np.ndarray  # (trials, D+1, D+1)
    flips: np.ndarray  # (trials, D) flips per layer, index 0 unused
    trials: int = field(default=0)

    @property
    def max_alpha(self):
        return self.alpha.max(axis=0)

    @property
    def max_gamma(self):
        return self.gamma.max(axis=0)

    @property
    def max_zeta(self):
        return self.zeta.max(axis=0)

    @property
    def max_psi(self):
        return self.psi.max(axis=0)

    @property
    def flip_count(self) -> np.ndarray:
        return self.flips.sum(axis=0)

    def fraction_within(self, tol: ToleranceSet) -> dict:
        """Per quantity, the fraction of trials where every entry stays inside its budget."""
        D = tol.depth
        pairs = np.triu(np.ones((D + 1, D + 1), dtype=bool), k=1)
        pairs[0, :] = False
        eps = 1e-12
        return {
            "alpha": float(np.mean(np.all(self.alpha[:, 1:] <= tol.alpha[1:] + eps, axis=1))),
            "gamma": float(np.mean(np.all(self.gamma[:, 1:] <= tol.gamma[1:] + eps, axis=1))),
            "zeta": float(np.mean(np.all(self.zeta[:, pairs] <= tol.zeta[pairs] + eps, axis=1))),
            "psi": float(np.mean(np.all(self.psi[:, pairs] <= tol.psi[pairs] + eps, axis=1))),
        }


def _frozen_trace(net: Mlp, x, masks):
    acts = [np.asarray(x, dtype=np.float64)]
    preacts = []
    f = acts[0]
    for d, W in enumerate(net.weights, start=1):
        g = W @ f
        preacts.append(g)
        if d < net.depth:
            f = g * masks[d - 1]
            acts.append(f)
    return acts, preacts


def _jac_with_masks(net: Mlp, masks, a, b):
    J = np.eye(net.widths[a])
    for d in range(a + 1, b + 1):
        J = net.weights[d - 1] @ (masks[d - 2][:, None] * J)
    return J


def _measure(net: Mlp, x, masks=None):
    D = net.depth
    if masks is None:
        tr = forward_trace(net, x)
        acts, preacts, masks = tr.acts, tr.preacts, tr.masks()
    else:
        acts, preacts = _frozen_trace(net, x, masks)
    outs = list(acts[1:]) + [preacts[-1]]
    norms = np.array([0.0] + [np.linalg.norm(o) for o in outs])
    rows = np.zeros((D + 1, D + 1), dtype=object)
    spec = np.zeros((D + 1, D + 1))
    for a in range(1, D + 1):
        for b in range(a + 1, D + 1):
            J = _jac_with_masks(net, masks, a, b)
            rows[a, b] = np.linalg.norm(J, axis=1)
            spec[a, b] = spectral_norms(J)
    return norms, preacts, rows, spec, masks


def empirical_perturbations(net: Mlp, x, sigma: float, trials: int, rng,
                            frozen: bool = False) -> PerturbationStats:
    """Perturb every layer at once with N(0, sigma^2) noise and record all deviations.

    With ``frozen=True`` the perturbed net keeps the clean activation pattern.
    """
    if sigma < 0:
        raise InvalidInput("sigma must be nonnegative")
    if trials < 1:
        raise InvalidInput("need at least one trial")
    rng = make_rng(rng)
    D = net.depth
    x = np.asarray(x, dtype=np.float64)
    n0, g0, r0, s0, m0 = _measure(net, x)
    A = np.zeros((trials, D + 1))
    G = np.zeros((trials, D + 1))
    Z = np.zeros((trials, D + 1, D + 1))
    P = np.zeros((trials, D + 1, D + 1))
    F = np.zeros((trials, D + 1), dtype=np.int64)
    for t in range(trials):
        pert = net.with_weights([W + sigma * rng.standard_normal(W.shape) for W in net.weights])
        n1, g1, r1, s1, m1 = _measure(pert, x, m0 if frozen else None)
        A[t] = np.abs(n1 - n0)
        G[t, 1:] = [np.max(np.abs(a - b)) for a, b in zip(g1, g0)]
        for a in range(1, D + 1):
            for b in range(a + 1, D + 1):
                Z[t, a, b] = np.max(np.abs(r1[a, b] - r0[a, b]))
                P[t, a, b] = abs(s1[a, b] - s0[a, b])
        live = [(gp > 0) for gp in g1[:-1]]
        F[t, 1:D] = [int(np.sum(l != m)) for l, m in zip(live, m0)]
    return PerturbationStats(A, G, Z, P, F, trials)


def noise_resilience_fraction(net: Mlp, X, y, sigma: float, Delta: float,
                              nu: float | None = None, trials: int = 200, rng=0) -> float:
    """Fraction of points whose margin moves by more than Delta/2 with probability > nu."""
    if Delta <= 0:
        raise InvalidInput("Delta must be positive")
    if sigma < 0:
        raise InvalidInput("sigma must be nonnegative")
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y)
    m = len(y)
    if m == 0:
        raise InvalidInput("empty dataset")
    if nu is None:
        nu = 1.0 / math.sqrt(m)
    if sigma == 0 or math.isinf(Delta):
        return 0.0
    rng = make_rng(rng)
    base = margins(forward(net, X), y)
    exceed = np.zeros(m)
    for _ in range(trials):
        pert = net.with_weights([W + sigma * rng.standard_normal(W.shape) for W in net.weights])
        exceed += np.abs(margins(forward(pert, X), y) - base) > Delta / 2
    return float(np.mean(exceed / trials > nu))
