"""Data-dependent norm profile, the ReLU PAC-Bayes bound, its variants, and baseline bounds.

All hidden O-constants are set to 1; log factors are kept as written.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .linalg import InvalidInput, frobenius_norm, max_row_l2, norm_2_1, spectral_norm, spectral_norms
from .network import Mlp, batch_jacobians, forward, margins

CONSTANT_CONVENTION = "all O-constants set to 1; log factors kept"
CHUNK = 512


class BoundTermError(ZeroDivisionError):
    def __init__(self, term: str, detail: str):
        super().__init__(f"{term}: {detail}")
        self.term = term


def distance_from_init(net: Mlp) -> tuple[float, list[float]]:
    per_layer = [frobenius_norm(W - Z) for W, Z in zip(net.weights, net.init)]
    return math.sqrt(sum(v * v for v in per_layer)), per_layer


@dataclass
class TrainNorms:
    """Norm statistics over a training set.

    ``alpha[d]`` for d = 0..D-1, ``gamma[d]`` for d = 1..D (index 0 unused),
    ``zeta[a, b]`` / ``psi[a, b]`` for 1 <= a <= b <= D. The per-example arrays
    keep what the preactivation variants need.
    """

    alpha: np.ndarray
    gamma: np.ndarray
    zeta: np.ndarray
    psi: np.ndarray
    gamma_class: float
    B: float
    m: int
    H: int
    D: int
    example_min_preact: np.ndarray = field(repr=False)  # (m, D+1)
    example_median_preact: np.ndarray = field(repr=False)  # (m, D+1)
    w_row: list = field(default_factory=list)  # ||W_d||_{2,inf}, index 0 unused
    w_spec: list = field(default_factory=list)  # ||W_d||_2, index 0 unused


def train_norm_profile(net: Mlp, X, y, gamma_class: float | None = None) -> TrainNorms:
    """Maxima/minima over the dataset, clamped at 1 where the definitions clamp."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y)
    m = len(X)
    if m == 0:
        raise InvalidInput("empty training set")
    D = net.depth
    alpha = np.zeros(D)
    gamma = np.full(D + 1, np.inf)
    gamma[0] = np.nan
    zeta = np.ones((D + 1, D + 1))
    psi = np.ones((D + 1, D + 1))
    ex_min = np.full((m, D + 1), np.nan)
    ex_med = np.full((m, D + 1), np.nan)
    min_margin = np.inf
    for lo in range(0, m, CHUNK):
        xb = X[lo:lo + CHUNK]
        f = xb
        acts = [xb]
        pre = []
        for d, W in enumerate(net.weights, start=1):
            g = f @ W.T
            pre.append(g)
            if d < D:
                f = np.maximum(g, 0.0)
                acts.append(f)
        for d in range(D):
            alpha[d] = max(alpha[d], np.max(np.linalg.norm(acts[d], axis=1)))
        for d in range(1, D + 1):
            a = np.sort(np.abs(pre[d - 1]), axis=1)
            ex_min[lo:lo + len(xb), d] = a[:, 0]
            ex_med[lo:lo + len(xb), d] = a[:, a.shape[1] // 2]
        min_margin = min(min_margin, float(np.min(margins(pre[-1], y[lo:lo + CHUNK]))))
        masks = [g > 0 for g in pre[:-1]]
        for a in range(1, D + 1):
            for b, J in batch_jacobians(net, masks, a):
                zeta[a, b] = max(zeta[a, b], np.max(np.linalg.norm(J, axis=2)))
                if b > a:
                    psi[a, b] = max(psi[a, b], np.max(spectral_norms(J)))
    alpha = np.maximum(alpha, 1.0)
    gamma[1:] = np.min(ex_min[:, 1:], axis=0)
    B = max(float(np.max(np.linalg.norm(X, axis=1))), 1.0)
    return TrainNorms(
        alpha=alpha,
        gamma=gamma,
        zeta=zeta,
        psi=psi,
        gamma_class=min_margin if gamma_class is None else float(gamma_class),
        B=B,
        m=m,
        H=net.hidden_width,
        D=D,
        example_min_preact=ex_min,
        example_median_preact=ex_med,
        w_row=[0.0] + [max_row_l2(W) for W in net.weights],
        w_spec=[0.0] + [float(spectral_norms(W)) for W in net.weights],
    )


def preact_variant(norms: TrainNorms, mode: str, p: float = 0.05) -> TrainNorms:
    """Recompute gamma* ignoring small preactivations.

    ``mode="pct"`` drops, per layer, the floor(p*m) datapoints whose smallest
    |preactivation| is lowest. ``mode="median"`` uses, per input and layer, the
    unit at rank H//2 of the sorted |preactivations|.
    """
    D = norms.D
    gamma = norms.gamma.copy()
    if mode == "pct":
        if not 0 <= p < 1:
            raise InvalidInput("p must lie in [0, 1)")
        k = int(math.floor(p * norms.m))
        for d in range(1, D + 1):
            gamma[d] = np.sort(norms.example_min_preact[:, d])[k]
    elif mode == "median":
        gamma[1:] = np.min(norms.example_median_preact[:, 1:], axis=0)
    else:
        raise InvalidInput(f"unknown preactivation variant {mode!r}")
    return replace(norms, gamma=gamma)


@dataclass
class BTerms:
    layer_l2: float
    preact: float
    jac_row_l2: float
    jac_spec: float
    output: float

    def max(self) -> float:
        return max(self.layer_l2, self.preact, self.jac_row_l2, self.jac_spec, self.output)


def b_terms(norms: TrainNorms, H: int | None = None, D: int | None = None, cheap: bool = False) -> BTerms:
    """The five ratio terms; ``cheap`` swaps in the spectral-free row term and zeroes jac_spec."""
    H = norms.H if H is None else H
    D = norms.D if D is None else D
    al, ga, ze, ps = norms.alpha, norms.gamma, norms.zeta, norms.psi
    sH = math.sqrt(H)

    layer = preact = 0.0
    for d in range(1, D):
        num = sum(ze[dp, d] * al[dp - 1] for dp in range(1, d + 1))
        layer = max(layer, num / al[d])
        if ga[d] <= 0:
            raise BoundTermError("B_preact", f"gamma*_{d} = {ga[d]!r}")
        preact = max(preact, num / (sH * ga[d]))

    row = spec = 0.0
    for d in range(2, D + 1):
        for dp in range(1, d):
            if cheap:
                r = sum(ze[dpp, d] * ze[dp, dpp - 1] for dpp in range(dp + 1, d + 1))
            else:
                r = ze[dp, d - 1] + norms.w_row[d] * sum(
                    ps[dpp, d - 1] * ze[dp, dpp - 1] for dpp in range(dp + 1, d))
                s = ps[dp, d - 1] + norms.w_spec[d] * sum(
                    ps[dpp, d - 1] * ps[dp, dpp - 1] for dpp in range(dp + 1, d))
                spec = max(spec, s / ps[dp, d])
            row = max(row, r / ze[dp, d])

    if norms.gamma_class <= 0:
        raise BoundTermError("B_output", f"gamma_class = {norms.gamma_class!r}")
    out = sum(ze[d, D] * al[d - 1] for d in range(1, D + 1)) / (sH * norms.gamma_class)
    return BTerms(layer, preact, row, 0.0 if cheap else spec, out)


def sigma_star(terms: BTerms, H: int, D: int, m: int) -> float:
    inv = math.sqrt(H) * math.sqrt(math.log(D * H * math.sqrt(m))) * terms.max()
    return 1.0 / inv


@dataclass
class BoundReport:
    B_layer_l2: float
    B_preact: float
    B_jac_row_l2: float
    B_jac_spec: float
    B_output: float
    sigma_star: float
    kl_term: float
    bound_value: float
    train_margin_loss: float
    gamma_class: float
    delta: float
    m: int
    D: int
    H: int
    variant: str = "main"
    constant_convention: str = CONSTANT_CONVENTION
    failed_term: str | None = None

    @property
    def vacuous(self) -> bool:
        return not self.bound_value <= 1.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["vacuous"] = self.vacuous
        return {k: (v if not isinstance(v, float) or math.isfinite(v) else str(v)) for k, v in d.items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _pac_bayes_value(train_loss, dist_sq, sig, D, m, delta, outer):
    radicand = (2.0 * dist_sq / sig**2 + math.log(D * m / delta)) / (m - 1)
    return train_loss + outer * math.sqrt(radicand)


def bound_from_norms(net: Mlp, X, y, norms: TrainNorms, delta: float, variant: str = "main") -> BoundReport:
    if not 0 < delta < 1:
        raise InvalidInput("delta must lie in (0, 1)")
    m, D, H = norms.m, norms.D, norms.H
    if m < 2:
        raise InvalidInput("need m >= 2")
    cheap = variant == "cheap"
    marg = margins(forward(net, X), y)
    train_loss = float(np.mean(marg < norms.gamma_class))
    dist, _ = distance_from_init(net)
    outer = D * D if cheap else D
    base = dict(train_margin_loss=train_loss, gamma_class=norms.gamma_class, delta=delta,
                m=m, D=D, H=H, variant=variant)
    try:
        t = b_terms(norms, H, D, cheap=cheap)
    except BoundTermError as e:
        inf = math.inf
        return BoundReport(inf, inf, inf, inf, inf, 0.0, inf, inf, failed_term=e.term, **base)
    sig = sigma_star(t, H, D, m)
    kl = dist * dist / (2 * sig * sig)
    value = _pac_bayes_value(train_loss, dist * dist, sig, D, m, delta, outer)
    return BoundReport(t.layer_l2, t.preact, t.jac_row_l2, t.jac_spec, t.output, sig, kl, value, **base)


def thesis_bound(net: Mlp, X, y, delta: float, gamma_class: float = 10.0) -> BoundReport:
    return bound_from_norms(net, X, y, train_norm_profile(net, X, y, gamma_class), delta)


def thesis_bound_cheap(net: Mlp, X, y, delta: float, gamma_class: float = 10.0) -> BoundReport:
    return bound_from_norms(net, X, y, train_norm_profile(net, X, y, gamma_class), delta, "cheap")


def thesis_bound_preact(net: Mlp, X, y, delta: float, mode: str, p: float = 0.05,
                        gamma_class: float = 10.0, norms: TrainNorms | None = None) -> BoundReport:
    norms = norms if norms is not None else train_norm_profile(net, X, y, gamma_class)
    label = f"preact_pct {p:g}" if mode == "pct" else "preact_median"
    return bound_from_norms(net, X, y, preact_variant(norms, mode, p), delta, label)


def _check_gamma(gamma):
    if gamma <= 0:
        raise InvalidInput("margin gamma must be positive")


def _prefactor(net, gamma, m, B, H, D):
    _check_gamma(gamma)
    prod = math.prod(spectral_norm(W) for W in net.weights)
    return B * D * math.sqrt(H) / (gamma * math.sqrt(m)) * prod


def neyshabur18_bound(net: Mlp, gamma: float, m: int, B: float, H: int, D: int) -> float:
    dist = math.sqrt(sum(frobenius_norm(W - Z) ** 2 / spectral_norm(W) ** 2
                         for W, Z in zip(net.weights, net.init)))
    return _prefactor(net, gamma, m, B, H, D) * dist


def bartlett17_bound(net: Mlp, gamma: float, m: int, B: float, H: int, D: int,
                     convention: str | None = None) -> float:
    s = sum((norm_2_1(W - Z, convention) / spectral_norm(W)) ** (2.0 / 3.0)
            for W, Z in zip(net.weights, net.init))
    return _prefactor(net, gamma, m, B, H, D) * s**1.5 / (D * math.sqrt(H))


def neyshabur_twolayer_bound(net: Mlp, gamma: float, m: int, H: int) -> float:
    _check_gamma(gamma)
    if net.depth != 2:
        raise InvalidInput("the unit-wise bound is defined for 2-layer nets")
    W1, W2 = net.weights
    Z1 = net.init[0]
    first = frobenius_norm(W2) * (frobenius_norm(W1 - Z1) + spectral_norm(Z1)) / (gamma * math.sqrt(m))
    return first + math.sqrt(H) / math.sqrt(m)


def derandomized_bound(train_margin_rate: float, mu_S: float, mu_D: float, kl: float, m: int,
                       delta: float) -> float:
    if m <= 1:
        raise InvalidInput("need m > 1")
    if not 0 < delta < 1:
        raise InvalidInput("delta must lie in (0, 1)")
    rad = math.sqrt((2 * kl + math.log(2 * m / delta)) / (m - 1))
    return train_margin_rate + mu_S + mu_D + 2 * rad + 2 / (math.sqrt(m) - 1)


def generic_framework_bound(train_term: float, kl: float, m: int, delta: float, R: int) -> float:
    if m <= 1:
        raise InvalidInput("need m > 1")
    if not 0 < delta < 1:
        raise InvalidInput("delta must lie in (0, 1)")
    if R < 1:
        raise InvalidInput("R must be at least 1")
    return train_term + R * math.sqrt((2 * kl + math.log(2 * m * R / delta)) / (m - 1))
