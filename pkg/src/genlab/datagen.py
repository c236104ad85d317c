"""Synthetic scenarios, their adversarial "bad" datasets, label noise and IDX/CSV IO."""

from __future__ import annotations

import csv
import gzip
import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .linalg import InvalidInput, box_muller, make_rng

C1 = 1.0 / 2048.0
C2 = math.sqrt(15.0 / 16.0)
C3 = math.sqrt(17.0 / 16.0)
C4 = math.sqrt(2.0)


class FormatError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


@dataclass
class LabeledDataset:
    inputs: np.ndarray
    labels: np.ndarray
    meta: dict | None = None

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=np.float64))
        self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if len(self.inputs) != len(self.labels):
            raise InvalidInput(f"{len(self.inputs)} inputs but {len(self.labels)} labels")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def subset(self, idx) -> "LabeledDataset":
        return replace(self, inputs=self.inputs[idx], labels=self.labels[idx])


@dataclass(frozen=True)
class LinearSetupParams:
    m: int
    N: int
    K: int = 2
    c1: float = field(default=C1, init=False)
    c2: float = field(default=C2, init=False)
    c3: float = field(default=C3, init=False)
    c4: float = field(default=C4, init=False)

    def __post_init__(self):
        if self.N < 1 or self.K < 1:
            raise InvalidInput("N and K must be positive")


def _signs(rng, m):
    return np.where(rng.random(m) < 0.5, -1, 1)


def linear_direction(K: int, m: int, rng) -> np.ndarray:
    u = box_muller(rng, K)
    return u / np.linalg.norm(u) / math.sqrt(m)


def gen_linear(params: LinearSetupParams, rng, u=None, m: int | None = None) -> LabeledDataset:
    """x = (2 y u, x2), x2 ~ N(0, 32/N I), ||u|| = 1/sqrt(params.m).

    Pass the training set's ``u`` (and a different ``m``) to draw test points.
    """
    rng = make_rng(rng)
    m = params.m if m is None else m
    if m <= 0:
        raise InvalidInput("m must be positive")
    if u is None:
        u = linear_direction(params.K, params.m, rng)
    y = _signs(rng, m)
    x1 = 2.0 * y[:, None] * u[None, :]
    x2 = box_muller(rng, (m, params.N)) * math.sqrt(32.0 / params.N)
    meta = {"scenario": "linear", "u": u, "K": params.K, "N": params.N}
    return LabeledDataset(np.hstack([x1, x2]), y, meta)


def linear_bad_dataset(S: LabeledDataset) -> LabeledDataset:
    """Noise-negated copy: ((x1, -x2), y)."""
    K = S.meta["K"]
    X = S.inputs.copy()
    X[:, K:] = -X[:, K:]
    return replace(S, inputs=X, labels=S.labels.copy())


def linear_thresholds(m: int, epsilon: float, delta: float) -> tuple[float, float, float]:
    k = (4 * C4 * C3 / C2**2) ** 2
    return (
        (1.0 / C1) * math.log(6 * m / delta),
        m * k * math.log(6 * m / delta),
        m * k * 2 * math.log(2 / epsilon),
    )


def linear_conditions(params: LinearSetupParams, epsilon: float, delta: float) -> bool:
    if not (0 < delta < 0.25):
        raise InvalidInput("need 0 < delta < 1/4")
    if epsilon <= 0:
        raise InvalidInput("epsilon must be positive")
    return all(params.N >= t for t in linear_thresholds(params.m, epsilon, delta))


def min_linear_N(m: int, epsilon: float, delta: float) -> int:
    return math.ceil(max(linear_thresholds(m, epsilon, delta)))


def gen_hypersphere(m: int, dim: int, rng, r_in: float = 1.0, r_out: float = 1.1) -> LabeledDataset:
    """Uniform points on two spheres; label 0 on the inner, 1 on the outer. Balanced."""
    rng = make_rng(rng)
    if m <= 0:
        raise InvalidInput("m must be positive")
    y = np.zeros(m, dtype=np.int64)
    y[m // 2:] = 1
    y = y[rng.permutation(m)]
    G = box_muller(rng, (m, dim))
    G /= np.linalg.norm(G, axis=1, keepdims=True)
    radii = np.where(y == 0, r_in, r_out)
    meta = {"scenario": "hypersphere", "r_in": r_in, "r_out": r_out}
    return LabeledDataset(G * radii[:, None], y, meta)


def hypersphere_bad_dataset(S: LabeledDataset) -> LabeledDataset:
    """Project each point onto the other sphere and flip its label."""
    r_in, r_out = S.meta["r_in"], S.meta["r_out"]
    target = np.where(S.labels == 0, r_out, r_in)
    X = S.inputs / np.linalg.norm(S.inputs, axis=1, keepdims=True) * target[:, None]
    return replace(S, inputs=X, labels=1 - S.labels)


def gen_exp(m: int, N: int, rng, u=None) -> LabeledDataset:
    """x = (y u, x2) in R^{2N}, ||u|| = sqrt(N)/2, x2 ~ N(0, I)."""
    rng = make_rng(rng)
    if m <= 0:
        raise InvalidInput("m must be positive")
    if u is None:
        u = box_muller(rng, N)
        u *= (math.sqrt(N) / 2) / np.linalg.norm(u)
    y = _signs(rng, m)
    X = np.hstack([y[:, None] * u[None, :], box_muller(rng, (m, N))])
    return LabeledDataset(X, y, {"scenario": "exp", "u": u, "N": N})


def exp_bad_dataset(S: LabeledDataset) -> LabeledDataset:
    """((-x1, x2), -y): everything negated except the noise block."""
    N = S.meta["N"]
    X = S.inputs.copy()
    X[:, :N] = -X[:, :N]
    return replace(S, inputs=X, labels=-S.labels)


def exp_conditions(m: int, N: int, epsilon: float, delta: float) -> bool:
    if not (0 < delta < 0.25):
        raise InvalidInput("need 0 < delta < 1/4")
    if epsilon <= 0:
        raise InvalidInput("epsilon must be positive")
    k = max(1.0 / C2, (16 * C3 * C4) ** 2)
    return (
        N >= k * 2 * math.log(6 * m / epsilon)
        and N >= k * 2 * math.log(6 * m / delta)
        and N >= 6 * math.log(2 * m)
        and m > 8 * math.log(6 / delta)
    )


def gen_gaussian_mixture(m: int, dim: int, K: int, rng, spread: float = 1.0) -> LabeledDataset:
    """K isotropic Gaussian blobs around seeded unit-norm means; ``spread`` is the per-coordinate std
    times sqrt(dim), so classes overlap more as it grows.

    The means depend only on ``(dim, K)`` so train and test draws share them.
    """
    if m <= 0 or K < 2:
        raise InvalidInput("need m > 0 and K >= 2")
    rng = make_rng(rng)
    means = make_rng((dim, K, 8191)).standard_normal((K, dim))
    means /= np.linalg.norm(means, axis=1, keepdims=True)
    y = rng.integers(0, K, size=m)
    X = means[y] + rng.standard_normal((m, dim)) * (spread / math.sqrt(dim))
    return LabeledDataset(X, y, {"scenario": "mixture", "K": K, "spread": spread})


def corrupt_labels(S: LabeledDataset, fraction: float, K: int, rng) -> LabeledDataset:
    """Give a uniformly chosen floor(fraction * m) subset uniform random labels in [K]."""
    if not 0 <= fraction <= 1:
        raise InvalidInput("fraction must lie in [0, 1]")
    rng = make_rng(rng)
    m = len(S)
    k = int(math.floor(fraction * m))
    idx = rng.choice(m, size=k, replace=False)
    labels = S.labels.copy()
    labels[idx] = rng.integers(0, K, size=k)
    return replace(S, labels=labels)


def shuffled_split(S: LabeledDataset, n_first: int, seed) -> tuple[LabeledDataset, LabeledDataset]:
    """Seeded shuffle, then the first ``n_first`` points and the remainder."""
    perm = make_rng(seed).permutation(len(S))
    return S.subset(perm[:n_first]), S.subset(perm[n_first:])


def _read_idx_bytes(path) -> bytes:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def _idx_header(raw: bytes, magic: int, ndims: int, what: str):
    need = 4 + 4 * ndims
    if len(raw) < need:
        raise FormatError(f"{what} file too short for its header", len(raw))
    (got,) = struct.unpack_from(">I", raw, 0)
    if got != magic:
        raise FormatError(f"{what} file has magic {got:#010x}, expected {magic:#010x}", 0)
    return struct.unpack_from(f">{ndims}I", raw, 4), need


def load_idx(images_path, labels_path) -> LabeledDataset:
    """Big-endian IDX image/label pair (optionally gzipped); pixels scaled to [0, 1]."""
    img = _read_idx_bytes(images_path)
    lab = _read_idx_bytes(labels_path)
    (n, rows, cols), off = _idx_header(img, 0x00000803, 3, "image")
    size = n * rows * cols
    if len(img) < off + size:
        raise FormatError(f"image data truncated: need {size} bytes", len(img))
    (n_lab,), loff = _idx_header(lab, 0x00000801, 1, "label")
    if len(lab) < loff + n_lab:
        raise FormatError(f"label data truncated: need {n_lab} bytes", len(lab))
    if n_lab != n:
        raise FormatError(f"label count {n_lab} != image count {n}", 4)
    pixels = np.frombuffer(img, dtype=np.uint8, count=size, offset=off).reshape(n, rows * cols)
    labels = np.frombuffer(lab, dtype=np.uint8, count=n, offset=loff)
    return LabeledDataset(pixels / 255.0, labels.astype(np.int64), None)


DEFAULT_MNIST = Path(__file__).resolve().parents[2] / "data"


def load_mnist_subset(n_train: int = 2000, seed: int = 0, root=None):
    """MNIST-2k style split of the bundled 5k subset: (train, test) after a seeded shuffle."""
    root = Path(root) if root is not None else DEFAULT_MNIST
    full = load_idx(root / "mnist5k-images-idx3-ubyte.gz", root / "mnist5k-labels-idx1-ubyte.gz")
    return shuffled_split(full, n_train, seed)


def write_csv(S: LabeledDataset, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(S.dim)] + ["label"])
        for x, y in zip(S.inputs, S.labels):
            w.writerow([f"{v:.17g}" for v in x] + [int(y)])


def read_csv(path) -> LabeledDataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], [r for r in rows[1:] if r and not r[0].startswith("#")]
    if header[-1] != "label":
        raise InvalidInput("last CSV column must be 'label'")
    data = np.array([[float(v) for v in r[:-1]] for r in body]).reshape(len(body), len(header) - 1)
    labels = np.array([int(r[-1]) for r in body], dtype=np.int64)
    return LabeledDataset(data, labels, None)
