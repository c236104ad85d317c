"""Dense float64 kernels: matrix norms, Gaussian sampling, spherical-Gaussian KL."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class InvalidInput(ValueError):
    """Raised when an operation receives arguments outside its contract."""


# Reading of the (2,1) group norm used by the Bartlett et al. baseline.
# "columns": sum of column l2 norms; "rows": sum of row l2 norms.
NORM_2_1_CONVENTION = "columns"


def as_matrix(M) -> np.ndarray:
    A = np.asarray(M, dtype=np.float64)
    if A.ndim == 1:
        A = A[None, :]
    if A.ndim != 2:
        raise InvalidInput(f"expected a 2-d matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInput("matrix has non-finite entries")
    return A


@dataclass(frozen=True)
class PowerIterationResult:
    value: float
    converged: bool
    iterations: int


def power_iteration(M, tol: float = 1e-10, max_iters: int = 10_000) -> PowerIterationResult:
    """Top singular value of ``M`` by power iteration on the smaller Gram matrix.

    Starts from the normalized all-ones vector and stops once the eigen-residual
    ``||G v - lam v||`` falls below ``tol * lam``.
    """
    A = as_matrix(M)
    if A.size == 0:
        raise InvalidInput("empty matrix")
    if tol <= 0:
        raise InvalidInput("tol must be positive")
    G = A.T @ A if A.shape[1] <= A.shape[0] else A @ A.T
    n = G.shape[0]
    v = np.full(n, 1.0 / np.sqrt(n))
    lam = 0.0
    for it in range(1, max_iters + 1):
        w = G @ v
        lam = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return PowerIterationResult(0.0, True, it)
        resid = np.linalg.norm(w - lam * v)
        if resid <= tol * max(lam, np.finfo(float).tiny):
            return PowerIterationResult(float(np.sqrt(max(lam, 0.0))), True, it)
        v = w / nw
    return PowerIterationResult(float(np.sqrt(max(lam, 0.0))), False, max_iters)


def spectral_norm(M, tol: float = 1e-10, max_iters: int = 10_000) -> float:
    return power_iteration(M, tol, max_iters).value


def spectral_norms(stack: np.ndarray) -> np.ndarray:
    """Spectral norms of a stack of matrices with shape (..., r, c), via LAPACK."""
    stack = np.asarray(stack, dtype=np.float64)
    if stack.shape[-1] == 0 or stack.shape[-2] == 0:
        return np.zeros(stack.shape[:-2])
    return np.linalg.svd(stack, compute_uv=False)[..., 0]


def frobenius_norm(M) -> float:
    A = as_matrix(M)
    return float(np.sqrt(np.sum(A * A)))


def norm_2_1(M, convention: str | None = None) -> float:
    """Sum of column (default) or row l2 norms."""
    A = as_matrix(M)
    convention = convention or NORM_2_1_CONVENTION
    if convention == "columns":
        return float(np.sum(np.sqrt(np.sum(A * A, axis=0))))
    if convention == "rows":
        return float(np.sum(np.sqrt(np.sum(A * A, axis=1))))
    raise InvalidInput(f"unknown (2,1)-norm convention {convention!r}")


def max_row_l2(M) -> float:
    A = as_matrix(M)
    return float(np.max(np.sqrt(np.sum(A * A, axis=1))))


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator; ``seed`` may be an int or a tuple of ints (derived streams)."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, (tuple, list)):
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(seed))))
    return np.random.Generator(np.random.PCG64(int(seed)))


def box_muller(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard normal draws from pairs of uniforms (Box-Muller transform)."""
    shape = (shape,) if np.isscalar(shape) else tuple(shape)
    n = int(np.prod(shape))
    half = (n + 1) // 2
    u1 = 1.0 - rng.random(half)  # (0, 1]
    u2 = rng.random(half)
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    z = np.empty(2 * half)
    z[0::2] = r * np.cos(theta)
    z[1::2] = r * np.sin(theta)
    return z[:n].reshape(shape)


def sample_gaussian_matrix(rows: int, cols: int, sigma: float, rng) -> np.ndarray:
    if sigma < 0:
        raise InvalidInput("sigma must be nonnegative")
    rng = make_rng(rng)
    if sigma == 0:
        return np.zeros((rows, cols))
    return sigma * box_muller(rng, (rows, cols))


def kl_spherical_gaussians(mu1, mu2, sigma: float) -> float:
    """KL(N(mu1, s^2 I) || N(mu2, s^2 I)) = ||mu2 - mu1||^2 / (2 s^2)."""
    if sigma <= 0:
        raise InvalidInput("sigma must be positive")
    a = np.ravel(np.asarray(mu1, dtype=np.float64))
    b = np.ravel(np.asarray(mu2, dtype=np.float64))
    if a.shape != b.shape:
        raise InvalidInput(f"dimension mismatch: {a.shape} vs {b.shape}")
    diff = b - a
    return float(diff @ diff) / (2.0 * sigma * sigma)
