"""Small dense matrix kernels.

Norm conventions follow the usual operator definitions:

* ``op_norm_inf`` -- maximum absolute row sum,
* ``op_norm_1``   -- maximum absolute column sum,
* ``max_norm``    -- largest absolute entry,
* ``spectral_norm`` -- largest singular value.
"""
from __future__ import annotations

import numpy as np

from .errors import ConvergenceError, DomainError, InstabilityError

SPECTRAL_TOL = 1e-10
RANK_TOL = 1e-10
MAX_ITER = 10_000
_RESTART_SEED = 20230917


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Return ``M`` as a finite, non-empty 2-D float array."""
    A = np.asarray(M, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    elif A.ndim == 1:
        A = A.reshape(1, -1)
    if A.ndim != 2:
        raise DomainError(f"{name} must be 2-D, got shape {A.shape}")
    if A.size == 0:
        raise DomainError(f"{name} is empty")
    if not np.all(np.isfinite(A)):
        raise DomainError(f"{name} has non-finite entries")
    return A


def op_norm_inf(M) -> float:
    A = as_matrix(M)
    return float(np.abs(A).sum(axis=1).max())


def op_norm_1(M) -> float:
    A = as_matrix(M)
    return float(np.abs(A).sum(axis=0).max())


def max_norm(M) -> float:
    A = as_matrix(M)
    return float(np.abs(A).max())


def _power_iteration(G: np.ndarray, v: np.ndarray, tol: float, max_iter: int):
    # Stops on an extrapolated error estimate: with geometric convergence at
    # ratio r the remaining error is about delta * r / (1 - r), so a plain
    # "small step" test would stop far too early when r is close to 1.
    v = v / np.linalg.norm(v)
    rho = float(v @ G @ v)
    prev = None
    for it in range(1, max_iter + 1):
        w = G @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0, v, it
        v = w / nw
        new = float(v @ G @ v)
        delta = abs(new - rho)
        scale = tol * max(abs(new), np.finfo(float).tiny)
        if delta == 0.0:
            return new, v, it
        if prev:
            r = min(delta / prev, 0.999999)
            if delta * r / (1.0 - r) <= scale and delta <= scale:
                return new, v, it
        elif delta <= 1e-3 * scale:
            return new, v, it
        prev, rho = delta, new
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} steps", last=(rho, v)
    )


def spectral_norm(M, tol: float = SPECTRAL_TOL, max_iter: int = MAX_ITER) -> float:
    """Largest singular value of ``M`` by power iteration on ``M'M``.

    The iteration starts from the normalised all-ones vector, then once more
    from a fixed-seed random vector; the larger Rayleigh quotient wins. The
    second start covers inputs whose dominant direction is orthogonal to the
    all-ones vector.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    A = as_matrix(M)
    G = A.T @ A
    if not np.any(G):
        return 0.0
    n = G.shape[0]
    rho1, _, _ = _power_iteration(G, np.ones(n), tol, max_iter)
    rng = np.random.default_rng(_RESTART_SEED)
    rho2, _, _ = _power_iteration(G, rng.standard_normal(n), tol, max_iter)
    return float(np.sqrt(max(rho1, rho2, 0.0)))


def pseudo_inverse(M, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Moore-Penrose pseudoinverse with relative singular-value truncation."""
    if rank_tol <= 0:
        raise DomainError("rank_tol must be positive")
    A = as_matrix(M)
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros(A.T.shape)
    keep = s >= rank_tol * s[0]
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    return (Vt.T * inv) @ U.T


def is_symmetric(M: np.ndarray, tol: float = 1e-10) -> bool:
    scale = max(1.0, float(np.abs(M).max()))
    return bool(np.abs(M - M.T).max() <= tol * scale)


def check_psd(Sigma, name: str = "Sigma", tol: float = 1e-10) -> np.ndarray:
    S = as_matrix(Sigma, name)
    if S.shape[0] != S.shape[1]:
        raise DomainError(f"{name} must be square")
    if not is_symmetric(S, tol):
        raise DomainError(f"{name} is not symmetric")
    lam = np.linalg.eigvalsh(S)
    if lam[0] < -tol * max(1.0, abs(lam[-1])):
        raise DomainError(f"{name} is not positive semi-definite (min eigenvalue {lam[0]:.3g})")
    return S


def sym_sqrt(S: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix (negative round-off clipped)."""
    lam, V = np.linalg.eigh(S)
    return (V * np.sqrt(np.clip(lam, 0.0, None))) @ V.T


def sym_inv_sqrt(S: np.ndarray, floor: float) -> np.ndarray:
    """``S^{-1/2}`` with eigenvalues floored at ``floor`` (> 0)."""
    lam, V = np.linalg.eigh(S)
    lam = np.maximum(lam, floor)
    return (V / np.sqrt(lam)) @ V.T


def stationary_covariance(theta, Sigma, tol: float = 1e-12, max_iter: int = MAX_ITER) -> np.ndarray:
    """Solve ``G = theta G theta' + Sigma`` for the stationary covariance.

    Uses the doubling form of the fixed-point recursion: after ``k`` steps the
    iterate equals the series ``sum_{j < 2^k} theta^j Sigma theta'^j``, so the
    error contracts like ``||theta||_2^(2^(k+1))``.

    Raises
    ------
    InstabilityError
        If ``spectral_norm(theta) >= 1``.
    DomainError
        If ``Sigma`` is not symmetric positive semi-definite.
    """
    A = as_matrix(theta, "theta")
    S = check_psd(Sigma)
    if A.shape[0] != A.shape[1] or A.shape != S.shape:
        raise DomainError("theta and Sigma must be square with equal shapes")
    # power iteration approaches ||theta||_2 from below, hence the margin
    if spectral_norm(A) >= 1.0 - SPECTRAL_TOL:
        raise InstabilityError("spectral norm of theta must be < 1")
    G = S.copy()
    P = A.copy()
    for _ in range(max_iter):
        step = P @ G @ P.T
        G = G + step
        P = P @ P
        if not np.all(np.isfinite(G)):
            raise InstabilityError("stationary covariance diverged")
        if np.abs(step).max() < tol:
            break
    else:
        raise ConvergenceError("stationary covariance did not converge", last=G)
    return 0.5 * (G + G.T)


def lyapunov_residual(theta, Sigma, G) -> float:
    A = np.asarray(theta, float)
    return max_norm(G - A @ G @ A.T - np.asarray(Sigma, float))
