"""Error-bound quantities and small-scale covariance/KL machinery.

All bound values carry an unknown universal constant which is set to 1
here; only their dependence on the problem parameters is meaningful.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, EmptyProjectionError, ScaleError
from .linalg import (as_matrix, check_psd, op_norm_1, op_norm_inf, spectral_norm,
                     stationary_covariance, sym_inv_sqrt)

MAX_VERIFY_SIZE = 200
# ||theta||_2 enters through 1 / (1 - ||theta||_2)^2, which amplifies its
# relative error by 2 vartheta / (1 - vartheta); bounds use a tighter tolerance
NORM_TOL = 1e-14
CONSTANTS_NOTE = "universal constants c set to 1; only ratios and slopes are meaningful"


@dataclass
class BoundReport:
    q_u: float
    q_l: float
    gamma_u: float
    gamma_l: float
    err_delta: float
    upper_bound: float
    lower_bound_threshold: float
    delta: float
    oracle_lambda: float
    large_T: dict = field(default_factory=dict)
    constants_note: str = CONSTANTS_NOTE

    @property
    def warnings(self) -> list[str]:
        return [f"large-T condition {k!r} violated" for k, ok in self.large_T.items() if not ok]

    def as_dict(self) -> dict:
        out = {k: getattr(self, k) for k in (
            "q_u", "q_l", "gamma_u", "gamma_l", "err_delta", "upper_bound",
            "lower_bound_threshold", "delta", "oracle_lambda")}
        for k, ok in self.large_T.items():
            out[f"large_T_{k}"] = ok
        out["constants_note"] = self.constants_note
        return out


def q_upper(p: float, b: float) -> float:
    return min(p, 1.0 - b)


def q_lower(p: float, b: float) -> float:
    return max(1.0 - b, 2.0 * p - (1.0 - b))


def gamma_upper(theta, Sigma, omega2: float, rank_tol: float = 1e-12) -> float:
    """``(||theta||_inf + 1) / (1 - ||theta||_2)^2 * (sigma2_max + omega2) * ||Gamma_0^{-1}||_1``."""
    A = as_matrix(getattr(theta, "entries", theta), "theta")
    S = check_psd(Sigma)
    G0 = stationary_covariance(A, S)
    lam = np.linalg.eigvalsh(G0)
    if lam[0] <= rank_tol * lam[-1]:
        raise DomainError("Gamma_0 is singular")
    s2max = float(np.linalg.eigvalsh(S)[-1])
    norm2 = spectral_norm(A, tol=NORM_TOL)
    return (op_norm_inf(A) + 1.0) / (1.0 - norm2) ** 2 * (s2max + omega2) * op_norm_1(np.linalg.inv(G0))


def gamma_lower(vartheta: float, sigma2_min: float, sigma2_max: float, omega2: float) -> float:
    return (1.0 - vartheta) ** 1.5 * (sigma2_min + omega2) / sigma2_max


def bound_quantities(theta, Sigma, omega2: float, p: float, a: float, b: float,
                     T: int, D: int, s: int, delta: float = 0.05, N: int = 1) -> BoundReport:
    """Upper/lower bound ingredients for a configuration.

    ``N`` independent realizations count as ``N * T`` samples.
    """
    if not 0.0 < delta < 1.0:
        raise DomainError("delta must lie in (0, 1)")
    if not 0.0 < p <= 1.0:
        raise DomainError("p must lie in (0, 1]")
    if a + b > 0 and abs(a / (a + b) - p) > 1e-12:
        raise DomainError("sampling chain is not stationary at p")
    A = as_matrix(getattr(theta, "entries", theta), "theta")
    vartheta = float(getattr(theta, "vartheta", spectral_norm(A, tol=NORM_TOL)))
    S = check_psd(Sigma)
    lam = np.linalg.eigvalsh(S)
    s2min, s2max = float(lam[0]), float(lam[-1])
    n_eff = T * N

    qu, ql = q_upper(p, b), q_lower(p, b)
    gu = gamma_upper(A, S, omega2)
    gl = gamma_lower(vartheta, s2min, s2max, omega2)
    root_log = np.sqrt(np.log(D / delta))
    err = (s2max + omega2) / (1.0 - vartheta) ** 2 * root_log / np.sqrt(n_eff * p * qu)
    upper = gu * s * root_log / np.sqrt(n_eff * p * qu)
    lower = gl * s / np.sqrt(n_eff * p * ql)
    large_T = {
        "upper_1": np.sqrt(np.log(1.0 / delta) / (n_eff * p * qu)) <= 1.0,
        "upper_2": np.sqrt(np.log(1.0 / delta)) * max(1.0, 1.0 / (s2max + omega2))
        / ((1.0 - vartheta) ** 2 * np.sqrt(n_eff * p * qu)) <= 1.0,
        "minimax_1": gl * s / (np.sqrt(p) * ql * np.sqrt(n_eff)) <= 1.0,
        "minimax_2": lower <= min(vartheta, gl * np.sqrt(1.0 - vartheta)),
    }
    large_T = {k: bool(v) for k, v in large_T.items()}
    return BoundReport(qu, ql, gu, gl, float(err), float(upper), float(lower), delta,
                       float((op_norm_inf(A) + 1.0) * err), large_T)


def _check_scale(T: int, D: int) -> None:
    if T * D > MAX_VERIFY_SIZE:
        raise ScaleError(f"T*D = {T * D} exceeds verification cap {MAX_VERIFY_SIZE}")


def residual_R(theta, Sigma, T: int) -> np.ndarray:
    """``Cov[X] - blockdiag_T(Sigma)`` for the stacked state ``(X_1, ..., X_T)``.

    Block ``(t, s)`` is ``theta^(t-s) G0`` below the diagonal, ``G0 theta'^(s-t)``
    above it and ``theta G0 theta'`` on it.
    """
    A = as_matrix(getattr(theta, "entries", theta), "theta")
    D = A.shape[0]
    _check_scale(T, D)
    G0 = stationary_covariance(A, Sigma)
    powers = [np.eye(D)]
    for _ in range(1, T):
        powers.append(A @ powers[-1])
    R = np.empty((T * D, T * D))
    diag = A @ G0 @ A.T
    for t in range(T):
        for s in range(T):
            if t == s:
                blk = diag
            elif t > s:
                blk = powers[t - s] @ G0
            else:
                blk = G0 @ powers[s - t].T
            R[t * D:(t + 1) * D, s * D:(s + 1) * D] = blk
    return R


def state_covariance(theta, Sigma, T: int) -> np.ndarray:
    """Full ``TD x TD`` covariance of the stacked stationary states."""
    S = np.asarray(Sigma, float)
    return residual_R(theta, S, T) + np.kron(np.eye(T), S)


def selection_matrix(Pi_mask) -> np.ndarray:
    """Rows of the identity picking the sampled ``(t, d)`` pairs, time-major."""
    M = np.asarray(Pi_mask).astype(bool)
    idx = np.flatnonzero(M.ravel())
    if idx.size == 0:
        raise EmptyProjectionError("sampling mask selects no entry")
    P = np.zeros((idx.size, M.size))
    P[np.arange(idx.size), idx] = 1.0
    return P


def conditional_covariance(theta, Sigma, omega2: float, Pi_mask) -> np.ndarray:
    """Covariance of the sampled observations given the mask: ``omega2 I + P Cov[X] P'``."""
    M = np.asarray(Pi_mask)
    T, D = M.shape
    _check_scale(T, D)
    P = selection_matrix(M)
    C = state_covariance(theta, Sigma, T)
    return omega2 * np.eye(P.shape[0]) + P @ C @ P.T


def _logdet_pd(S: np.ndarray, name: str) -> float:
    lam = np.linalg.eigvalsh(S)
    if lam[0] <= 0:
        raise DomainError(f"{name} is not positive definite")
    return float(np.log(lam).sum())


def gaussian_kl(Sigma0, Sigma1) -> float:
    """``KL(N(0, Sigma0) || N(0, Sigma1))``."""
    S0 = check_psd(Sigma0, "Sigma0")
    S1 = check_psd(Sigma1, "Sigma1")
    if S0.shape != S1.shape:
        raise DomainError("covariance shapes differ")
    n = S0.shape[0]
    ld0 = _logdet_pd(S0, "Sigma0")
    ld1 = _logdet_pd(S1, "Sigma1")
    tr = float(np.trace(np.linalg.solve(S1, S0)))
    return 0.5 * (tr - n + ld1 - ld0)


def kl_bound_check(theta, Sigma, omega2: float, Pi_mask) -> tuple[float, float]:
    """Exact conditional KL between the model at ``theta`` and at 0, and its bound.

    The bound is ``||Delta||_F^2 / (2 (1 + lambda_min(Delta)))`` with
    ``Delta = Q^{-1/2} R_Pi Q^{-1/2}``, ``Q`` the covariance at ``theta = 0``.
    """
    A = as_matrix(getattr(theta, "entries", theta), "theta")
    S = check_psd(Sigma)
    M = np.asarray(Pi_mask)
    T, D = M.shape
    _check_scale(T, D)
    P = selection_matrix(M)
    R_pi = P @ residual_R(A, S, T) @ P.T
    Q = P @ np.kron(np.eye(T), S) @ P.T + omega2 * np.eye(P.shape[0])
    floor = float(np.linalg.eigvalsh(S)[0]) + omega2
    if floor <= 0:
        raise DomainError("need sigma2_min + omega2 > 0")
    Qih = sym_inv_sqrt(Q, floor * (1.0 - 1e-9))
    Delta = Qih @ R_pi @ Qih
    Delta = 0.5 * (Delta + Delta.T)
    lmin = float(np.linalg.eigvalsh(Delta)[0])
    bound = float((Delta**2).sum()) / (2.0 * (1.0 + lmin))
    exact = gaussian_kl(0.5 * ((Q + R_pi) + (Q + R_pi).T), Q)
    return exact, bound


def residual_norm_caps(theta, Sigma, T: int, vartheta: float | None = None) -> dict:
    """Measured norms of ``R(theta)`` next to their closed-form caps."""
    A = as_matrix(getattr(theta, "entries", theta), "theta")
    if vartheta is None:
        vartheta = float(getattr(theta, "vartheta", spectral_norm(A, tol=NORM_TOL)))
    s2max = float(np.linalg.eigvalsh(np.asarray(Sigma, float))[-1])
    R = residual_R(A, Sigma, T)
    n2 = spectral_norm(A, tol=NORM_TOL)
    nf2 = float((A**2).sum())
    return {
        "spectral": (float(np.linalg.norm(R, 2)), 2 * s2max / (1 - vartheta) ** 2 * n2),
        "frobenius_sq": (float((R**2).sum()), 2 * T * s2max**2 / (1 - vartheta) ** 3 * nf2),
        "hadamard_trace": (float(np.trace(R * R)), T * s2max**2 / (1 - vartheta) ** 2 * n2**2 * nf2),
    }


def fisher_info_1d(theta: float, sigma2: float, omega2: float, T: int) -> float:
    """Exact Fisher information about ``theta`` in ``T`` fully observed noisy AR(1) values.

    Uses ``0.5 * tr[(C^{-1} dC)^2]`` with ``C = omega2 I + Cov[X]`` and
    ``Cov[X]_{ts} = sigma2 theta^|t-s| / (1 - theta^2)``, differentiated
    entrywise in closed form.
    """
    if not abs(theta) < 1.0:
        raise DomainError("need |theta| < 1")
    if T < 1 or T > 500:
        raise ScaleError("fisher_info_1d supports 1 <= T <= 500")
    k = np.abs(np.subtract.outer(np.arange(T), np.arange(T)))
    one_m = 1.0 - theta**2
    C = sigma2 * theta**k / one_m + omega2 * np.eye(T)
    lower = np.where(k > 0, k * np.power(theta, np.maximum(k - 1, 0)), 0.0)
    dC = sigma2 * (lower * one_m + 2.0 * theta ** (k + 1)) / one_m**2
    W = np.linalg.solve(C, dC)
    return 0.5 * float(np.trace(W @ W))
