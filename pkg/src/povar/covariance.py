"""Lagged covariances: closed forms and the masked, rescaled estimator."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateSamplingError, DomainError
from .linalg import stationary_covariance

ALLOWED_LAGS = (0, 1, 2)


@dataclass(frozen=True)
class CovarianceEstimate:
    h: int
    gamma_hat: np.ndarray
    scaling: np.ndarray
    samples_used: int


def _check_lag(h: int) -> int:
    if h not in ALLOWED_LAGS:
        raise DomainError(f"lag must be one of {ALLOWED_LAGS}, got {h}")
    return int(h)


def true_covariance(theta, Sigma, h: int) -> np.ndarray:
    """``Cov[X_{t+h}, X_t] = theta^h Gamma_0``."""
    if h < 0:
        raise DomainError("lag must be >= 0")
    A = getattr(theta, "entries", theta)
    A = np.asarray(A, float)
    G = stationary_covariance(A, Sigma)
    return np.linalg.matrix_power(A, int(h)) @ G


def scaling_matrix(p: float, a: float, b: float, h: int, D: int) -> np.ndarray:
    """Second moments ``E[pi_{t+h, d1} pi_{t, d2}]`` of the stationary sampling chains.

    Off-diagonal entries are ``p^2`` (independent chains); the diagonal is
    ``p`` at lag 0 and ``p^2 + p(1-p)(1-a-b)^h`` otherwise.
    """
    if h < 0:
        raise DomainError("lag must be >= 0")
    if not 0.0 < p <= 1.0:
        raise DegenerateSamplingError(f"p must lie in (0, 1], got {p}")
    if a + b > 0 and abs(a / (a + b) - p) > 1e-12:
        raise DomainError("sampling chain is not stationary at p")
    S = np.full((D, D), p * p)
    diag = p if h == 0 else p * p + p * (1.0 - p) * (1.0 - a - b) ** h
    np.fill_diagonal(S, diag)
    if np.any(S <= 0):
        raise DegenerateSamplingError("scaling matrix has a non-positive entry")
    return S


def min_scaling(p: float, b: float) -> float:
    """Smallest scaling-matrix entry over lags 0 and 1: ``p * min(p, 1 - b)``."""
    return p * min(p, 1.0 - b)


def _lag_products(Z: np.ndarray, h: int) -> np.ndarray:
    T = Z.shape[0]
    return Z[h:].T @ Z[:T - h]


def estimate_covariance(trajectories: Sequence, h: int, omega2: float, scaling) -> CovarianceEstimate:
    """Masked lag-``h`` covariance, rescaled entrywise by ``scaling``.

    Realizations are pooled: lagged products and sample counts are summed
    over trajectories (in list order) before normalising, so no product ever
    straddles two realizations. At lag 0 the known noise variance is removed
    from the diagonal.
    """
    h = _check_lag(h)
    S = np.asarray(scaling, float)
    if np.any(S <= 0):
        raise DegenerateSamplingError("scaling matrix has a non-positive entry")
    if omega2 < 0:
        raise DomainError("omega2 must be >= 0")
    trajectories = list(trajectories)
    if not trajectories:
        raise DomainError("no trajectories given")
    D = trajectories[0].Y.shape[1]
    if S.shape != (D, D):
        raise DomainError("scaling shape does not match the data dimension")
    num = np.zeros((D, D))
    count = 0
    for tr in trajectories:
        T = tr.Y.shape[0]
        if h >= T:
            raise DomainError(f"lag {h} needs T > {h}, got T = {T}")
        Z = np.where(np.asarray(tr.Pi) != 0, tr.Y, 0.0)
        num += _lag_products(Z, h)
        count += T - h
    G = num / count / S
    if h == 0:
        G = G - omega2 * np.eye(D)
    return CovarianceEstimate(h, G, S, count)


def estimate_pair(trajectories, cfg, h0: int | None = None):
    """Estimates at lags ``h0`` and ``h0 + 1`` using the config's sampling law."""
    h0 = cfg.h0 if h0 is None else h0
    out = []
    for h in (h0, h0 + 1):
        S = scaling_matrix(cfg.p, cfg.a, cfg.b, h, cfg.D)
        out.append(estimate_covariance(trajectories, h, cfg.omega2, S))
    return out[0], out[1]
