"""Transition-matrix estimators built on the lag covariances.

* ``dense_estimate``: pseudoinverse inversion of the lag relation.
* ``dantzig_estimate``: l1-minimal matrix within a max-norm residual tube,
  solved as one small LP per row.
* ``tune_lambda``: bisection on the tube radius to hit a target row sparsity.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, PovarError
from .linalg import RANK_TOL, as_matrix, max_norm, pseudo_inverse
from .lp import OPTIMAL, LinearProgram, solve_lp

log = logging.getLogger(__name__)

SUPPORT_THRESH = 1e-6


@dataclass
class EstimateReport:
    theta_hat: np.ndarray
    method: str
    lam: float | None = None
    row_support: np.ndarray | None = None
    lp_status: list[str] | None = None

    @property
    def max_row_support(self) -> int:
        return int(self.row_support.max()) if self.row_support is not None else 0

    @property
    def ok(self) -> bool:
        return self.lp_status is None or all(s == OPTIMAL for s in self.lp_status)


def row_support(theta_hat: np.ndarray, thresh: float = SUPPORT_THRESH) -> np.ndarray:
    M = np.nan_to_num(np.asarray(theta_hat, float), nan=0.0)
    return (np.abs(M) > thresh).sum(axis=1)


def dense_estimate(gamma_h0, gamma_h0p1, rank_tol: float = RANK_TOL) -> np.ndarray:
    G0 = as_matrix(gamma_h0, "gamma_h0")
    G1 = as_matrix(gamma_h0p1, "gamma_h0p1")
    if G0.shape != G1.shape or G0.shape[0] != G0.shape[1]:
        raise DomainError("covariance estimates must be square with matching shapes")
    return G1 @ pseudo_inverse(G0, rank_tol)


def dantzig_lp(gamma0_hat: np.ndarray, target_row: np.ndarray, lam: float) -> LinearProgram:
    """LP for ``min ||m||_1`` s.t. ``||m' G0 - target||_inf <= lam``.

    Variables are ``(m+, m-) >= 0``; the tube is written as ``2D`` one-sided
    inequalities.
    """
    G = np.asarray(gamma0_hat, float).T
    D = G.shape[0]
    A = np.block([[G, -G], [-G, G]])
    rhs = np.concatenate([target_row + lam, lam - target_row])
    return LinearProgram(np.ones(2 * D), A, rhs, ["<="] * (2 * D))


def dantzig_row(gamma0_hat, target_row, lam: float, return_status: bool = False):
    if lam < 0:
        raise DomainError("lambda must be >= 0")
    G = as_matrix(gamma0_hat, "gamma0_hat")
    r = np.asarray(target_row, float).ravel()
    D = G.shape[0]
    res = solve_lp(dantzig_lp(G, r, lam))
    m = res.x[:D] - res.x[D:] if res.status == OPTIMAL else np.full(D, np.nan)
    return (m, res.status) if return_status else m


def dantzig_estimate(gamma0_hat, gamma1_hat, lam: float,
                     support_thresh: float = SUPPORT_THRESH) -> EstimateReport:
    """Row-by-row Dantzig selector; failing rows are NaN and flagged, not fatal."""
    if lam < 0:
        raise DomainError("lambda must be >= 0")
    G0 = as_matrix(gamma0_hat, "gamma0_hat")
    G1 = as_matrix(gamma1_hat, "gamma1_hat")
    D = G0.shape[0]
    theta = np.empty((D, D))
    status = []
    for i in range(D):
        try:
            theta[i], st = dantzig_row(G0, G1[i], lam, return_status=True)
        except PovarError as exc:
            log.warning("row %d: %s", i, exc)
            theta[i], st = np.nan, f"error: {exc}"
        status.append(st)
    return EstimateReport(theta, "dantzig", float(lam), row_support(theta, support_thresh), status)


def _stat(rep: EstimateReport, statistic: str) -> float:
    if statistic == "max":
        return float(rep.row_support.max())
    if statistic == "mean":
        return float(rep.row_support.mean())
    raise DomainError(f"unknown sparsity statistic {statistic!r}")


def tune_lambda(gamma0_hat, gamma1_hat, target_s: int, max_iter: int = 50,
                slack: int = 0, statistic: str = "max",
                support_thresh: float = SUPPORT_THRESH) -> tuple[float, EstimateReport]:
    """Bisection on ``lambda`` in ``[0, ||G1||_max]`` towards a target row sparsity.

    Larger ``lambda`` gives sparser estimates. Both endpoints are tried
    first: if the unregularised fit is already no denser than the target it
    is returned directly. The search stops as soon as the sparsity statistic
    lies in ``[target_s, target_s + slack]``; otherwise the iterate closest to
    the target after ``max_iter`` steps is returned (ties go to the later one).
    """
    G0 = as_matrix(gamma0_hat)
    D = G0.shape[0]
    if not 0 <= target_s <= D:
        raise DomainError("target_s must lie in [0, D]")
    hi = max_norm(gamma1_hat)
    top = dantzig_estimate(G0, gamma1_hat, hi, support_thresh)
    if target_s == 0 or hi == 0.0:
        return hi, top
    bottom = dantzig_estimate(G0, gamma1_hat, 0.0, support_thresh)
    if _stat(bottom, statistic) <= target_s + slack:
        return 0.0, bottom

    best_gap, best = None, None
    lo = 0.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        rep = dantzig_estimate(G0, gamma1_hat, mid, support_thresh)
        k = _stat(rep, statistic)
        gap = abs(k - target_s)
        if best_gap is None or gap <= best_gap:
            best_gap, best = gap, (mid, rep)
        if target_s <= k <= target_s + slack:
            return mid, rep
        if k > target_s:
            lo = mid
        else:
            hi = mid
    return best
