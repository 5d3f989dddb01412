"""Dense two-phase primal simplex with Bland's pivoting rule.

Bland's rule (lowest-index entering column, lowest-index leaving basic
variable among ratio ties) cannot cycle, so the solver always terminates and
is fully deterministic. It is meant for the small dense programs arising
row by row in the Dantzig selector, not for large sparse LPs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, LPSolverError

FEAS_TOL = 1e-9
PIVOT_TOL = 1e-11
MAX_PIVOTS = 50_000

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass
class LinearProgram:
    """``minimize c'x`` subject to ``A x (sense) b`` row by row.

    ``sense`` entries are ``"<="``, ``">="`` or ``"="``. ``lower`` holds 0 for
    a non-negative variable and ``None`` for a free one; by default every
    variable is non-negative.
    """

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    sense: Sequence[str] = ()
    lower: Sequence[float | None] = ()

    def __post_init__(self):
        self.c = np.asarray(self.c, float).ravel()
        self.A = np.atleast_2d(np.asarray(self.A, float))
        self.b = np.asarray(self.b, float).ravel()
        m, n = self.A.shape
        if not self.sense:
            self.sense = ["<="] * m
        if not self.lower:
            self.lower = [0.0] * n
        self.sense = list(self.sense)
        self.lower = list(self.lower)
        if self.c.size != n or self.b.size != m or len(self.sense) != m or len(self.lower) != n:
            raise DomainError("inconsistent linear program dimensions")
        for arr in (self.c, self.A, self.b):
            if not np.all(np.isfinite(arr)):
                raise DomainError("linear program has non-finite coefficients")
        bad = set(self.sense) - {"<=", ">=", "="}
        if bad:
            raise DomainError(f"unknown constraint sense {bad}")
        if any(lo not in (0, 0.0, None) for lo in self.lower):
            raise DomainError("lower bounds must be 0 or None")


@dataclass
class LPResult:
    x: np.ndarray | None
    status: str
    objective: float
    iterations: int = 0
    info: dict = field(default_factory=dict)


class _Tableau:
    def __init__(self, T: np.ndarray, basis: list[int]):
        self.T = T
        self.basis = basis
        self.pivots = 0

    def pivot(self, r: int, j: int) -> None:
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        T[:, j] = 0.0
        T[r, j] = 1.0
        self.basis[r] = j
        self.pivots += 1

    def run(self, allowed: np.ndarray, max_pivots: int) -> str:
        T = self.T
        m = T.shape[0] - 1
        while True:
            if self.pivots >= max_pivots:
                raise LPSolverError(
                    f"simplex exceeded {max_pivots} pivots",
                    {"basis": list(self.basis), "objective": -T[m, -1]},
                )
            cand = np.flatnonzero(allowed & (T[m, :-1] < -FEAS_TOL))
            if cand.size == 0:
                return OPTIMAL
            j = int(cand[0])
            colj = T[:m, j]
            rows = np.flatnonzero(colj > PIVOT_TOL)
            if rows.size == 0:
                return UNBOUNDED
            ratios = T[rows, -1] / colj[rows]
            best = ratios.min()
            ties = rows[ratios <= best + FEAS_TOL * max(1.0, abs(best))]
            r = int(min(ties, key=lambda i: self.basis[i]))
            self.pivot(r, j)


def solve_lp(lp: LinearProgram, max_pivots: int = MAX_PIVOTS) -> LPResult:
    """Solve ``lp``; returns an optimal basic solution or an infeasible/unbounded status.

    Raises
    ------
    LPSolverError
        If the pivot budget is exhausted.
    """
    A, b, c = lp.A.copy(), lp.b.copy(), lp.c
    m, n = A.shape

    # free variables are split as x = x+ - x-
    cols, cost, back = [], [], []
    for j in range(n):
        cols.append(A[:, j]); cost.append(c[j]); back.append((j, 1.0))
        if lp.lower[j] is None:
            cols.append(-A[:, j]); cost.append(-c[j]); back.append((j, -1.0))
    A_s = np.column_stack(cols) if cols else np.zeros((m, 0))
    cost = list(cost)
    sense = list(lp.sense)
    for i in range(m):
        if b[i] < 0:
            A_s[i] *= -1.0
            b[i] *= -1.0
            sense[i] = {"<=": ">=", ">=": "<=", "=": "="}[sense[i]]

    n_struct = A_s.shape[1]
    extra, basis = [], [-1] * m
    for i, sg in enumerate(sense):
        if sg == "=":
            continue
        e = np.zeros(m)
        e[i] = 1.0 if sg == "<=" else -1.0
        extra.append(e)
        cost.append(0.0)
        if sg == "<=":
            basis[i] = n_struct + len(extra) - 1
    n_real = n_struct + len(extra)
    art_rows = [i for i in range(m) if basis[i] < 0]
    for k, i in enumerate(art_rows):
        e = np.zeros(m)
        e[i] = 1.0
        extra.append(e)
        basis[i] = n_real + k
    n_tot = n_real + len(art_rows)

    T = np.zeros((m + 1, n_tot + 1))
    if m:
        T[:m, :n_struct] = A_s
        if extra:
            T[:m, n_struct:n_tot] = np.column_stack(extra)
        T[:m, -1] = b
    tab = _Tableau(T, basis)
    is_art = np.zeros(n_tot, dtype=bool)
    is_art[n_real:] = True

    if art_rows:
        T[m, :] = -T[art_rows, :].sum(axis=0)
        T[m, n_real:n_tot] = 0.0
        tab.run(np.ones(n_tot, dtype=bool), max_pivots)
        if -T[m, -1] > FEAS_TOL * max(1.0, np.abs(b).max(initial=0.0)):
            return LPResult(None, INFEASIBLE, np.nan, tab.pivots)
        # drive zero-level artificials out of the basis, dropping redundant rows
        keep = []
        for r in range(m):
            if is_art[tab.basis[r]]:
                nz = np.flatnonzero(np.abs(T[r, :n_real]) > 1e-9)
                if nz.size:
                    tab.pivot(r, int(nz[0]))
                    keep.append(r)
            else:
                keep.append(r)
        if len(keep) < m:
            T = np.vstack([T[keep], T[m:m + 1]])
            tab.T = T
            tab.basis = [tab.basis[r] for r in keep]
            m = len(keep)

    cfull = np.zeros(n_tot)
    cfull[:n_real] = cost
    cB = cfull[tab.basis]
    T[m, :-1] = cfull - cB @ T[:m, :-1]
    T[m, -1] = -cB @ T[:m, -1]
    status = tab.run(~is_art, max_pivots)
    if status == UNBOUNDED:
        return LPResult(None, UNBOUNDED, -np.inf, tab.pivots)

    z = np.zeros(n_tot)
    z[tab.basis] = T[:m, -1]
    x = np.zeros(n)
    for k, (j, sgn) in enumerate(back):
        x[j] += sgn * z[k]
    return LPResult(x, OPTIMAL, float(c @ x), tab.pivots)
