"""Monte Carlo sweeps over one model parameter, with robust log-log slope fits.

Each (grid point, replicate) cell is independent: it derives its own seed
from ``(master_seed, grid index, replicate)``, draws a fresh transition
matrix, simulates, estimates and records the errors. Cells may run in a
process pool; results are sorted canonically afterwards so the table never
depends on scheduling.
"""
from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .covariance import estimate_pair
from .errors import DomainError, PovarError
from .estimator import dense_estimate, tune_lambda
from .linalg import as_matrix, max_norm, op_norm_inf
from .model import ModelConfig, gen_sparse_theta, independent_sampling, markov_a_for, require_valid
from .simulate import simulate

log = logging.getLogger(__name__)

PANELS = {
    "T": "a",
    "omega": "b",
    "D_fixed_s": "c",
    "s_fixed_D": "d",
    "p_h0": "e",
    "p_b_heatmap": "f",
}
# panels drawn as log-log scatters get a slope per series
SLOPE_PANELS = ("a", "c", "d", "e")
LOG_FLOOR = 1e-15

CSV_COLUMNS = ["panel", "param_name", "param_value", "param_value2", "replicate", "seed",
               "estimator", "error_linf_op", "error_max", "lambda", "wall_ms"]
FAILURE_COLUMNS = ["panel", "param_name", "param_value", "param_value2", "replicate", "seed", "reason"]


def error_metric(theta_hat, theta) -> float:
    """``||theta_hat - theta||_inf`` (maximum absolute row sum)."""
    A = as_matrix(theta_hat, "theta_hat")
    B = as_matrix(getattr(theta, "entries", theta), "theta")
    if A.shape != B.shape:
        raise DomainError(f"shape mismatch {A.shape} vs {B.shape}")
    return op_norm_inf(A - B)


def theil_sen(points) -> tuple[float, float]:
    """Median of pairwise slopes, and median of the residual offsets."""
    pts = np.asarray(points, float).reshape(-1, 2)
    x, y = pts[:, 0], pts[:, 1]
    i, j = np.triu_indices(x.size, k=1)
    keep = x[i] != x[j]
    if not keep.any():
        raise DomainError("theil_sen needs at least two distinct x values")
    slopes = (y[j] - y[i])[keep] / (x[j] - x[i])[keep]
    slope = float(np.median(slopes))
    return slope, float(np.median(y - slope * x))


def loglog_slope(x, err) -> tuple[float, float]:
    x = np.asarray(x, float)
    e = np.maximum(np.asarray(err, float), LOG_FLOOR)
    return theil_sen(np.column_stack([np.log(x), np.log(e)]))


@dataclass
class SweepSpec:
    """One panel of the study.

    ``grid`` holds scalars, or ``(p, b)`` pairs for the heatmap. ``series_h0``
    lists the lags ``h0`` to run for the ``p_h0`` panel; other panels use
    ``base.h0``. With ``fixed_theta`` the base transition matrix is reused in
    every cell (only allowed when ``D`` is not swept).
    """

    base: ModelConfig
    swept_parameter: str
    grid: Sequence
    replications: int = 5
    estimator: str | None = None
    master_seed: int = 0
    series_h0: Sequence[int] = (0, 1)
    fixed_theta: bool = False

    def __post_init__(self):
        if self.swept_parameter not in PANELS:
            raise DomainError(f"unknown swept parameter {self.swept_parameter!r}")
        if len(self.grid) == 0:
            raise DomainError("sweep grid is empty")
        if self.replications < 1:
            raise DomainError("need at least one replication")
        if self.estimator is None:
            self.estimator = "both" if self.panel in ("c", "d") else "dense"
        if self.estimator not in ("dense", "dantzig", "both"):
            raise DomainError(f"unknown estimator {self.estimator!r}")
        if self.fixed_theta and self.panel in ("c", "d"):
            raise DomainError("fixed_theta cannot be combined with a swept dimension or sparsity")

    @property
    def panel(self) -> str:
        return PANELS[self.swept_parameter]

    def estimators(self) -> list[str]:
        return ["dense", "dantzig"] if self.estimator == "both" else [self.estimator]


@dataclass
class SweepResult:
    panel: str
    param_name: str
    rows: list[dict] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)
    slopes: dict = field(default_factory=dict)

    def series(self, estimator: str = "dense", value2=None) -> tuple[np.ndarray, np.ndarray]:
        sel = [r for r in self.rows if r["estimator"] == estimator
               and (value2 is None or r["param_value2"] == value2)]
        return (np.array([r["param_value"] for r in sel], float),
                np.array([r["error_linf_op"] for r in sel], float))

    def medians(self, estimator: str = "dense", value2=None) -> dict:
        x, e = self.series(estimator, value2)
        return {float(v): float(np.median(e[x == v])) for v in np.unique(x)}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for r in self.rows:
                w.writerow([_fmt(r[c]) for c in CSV_COLUMNS])

    def failures_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(FAILURE_COLUMNS)
            for r in self.failures:
                w.writerow([_fmt(r[c]) for c in FAILURE_COLUMNS])

    def table(self) -> list[tuple]:
        """Rows without timing, for reproducibility comparisons."""
        return [tuple(r[c] for c in CSV_COLUMNS if c != "wall_ms") for r in self.rows]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def cell_seed(master_seed: int, grid_idx: int, rep: int) -> int:
    ss = np.random.SeedSequence([int(master_seed) & (2**64 - 1), grid_idx, rep])
    return int(ss.generate_state(1, np.uint64)[0])


def _sigma2(base: ModelConfig) -> float:
    S = np.asarray(base.Sigma, float)
    if not np.allclose(S, S[0, 0] * np.eye(S.shape[0])):
        raise DomainError("sweeps that change D need Sigma = sigma^2 I")
    return float(S[0, 0])


def _cell_config(spec: SweepSpec, value, value2, seed: int) -> ModelConfig:
    base = spec.base
    D, s = base.D, base.theta.s
    changes: dict = {"seed": seed}
    kind = spec.swept_parameter
    if kind == "T":
        changes["T"] = int(value)
    elif kind == "omega":
        changes["omega2"] = float(value) ** 2
    elif kind == "D_fixed_s":
        D = int(value)
        changes["D"] = D
        changes["Sigma"] = _sigma2(base) * np.eye(D)
    elif kind == "s_fixed_D":
        s = int(value)
    elif kind == "p_h0":
        p = float(value)
        a, b = independent_sampling(p) if p < 1.0 else (1.0, 0.0)
        changes.update(p=p, a=a, b=b, h0=int(value2))
    elif kind == "p_b_heatmap":
        p, b = float(value), float(value2)
        a = markov_a_for(p, b)
        if a is None:
            raise _Inadmissible(f"no a in (0, 1] gives p = {p} with b = {b}")
        changes.update(p=p, a=min(a, 1.0), b=b)
    if spec.fixed_theta:
        theta = base.theta
    else:
        rng = np.random.default_rng([seed, 0x7E7A])
        theta = gen_sparse_theta(D, s, base.theta.vartheta, rng)
    changes["theta"] = theta
    return base.with_(**changes)


class _Inadmissible(PovarError):
    pass


def _run_cell(task) -> tuple[list[dict], dict | None]:
    spec, gi, value, value2, rep = task
    seed = cell_seed(spec.master_seed, gi, rep)
    key = {"panel": spec.panel, "param_name": spec.swept_parameter,
           "param_value": value, "param_value2": value2, "replicate": rep, "seed": seed}
    try:
        cfg = _cell_config(spec, value, value2, seed)
        require_valid(cfg)
        t0 = time.perf_counter()
        trajs = simulate(cfg)
        g0, g1 = estimate_pair(trajs, cfg)
        base_ms = 1e3 * (time.perf_counter() - t0)
        rows = []
        for est in spec.estimators():
            t1 = time.perf_counter()
            lam = None
            if est == "dense":
                th = dense_estimate(g0.gamma_hat, g1.gamma_hat)
            else:
                lam, rep_ = tune_lambda(g0.gamma_hat, g1.gamma_hat, cfg.theta.s)
                th = rep_.theta_hat
                if not rep_.ok:
                    raise PovarError(f"LP failure in rows: {rep_.lp_status}")
            ms = base_ms + 1e3 * (time.perf_counter() - t1)
            rows.append({**key, "estimator": est,
                         "error_linf_op": error_metric(th, cfg.theta),
                         "error_max": max_norm(th - cfg.theta.entries),
                         "lambda": lam, "wall_ms": ms})
        return rows, None
    except _Inadmissible as exc:
        return [], {**key, "reason": f"inadmissible: {exc}"}
    except (PovarError, np.linalg.LinAlgError) as exc:
        log.warning("cell %s failed: %s", key, exc)
        return [], {**key, "reason": f"{type(exc).__name__}: {exc}"}


def _tasks(spec: SweepSpec) -> list[tuple]:
    out = []
    for gi, g in enumerate(spec.grid):
        if spec.swept_parameter == "p_b_heatmap":
            cells = [(gi, float(g[0]), float(g[1]))]
        elif spec.swept_parameter == "p_h0":
            cells = [(gi * len(spec.series_h0) + k, float(g), int(h)) for k, h in enumerate(spec.series_h0)]
        else:
            cells = [(gi, g if isinstance(g, float) else int(g), None)]
        for idx, v, v2 in cells:
            out.extend((spec, idx, v, v2, rep) for rep in range(spec.replications))
    return out


def _sort_key(r: dict):
    v2 = r["param_value2"]
    return (r["param_value"], -math.inf if v2 is None else v2, r["replicate"], r.get("estimator", ""))


def run_sweep(spec: SweepSpec, jobs: int = 1) -> SweepResult:
    """Run every cell of ``spec`` (on ``jobs`` worker processes) and fit slopes."""
    tasks = _tasks(spec)
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_cell, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        outcomes = [_run_cell(t) for t in tasks]
    res = SweepResult(spec.panel, spec.swept_parameter)
    for rows, fail in outcomes:
        res.rows.extend(rows)
        if fail is not None:
            res.failures.append(fail)
    res.rows.sort(key=_sort_key)
    res.failures.sort(key=_sort_key)
    res.slopes = fit_slopes(res)
    return res


def fit_slopes(res: SweepResult) -> dict:
    """Log-log Theil-Sen ``(slope, intercept)`` per series for scatter panels.

    Series are keyed by estimator, plus ``h0=<k>`` for the sampling-rate panel.
    Series with fewer than two distinct abscissae get no fit.
    """
    if res.panel not in SLOPE_PANELS:
        return {}
    groups: dict = {}
    for r in res.rows:
        k = r["estimator"] if r["param_value2"] is None else f"{r['estimator']}|h0={r['param_value2']}"
        groups.setdefault(k, []).append((r["param_value"], r["error_linf_op"]))
    out = {}
    for k, pts in groups.items():
        x, e = np.array(pts).T
        if np.unique(x).size >= 2:
            out[k] = loglog_slope(x, e)
    return out


def plot_sweep(res: SweepResult, path) -> Path:
    """Write an SVG rendering: log-log scatter, or a median-error heatmap for ``(p, b)``."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    fig, ax = plt.subplots(figsize=(5, 4))
    if res.panel == "f":
        ps = sorted({r["param_value"] for r in res.rows} | {r["param_value"] for r in res.failures})
        bs = sorted({r["param_value2"] for r in res.rows} | {r["param_value2"] for r in res.failures})
        Z = np.full((len(bs), len(ps)), np.nan)
        for i, b in enumerate(bs):
            for j, p in enumerate(ps):
                e = [r["error_linf_op"] for r in res.rows if r["param_value"] == p and r["param_value2"] == b]
                if e:
                    Z[i, j] = np.log10(np.median(e))
        im = ax.imshow(Z, origin="lower", aspect="auto",
                       extent=(min(ps), max(ps), min(bs), max(bs)))
        fig.colorbar(im, ax=ax, label="log10 median error")
        ax.set_xlabel("p")
        ax.set_ylabel("b")
    else:
        keys = sorted({(r["estimator"], r["param_value2"]) for r in res.rows}, key=str)
        for est, v2 in keys:
            x, e = res.series(est, v2)
            label = est if v2 is None else f"{est}, h0={v2}"
            fit = res.slopes.get(est if v2 is None else f"{est}|h0={v2}")
            if fit:
                label += f" (slope {fit[0]:.2f})"
            ax.scatter(x, np.maximum(e, LOG_FLOOR), s=12, label=label)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel(res.param_name)
        ax.set_ylabel("operator inf-norm error")
        ax.legend(fontsize=8)
    ax.set_title(f"panel {res.panel}")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path
