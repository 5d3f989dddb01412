"""Trajectory generation: VAR(1) states, Markov sampling masks, noisy observations.

Randomness discipline: realization ``r`` of a config with seed ``seed`` draws
from ``SeedSequence([seed, r])``, split into three independent child streams
(states, sampling, noise). The generator is numpy's PCG64, so a given numpy
major version reproduces trajectories bit for bit. Because the three streams
are independent, changing e.g. ``omega2`` leaves ``X`` and ``Pi`` untouched.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError
from .linalg import stationary_covariance, sym_sqrt
from .model import ModelConfig, require_valid


@dataclass
class Trajectory:
    """One realization. ``Y`` holds 0 wherever ``Pi`` is 0 (unobserved)."""

    X: np.ndarray
    Pi: np.ndarray
    Y: np.ndarray

    @property
    def T(self) -> int:
        return self.X.shape[0]

    @property
    def D(self) -> int:
        return self.X.shape[1]

    @property
    def observed(self) -> np.ndarray:
        return self.Pi.astype(bool)

    def to_csv(self, path) -> None:
        """Write long-format rows ``t,d,x,pi,y``; ``y`` is empty when unobserved."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "d", "x", "pi", "y"])
            for t in range(self.T):
                for d in range(self.D):
                    pi = int(self.Pi[t, d])
                    y = repr(float(self.Y[t, d])) if pi else ""
                    w.writerow([t, d, repr(float(self.X[t, d])), pi, y])

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        return read_trajectories_csv(path)[0]


def realization_streams(seed: int, r: int) -> tuple[np.random.Generator, ...]:
    children = np.random.SeedSequence([int(seed) & (2**64 - 1), int(r)]).spawn(3)
    return tuple(np.random.Generator(np.random.PCG64(c)) for c in children)


def simulate_states(cfg: ModelConfig, rng: np.random.Generator) -> np.ndarray:
    """Stationary VAR(1) path of length ``T``: ``X_0 ~ N(0, Gamma_0)``."""
    theta = cfg.theta.entries
    G0 = stationary_covariance(theta, cfg.Sigma)
    T, D = cfg.T, cfg.D
    root = sym_sqrt(np.asarray(cfg.Sigma, float))
    z = rng.standard_normal((T, D))
    X = np.empty((T, D))
    X[0] = sym_sqrt(G0) @ z[0]
    eps = z[1:] @ root.T
    x = X[0]
    for t in range(1, T):
        x = theta @ x + eps[t - 1]
        X[t] = x
    return X


def _chain_runs(T: int, start: int, a: float, b: float, rng: np.random.Generator) -> np.ndarray:
    """One binary chain built from its geometric sojourn times."""
    out = np.empty(T, dtype=np.int8)
    pos, state = 0, start
    while pos < T:
        # sojourn in 1 ends with prob b per step, in 0 with prob a
        leave = b if state == 1 else a
        if leave <= 0.0:
            out[pos:] = state
            break
        n = min(int(rng.geometric(leave)), T - pos)
        out[pos:pos + n] = state
        pos += n
        state = 1 - state
    return out


def simulate_sampling(cfg: ModelConfig, rng: np.random.Generator) -> np.ndarray:
    """``T x D`` binary mask from ``D`` independent two-state Markov chains.

    Transitions 0->1 with probability ``a`` and 1->0 with probability ``b``;
    the first state is Bernoulli(``p``) so each chain starts stationary.
    """
    T, D = cfg.T, cfg.D
    if cfg.p >= 1.0:
        return np.ones((T, D), dtype=np.int8)
    start = (rng.random(D) < cfg.p).astype(int)
    return np.stack([_chain_runs(T, int(start[d]), cfg.a, cfg.b, rng) for d in range(D)], axis=1)


def observe(X: np.ndarray, Pi: np.ndarray, omega2: float, rng: np.random.Generator) -> np.ndarray:
    """Noisy observation of the sampled entries; unobserved entries are 0."""
    if omega2 < 0:
        raise DomainError("omega2 must be >= 0")
    X = np.asarray(X, float)
    Pi = np.asarray(Pi)
    if X.shape != Pi.shape:
        raise DomainError("X and Pi shapes differ")
    noise = np.sqrt(omega2) * rng.standard_normal(X.shape)
    return np.where(Pi != 0, X + noise, 0.0)


def simulate_one(cfg: ModelConfig, r: int = 0) -> Trajectory:
    rs, rp, rn = realization_streams(cfg.seed, r)
    X = simulate_states(cfg, rs)
    Pi = simulate_sampling(cfg, rp)
    Y = observe(X, Pi, cfg.omega2, rn)
    return Trajectory(X, Pi, Y)


def simulate(cfg: ModelConfig) -> list[Trajectory]:
    """All ``cfg.N`` independent realizations, in realization order."""
    require_valid(cfg)
    return [simulate_one(cfg, r) for r in range(cfg.N)]


def write_trajectories_csv(trajs: list[Trajectory], path) -> None:
    """Single-file export; a leading ``r`` column indexes the realization when N > 1."""
    path = Path(path)
    if len(trajs) == 1:
        trajs[0].to_csv(path)
        return
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "t", "d", "x", "pi", "y"])
        for r, tr in enumerate(trajs):
            for t in range(tr.T):
                for d in range(tr.D):
                    pi = int(tr.Pi[t, d])
                    w.writerow([r, t, d, repr(float(tr.X[t, d])), pi,
                                repr(float(tr.Y[t, d])) if pi else ""])


def _rows_to_trajectory(rows) -> Trajectory:
    T = max(int(x["t"]) for x in rows) + 1
    D = max(int(x["d"]) for x in rows) + 1
    X = np.zeros((T, D))
    Pi = np.zeros((T, D), dtype=np.int8)
    Y = np.zeros((T, D))
    for x in rows:
        t, d = int(x["t"]), int(x["d"])
        X[t, d] = float(x["x"])
        Pi[t, d] = int(x["pi"])
        if Pi[t, d]:
            Y[t, d] = float(x["y"])
    return Trajectory(X, Pi, Y)


def read_trajectories_csv(path) -> list[Trajectory]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise DomainError(f"{path}: empty trajectory file")
    if "r" not in rows[0]:
        return [_rows_to_trajectory(rows)]
    groups: dict[int, list] = {}
    for row in rows:
        groups.setdefault(int(row["r"]), []).append(row)
    return [_rows_to_trajectory(groups[r]) for r in sorted(groups)]
