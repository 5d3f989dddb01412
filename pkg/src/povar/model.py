"""Problem instances: sparse transition matrices and model configurations."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError
from .linalg import as_matrix, is_symmetric, spectral_norm

STATIONARITY_TOL = 1e-12
NORMALISE_TOL = 1e-8


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-sparse transition matrix with its sparsity and spectral bound."""

    entries: np.ndarray
    s: int
    vartheta: float

    @property
    def D(self) -> int:
        return self.entries.shape[0]

    def row_support(self, thresh: float = 0.0) -> np.ndarray:
        return (np.abs(self.entries) > thresh).sum(axis=1)


@dataclass(frozen=True)
class ModelConfig:
    """Full generative parameterisation of a partially observed VAR(1).

    ``omega2`` is the observation-noise variance and ``(a, b)`` are the
    0->1 and 1->0 transition probabilities of each sampling chain, which must
    be stationary at ``p = a / (a + b)``.
    """

    D: int
    T: int
    theta: TransitionMatrix
    Sigma: np.ndarray
    omega2: float = 0.01
    p: float = 1.0
    a: float = 1.0
    b: float = 0.0
    h0: int = 0
    N: int = 1
    seed: int = 0
    extra: dict = field(default_factory=dict, compare=False)

    def with_(self, **changes) -> "ModelConfig":
        return replace(self, **changes)

    @property
    def sigma2_max(self) -> float:
        return float(np.linalg.eigvalsh(self.Sigma)[-1])

    @property
    def sigma2_min(self) -> float:
        return float(np.linalg.eigvalsh(self.Sigma)[0])


def independent_sampling(p: float) -> tuple[float, float]:
    """Chain parameters ``(a, b)`` giving i.i.d. Bernoulli(p) sampling."""
    return p, 1.0 - p


def markov_a_for(p: float, b: float) -> float | None:
    """The ``a`` making the chain stationary at ``p`` for a given ``b``.

    Returns ``None`` when no ``a`` in (0, 1] exists.
    """
    if p >= 1.0:
        return 1.0 if b == 0.0 else None
    if p <= 0.0 or b <= 0.0 or b >= 1.0:
        return None
    a = p * b / (1.0 - p)
    return a if 0.0 < a <= 1.0 + 1e-12 else None


def gen_sparse_theta(D: int, s: int, vartheta: float, rng: np.random.Generator) -> TransitionMatrix:
    """Draw a random row-sparse transition matrix with ``||theta||_2 = vartheta``.

    Each row gets ``s`` support positions chosen uniformly without
    replacement, filled with standard normal values; the whole matrix is then
    rescaled to the requested spectral norm.
    """
    if not 1 <= s <= D:
        raise DomainError(f"need 1 <= s <= D, got s={s}, D={D}")
    if not 0.0 < vartheta < 1.0:
        raise DomainError("vartheta must lie in (0, 1)")
    theta = np.zeros((D, D))
    for i in range(D):
        cols = rng.choice(D, size=s, replace=False)
        theta[i, cols] = rng.standard_normal(s)
    norm = spectral_norm(theta)
    if norm == 0.0:
        raise DomainError("drew an all-zero transition matrix")
    theta *= vartheta / norm
    return TransitionMatrix(theta, s, vartheta)


def make_transition(entries, s: int | None = None, vartheta: float | None = None) -> TransitionMatrix:
    """Wrap an explicit matrix; missing certificates are read off the matrix."""
    A = as_matrix(entries, "theta")
    if s is None:
        s = int(max(1, (A != 0).sum(axis=1).max()))
    if vartheta is None:
        vartheta = max(spectral_norm(A), 1e-12)
    return TransitionMatrix(A, int(s), float(vartheta))


def default_config(seed: int = 0, **overrides) -> ModelConfig:
    """Default experiment setting: T=10000, D=5, sigma=1, omega=0.1, p=1.

    ``theta`` is dense (s = D) with spectral norm 1/2.
    """
    D = overrides.pop("D", 5)
    s = overrides.pop("s", D)
    vartheta = overrides.pop("vartheta", 0.5)
    sigma = overrides.pop("sigma", 1.0)
    rng = np.random.default_rng([seed, 0x7E7A])
    theta = gen_sparse_theta(D, s, vartheta, rng)
    cfg = ModelConfig(D=D, T=10_000, theta=theta, Sigma=sigma**2 * np.eye(D),
                      omega2=0.01, p=1.0, a=1.0, b=0.0, h0=0, N=1, seed=seed)
    return cfg.with_(**overrides) if overrides else cfg


def validate_config(cfg: ModelConfig) -> list[str]:
    """Return the list of violated invariants (empty when ``cfg`` is valid)."""
    out: list[str] = []
    th = np.asarray(cfg.theta.entries, float)
    if th.shape != (cfg.D, cfg.D):
        out.append(f"theta shape {th.shape} != ({cfg.D}, {cfg.D})")
        return out
    if not np.all(np.isfinite(th)):
        out.append("theta has non-finite entries")
        return out
    if not 0.0 < cfg.theta.vartheta < 1.0:
        out.append("spectral bound: vartheta must lie in (0, 1)")
    norm = spectral_norm(th) if np.any(th) else 0.0
    if norm >= 1.0 or norm > cfg.theta.vartheta + NORMALISE_TOL:
        out.append(f"spectral bound: ||theta||_2 = {norm:.6g} exceeds vartheta = {cfg.theta.vartheta:.6g} or 1")
    if int((th != 0).sum(axis=1).max()) > cfg.theta.s:
        out.append(f"sparsity: some row has more than s = {cfg.theta.s} nonzeros")
    S = np.asarray(cfg.Sigma, float)
    if S.shape != (cfg.D, cfg.D) or not np.all(np.isfinite(S)):
        out.append("Sigma has wrong shape or non-finite entries")
    elif not is_symmetric(S):
        out.append("Sigma not symmetric")
    elif np.linalg.eigvalsh(S)[0] < -1e-10:
        out.append("Sigma not positive semi-definite")
    if cfg.omega2 < 0:
        out.append("omega2 must be >= 0")
    if not 0.0 < cfg.p <= 1.0:
        out.append("p must lie in (0, 1]")
    if not 0.0 < cfg.a <= 1.0:
        out.append("a must lie in (0, 1]")
    if not 0.0 <= cfg.b < 1.0:
        out.append("b must lie in [0, 1)")
    if cfg.a + cfg.b > 0 and abs(cfg.a / (cfg.a + cfg.b) - cfg.p) > STATIONARITY_TOL:
        out.append(f"chain not stationary at p: a/(a+b) = {cfg.a / (cfg.a + cfg.b):.6g} != p = {cfg.p:.6g}")
    if cfg.h0 not in (0, 1):
        out.append("h0 must be 0 or 1")
    if cfg.T < 2 or cfg.D < 1 or cfg.N < 1:
        out.append("need T >= 2, D >= 1, N >= 1")
    return out


def require_valid(cfg: ModelConfig) -> None:
    problems = validate_config(cfg)
    if problems:
        raise DomainError("invalid model config: " + "; ".join(problems))
