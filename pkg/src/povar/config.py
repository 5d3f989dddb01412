"""INI-style run configuration.

Schema (``#`` and ``;`` start comments)::

    [model]
    seed = 0            ; required, the only source of randomness
    D = 5
    T = 10000
    N = 1
    s = 5               ; row sparsity used when theta is drawn
    vartheta = 0.5      ; spectral norm of a drawn theta
    sigma = 1.0         ; Sigma = sigma^2 I unless [Sigma] is given
    omega2 = 0.01
    p = 1.0
    a = 1.0
    b = 0.0
    h0 = 0

    [theta]             ; optional explicit rows, comma separated
    row0 = 0.5, 0
    row1 = 0, 0.5

    [Sigma]             ; optional explicit rows
    row0 = 1, 0
    row1 = 0, 1

    [estimate]          ; optional
    method = dense      ; dense | dantzig | both
    lambda = 0.05       ; or target_s = 3 (not both)

    [sweep]             ; optional
    parameter = T       ; T | omega | D_fixed_s | s_fixed_D | p_h0 | p_b_heatmap
    grid = 1000, 3000, 10000    ; heatmap cells as p:b pairs
    replications = 5
    estimator = dense
    series_h0 = 0, 1
    fixed_theta = false
"""
from __future__ import annotations

import configparser
import io
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, PovarError
from .model import ModelConfig, gen_sparse_theta, make_transition, validate_config

MODEL_KEYS = ("seed", "D", "T", "N", "s", "vartheta", "sigma", "omega2", "p", "a", "b", "h0")
_INT_KEYS = {"seed", "D", "T", "N", "s", "h0"}


class ConfigError(PovarError, ValueError):
    """Malformed or invalid configuration file; the message names the line."""


@dataclass
class RunConfig:
    model: ModelConfig
    estimate: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    source: str | None = None


def _line_index(text: str) -> dict:
    """Map ``(section, key)`` (and ``(section, None)``) to 1-based line numbers."""
    where, sec = {}, None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            sec = m.group(1).strip()
            where.setdefault((sec, None), n)
            continue
        m = re.match(r"([^=:#;\s][^=:]*?)\s*[=:]", line)
        if m and sec is not None:
            where.setdefault((sec, m.group(1).strip().lower()), n)
    return where


class _Reader:
    def __init__(self, text: str, name: str):
        self.name = name
        self.cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"),
                                            interpolation=None)
        self.cp.optionxform = str
        try:
            self.cp.read_string(text, source=name)
        except configparser.Error as exc:
            lineno = getattr(exc, "lineno", None)
            if lineno is None and getattr(exc, "errors", None):
                lineno = exc.errors[0][0]
            raise ConfigError(f"{name}:{lineno or '?'}: {exc.message.splitlines()[0]}") from exc
        self.where = _line_index(text)

    def fail(self, section: str, key: str | None, msg: str):
        n = self.where.get((section, None if key is None else key.lower()),
                           self.where.get((section, None), "?"))
        label = f"[{section}]" + (f" {key}" if key else "")
        raise ConfigError(f"{self.name}:{n}: {label}: {msg}")

    def get(self, section: str, key: str, kind=float, default=None):
        if not self.cp.has_section(section) or not self.cp.has_option(section, key):
            return default
        raw = self.cp.get(section, key)
        try:
            if kind is int:
                v = float(raw)
                if v != int(v):
                    raise ValueError
                return int(v)
            if kind is bool:
                return {"true": True, "false": False, "1": True, "0": False,
                        "yes": True, "no": False}[raw.strip().lower()]
            return kind(raw)
        except (ValueError, KeyError):
            self.fail(section, key, f"cannot read {raw!r} as {kind.__name__}")

    def rows(self, section: str, D: int) -> np.ndarray | None:
        if not self.cp.has_section(section):
            return None
        out = []
        for i in range(D):
            key = f"row{i}"
            if not self.cp.has_option(section, key):
                self.fail(section, None, f"missing {key} (need {D} rows)")
            try:
                vals = [float(x) for x in self.cp.get(section, key).split(",")]
            except ValueError:
                self.fail(section, key, "row entries must be numbers")
            if len(vals) != D:
                self.fail(section, key, f"expected {D} entries, got {len(vals)}")
            out.append(vals)
        extra = set(self.cp.options(section)) - {f"row{i}" for i in range(D)}
        if extra:
            self.fail(section, sorted(extra)[0], "unexpected key")
        return np.array(out)


def parse_config(text: str, name: str = "<config>") -> RunConfig:
    r = _Reader(text, name)
    if not r.cp.has_section("model"):
        raise ConfigError(f"{name}:1: missing [model] section")
    unknown = set(r.cp.options("model")) - set(MODEL_KEYS)
    if unknown:
        r.fail("model", sorted(unknown)[0], "unknown key")
    if not r.cp.has_option("model", "seed"):
        r.fail("model", None, "required key 'seed' is missing")
    vals = {k: r.get("model", k, int if k in _INT_KEYS else float) for k in MODEL_KEYS}
    seed = vals["seed"]
    D = vals["D"] if vals["D"] is not None else 5
    s = vals["s"] if vals["s"] is not None else D
    vartheta = vals["vartheta"] if vals["vartheta"] is not None else 0.5

    theta_rows = r.rows("theta", D)
    try:
        if theta_rows is None:
            theta = gen_sparse_theta(D, s, vartheta, np.random.default_rng([seed, 0x7E7A]))
        else:
            theta = make_transition(theta_rows, s=vals["s"], vartheta=vals["vartheta"])
    except DomainError as exc:
        r.fail("theta" if theta_rows is not None else "model", None, str(exc))
    Sigma = r.rows("Sigma", D)
    if Sigma is None:
        sigma = vals["sigma"] if vals["sigma"] is not None else 1.0
        Sigma = sigma**2 * np.eye(D)

    def pick(k, d):
        return vals[k] if vals[k] is not None else d

    cfg = ModelConfig(D=D, T=pick("T", 10_000), theta=theta, Sigma=Sigma,
                      omega2=pick("omega2", 0.01), p=pick("p", 1.0), a=pick("a", 1.0),
                      b=pick("b", 0.0), h0=pick("h0", 0), N=pick("N", 1), seed=seed)
    problems = validate_config(cfg)
    if problems:
        r.fail("model", None, "; ".join(problems))

    est = {}
    if r.cp.has_section("estimate"):
        est["method"] = r.get("estimate", "method", str, "dense").strip()
        if est["method"] not in ("dense", "dantzig", "both"):
            r.fail("estimate", "method", "must be dense, dantzig or both")
        lam = r.get("estimate", "lambda", float)
        ts = r.get("estimate", "target_s", int)
        if lam is not None and ts is not None:
            r.fail("estimate", "target_s", "give either lambda or target_s, not both")
        if lam is not None:
            est["lambda"] = lam
        if ts is not None:
            est["target_s"] = ts

    sweep = {}
    if r.cp.has_section("sweep"):
        par = r.get("sweep", "parameter", str)
        if par is None:
            r.fail("sweep", None, "missing 'parameter'")
        sweep["parameter"] = par.strip()
        raw = r.get("sweep", "grid", str)
        if raw is None:
            r.fail("sweep", None, "missing 'grid'")
        try:
            if sweep["parameter"] == "p_b_heatmap":
                sweep["grid"] = [tuple(float(v) for v in c.split(":")) for c in raw.split(",")]
                if any(len(c) != 2 for c in sweep["grid"]):
                    raise ValueError
            else:
                sweep["grid"] = [_num(v) for v in raw.split(",")]
        except ValueError:
            r.fail("sweep", "grid", f"cannot parse grid {raw!r}")
        sweep["replications"] = r.get("sweep", "replications", int, 5)
        e = r.get("sweep", "estimator", str)
        if e is not None:
            sweep["estimator"] = e.strip()
        h = r.get("sweep", "series_h0", str)
        if h is not None:
            sweep["series_h0"] = [int(v) for v in h.split(",")]
        sweep["fixed_theta"] = r.get("sweep", "fixed_theta", bool, False)
    return RunConfig(cfg, est, sweep, name)


def _num(v: str):
    f = float(v)
    return int(f) if f.is_integer() and "." not in v and "e" not in v.lower() else f


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from exc
    return parse_config(text, str(path))


def _row(v) -> str:
    return ", ".join(repr(float(x)) for x in v)


def dump_config(rc: RunConfig) -> str:
    """Serialise with explicit ``theta`` and ``Sigma`` so parsing it back is exact."""
    cfg = rc.model
    out = io.StringIO()
    out.write("[model]\n")
    for k, v in [("seed", cfg.seed), ("D", cfg.D), ("T", cfg.T), ("N", cfg.N),
                 ("s", cfg.theta.s), ("vartheta", cfg.theta.vartheta), ("omega2", cfg.omega2),
                 ("p", cfg.p), ("a", cfg.a), ("b", cfg.b), ("h0", cfg.h0)]:
        out.write(f"{k} = {v!r}\n")
    for name, M in (("theta", cfg.theta.entries), ("Sigma", cfg.Sigma)):
        out.write(f"\n[{name}]\n")
        for i, row in enumerate(np.asarray(M, float)):
            out.write(f"row{i} = {_row(row)}\n")
    if rc.estimate:
        out.write("\n[estimate]\n")
        for k in ("method", "lambda", "target_s"):
            if k in rc.estimate:
                out.write(f"{k} = {rc.estimate[k]!s}\n" if k == "method" else f"{k} = {rc.estimate[k]!r}\n")
    if rc.sweep:
        sw = rc.sweep
        out.write("\n[sweep]\n")
        out.write(f"parameter = {sw['parameter']}\n")
        if sw["parameter"] == "p_b_heatmap":
            grid = ", ".join(f"{p!r}:{b!r}" for p, b in sw["grid"])
        else:
            grid = ", ".join(repr(g) for g in sw["grid"])
        out.write(f"grid = {grid}\n")
        out.write(f"replications = {sw.get('replications', 5)}\n")
        if "estimator" in sw:
            out.write(f"estimator = {sw['estimator']}\n")
        if "series_h0" in sw:
            out.write("series_h0 = " + ", ".join(str(h) for h in sw["series_h0"]) + "\n")
        out.write(f"fixed_theta = {str(bool(sw.get('fixed_theta', False))).lower()}\n")
    return out.getvalue()


def configs_equal(x: RunConfig, y: RunConfig) -> bool:
    a, b = x.model, y.model
    same_model = all(getattr(a, k) == getattr(b, k) for k in
                     ("D", "T", "N", "omega2", "p", "a", "b", "h0", "seed")) \
        and a.theta.s == b.theta.s and a.theta.vartheta == b.theta.vartheta \
        and np.array_equal(a.theta.entries, b.theta.entries) and np.array_equal(a.Sigma, b.Sigma)
    return same_model and x.estimate == y.estimate and _norm_sweep(x.sweep) == _norm_sweep(y.sweep)


def _norm_sweep(sw: dict) -> dict:
    out = dict(sw)
    out.setdefault("fixed_theta", False)
    out.setdefault("replications", 5) if out else None
    if "series_h0" in out:
        out["series_h0"] = list(out["series_h0"])
    return out
