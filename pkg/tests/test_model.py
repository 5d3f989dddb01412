from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from povar.errors import DomainError
from povar.model import (ModelConfig, gen_sparse_theta, independent_sampling, make_transition,
                         markov_a_for, default_config, require_valid, validate_config)


def test_dense_theta_has_requested_norm():
    th = gen_sparse_theta(5, 5, 0.5, np.random.default_rng(0))
    assert np.linalg.norm(th.entries, 2) == pytest.approx(0.5, abs=1e-8)
    assert th.s == 5 and th.D == 5


class _IdentityPattern:
    """Stub generator forcing support {i} in row i and value 1."""

    def __init__(self):
        self.row = 0

    def choice(self, D, size, replace):
        out = np.array([self.row])
        self.row += 1
        return out

    def standard_normal(self, n):
        return np.ones(n)


def test_identity_pattern_rescales_to_vartheta():
    th = gen_sparse_theta(3, 1, 0.3, _IdentityPattern())
    np.testing.assert_allclose(th.entries, 0.3 * np.eye(3), atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(D=st.integers(1, 8), data=st.data(), seed=st.integers(0, 2**32 - 1))
def test_generated_theta_in_parameter_set(D, data, seed):
    s = data.draw(st.integers(1, D))
    vt = data.draw(st.floats(0.05, 0.95))
    th = gen_sparse_theta(D, s, vt, np.random.default_rng(seed))
    counts = [sum(1 for v in row if v != 0) for row in th.entries]
    assert max(counts) <= s
    cfg = ModelConfig(D=D, T=10, theta=th, Sigma=np.eye(D))
    assert validate_config(cfg) == []


def test_rescaling_preserves_support():
    rng1, rng2 = np.random.default_rng(4), np.random.default_rng(4)
    raw = np.zeros((6, 6))
    for i in range(6):
        cols = rng1.choice(6, size=2, replace=False)
        raw[i, cols] = rng1.standard_normal(2)
    th = gen_sparse_theta(6, 2, 0.5, rng2)
    assert np.array_equal(raw != 0, th.entries != 0)


def test_s_larger_than_D_rejected():
    with pytest.raises(DomainError):
        gen_sparse_theta(3, 4, 0.5, np.random.default_rng(0))


def test_default_config_valid():
    cfg = default_config(seed=1)
    assert (cfg.T, cfg.D, cfg.p) == (10_000, 5, 1.0)
    assert cfg.omega2 == pytest.approx(0.1**2)
    np.testing.assert_array_equal(cfg.Sigma, np.eye(5))
    assert validate_config(cfg) == []


def test_spectral_violation_reported():
    cfg = default_config()
    bad = make_transition(cfg.theta.entries / 0.5 * 1.1, s=5, vartheta=0.5)
    msgs = validate_config(cfg.with_(theta=bad))
    assert any(m.startswith("spectral bound") for m in msgs)


def test_chain_stationarity_violation():
    cfg = default_config().with_(p=0.6, a=0.3, b=0.3)
    msgs = validate_config(cfg)
    assert any("chain not stationary at p" in m for m in msgs)
    with pytest.raises(DomainError):
        require_valid(cfg)


def test_sigma_checks():
    cfg = default_config()
    assert any("symmetric" in m for m in validate_config(cfg.with_(Sigma=np.triu(np.ones((5, 5))))))
    assert any("semi-definite" in m for m in validate_config(cfg.with_(Sigma=-np.eye(5))))


def test_sampling_helpers():
    assert independent_sampling(0.3) == (0.3, pytest.approx(0.7))
    a = markov_a_for(0.6, 0.2)
    assert a / (a + 0.2) == pytest.approx(0.6)
    assert markov_a_for(0.9, 0.5) is None
    assert markov_a_for(1.0, 0.0) == 1.0
