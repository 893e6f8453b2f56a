import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stochbidomain.geometry import Domain, build_basis
from stochbidomain.noise import NoiseModel, hs_norm_sq, sample_increments, u0_norm


def test_increments_deterministic_and_nested():
    a = sample_increments(4, 50, 1e-3, 7)
    b = sample_increments(4, 50, 1e-3, 7)
    assert a.equals(b)
    c = sample_increments(6, 50, 1e-3, 7)
    assert np.array_equal(c.dW_v[:, :4], a.dW_v)
    assert not np.array_equal(sample_increments(4, 50, 1e-3, 8).dW_v, a.dW_v)


def test_increment_statistics():
    dt, N = 1e-3, 100_000
    inc = sample_increments(1, N, dt, 99)
    x, y = inc.dW_v[:, 0], inc.dW_w[:, 0]
    assert abs(x.mean()) <= 4 * math.sqrt(dt / N)
    assert abs(np.corrcoef(x, y)[0, 1]) <= 4 / math.sqrt(N)
    assert x.var() == pytest.approx(dt, rel=0.02)


def test_coarsened_sums_blocks():
    inc = sample_increments(2, 8, 0.1, 3)
    co = inc.coarsened(2)
    assert co.dt == pytest.approx(0.2)
    np.testing.assert_allclose(co.dW_v[1], inc.dW_v[2] + inc.dW_v[3])


def test_hs_norm_examples(dn_domain):
    b = build_basis(dn_domain, 6)
    zero = np.zeros(6)
    assert hs_norm_sq(NoiseModel(0.3, b0=0.0, b1=1.0), zero, b) == 0.0
    s0 = 0.3
    expect = dn_domain.measure * s0**2 * sum(1 / k**2 for k in range(1, 7))
    assert hs_norm_sq(NoiseModel(s0), zero, b) == pytest.approx(expect, rel=1e-12)
    v = np.linspace(0.1, 0.6, 6)
    mult = NoiseModel(0.3, b0=0.0, b1=1.0)
    assert hs_norm_sq(mult, 2 * v, b) == pytest.approx(4 * hs_norm_sq(mult, v, b), rel=1e-12)
    with pytest.raises(ValueError):
        hs_norm_sq(mult, np.zeros(5), b)


def test_hs_norm_monotone_in_truncation(dn_domain):
    b = build_basis(dn_domain, 6)
    nm = NoiseModel(0.3, 1.0, 0.5)
    v = np.ones(6) * 0.2
    vals = [hs_norm_sq(nm, v, b, truncation=k) for k in range(1, 12)]
    assert np.all(np.diff(vals) >= 0)


def test_u0_norm():
    assert u0_norm([0, 0, 0]) == 0.0
    assert u0_norm([1, 1, 1, 0]) == pytest.approx(math.sqrt(1 + 1 / 4 + 1 / 9))
    assert u0_norm([1, 1, 1, 0]) == pytest.approx(1.1666, abs=1e-4)
    assert u0_norm([2, 2, 2]) == pytest.approx(2 * u0_norm([1, 1, 1]))


@given(st.floats(-20, 20), st.floats(-20, 20), st.floats(0, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_pointwise_growth_and_lipschitz(v1, v2, s0, b0, b1):
    nm = NoiseModel(s0, b0, b1)
    n = 50
    cb = nm.c_beta()
    assert np.sum(nm.pointwise(v1, n) ** 2) <= cb * (1 + v1**2) + 1e-12
    d = np.sum((nm.pointwise(v1, n) - nm.pointwise(v2, n)) ** 2)
    assert d <= cb * (v1 - v2) ** 2 * (1 + 1e-12) + 1e-12


@pytest.mark.parametrize("profile", ["uniform", "modal"])
def test_coupling_matches_apply_and_growth(geo2d, profile, rng):
    b = geo2d.basis
    nm = NoiseModel(0.4, 0.7, 0.9, profile)
    c = rng.standard_normal(b.n)
    dW = rng.standard_normal(b.n)
    np.testing.assert_allclose(nm.coupling(b, c) @ dW, nm.apply(b, b.field(c), dW), atol=1e-12)
    A, B = nm.growth_constants(b)
    assert np.sum(nm.coupling(b, c) ** 2) <= A + B * (c @ c)
    assert hs_norm_sq(nm, c, b) <= A + B * (c @ c)
