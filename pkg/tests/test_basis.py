import numpy as np
import pytest

from radialnet.basis import (
    ExponentLadder, LogPrimitiveParams, StabilizationConfig,
    ladder_exponents, ladder_jacobian, log_primitive, log_primitive_dmu,
    log_primitive_dr, logistic, raw_gaps_for_exponents, softplus,
    softplus_inverse, stable_pow,
)


def test_softplus_matches_reference():
    s = np.linspace(-40, 40, 401)
    ref = np.logaddexp(0.0, s)
    assert np.allclose(softplus(s), ref, rtol=1e-12)
    assert np.all(np.isfinite(softplus(np.array([-1e4, 1e4]))))


def test_softplus_inverse_roundtrip():
    y = np.array([1e-8, 1e-3, 0.5, 1.0, 10.0, 50.0])
    assert np.allclose(softplus(softplus_inverse(y)), y, rtol=1e-10)


def test_logistic_is_softplus_derivative():
    s = np.linspace(-10, 10, 101)
    h = 1e-6
    fd = (softplus(s + h) - softplus(s - h)) / (2 * h)
    assert np.allclose(logistic(s), fd, atol=1e-8)


class TestLadder:
    def test_monotone_and_pinned(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            raw = rng.normal(0, 3, rng.integers(1, 20))
            lad = ExponentLadder(raw, -2.0, 4.0)
            mu = ladder_exponents(lad)
            assert np.all(np.diff(mu) > 0)
            assert mu[-1] == pytest.approx(4.0, abs=1e-12)
            assert np.all(mu > -2.0)
            assert mu[0] > -2.0

    def test_gap_floor(self):
        # even with extreme raw gaps, consecutive exponents stay separated
        lad = ExponentLadder(np.array([-50.0, 50.0, -50.0, 0.0]), -2.0, 4.0)
        mu = ladder_exponents(lad)
        span = 4.0 - (-2.0)
        total = 4 * 0.01 + softplus(np.array([-50.0, 50.0, -50.0, 0.0])).sum()
        assert np.all(np.diff(mu) >= span * 0.01 / total - 1e-12)

    def test_equal_gaps_give_uniform_ladder(self):
        # identical raw gaps normalize to an evenly spaced ladder regardless
        # of the common raw value
        for c in (-3.0, 0.0, 25.0):
            lad = ExponentLadder(np.full(5, c), -2.0, 4.0)
            mu = ladder_exponents(lad)
            assert np.allclose(np.diff(mu), 6.0 / 5, atol=1e-12)

    def test_jacobian_matches_fd(self):
        rng = np.random.default_rng(3)
        raw = rng.normal(0, 1, 6)
        lad = ExponentLadder(raw, -2.0, 4.0)
        jac = ladder_jacobian(lad)
        h = 1e-6
        for j in range(6):
            rp, rm = raw.copy(), raw.copy()
            rp[j] += h
            rm[j] -= h
            fd = (ladder_exponents(ExponentLadder(rp, -2.0, 4.0))
                  - ladder_exponents(ExponentLadder(rm, -2.0, 4.0))) / (2 * h)
            assert np.allclose(jac[:, j], fd, atol=1e-7)

    def test_raw_gaps_for_exponents_roundtrip(self):
        mus = np.array([-1.0, 0.25, 1.5, 4.0])
        raw = raw_gaps_for_exponents(mus, -2.0, 4.0)
        back = ladder_exponents(ExponentLadder(raw, -2.0, 4.0))
        assert np.allclose(back, mus, atol=1e-9)

    def test_raw_gaps_rejects_boundary_exponent(self):
        with pytest.raises(ValueError):
            raw_gaps_for_exponents(np.array([-2.0, 4.0]), -2.0, 4.0)


class TestLogPrimitive:
    def test_limit_is_log(self):
        r = np.geomspace(1e-6, 10, 200)
        val = log_primitive(r, 0.0)
        assert np.allclose(val, np.log(r), atol=1e-12)

    def test_taylor_branch_is_continuous(self):
        r = np.geomspace(1e-3, 5, 50)
        eps = LogPrimitiveParams().eps_log
        below = log_primitive(r, eps * 0.999)
        above = log_primitive(r, eps * 1.001)
        assert np.allclose(below, above, rtol=1e-6)

    def test_generic_branch(self):
        r = np.array([0.5, 1.0, 2.0])
        mu = 0.7
        assert np.allclose(log_primitive(r, mu), (r ** mu - 1) / mu)

    def test_dmu_matches_fd(self):
        r = np.geomspace(0.05, 3, 40)
        for mu in (-0.5, -1e-5, 0.0, 1e-5, 0.8):
            h = 1e-7
            fd = (log_primitive(r, mu + h) - log_primitive(r, mu - h)) / (2 * h)
            assert np.allclose(log_primitive_dmu(r, mu), fd, atol=1e-5)

    def test_dr_matches_fd(self):
        r = np.geomspace(0.05, 3, 40)
        for mu in (-0.5, 0.0, 0.8):
            h = 1e-7
            fd = (log_primitive(r + h, mu) - log_primitive(r - h, mu)) / (2 * h)
            assert np.allclose(log_primitive_dr(r, mu), fd, rtol=1e-6, atol=1e-6)


def test_stable_pow_floors_radius():
    cfg = StabilizationConfig(r_floor=1e-12)
    val = stable_pow(np.array([0.0]), -2.0, cfg)
    assert np.isfinite(val).all()
    assert val[0] == pytest.approx(1e24)


def test_stabilization_config_validation():
    with pytest.raises(ValueError):
        StabilizationConfig(r_floor=0.0)
