import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spinlab import CapacityError, IsingModel, approx, exact


def power_iteration_opnorm(D, iters=5000, seed=0):
    """Largest |eigenvalue| of symmetric D: power iteration on D, deflating the top pair."""
    r = np.random.default_rng(seed)

    def top(M):
        v = r.normal(size=M.shape[0])
        for _ in range(iters):
            w = M @ v
            v = w / np.linalg.norm(w)
        return v @ M @ v, v

    l1, v1 = top(D)
    l2, _ = top(D - l1 * np.outer(v1, v1))
    return max(abs(l1), abs(l2))


def test_fixed_point_examples(oracles):
    m, lam = approx.solve_fixed_point(2.0, np.ones(5), np.zeros(5))
    assert m == 0.0 and lam == 0.0
    m, _ = approx.solve_fixed_point(0.0, np.ones(5), np.ones(5))
    assert m == pytest.approx(math.tanh(1), abs=1e-12)
    m, lam = approx.solve_fixed_point(1.0, np.ones(5), np.ones(5))
    assert m == pytest.approx(float(oracles["fixed_point_ones"]), abs=1e-12)
    assert lam == pytest.approx(-2 * m, abs=1e-15)
    ref = oracles["fixed_point_random"]
    m, _ = approx.solve_fixed_point(ref["beta"], ref["u"], ref["h"])
    assert m == pytest.approx(float(ref["m_star"]), abs=1e-12)


def test_fixed_point_residual_many(rng):
    for _ in range(10_000):
        n = int(rng.integers(1, 30))
        beta = rng.uniform(0, n)
        u = rng.uniform(-1, 1, n)
        h = rng.normal(0, 1, n) * rng.choice([1, 10, 50])
        h = np.clip(h, -50, 50)
        m, _ = approx.solve_fixed_point(beta, u, h)
        assert abs(approx.fixed_point_residual(beta, u, h, m)) <= 1e-12


def test_params_examples():
    beta = 1.7
    p = approx.approx_params(beta, np.ones(6), np.zeros(6))
    np.testing.assert_allclose(p.v_star, 1.0)
    np.testing.assert_allclose(p.w_star, 1.0)
    assert p.alpha_star == pytest.approx(2 * beta / (1 + 2 * beta), abs=1e-15)
    h = np.array([0.2, -1.0, 3.0])
    p0 = approx.approx_params(0.0, np.full(3, 0.5), h)
    assert p0.alpha_star == 0.0
    np.testing.assert_allclose(p0.v_star, 1 / np.cosh(h) ** 2, rtol=1e-14)


def test_params_large_field_decay():
    vs, ws = [], []
    for big in (5.0, 10.0, 20.0):
        p = approx.approx_params(1.0, np.ones(4), np.array([big, 0.1, -0.2, 0.3]))
        vs.append(p.v_star[0])
        ws.append(p.w_star[0])
    assert vs[0] > vs[1] > vs[2] > 0 and ws[0] > ws[1] > ws[2] > 0
    assert vs[2] < 1e-15


def test_params_invariants(rng):
    for _ in range(50):
        n = int(rng.integers(1, 20))
        beta = rng.uniform(0, 5)
        u, h = rng.uniform(-1, 1, n), rng.normal(0, 2, n)
        p = approx.approx_params(beta, u, h)
        arg = h - 2 * beta * p.m_star * u
        np.testing.assert_allclose(p.v_star, 1 / np.cosh(arg) ** 2, rtol=1e-13)
        np.testing.assert_allclose(p.w_star, u / np.cosh(arg), rtol=1e-13, atol=1e-300)
        assert 0 <= p.alpha_star <= 2 * beta
        assert p.F_second == pytest.approx(np.mean(p.w_star**2), rel=1e-14)


def test_approximants_examples():
    h = np.array([0.5, -0.5, 1.0])
    p = approx.approx_params(0.0, np.ones(3), h)
    np.testing.assert_allclose(approx.approx_covariance(p), np.diag(1 / np.cosh(h) ** 2), atol=1e-15)
    np.testing.assert_allclose(approx.approx_correlation(p), np.eye(3), atol=1e-15)
    beta, n = 1.3, 5
    p = approx.approx_params(beta, np.ones(n), np.zeros(n))
    expected = np.eye(n) - 2 * beta / (n * (1 + 2 * beta)) * np.ones((n, n))
    np.testing.assert_allclose(approx.approx_correlation(p, n), expected, atol=1e-15)
    with pytest.raises(ValueError):
        approx.approx_correlation(p, n + 1)


def test_correlation_error_n12(rng):
    n, beta = 12, 1.0
    for _ in range(10):
        u, h = rng.uniform(-1, 1, n), rng.normal(0, 1, n)
        cor = exact.gibbs_moments(IsingModel(beta, u, None, h)).cor
        err = approx.opnorm_error(cor, approx.approx_correlation(approx.approx_params(beta, u, h)))
        assert err <= 0.25 * beta / n * math.log(n) ** 2


def test_correlation_psd_contraction(rng):
    for _ in range(100):
        n = int(rng.integers(1, 40))
        p = approx.approx_params(rng.uniform(0, 10), rng.uniform(-1, 1, n), rng.normal(0, 1, n))
        lam = np.linalg.eigvalsh(approx.approx_correlation(p))
        assert lam[0] >= -1e-12 and lam[-1] <= 1 + 1e-12
        assert lam[0] >= 1 - p.alpha_star * np.sum(p.w_star**2) / n - 1e-12


def test_cavity_cgf_examples(rng):
    m = IsingModel(1.0, rng.uniform(-1, 1, 6), None, rng.normal(0, 1, 6))
    for I in ((), (0,), (2, 4)):
        assert approx.cavity_cgf(m, I, 0.0) == pytest.approx(0.0, abs=1e-14)
    one = IsingModel(0.0, [1.0])
    for s in (-2.0, 0.3, 5.0):
        assert approx.cavity_cgf(one, (), s) == pytest.approx(math.log(math.cosh(s)), abs=1e-13)
    with pytest.raises(ValueError):
        approx.cavity_cgf(IsingModel(0.0, [1, 1], [[0, 1], [1, 0]]), (), 0.1)


def test_cavity_cgf_two_representations(rng):
    n = 10
    for _ in range(5):
        m = IsingModel(rng.uniform(0.2, 4), rng.uniform(-1, 1, n), None, rng.normal(0, 1, n))
        for I in ((0,), (3, 7)):
            for s in (-1.5, 0.4, 2.0):
                assert approx.cavity_cgf(m, I, s) == pytest.approx(approx.cavity_cgf_tilted(m, I, s), abs=1e-10)


def test_cavity_capacity():
    with pytest.raises(CapacityError):
        approx.cavity_cgf(IsingModel(1.0, np.ones(approx.MAX_CAVITY_SITES + 1)), (), 0.1)


def test_cov_via_cavity_examples(rng):
    h = rng.normal(0, 1, 5)
    m = IsingModel(0.0, rng.uniform(-1, 1, 5), None, h)
    assert approx.cov_via_cavity(m, 0, 1) == pytest.approx(0.0, abs=1e-14)
    assert approx.cov_via_cavity(m, 2, 2) == pytest.approx(1 / math.cosh(h[2]) ** 2, abs=1e-14)
    n = 8
    neg = IsingModel(1.0, np.ones(n))
    C = approx.covariance_via_cavity(neg)
    assert np.all(C[~np.eye(n, dtype=bool)] < 0)


def test_cov_via_cavity_matches_enumeration(rng):
    for _ in range(10):
        n = 8
        m = IsingModel(rng.uniform(0, 4), rng.uniform(-1, 1, n), None, rng.normal(0, 1, n))
        np.testing.assert_allclose(approx.covariance_via_cavity(m), exact.gibbs_moments(m).cov, atol=1e-10)
    n = 12
    m = IsingModel(2.0, rng.uniform(-1, 1, n), None, rng.normal(0, 1, n))
    np.testing.assert_allclose(approx.covariance_via_cavity(m), exact.gibbs_moments(m).cov, atol=1e-10)


def test_entrywise_form(rng):
    """Var/v* and Cov/(-alpha u_i u_j v_i v_j / n) close to 1, with constants fitted at n=8."""

    def ratios(n, draws, beta=1.0):
        dv, dc = [], []
        r = np.random.default_rng(n)
        for _ in range(draws):
            u = r.uniform(0.5, 1, n) * r.choice([-1, 1], n)
            h = r.normal(0, 0.5, n)
            cov = exact.gibbs_moments(IsingModel(beta, u, None, h)).cov
            p = approx.approx_params(beta, u, h)
            dv.append(np.abs(np.diag(cov) / p.v_star - 1).max())
            pred = -p.alpha_star * np.outer(u * p.v_star, u * p.v_star) / n
            off = ~np.eye(n, dtype=bool)
            dc.append(np.abs(cov[off] / pred[off] - 1).max())
        return max(dv), max(dc)

    v8, c8 = ratios(8, 20)
    K, K2 = v8 * 8, c8
    v12, c12 = ratios(12, 10)
    assert v12 <= K / 12 * 1.5
    assert c12 <= K2 * 1.5


def test_opnorm_examples(rng):
    A = rng.normal(size=(5, 5))
    A = A + A.T
    assert approx.opnorm_error(A, A) == 0.0
    assert approx.opnorm_error(np.diag([1.0, 2.0]), np.eye(2)) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        approx.opnorm_error(np.eye(2), np.eye(3))
    for _ in range(5):
        A, B = rng.normal(size=(16, 16)), rng.normal(size=(16, 16))
        A, B = A + A.T, B + B.T
        assert approx.opnorm_error(A, B) == pytest.approx(power_iteration_opnorm(A - B), abs=1e-8)


def test_opnorm_lanczos_path(rng):
    n = approx.DENSE_OPNORM_N + 10
    d = rng.normal(size=n)
    D = np.diag(d)
    assert approx.opnorm_error(D, np.zeros((n, n))) == pytest.approx(np.abs(d).max(), abs=1e-8)


def test_gamma_bound():
    assert approx.gamma_mlsi_bound(50, 0.0) == pytest.approx(1 / 50, rel=1e-15)
    assert approx.gamma_mlsi_bound(100, 0.5) == pytest.approx(5.6419e-4, rel=1e-4)
    v = approx.gamma_mlsi_bound(100, 0.999)
    assert 0 < v < 1 / 100
    with pytest.raises(ValueError):
        approx.gamma_mlsi_bound(10, 1.0)


def test_bounds(oracles):
    assert approx.hs_bound(1, 0.25) == 2.0
    with pytest.raises(ValueError):
        approx.hs_bound(1, 0.5)
    for j in (0.0, 0.1, 0.3, 0.49):
        assert approx.theorem_main_bound(j, 0.0) == pytest.approx(1 - 2 * j, abs=1e-12)
    v = approx.theorem_main_bound(0.3, 0.01)
    assert 0.38 < v < 0.40
    assert v == pytest.approx(float(oracles["main_bound"]["0.3,0.01"]), abs=1e-12)
    assert approx.theorem_main_bound(0.1, 0.5) == pytest.approx(float(oracles["main_bound"]["0.1,0.5"]), abs=1e-12)
    assert approx.theorem_main_bound_closed(0.3, 0.01) == pytest.approx(v, abs=1e-12)
    with pytest.raises(ValueError):
        approx.theorem_main_bound(0.3, 1.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 50), st.integers(0, 2**32 - 1), st.integers(1, 12))
def test_fixed_point_property(beta, seed, n):
    r = np.random.default_rng(seed)
    u, h = r.uniform(-1, 1, n), r.normal(0, 5, n)
    m, lam = approx.solve_fixed_point(beta, u, h)
    assert -1 <= m <= 1
    assert abs(approx.fixed_point_residual(beta, u, h, m)) <= 1e-12
