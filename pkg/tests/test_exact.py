import math

import numpy as np
import pytest

from spinlab import CapacityError, IsingModel, exact
from spinlab._backend import kernels
from spinlab.model import energy_exponent

from conftest import model_from


def test_logz_trivial():
    assert exact.partition_function(IsingModel(0.0, np.zeros(7))) == pytest.approx(7 * math.log(2), abs=1e-13)
    assert exact.partition_function(IsingModel(0.0, [0.0], None, [1.7])) == pytest.approx(
        math.log(2 * math.cosh(1.7)), abs=1e-14)


def test_logz_high_precision_oracle(oracles):
    ref = oracles["logz_n10"]
    m = model_from(ref["model"])
    logZ = exact.partition_function(m)
    assert abs(logZ - float(ref["logZ"])) <= 1e-10 * abs(float(ref["logZ"]))
    g = exact.gibbs_moments(m)
    np.testing.assert_allclose(g.mean, np.array(ref["mean"], float), atol=1e-12)
    np.testing.assert_allclose(g.cov, np.array(ref["cov"], float), atol=1e-12)


def test_moments_oracle_n4(oracles):
    ref = oracles["moments_n4"]
    g = exact.gibbs_moments(model_from(ref["model"]))
    assert g.logZ == pytest.approx(float(ref["logZ"]), abs=1e-13)
    np.testing.assert_allclose(g.cov, np.array(ref["cov"], float), atol=1e-13)


def test_product_measure_moments():
    h = np.array([0.3, -1.2, 2.0, 0.0])
    g = exact.gibbs_moments(IsingModel(0.0, np.zeros(4), None, h))
    np.testing.assert_allclose(g.cov, np.diag(1 / np.cosh(h) ** 2), atol=1e-14)
    np.testing.assert_allclose(g.cor, np.eye(4), atol=1e-14)


def test_two_spin_coupling():
    t = 0.37
    g = exact.gibbs_moments(IsingModel(0.0, [0, 0], [[0, t], [t, 0]]))
    assert g.cov[0, 1] == pytest.approx(math.tanh(2 * t), abs=1e-14)


def test_summary_invariants(rng):
    for _ in range(10):
        n = int(rng.integers(2, 9))
        G = rng.normal(0, 0.3, (n, n))
        m = IsingModel(rng.uniform(0, 3), rng.uniform(-1, 1, n), (G + G.T) / 2, rng.normal(0, 1, n))
        g = exact.gibbs_moments(m)
        assert np.linalg.eigvalsh(g.cov)[0] >= -1e-10
        np.testing.assert_allclose(np.diag(g.cor), 1.0, atol=1e-12)
        assert np.all(np.abs(g.mean) <= 1) and np.all(np.abs(g.cov) <= 1)
        opc, opr = np.linalg.norm(g.cov, 2), np.linalg.norm(g.cor, 2)
        assert opc <= opr * np.diag(g.cov).max() + 1e-12 and opr <= n + 1e-12


def test_degenerate_site_is_flagged():
    g = exact.gibbs_moments(IsingModel(0.0, [0, 0], None, [400.0, 0.1]))
    assert g.degenerate[0] and not g.degenerate[1]
    assert g.cor[0, 0] == 1.0 and g.cor[0, 1] == 0.0


def test_gray_code_matches_direct_evaluation(rng):
    n = 12
    G = rng.normal(0, 0.3, (n, n))
    m = IsingModel(1.5, rng.uniform(-1, 1, n), (G + G.T) / 2, rng.normal(0, 1, n))
    e = exact.log_weights(m)
    X = exact.state_matrix(n)
    for s in rng.integers(0, 1 << n, 1000):
        assert e[s] == pytest.approx(energy_exponent(m, X[s]), abs=1e-11)


def test_capacity_errors():
    with pytest.raises(CapacityError):
        exact.transition_matrix(IsingModel(0.0, np.zeros(exact.MAX_KERNEL_N + 1)))
    with pytest.raises(CapacityError):
        exact.mlsi_upper_estimate(IsingModel(0.0, np.zeros(exact.MAX_MLSI_N + 1)))


def test_transition_examples():
    P1 = exact.transition_matrix(IsingModel(0.0, [0.0]), sparse=False)
    np.testing.assert_allclose(P1, 0.5)
    P2 = exact.transition_matrix(IsingModel(0.0, [0, 0]), sparse=False)
    np.testing.assert_allclose(np.diag(P2), 0.5)
    assert P2[0, 1] == P2[0, 2] == 0.25 and P2[0, 3] == 0


def test_reversibility(rng):
    for _ in range(5):
        G = rng.normal(0, 0.3, (3, 3))
        m = IsingModel(rng.uniform(0, 3), rng.uniform(-1, 1, 3), (G + G.T) / 2, rng.normal(0, 1, 3))
        P = exact.transition_matrix(m, sparse=False)
        pi = exact.stationary(m)
        np.testing.assert_allclose(P.sum(axis=1), 1, atol=1e-12)
        F = pi[:, None] * P
        assert np.abs(F - F.T).max() < 1e-12


def test_gap_examples(oracles):
    assert exact.spectral_gap(IsingModel(0.0, [0.0])) == pytest.approx(1.0, abs=1e-14)
    assert exact.spectral_gap(IsingModel(0.0, np.zeros(3))) == pytest.approx(float(oracles["gap_free_n3"]), abs=1e-12)
    ref = oracles["chain_n3"]
    assert exact.spectral_gap(model_from(ref["model"])) == pytest.approx(float(ref["gap"]), abs=1e-12)


def test_gap_sparse_path_matches_dense(rng):
    """Above the dense cutoff the gap comes from the deflated Lanczos route."""
    n = 11
    m = IsingModel(2.0, rng.uniform(-1, 1, n), None, rng.normal(0, 0.5, n))
    sparse_gap = exact.spectral_gap(m)
    P = exact.transition_matrix(m, sparse=False)
    r = np.sqrt(exact.stationary(m))
    S = r[:, None] * P / r[None, :]
    lam = np.linalg.eigvalsh(0.5 * (S + S.T))
    assert sparse_gap == pytest.approx(1 - lam[-2], abs=1e-9)


def test_curie_weiss_gap_collapse():
    n = 12
    gap = {b: exact.spectral_gap(IsingModel(0.0, np.ones(n), (b / n) * np.ones((n, n)))) for b in (0.3, 0.7)}
    assert gap[0.7] < gap[0.3] / 5


def test_mlsi_examples():
    assert exact.mlsi_upper_estimate(IsingModel(0.0, [0.0])) == 1.0
    n = 6
    m = IsingModel(1.0, np.ones(n), None, np.linspace(-1, 1, n))
    v = exact.mlsi_upper_estimate(m, restarts=2)
    assert 0.0 <= v <= 1.0


def test_mlsi_antiferro_cheeger_consistency():
    n, b0 = 10, 1.0
    m = IsingModel(b0 * n, np.ones(n))  # exp(-b0 (sum x)^2)
    assert exact.mlsi_upper_estimate(m, restarts=2) <= 10 * 4 / (n * math.exp(4))


def test_mlsi_witness_certifies_upper_bound():
    m = IsingModel(1.0, np.ones(4), None, np.full(4, 0.3))
    X = exact.state_matrix(4).astype(float)
    f = np.exp(X[:, 0])
    est = exact.mlsi_upper_estimate(m, restarts=2)
    assert est <= exact.mlsi_witness_ratio(m, f) + 1e-12


def test_tv_mixing_examples(oracles):
    assert exact.tv_mixing_time(IsingModel(0.0, [0.0]), 0.25, [1]) == 1
    n = 8
    t = exact.tv_mixing_time(IsingModel(0.0, np.zeros(n)), 0.25, np.ones(n))
    centre = n * (math.log(n) + math.log(4)) / 2
    assert centre - 2 * n <= t <= centre + 2 * n
    ref = oracles["chain_n3"]
    m = model_from(ref["model"])
    assert exact.tv_mixing_time(m, 0.1, exact.state_matrix(3)[0]) == ref["tmix_eps_0.1_start_0"]
    assert exact.tv_mixing_time(m, 0.01, exact.state_matrix(3)[7]) == ref["tmix_eps_0.01_start_7"]


def test_tv_mixing_monotone(rng):
    for _ in range(20):
        n = 4
        m = IsingModel(rng.uniform(0, 3), rng.uniform(-1, 1, n), None, rng.normal(0, 1, n))
        start = -np.ones(n)
        assert exact.tv_mixing_time(m, 0.1, start) >= exact.tv_mixing_time(m, 0.3, start)


def test_conductance_examples():
    m = IsingModel(0.0, np.ones(2))
    assert exact.conductance(m, lambda x: x[0] == 1) == pytest.approx(0.25, abs=1e-15)
    with pytest.raises(ValueError):
        exact.conductance(m, np.zeros(4, bool))
    with pytest.raises(ValueError):
        exact.conductance(m, np.ones(4, bool))


def test_conductance_symmetry_and_cheeger(rng):
    for _ in range(10):
        n = int(rng.integers(2, 9))
        m = IsingModel(rng.uniform(0, 3), rng.uniform(-1, 1, n), None, rng.normal(0, 1, n))
        pi = exact.stationary(m)
        S = rng.random(1 << n) < 0.5
        if S.all() or not S.any():
            continue
        a, b = exact.conductance(m, S), exact.conductance(m, ~S)
        assert a * pi[S].sum() == pytest.approx(b * pi[~S].sum(), rel=1e-12)
        small = S if pi[S].sum() <= 0.5 else ~S
        assert exact.spectral_gap(m) <= 2 * exact.conductance(m, small) + 1e-12


def test_cheeger_exhaustive_n3(rng):
    m = IsingModel(2.0, rng.uniform(-1, 1, 3), None, rng.normal(0, 1, 3))
    pi = exact.stationary(m)
    best = math.inf
    for mask in range(1, 255):
        S = np.array([(mask >> s) & 1 for s in range(8)], bool)
        if pi[S].sum() <= 0.5:
            best = min(best, exact.conductance(m, S))
    assert exact.spectral_gap(m) <= 2 * best + 1e-12


def test_diagnostics_record():
    d = exact.diagnostics(IsingModel(1.0, np.ones(4)), eps_list=(0.1, 0.3), restarts=1)
    assert 0 <= d.gap <= 1 and d.mlsi_upper <= 1
    assert d.tmix[0.1] >= d.tmix[0.3]


def test_hubbard_stratonovich_bound(rng):
    n = 8
    for _ in range(5):
        Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
        lam = rng.uniform(0, 0.4, n)
        J = (Q * lam) @ Q.T
        J = (J + J.T) / 2
        for _ in range(10):
            cov = exact.gibbs_moments(IsingModel(0.0, np.zeros(n), J, rng.normal(0, 1, n))).cov
            assert np.linalg.norm(cov, 2) <= 1 / (1 - 2 * lam.max()) + 1e-9


def test_kernel_backends_agree(rng):
    from spinlab import _fallback

    n = 9
    G = rng.normal(0, 0.3, (n, n))
    K = np.ascontiguousarray((G + G.T) / 2 - 0.1 * np.outer(np.ones(n), np.ones(n)))
    h = rng.normal(0, 1, n)
    np.testing.assert_allclose(kernels.gray_exponents(K, h), _fallback.gray_exponents(K, h), atol=1e-11)
    a, b = kernels.gray_moments(K, h), _fallback.gray_moments(K, h)
    assert a[0] == pytest.approx(b[0], abs=1e-12)
    np.testing.assert_allclose(a[1], b[1], atol=1e-12)
    np.testing.assert_allclose(a[2], b[2], atol=1e-12)
