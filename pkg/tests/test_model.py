import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spinlab import ConfigError, IsingModel, exact
from spinlab.model import (
    conditional_minus_prob,
    conditional_plus_prob,
    energy_exponent,
    glauber_step,
    magnetization,
)
from spinlab.rng import make_rng


def random_model(rng, n, beta_max=3.0):
    G = rng.normal(0, 0.3, (n, n))
    return IsingModel(rng.uniform(0, beta_max), rng.uniform(-1, 1, n), (G + G.T) / 2,
                      rng.normal(0, 1, n))


def test_energy_examples():
    assert energy_exponent(IsingModel(0.0, np.zeros(4)), [1, -1, -1, 1]) == 0.0
    assert energy_exponent(IsingModel(1.0, [1, 1]), [1, 1]) == pytest.approx(-2.0, abs=1e-15)
    m = IsingModel(0.0, [0, 0], [[0, 0.1], [0.1, 0]], [0.5, -0.5])
    assert energy_exponent(m, [1, 1]) == pytest.approx(0.2, abs=1e-15)


def test_energy_dimension_mismatch():
    with pytest.raises(ValueError):
        energy_exponent(IsingModel(0.0, np.zeros(3)), [1, 1])


def test_validation():
    with pytest.raises(ValueError):
        IsingModel(1.0, [1.5, 0])
    with pytest.raises(ValueError):
        IsingModel(-1.0, [0.5, 0])
    with pytest.raises(ValueError):
        IsingModel(1.0, [0.5, 0], [[0, 1], [0.5, 0]])
    with pytest.raises(ValueError):
        energy_exponent(IsingModel(0.0, [0.0]), [2])


def test_model_is_immutable():
    m = IsingModel(1.0, [0.5, 0.5])
    with pytest.raises(ValueError):
        m.u[0] = 0.0
    with pytest.raises(Exception):
        m.beta = 2.0


def test_conditional_examples():
    assert conditional_plus_prob(IsingModel(0.0, [0, 0]), [1, -1], 0) == 0.5
    m = IsingModel(0.0, [0.0], None, [0.5])
    assert conditional_plus_prob(m, [-1], 0) == pytest.approx(1 / (1 + math.exp(-1)), abs=1e-15)
    with pytest.raises(IndexError):
        conditional_plus_prob(m, [1], 1)


def test_conditional_matches_weight_ratio(rng):
    """P(+1 | rest) equals w(x+)/(w(x+) + w(x-)) from two brute-force weights."""
    for _ in range(20):
        m = random_model(rng, 3)
        x = rng.choice([-1, 1], 3)
        for i in range(3):
            xp, xm = x.copy(), x.copy()
            xp[i], xm[i] = 1, -1
            wp, wm = energy_exponent(m, xp), energy_exponent(m, xm)
            expected = 1.0 / (1.0 + math.exp(wm - wp))
            assert conditional_plus_prob(m, x, i) == pytest.approx(expected, abs=1e-12)
            assert conditional_plus_prob(m, x, i) + conditional_minus_prob(m, x, i) == pytest.approx(1, abs=1e-15)


def test_glauber_single_spin_frequency():
    m = IsingModel(0.0, [0.0])
    rng = make_rng(7)
    hits = sum(glauber_step(m, [1], rng)[0] == 1 for _ in range(100_000))
    assert abs(hits / 1e5 - 0.5) <= 3 * math.sqrt(0.25 / 1e5)


def test_glauber_strong_field_concentration():
    n = 20
    m = IsingModel(0.0, np.zeros(n), None, np.full(n, 10.0))
    rng = make_rng(1)
    x = -np.ones(n, dtype=np.int8)
    for _ in range(50 * n):
        x = glauber_step(m, x, rng)
    assert np.mean(x == 1) >= 0.99


def test_glauber_step_changes_one_site_and_is_deterministic():
    m = IsingModel(1.0, np.full(6, 0.5), None, np.ones(6))
    x0 = np.array([1, -1, 1, -1, 1, -1])
    a = [glauber_step(m, x0, make_rng(3)) for _ in range(2)]
    assert np.array_equal(a[0], a[1])
    assert np.sum(a[0] != x0) <= 1


def test_magnetization_examples():
    assert magnetization(np.ones(4), np.ones(4)) == 1.0
    assert magnetization(np.ones(4), [1, 1, -1, -1]) == 0.0
    assert magnetization([1, -1], [1, 1]) == 0.0


def test_identity_shift_leaves_measure_unchanged(rng):
    m = random_model(rng, 5)
    shifted = IsingModel(m.beta, m.u, m.J + 0.7 * np.eye(5), m.h)
    a, b = exact.gibbs_moments(m), exact.gibbs_moments(shifted)
    np.testing.assert_allclose(a.mean, b.mean, atol=1e-13)
    np.testing.assert_allclose(a.cov, b.cov, atol=1e-13)


def test_glauber_preserves_gibbs(rng):
    for n in (1, 2, 3, 4):
        m = random_model(rng, n)
        pi = exact.stationary(m)
        P = exact.transition_matrix(m)
        np.testing.assert_allclose(P.T @ pi, pi, atol=1e-12)


def test_json_roundtrip_lossless(rng):
    m = random_model(rng, 6)
    back = IsingModel.from_json(m.to_json())
    assert back == m
    assert back.digest() == m.digest()
    d = json.loads(m.to_json())
    assert set(d) == {"n", "beta", "u", "J", "h"}


def test_from_dict_rejects_unknown_fields():
    with pytest.raises(ConfigError):
        IsingModel.from_dict({"beta": 1.0, "u": [1.0], "colour": "red"})


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_conditionals_sum_to_one(n, seed):
    r = np.random.default_rng(seed)
    m = random_model(r, n)
    x = r.choice([-1, 1], n)
    for i in range(n):
        p = conditional_plus_prob(m, x, i)
        assert 0.0 < p < 1.0 or abs(p - 0.5) > 0.49
        assert p + conditional_minus_prob(m, x, i) == pytest.approx(1.0, abs=1e-15)


def test_backend_env_forces_fallback():
    import os
    import subprocess
    import sys

    env = {**os.environ, "SPINLAB_BACKEND": "python"}
    out = subprocess.run([sys.executable, "-c", "import spinlab; print(spinlab.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True).stdout.strip()
    assert out == "python"
