"""Quadratically tilted moments of normalized sums of independent signs.

With h_m(x) = x^m exp(-gamma x^2), the module compares E[h_m(Z + mu)] for
Z = omega^{-1/2} sum_k a_k (xi_k - E xi_k) against the centered standard Gaussian
value E[h_m(G)], and evaluates the Poisson-equation solutions that drive that comparison.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp
from scipy.stats import binom

from .errors import CapacityError
from .rng import make_rng

MAX_GENERAL_N = 20
MIN_MC_SAMPLES = 1000
_MC_CHUNK = 1 << 16


@dataclass(frozen=True)
class TiltedEnsemble:
    """Weights a_k, means E[xi_k], tilt gamma and shift mu; omega is derived."""

    weights: np.ndarray
    means: np.ndarray
    gamma: float = 0.0
    mu: float = 0.0

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.weights, dtype=np.float64)).copy()
        p = np.atleast_1d(np.asarray(self.means, dtype=np.float64)).copy()
        if a.ndim != 1 or a.shape != p.shape or a.shape[0] == 0:
            raise ValueError("weights and means must be non-empty vectors of equal length")
        if np.any(np.abs(a) > 1):
            raise ValueError("weights must satisfy |a_k| <= 1")
        if np.any(np.abs(p) >= 1):
            raise ValueError("means must lie strictly inside (-1, 1)")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        a.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "weights", a)
        object.__setattr__(self, "means", p)
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "mu", float(self.mu))
        if self.omega <= 0:
            raise ValueError("ensemble has zero variance")

    @property
    def n(self):
        return self.weights.shape[0]

    @property
    def omega(self):
        return float(np.sum(self.weights**2 * (1.0 - self.means**2)))

    @property
    def equal_weight(self):
        return bool(np.all(self.weights == self.weights[0]) and np.all(self.means == self.means[0]))

    def with_tilt(self, gamma, mu=0.0):
        return TiltedEnsemble(self.weights, self.means, gamma, mu)


def fair_coin(n, gamma=0.0, mu=0.0):
    """n unit-weight symmetric signs, so omega = n."""
    return TiltedEnsemble(np.ones(n), np.zeros(n), gamma, mu)


def equal_weight(n, mean, weight=1.0, gamma=0.0, mu=0.0):
    return TiltedEnsemble(np.full(n, float(weight)), np.full(n, float(mean)), gamma, mu)


def _atoms(ens):
    """Support points of Z and their log-probabilities."""
    a, p, n = ens.weights, ens.means, ens.n
    sd = math.sqrt(ens.omega)
    if ens.equal_weight:
        k = np.arange(n + 1)
        logp = binom.logpmf(k, n, 0.5 * (1.0 + p[0]))
        logp -= logsumexp(logp)
        z = a[0] * (2.0 * k - n - n * p[0]) / sd
        return z, logp
    if n > MAX_GENERAL_N:
        raise CapacityError(f"general-weight enumeration needs n <= {MAX_GENERAL_N}")
    s = np.zeros(1)
    lp = np.zeros(1)
    for ak, pk in zip(a, p):
        s = np.concatenate([s - ak * (1.0 + pk), s + ak * (1.0 - pk)])
        lp = np.concatenate([lp + math.log(0.5 * (1.0 - pk)), lp + math.log(0.5 * (1.0 + pk))])
    return s / sd, lp


def _h_log_terms(y, m, gamma):
    """log|h_m(y)| and sign, with h_m(0) = 0 for m >= 1 (log = -inf, sign 0)."""
    with np.errstate(divide="ignore"):
        if m == 0:
            return -gamma * y * y, np.ones_like(y)
        return m * np.log(np.abs(y)) - gamma * y * y, np.sign(y) ** m


def _tilted_log_expectation(z, logp, m, gamma, mu):
    """(sign, log|E[h_m(Z + mu)]|) by signed log-sum-exp over the atoms."""
    y = z + mu
    logh, sign = _h_log_terms(y, m, gamma)
    keep = sign != 0
    if not np.any(keep):
        return 0.0, -math.inf
    val, s = logsumexp(logp[keep] + logh[keep], b=sign[keep], return_sign=True)
    return (float(s), float(val)) if np.isfinite(val) else (0.0, -math.inf)


def _tilted_expectation(z, logp, m, gamma, mu):
    s, val = _tilted_log_expectation(z, logp, m, gamma, mu)
    return s * math.exp(val) if s else 0.0


def h_eval(m, gamma, x):
    """h_m(x) = x^m exp(-gamma x^2), with h_m = 0 for m < 0."""
    x = np.asarray(x, dtype=np.float64)
    if m < 0:
        return np.zeros_like(x)
    return x**m * np.exp(-gamma * x * x)


def gaussian_tilted_moment(m, gamma):
    """E[G^m exp(-gamma G^2)] for standard normal G."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    if m % 2:
        return 0.0
    val = (1.0 + 2.0 * gamma) ** -0.5
    for k in range(2, m + 1, 2):
        val *= (k - 1) / (1.0 + 2.0 * gamma)
    return val


def exact_tilted_moment(ens, m):
    """E[h_m(Z + mu)] by exact summation over the law of Z."""
    if m % 2 and ens.mu == 0 and not np.any(ens.means):
        return 0.0  # Z is symmetric and h_m is odd
    z, logp = _atoms(ens)
    return _tilted_expectation(z, logp, m, ens.gamma, ens.mu)


def mc_tilted_moment(ens, m, samples, seed):
    """Monte Carlo mean and standard error of h_m(Z + mu)."""
    if samples < MIN_MC_SAMPLES:
        raise ValueError(f"need at least {MIN_MC_SAMPLES} samples")
    rng = make_rng(seed)
    sd = math.sqrt(ens.omega)
    a, p = ens.weights, ens.means
    vals = []
    remaining = int(samples)
    while remaining:
        b = min(remaining, _MC_CHUNK)
        if ens.equal_weight:
            k = rng.binomial(ens.n, 0.5 * (1.0 + p[0]), size=b)
            z = a[0] * (2.0 * k - ens.n - ens.n * p[0]) / sd
        else:
            xi = np.where(rng.random((b, ens.n)) < 0.5 * (1.0 + p), 1.0, -1.0)
            z = ((xi - p) @ a) / sd
        vals.append(h_eval(m, ens.gamma, z + ens.mu))
        remaining -= b
    v = np.concatenate(vals)
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.shape[0]))


def deficit(ens, m):
    """|E[h_m(Z + mu)] - E[h_m(G)]| for this ensemble (G centered)."""
    return abs(exact_tilted_moment(ens, m) - gaussian_tilted_moment(m, ens.gamma))


@dataclass(frozen=True)
class TiltedVariance:
    variance: float
    prediction: float
    zeta: float


def tilted_variance(ens, t, beta_tilt, t_scale_limit=4.0):
    """Variance of W = n^{-1/2} sum_k a_k (xi_k - E xi_k) under the law tilted by exp(tW - beta W^2).

    For beta > 0 the variance is assembled from the h_0, h_1, h_2 moments of Z shifted by
    mu = -(t/2beta) sqrt(n/omega) at gamma = beta omega / n; at beta = 0 the exponential
    tilt is summed directly. The Gaussian prediction is zeta/(1 + 2 beta zeta), zeta = omega/n.
    """
    n = ens.n
    zeta = ens.omega / n
    if beta_tilt < 0:
        raise ValueError("beta_tilt must be nonnegative")
    if abs(t) > t_scale_limit * beta_tilt / math.sqrt(n):
        warnings.warn("|t| exceeds the C beta / sqrt(n) range of the Gaussian comparison",
                      RuntimeWarning, stacklevel=2)
    prediction = zeta / (1.0 + 2.0 * beta_tilt * zeta)
    if beta_tilt == 0:
        return TiltedVariance(tilted_variance_direct(ens, t, 0.0), prediction, zeta)
    z, logp = _atoms(ens)
    gamma = beta_tilt * zeta
    mu = -(t / (2.0 * beta_tilt)) / math.sqrt(zeta)
    # ratios taken in log space: all three moments can underflow together for large |mu|
    _, l0 = _tilted_log_expectation(z, logp, 0, gamma, mu)
    s1, l1 = _tilted_log_expectation(z, logp, 1, gamma, mu)
    s2, l2 = _tilted_log_expectation(z, logp, 2, gamma, mu)
    r1 = s1 * math.exp(l1 - l0) if s1 else 0.0
    r2 = s2 * math.exp(l2 - l0) if s2 else 0.0
    var = zeta * (r2 - r1 * r1)
    return TiltedVariance(float(var), prediction, zeta)


def tilted_variance_direct(ens, t, beta_tilt):
    """Same variance by reweighting the atoms of W directly (two-pass, centered)."""
    z, logp = _atoms(ens)
    w = math.sqrt(ens.omega / ens.n) * z
    lw = logp + t * w - beta_tilt * w * w
    prob = np.exp(lw - logsumexp(lw))
    mean = float(prob @ w)
    return float(prob @ (w - mean) ** 2)


def hm_derivative_coeffs(m, ell):
    """Integer table c[i + ell] with h_m^{(ell)} = sum_i c_{m,ell,i} gamma^{(ell+i)/2} h_{m+i}.

    Built from h_k' = k h_{k-1} - 2 gamma h_{k+1}.
    """
    if m < 0 or ell < 0:
        raise ValueError("m and ell must be nonnegative")
    c = {0: 1}
    for _ in range(ell):
        nxt = {}
        for i, v in c.items():
            k = m + i
            if k > 0:
                nxt[i - 1] = nxt.get(i - 1, 0) + k * v
            nxt[i + 1] = nxt.get(i + 1, 0) - 2 * v
        c = nxt
    return np.array([c.get(i, 0) for i in range(-ell, ell + 1)], dtype=np.int64)


def hm_derivative_eval(m, ell, gamma, x):
    """h_m^{(ell)}(x) through the coefficient table."""
    c = hm_derivative_coeffs(m, ell)
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    for idx, ci in enumerate(c):
        i = idx - ell
        if ci and m + i >= 0:
            out = out + ci * gamma ** ((ell + i) / 2) * h_eval(m + i, gamma, x)
    return out


def poisson_solution_eval(m, gamma, x):
    """f_m(x) = -x^{m-1} exp(-gamma x^2) / (1 + 2 gamma)."""
    if m < 1:
        raise ValueError("the Poisson solution f_m needs m >= 1")
    return -h_eval(m - 1, gamma, x) / (1.0 + 2.0 * gamma)


def tilde_h_eval(m, gamma, x):
    """h_m(x) - (m-1)/(1+2 gamma) h_{m-2}(x); its Gaussian mean is zero."""
    return h_eval(m, gamma, x) - (m - 1) / (1.0 + 2.0 * gamma) * h_eval(m - 2, gamma, x)


def _double_factorial_odd(k):
    return math.prod(range(k - 1, 0, -2)) if k > 0 else 1


def gaussian_parity_expectation(m, ell, a, gamma):
    """E[f_m^{(ell)}(G_a)] for G_a ~ N(0, a).

    Each h_k term integrates against N(0, a) as (1 + 2a gamma)^{-1/2} times the k-th
    moment of N(0, a/(1 + 2a gamma)); odd moments vanish, so m + ell even gives exactly 0.
    """
    if m < 1:
        raise ValueError("the Poisson solution f_m needs m >= 1")
    if a <= 0:
        raise ValueError("a must be positive")
    c = hm_derivative_coeffs(m - 1, ell)
    s2 = a / (1.0 + 2.0 * a * gamma)
    base = (1.0 + 2.0 * a * gamma) ** -0.5
    total = 0.0
    for idx, ci in enumerate(c):
        i = idx - ell
        k = m - 1 + i
        if ci == 0 or k < 0 or k % 2:
            continue
        total += ci * gamma ** ((ell + i) / 2) * base * _double_factorial_odd(k) * s2 ** (k // 2)
    return -total / (1.0 + 2.0 * gamma)
