"""Mean-field fixed point, rank-one covariance/correlation approximants, cavity identities,
and closed-form log-Sobolev bound calculators.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy import integrate
from scipy.sparse.linalg import eigsh
from scipy.special import logsumexp

from .errors import CapacityError

SECH_CLAMP = 350.0
FIXED_POINT_TOL = 1e-13
FIXED_POINT_MAXITER = 200
MAX_CAVITY_SITES = 22
DENSE_OPNORM_N = 2048


def _sech(z):
    return 1.0 / np.cosh(np.clip(z, -SECH_CLAMP, SECH_CLAMP))


def _vectors(u, h):
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    h = np.atleast_1d(np.asarray(h, dtype=np.float64))
    if u.shape != h.shape or u.ndim != 1:
        raise ValueError("u and h must be vectors of equal length")
    return u, h


def fixed_point_residual(beta, u, h, m):
    u, h = _vectors(u, h)
    return m - float(np.mean(u * np.tanh(h - 2.0 * beta * m * u)))


def solve_fixed_point(beta, u, h):
    """Root m* of m = mean(u * tanh(h - 2 beta m u)); returns (m*, lambda* = -2 beta m*).

    g(m) = m - mean(...) is increasing with g' >= 1 and g(-1) <= 0 <= g(1), so Newton
    steps are kept inside a shrinking bracket and replaced by bisection when they leave it.
    """
    u, h = _vectors(u, h)
    beta = float(beta)
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    lo, hi = -1.0, 1.0
    m = float(np.clip(np.mean(u * np.tanh(h)), -1.0, 1.0))
    for _ in range(FIXED_POINT_MAXITER):
        arg = h - 2.0 * beta * m * u
        t = np.tanh(arg)
        g = m - float(np.mean(u * t))
        if abs(g) <= FIXED_POINT_TOL:
            break
        if g > 0:
            hi = m
        else:
            lo = m
        dg = 1.0 + 2.0 * beta * float(np.mean(u * u * (1.0 - t * t)))
        step = m - g / dg
        m = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo < 1e-300:
            break
    return m, -2.0 * beta * m


def alpha_star(beta, F_second):
    """2 beta / (1 + 2 beta F'')."""
    return 2.0 * beta / (1.0 + 2.0 * beta * F_second)


@dataclass(frozen=True)
class ApproxParams:
    m_star: float
    lambda_star: float
    v_star: np.ndarray
    w_star: np.ndarray
    alpha_star: float
    F_second: float
    u: np.ndarray
    beta: float


def approx_params(beta, u, h):
    u, h = _vectors(u, h)
    m, lam = solve_fixed_point(beta, u, h)
    sech = _sech(h + lam * u)
    v = sech * sech
    w = u * sech
    F2 = float(np.mean(w * w))
    alpha = alpha_star(beta, F2)
    for a in (v, w, u):
        a.setflags(write=False)
    return ApproxParams(m, lam, v, w, alpha, F2, u, float(beta))


def _check_n(params, n):
    if n is None:
        return params.v_star.shape[0]
    if n != params.v_star.shape[0]:
        raise ValueError("n does not match the parameter vectors")
    return n


def approx_covariance(params, n=None):
    """diag(v*) - (alpha*/n) (v* . u)(v* . u)^T."""
    n = _check_n(params, n)
    vu = params.v_star * params.u
    return np.diag(params.v_star) - (params.alpha_star / n) * np.outer(vu, vu)


def approx_correlation(params, n=None):
    """I - (alpha*/n) w* w*^T."""
    n = _check_n(params, n)
    return np.eye(n) - (params.alpha_star / n) * np.outer(params.w_star, params.w_star)


def _require_no_interaction(model):
    if model.has_interaction:
        raise ValueError("cavity identities need J = 0")


def _cavity_sums(u, h, n):
    """For the sites (u, h), return (a, b): a = <u,x>, b = <h,x> over all sign patterns."""
    a = np.zeros(1)
    b = np.zeros(1)
    for uk, hk in zip(u, h):
        a = np.concatenate([a - uk, a + uk])
        b = np.concatenate([b - hk, b + hk])
    return a, b


class CavityCGF:
    """Psi^(I)(s) = log E exp(s M^(I)) for the cavity law on the sites outside I.

    The cavity law has log-weight -(beta/n) <u^(I), x>^2 + <h^(I), x> with the
    ORIGINAL n in both the tilt and the magnetization M^(I) = <u^(I), x>/n.
    """

    def __init__(self, beta, u, h, removed=()):
        u, h = _vectors(u, h)
        self.n = u.shape[0]
        removed = sorted({int(i) for i in removed})
        if any(not 0 <= i < self.n for i in removed):
            raise IndexError("removed site out of range")
        keep = np.setdiff1d(np.arange(self.n), removed)
        if keep.shape[0] > MAX_CAVITY_SITES:
            raise CapacityError(f"cavity enumeration needs at most {MAX_CAVITY_SITES} sites")
        a, b = _cavity_sums(u[keep], h[keep], self.n)
        self._mag = a / self.n
        self._base = -(beta / self.n) * a * a + b
        self._logZ = logsumexp(self._base)

    def __call__(self, s):
        return float(logsumexp(self._base + s * self._mag) - self._logZ)


def cavity_cgf(model, I, s):
    """Psi^(I)(s) by exact enumeration; ``model`` must have J = 0."""
    _require_no_interaction(model)
    if len(set(I)) > 2:
        raise ValueError("at most two sites may be removed")
    return CavityCGF(model.beta, model.u, model.h, I)(s)


def cavity_cgf_tilted(model, I, s):
    """Psi^(I)(s) through the independent-spin representation around the fixed point.

    Psi(s) = s m* + log( E[exp(s Z/sqrt(n) - beta Z^2)] / E[exp(-beta Z^2)] ), where
    Z = (sum_{i not in I} u_i xi_i - n m*)/sqrt(n) and the xi_i are independent signs with
    P(xi_i = +1) proportional to exp(h_i + lambda* u_i).
    """
    _require_no_interaction(model)
    n, beta = model.n, model.beta
    m_star, lam = solve_fixed_point(beta, model.u, model.h)
    keep = np.setdiff1d(np.arange(n), sorted(set(I)))
    if keep.shape[0] > MAX_CAVITY_SITES:
        raise CapacityError(f"cavity enumeration needs at most {MAX_CAVITY_SITES} sites")
    field = model.h[keep] + lam * model.u[keep]
    # log P(xi) = sum_i (field_i xi_i - log 2cosh field_i); the constant cancels in the ratio
    a, b = _cavity_sums(model.u[keep], field, n)
    Z = (a - n * m_star) / math.sqrt(n)
    num = logsumexp(b + s * Z / math.sqrt(n) - beta * Z * Z)
    den = logsumexp(b - beta * Z * Z)
    return float(s * m_star + num - den)


def _log_sub_exp(x, y):
    """Return (sign, log|e^x - e^y|)."""
    if x == y:
        return 0.0, -math.inf
    if x > y:
        return 1.0, x + math.log(-math.expm1(y - x))
    return -1.0, y + math.log(-math.expm1(x - y))


def _variance_from_cavity(psi, beta, ui, hi):
    pp, pm = psi(2 * beta * ui), psi(-2 * beta * ui)
    log_den = np.logaddexp(hi + pm, -hi + pp)
    return 4.0 * math.exp(pp + pm - 2.0 * log_den)


def _covariance_from_cavity(psi, beta, n, ui, uj, hi, hj):
    p = 2 * beta * (ui + uj)
    q = 2 * beta * (ui - uj)
    c = 2 * beta * ui * uj / n
    pp, pm, qp, qm = psi(p), psi(-p), psi(q), psi(-q)
    sign, log_xi = _log_sub_exp(-2 * c + pp + pm, 2 * c + qp + qm)
    log_theta = logsumexp([
        -c + hi + hj + pm,
        -c - hi - hj + pp,
        c + hi - hj + qm,
        c - hi + hj + qp,
    ])
    if sign == 0.0:
        return 0.0
    return sign * 4.0 * math.exp(log_xi - 2.0 * log_theta)


def cov_via_cavity(model, i, j):
    """Cov(X_i, X_j) (Var(X_i) when i == j) from cavity generating functions."""
    _require_no_interaction(model)
    n, beta, u, h = model.n, model.beta, model.u, model.h
    if i == j:
        psi = CavityCGF(beta, u, h, (i,))
        return _variance_from_cavity(psi, beta, u[i], h[i])
    psi = CavityCGF(beta, u, h, (i, j))
    return _covariance_from_cavity(psi, beta, n, u[i], u[j], h[i], h[j])


def covariance_via_cavity(model):
    """Full covariance matrix assembled from the cavity identities."""
    _require_no_interaction(model)
    n = model.n
    C = np.empty((n, n))
    for i in range(n):
        C[i, i] = cov_via_cavity(model, i, i)
    for i, j in combinations(range(n), 2):
        C[i, j] = C[j, i] = cov_via_cavity(model, i, j)
    return C


def opnorm_error(A, B):
    """Largest absolute eigenvalue of A - B."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape != B.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("opnorm_error needs two square matrices of the same shape")
    D = A - B
    D = 0.5 * (D + D.T)
    if D.shape[0] == 0:
        return 0.0
    if D.shape[0] <= DENSE_OPNORM_N:
        lam = np.linalg.eigvalsh(D)
        return float(max(abs(lam[0]), abs(lam[-1])))
    lam = eigsh(D, k=1, which="LM", tol=1e-10, return_eigenvectors=False)
    return float(abs(lam[0]))


def gamma_mlsi_bound(n, delta):
    """(n^{1+delta} Gamma(1-delta))^{-1}."""
    if not 0 <= delta < 1:
        raise ValueError("delta must lie in [0, 1)")
    return 1.0 / (n ** (1.0 + delta) * math.gamma(1.0 - delta))


def hs_bound(L, j_op):
    """L / (1 - 2 L ||J||)."""
    if not 2.0 * L * j_op < 1.0:
        raise ValueError("hs_bound needs 2 L ||J|| < 1")
    return L / (1.0 - 2.0 * L * j_op)


def theorem_main_bound(j_op, alpha):
    """exp(-int_0^1 2(1+a)j / (1 - 2(1+a)(1-t)j) dt), evaluated by adaptive quadrature."""
    c = 2.0 * (1.0 + alpha) * j_op
    if not c < 1.0:
        raise ValueError("theorem_main_bound needs 2 (1+alpha) ||J|| < 1")
    val, _ = integrate.quad(lambda t: c / (1.0 - c * (1.0 - t)), 0.0, 1.0,
                            epsabs=1e-14, epsrel=1e-13)
    return math.exp(-val)


def theorem_main_bound_closed(j_op, alpha):
    """Closed form of ``theorem_main_bound``: the integral equals -log(1 - 2(1+alpha)j)."""
    c = 2.0 * (1.0 + alpha) * j_op
    if not c < 1.0:
        raise ValueError("theorem_main_bound needs 2 (1+alpha) ||J|| < 1")
    return 1.0 - c
