"""Brute-force analysis over all 2^n configurations.

States are indexed by bitmask: bit k of the index is set when x_k = +1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize
from scipy.sparse.linalg import LinearOperator, eigsh
from scipy.special import expit, logsumexp

from ._backend import kernels
from .errors import CapacityError
from .rng import make_rng

MAX_ENUM_N = 24
MAX_KERNEL_N = 14
MAX_MLSI_N = 12
DENSE_EIG_STATES = 1024
DEGENERATE_VAR = 1e-300


def set_caps(max_enum_n=None, max_kernel_n=None):
    """Adjust the module-wide enumeration caps; returns the previous (enum, kernel) pair."""
    global MAX_ENUM_N, MAX_KERNEL_N
    previous = (MAX_ENUM_N, MAX_KERNEL_N)
    if max_enum_n is not None:
        MAX_ENUM_N = int(max_enum_n)
    if max_kernel_n is not None:
        MAX_KERNEL_N = int(max_kernel_n)
    return previous


def _require(n, cap, what):
    if n > cap:
        raise CapacityError(f"{what} needs n <= {cap}, got n={n}")


@dataclass(frozen=True)
class GibbsSummary:
    logZ: float
    mean: np.ndarray
    cov: np.ndarray
    cor: np.ndarray
    degenerate: np.ndarray  # True where Var(X_i) vanishes and the cor row is undefined


@dataclass(frozen=True)
class ChainDiagnostics:
    gap: float
    mlsi_upper: float
    tmix: dict = field(default_factory=dict)


def state_matrix(n):
    """All 2^n configurations as rows, in bitmask order."""
    idx = np.arange(1 << n, dtype=np.int64)
    return (2 * ((idx[:, None] >> np.arange(n)) & 1) - 1).astype(np.int8)


def state_index(x):
    x = np.asarray(x)
    return int(np.sum((x > 0).astype(np.int64) << np.arange(x.shape[0], dtype=np.int64)))


def log_weights(model):
    """Unnormalized log-weights of every state in bitmask order."""
    _require(model.n, MAX_ENUM_N, "enumeration")
    K = np.ascontiguousarray(model.coupling_matrix())
    return kernels.gray_exponents(K, np.ascontiguousarray(model.h))


def stationary(model):
    """Exact Gibbs probabilities in bitmask order."""
    e = log_weights(model)
    return np.exp(e - logsumexp(e))


def partition_function(model):
    """log Z."""
    _require(model.n, MAX_ENUM_N, "partition_function")
    return float(logsumexp(log_weights(model)))


def gibbs_moments(model):
    _require(model.n, MAX_ENUM_N, "gibbs_moments")
    K = np.ascontiguousarray(model.coupling_matrix())
    logZ, mean, second = kernels.gray_moments(K, np.ascontiguousarray(model.h))
    cov = second - np.outer(mean, mean)
    cov = 0.5 * (cov + cov.T)
    var = np.diag(cov).copy()
    degenerate = var <= DEGENERATE_VAR
    scale = np.where(degenerate, 1.0, 1.0 / np.sqrt(np.where(degenerate, 1.0, var)))
    cor = cov * np.outer(scale, scale)
    cor[degenerate, :] = 0.0
    cor[:, degenerate] = 0.0
    np.fill_diagonal(cor, 1.0)
    for a in (mean, cov, cor, degenerate):
        a.setflags(write=False)
    return GibbsSummary(float(logZ), mean, cov, cor, degenerate)


def _flip_probs(model, e=None):
    """Return (e, Q) with Q[s, k] = P(move from s to s ^ (1<<k)) = sigma(e(s') - e(s)) / n."""
    n = model.n
    if e is None:
        e = log_weights(model)
    idx = np.arange(1 << n, dtype=np.int64)
    Q = np.empty((1 << n, n))
    for k in range(n):
        Q[:, k] = expit(e[idx ^ (1 << k)] - e) / n
    return e, Q


def transition_matrix(model, sparse=None):
    """Glauber kernel as a CSR matrix (or dense ndarray when ``sparse`` is False)."""
    n = model.n
    _require(n, MAX_KERNEL_N, "transition_matrix")
    _, Q = _flip_probs(model)
    N = 1 << n
    idx = np.arange(N, dtype=np.int64)
    rows = np.concatenate([idx] + [idx] * n)
    cols = np.concatenate([idx] + [idx ^ (1 << k) for k in range(n)])
    vals = np.concatenate([1.0 - Q.sum(axis=1)] + [Q[:, k] for k in range(n)])
    P = sp.csr_matrix((vals, (rows, cols)), shape=(N, N))
    if sparse is None:
        sparse = True
    return P if sparse else P.toarray()


def _symmetrized(model):
    e = log_weights(model)
    pi = np.exp(e - logsumexp(e))
    P = transition_matrix(model)
    r = np.sqrt(pi)
    D = sp.diags(r)
    Dinv = sp.diags(1.0 / r)
    S = D @ P @ Dinv
    S = 0.5 * (S + S.T)
    return S.tocsr(), r


def spectral_gap(model):
    """1 - lambda_2 of the pi-symmetrized Glauber kernel."""
    n = model.n
    _require(n, MAX_KERNEL_N, "spectral_gap")
    S, r = _symmetrized(model)
    N = 1 << n
    if N == 1:
        return 1.0
    if N <= DENSE_EIG_STATES:
        lam = np.linalg.eigvalsh(S.toarray())
        lam2 = lam[-2]
    else:
        # deflate the known top eigenvector sqrt(pi); the kernel is PSD, so the
        # largest remaining eigenvalue is lambda_2
        def mv(v):
            v = np.ravel(v)
            w = v - r * (r @ v)
            w = S @ w
            return w - r * (r @ w)

        op = LinearOperator((N, N), matvec=mv, dtype=np.float64)
        v0 = np.cos(np.arange(N) * 0.7071) + 0.1
        lam2 = eigsh(op, k=1, which="LA", tol=1e-12, v0=v0, maxiter=100000)[0][0]
    return float(min(1.0, max(0.0, 1.0 - lam2)))


def _entropy(pi, f):
    m = float(pi @ f)
    return float(pi @ (f * np.log(f))) - m * math.log(m), m


def _mlsi_objective(g, pi, P, PT):
    # floor keeps f strictly positive so every log below is finite
    g = np.maximum(g - g.max(), -700.0)
    f = np.exp(g)
    Pf = P @ f
    ent_f, m = _entropy(pi, f)
    ent_pf, _ = _entropy(pi, Pf)
    if ent_f <= 1e-14 * m:
        return np.inf, np.zeros_like(g)
    grad_f = pi * np.log(f / m)
    grad_pf = PT @ (pi * np.log(Pf / m))
    ratio = ent_pf / ent_f
    d_ratio = (grad_pf - ratio * grad_f) / ent_f
    return 1.0 - ratio, -(d_ratio * f)


def _canonical_starts(model, states):
    X = states.astype(np.float64)
    starts = []
    for c in (1.0, 4.0):
        for i in range(model.n):
            starts.append(c * X[:, i])
    for c in (0.5, 2.0):
        starts.append(c * (X @ model.u) / math.sqrt(model.n))
        if np.any(model.h):
            starts.append(c * (X @ model.h) / max(1.0, float(np.abs(model.h).max())))
    return starts


def mlsi_witness_ratio(model, f):
    """1 - Ent(Pf)/Ent(f) for a single positive witness ``f`` (bitmask order)."""
    pi = stationary(model)
    P = transition_matrix(model)
    f = np.asarray(f, dtype=np.float64)
    if np.any(f <= 0):
        raise ValueError("witness must be strictly positive")
    ent_f, _ = _entropy(pi, f)
    if ent_f <= 0:
        raise ValueError("witness has zero entropy")
    return 1.0 - _entropy(pi, P @ f)[0] / ent_f


def mlsi_upper_estimate(model, restarts=8, seed=0, maxiter=200):
    """Smallest 1 - Ent(Pf)/Ent(f) found over optimized witnesses; an upper bound on rho_LS."""
    n = model.n
    _require(n, MAX_MLSI_N, "mlsi_upper_estimate")
    e = log_weights(model)
    pi = np.exp(e - logsumexp(e))
    P = transition_matrix(model)
    PT = P.T.tocsr()
    states = state_matrix(n)
    rng = make_rng(seed)
    starts = _canonical_starts(model, states)
    starts += [rng.standard_normal(1 << n) for _ in range(int(restarts))]
    best = 1.0
    for g0 in starts:
        val0, _ = _mlsi_objective(g0, pi, P, PT)
        if not np.isfinite(val0):
            continue
        res = minimize(_mlsi_objective, g0, args=(pi, P, PT), jac=True,
                       method="L-BFGS-B", options={"maxiter": maxiter})
        for cand in (val0, float(res.fun)):
            if np.isfinite(cand):
                best = min(best, cand)
    return float(min(1.0, max(0.0, best)))


def tv_curve(model, start, steps):
    """TV distance to pi after t = 0..steps Glauber steps from ``start``."""
    _require(model.n, MAX_KERNEL_N, "tv_curve")
    pi = stationary(model)
    PT = transition_matrix(model).T.tocsr()
    p = np.zeros_like(pi)
    p[state_index(start)] = 1.0
    out = [0.5 * np.abs(p - pi).sum()]
    for _ in range(steps):
        p = PT @ p
        out.append(0.5 * np.abs(p - pi).sum())
    return np.array(out)


def tv_mixing_time(model, eps, start, max_steps=10**6):
    """Least t with TV(delta_start P^t, pi) <= eps."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    _require(model.n, MAX_KERNEL_N, "tv_mixing_time")
    pi = stationary(model)
    PT = transition_matrix(model).T.tocsr()
    p = np.zeros_like(pi)
    p[state_index(start)] = 1.0
    for t in range(max_steps + 1):
        if 0.5 * np.abs(p - pi).sum() <= eps:
            return t
        p = PT @ p
    raise CapacityError(f"TV distance did not reach {eps} within {max_steps} steps")


def _as_state_mask(model, S):
    N = 1 << model.n
    if callable(S):
        mask = np.array([bool(S(x)) for x in state_matrix(model.n)])
    else:
        S = np.asarray(S)
        if S.dtype == bool:
            if S.shape != (N,):
                raise ValueError(f"boolean state mask must have length {N}")
            mask = S.copy()
        else:
            mask = np.zeros(N, dtype=bool)
            mask[S.astype(np.int64)] = True
    return mask


def conductance(model, S):
    """Q(S, S^c) / pi(S) for a set of states (mask, index list, or predicate on configs)."""
    _require(model.n, MAX_KERNEL_N, "conductance")
    mask = _as_state_mask(model, S)
    if mask.all() or not mask.any():
        raise ValueError("S must be a nonempty proper subset of states")
    pi = stationary(model)
    P = transition_matrix(model)
    flow = pi[mask] @ (P[mask][:, ~mask] @ np.ones(int((~mask).sum())))
    return float(flow / pi[mask].sum())


def diagnostics(model, eps_list=(0.25,), start=None, restarts=4, seed=0):
    """Gap, MLSI witness bound and TV mixing times bundled together."""
    if start is None:
        start = -np.ones(model.n, dtype=np.int8)
    tmix = {float(eps): tv_mixing_time(model, eps, start) for eps in sorted(eps_list)}
    mlsi = mlsi_upper_estimate(model, restarts, seed) if model.n <= MAX_MLSI_N else float("nan")
    return ChainDiagnostics(spectral_gap(model), mlsi, tmix)
