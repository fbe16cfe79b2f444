"""Pure-Python/numpy twins of the compiled kernels in ``_kernels.pyx``.

Enumeration is vectorized over blocks of states rather than walked in Gray order;
the chain and ascent loops mirror the compiled arithmetic step for step.
"""
import math

import numpy as np

_BLOCK_BITS = 16


def _block_states(n, start, stop):
    idx = np.arange(start, stop, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(n, dtype=np.int64)) & 1
    return (2 * bits - 1).astype(np.float64)


def _block_exponents(X, K, h):
    return np.einsum("si,ij,sj->s", X, K, X, optimize=True) + X @ h


def _blocks(n):
    N = 1 << n
    step = 1 << min(n, _BLOCK_BITS)
    for start in range(0, N, step):
        yield start, min(N, start + step)


def gray_exponents(K, h):
    K = np.asarray(K, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    n = K.shape[0]
    out = np.empty(1 << n, dtype=np.float64)
    for start, stop in _blocks(n):
        out[start:stop] = _block_exponents(_block_states(n, start, stop), K, h)
    return out


def gray_moments(K, h):
    K = np.asarray(K, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    n = K.shape[0]
    emax = -math.inf
    for start, stop in _blocks(n):
        emax = max(emax, float(_block_exponents(_block_states(n, start, stop), K, h).max()))
    z_parts, m_parts, s_parts = [], [], []
    for start, stop in _blocks(n):
        X = _block_states(n, start, stop)
        w = np.exp(_block_exponents(X, K, h) - emax)
        z_parts.append(w.sum())
        m_parts.append(X.T @ w)
        s_parts.append(X.T @ (w[:, None] * X))
    z = math.fsum(z_parts)
    mean = np.sum(m_parts, axis=0) / z
    second = np.sum(s_parts, axis=0) / z
    second = 0.5 * (second + second.T)
    np.fill_diagonal(second, 1.0)
    return emax + math.log(z), mean, second


def glauber_run(K, h, u, ref, x, f, sites, unif, thin, t0, energy, mag, ovl,
                out_m, out_e, out_o, rec):
    for s_idx in range(sites.shape[0]):
        i = int(sites[s_idx])
        delta = 4.0 * f[i] + 2.0 * h[i]
        if delta >= 0:
            p = 1.0 / (1.0 + math.exp(-delta))
        else:
            p = math.exp(delta) / (1.0 + math.exp(delta))
        old = float(x[i])
        new = 1.0 if unif[s_idx] < p else -1.0
        if new != old:
            energy -= 2.0 * old * (2.0 * f[i] + h[i])
            mag += (new - old) * u[i]
            ovl += (new - old) * ref[i]
            x[i] = int(new)
            fi = f[i]
            f += (new - old) * K[:, i]
            f[i] = fi
        t = t0 + s_idx + 1
        if t % thin == 0:
            out_m[rec] = mag
            out_e[rec] = energy
            out_o[rec] = ovl
            rec += 1
    return energy, mag, ovl, rec


def greedy_ascent_csr(indptr, indices, x, max_sweeps):
    n = x.shape[0]
    s = np.zeros(n, dtype=np.int64)
    for i in range(n):
        s[i] = int(x[indices[indptr[i]:indptr[i + 1]]].sum())
    sweep = 0
    converged = False
    while sweep < max_sweeps:
        sweep += 1
        flips = 0
        for i in range(n):
            if x[i] * s[i] > 0:
                x[i] = -x[i]
                flips += 1
                s[indices[indptr[i]:indptr[i + 1]]] += 2 * int(x[i])
        if flips == 0:
            converged = True
            break
    return sweep, converged
