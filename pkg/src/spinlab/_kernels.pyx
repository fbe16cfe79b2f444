# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: Gray-code enumeration, Glauber chains, greedy spin-flip ascent.

Every function here has a twin with the same signature in ``_fallback.py``.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log

cnp.import_array()

cdef int REFRESH_MASK = 1023


cdef inline int _ctz(unsigned long long t) nogil:
    cdef int k = 0
    while (t & 1) == 0:
        t >>= 1
        k += 1
    return k


cdef double _refresh(const double[:, ::1] K, const double[::1] h,
                     signed char[::1] x, double[::1] f, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc, e = 0.0
    for i in range(n):
        acc = 0.0
        for j in range(n):
            if j != i:
                acc += K[i, j] * x[j]
        f[i] = acc
        e += x[i] * (acc + K[i, i] * x[i] + h[i])
    return e


def gray_exponents(const double[:, ::1] K, const double[::1] h):
    """Log-weights of all 2^n states, indexed by bitmask (bit k set means x_k = +1)."""
    cdef Py_ssize_t n = K.shape[0]
    cdef unsigned long long N = 1ULL << n
    out_arr = np.empty(N, dtype=np.float64)
    cdef double[::1] out = out_arr
    x_arr = np.full(n, -1, dtype=np.int8)
    cdef signed char[::1] x = x_arr
    f_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] f = f_arr
    cdef unsigned long long t, state = 0
    cdef int k
    cdef Py_ssize_t j
    cdef double s, e
    with nogil:
        e = _refresh(K, h, x, f, n)
        out[0] = e
        for t in range(1, N):
            k = _ctz(t)
            s = x[k]
            e -= 2.0 * s * (2.0 * f[k] + h[k])
            x[k] = -x[k]
            for j in range(n):
                if j != k:
                    f[j] -= 2.0 * s * K[j, k]
            state ^= (1ULL << k)
            if (t & REFRESH_MASK) == 0:
                e = _refresh(K, h, x, f, n)
            out[state] = e
    return out_arr


def gray_moments(const double[:, ::1] K, const double[::1] h):
    """Return (logZ, mean, second) where second[i, j] = E[x_i x_j], via Kahan-compensated sums."""
    cdef Py_ssize_t n = K.shape[0]
    cdef unsigned long long N = 1ULL << n
    x_arr = np.full(n, -1, dtype=np.int8)
    cdef signed char[::1] x = x_arr
    f_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] f = f_arr
    m_arr = np.zeros(n, dtype=np.float64)
    mc_arr = np.zeros(n, dtype=np.float64)
    S_arr = np.zeros((n, n), dtype=np.float64)
    C_arr = np.zeros((n, n), dtype=np.float64)
    cdef double[::1] msum = m_arr
    cdef double[::1] mcomp = mc_arr
    cdef double[:, ::1] S = S_arr
    cdef double[:, ::1] C = C_arr
    cdef unsigned long long t
    cdef int k
    cdef Py_ssize_t i, j
    cdef double s, e, emax, w, y, tt, xi
    cdef double z = 0.0, zc = 0.0

    with nogil:
        # pass 1: the largest exponent, used as a shift
        e = _refresh(K, h, x, f, n)
        emax = e
        for t in range(1, N):
            k = _ctz(t)
            s = x[k]
            e -= 2.0 * s * (2.0 * f[k] + h[k])
            x[k] = -x[k]
            for j in range(n):
                if j != k:
                    f[j] -= 2.0 * s * K[j, k]
            if (t & REFRESH_MASK) == 0:
                e = _refresh(K, h, x, f, n)
            if e > emax:
                emax = e

        # pass 2: shifted weights
        for i in range(n):
            x[i] = -1
        e = _refresh(K, h, x, f, n)
        for t in range(N):
            if t > 0:
                k = _ctz(t)
                s = x[k]
                e -= 2.0 * s * (2.0 * f[k] + h[k])
                x[k] = -x[k]
                for j in range(n):
                    if j != k:
                        f[j] -= 2.0 * s * K[j, k]
                if (t & REFRESH_MASK) == 0:
                    e = _refresh(K, h, x, f, n)
            w = exp(e - emax)
            y = w - zc
            tt = z + y
            zc = (tt - z) - y
            z = tt
            for i in range(n):
                xi = x[i] * w
                y = xi - mcomp[i]
                tt = msum[i] + y
                mcomp[i] = (tt - msum[i]) - y
                msum[i] = tt
                for j in range(i + 1, n):
                    y = xi * x[j] - C[i, j]
                    tt = S[i, j] + y
                    C[i, j] = (tt - S[i, j]) - y
                    S[i, j] = tt

    mean = m_arr / z
    second = S_arr / z
    second = second + second.T
    np.fill_diagonal(second, 1.0)
    return emax + log(z), mean, second


def glauber_run(const double[:, ::1] K, const double[::1] h, const double[::1] u,
                const signed char[::1] ref, signed char[::1] x, double[::1] f,
                const long long[::1] sites, const double[::1] unif,
                long long thin, long long t0, double energy, double mag, double ovl,
                double[::1] out_m, double[::1] out_e, double[::1] out_o, long long rec):
    """Advance a heat-bath chain through the pre-drawn (site, uniform) pairs.

    ``f`` holds the off-diagonal local sums K x and is updated in place, as is ``x``.
    Observables are written to ``out_*[rec]`` whenever the global step count is a
    multiple of ``thin``. Returns (energy, mag, ovl, rec).
    """
    cdef Py_ssize_t n = K.shape[0]
    cdef Py_ssize_t steps = sites.shape[0]
    cdef Py_ssize_t s_idx, j
    cdef long long i, t
    cdef double delta, p, old, new
    with nogil:
        for s_idx in range(steps):
            i = sites[s_idx]
            delta = 4.0 * f[i] + 2.0 * h[i]
            if delta >= 0:
                p = 1.0 / (1.0 + exp(-delta))
            else:
                p = exp(delta) / (1.0 + exp(delta))
            old = x[i]
            new = 1.0 if unif[s_idx] < p else -1.0
            if new != old:
                energy -= 2.0 * old * (2.0 * f[i] + h[i])
                mag += (new - old) * u[i]
                ovl += (new - old) * ref[i]
                x[i] = <signed char> new
                for j in range(n):
                    if j != i:
                        f[j] += (new - old) * K[j, i]
            t = t0 + s_idx + 1
            if t % thin == 0:
                out_m[rec] = mag
                out_e[rec] = energy
                out_o[rec] = ovl
                rec += 1
    return energy, mag, ovl, rec


def greedy_ascent_csr(const long long[::1] indptr, const long long[::1] indices,
                      signed char[::1] x, long long max_sweeps):
    """Sequential sweeps flipping every site with x_i * (A x)_i > 0; returns (sweeps, converged)."""
    cdef Py_ssize_t n = x.shape[0]
    s_arr = np.zeros(n, dtype=np.int64)
    cdef long long[::1] s = s_arr
    cdef Py_ssize_t i, p
    cdef long long sweep = 0, flips
    cdef bint converged = False
    with nogil:
        for i in range(n):
            for p in range(indptr[i], indptr[i + 1]):
                s[i] += x[indices[p]]
        while sweep < max_sweeps:
            sweep += 1
            flips = 0
            for i in range(n):
                if x[i] * s[i] > 0:
                    x[i] = -x[i]
                    flips += 1
                    for p in range(indptr[i], indptr[i + 1]):
                        s[indices[p]] += 2 * x[i]
            if flips == 0:
                converged = True
                break
    return sweep, converged
