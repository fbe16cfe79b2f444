"""Glauber simulation at scale and slow-mixing diagnostics on graph Hamiltonians.

The graph Hamiltonian is H(x) = -(1/sqrt(d)) <x, A x>, with local field
dH_i(x) = -(2/sqrt(d)) (A x)_i, so that x_i dH_i = (H(x) - H(x^(i)))/2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from ._backend import kernels
from .model import as_spins, energy_exponent
from .rng import make_rng

_CHAIN_CHUNK = 1 << 18


@dataclass(frozen=True)
class Trace:
    steps: int
    thin: int
    t: np.ndarray
    magnetization: np.ndarray
    energy: np.ndarray
    overlap: np.ndarray
    final: np.ndarray

    def __len__(self):
        return self.t.shape[0]

    def to_csv(self):
        rows = ["t,magnetization,energy,overlap"]
        rows += [f"{t},{m!r},{e!r},{o!r}" for t, m, e, o in
                 zip(self.t.tolist(), self.magnetization.tolist(),
                     self.energy.tolist(), self.overlap.tolist())]
        return "\n".join(rows) + "\n"


def run_glauber(model, x0, steps, thin=1, seed=0, reference=None):
    """Run ``steps`` heat-bath updates, recording observables every ``thin`` steps.

    Observables: <u,x>/n, the log-weight, and <x, reference>/n (reference defaults to x0).
    """
    if steps < 0 or thin < 1:
        raise ValueError("need steps >= 0 and thin >= 1")
    n = model.n
    x = np.array(as_spins(x0, n), dtype=np.int8)
    ref = np.array(x if reference is None else as_spins(reference, n), dtype=np.int8)
    K = np.ascontiguousarray(model.coupling_matrix())
    h = np.ascontiguousarray(model.h, dtype=np.float64)
    u = np.ascontiguousarray(model.u, dtype=np.float64)
    xf = x.astype(np.float64)
    f = K @ xf - np.diag(K) * xf
    energy = energy_exponent(model, x)
    mag = float(u @ xf)
    ovl = float(ref @ xf)
    nrec = steps // thin + 1
    out_m = np.empty(nrec)
    out_e = np.empty(nrec)
    out_o = np.empty(nrec)
    out_m[0], out_e[0], out_o[0] = mag, energy, ovl
    rec = 1
    rng = make_rng(seed)
    done = 0
    while done < steps:
        b = min(_CHAIN_CHUNK, steps - done)
        sites = rng.integers(0, n, size=b, dtype=np.int64)
        unif = rng.random(b)
        energy, mag, ovl, rec = kernels.glauber_run(
            K, h, u, ref, x, f, sites, unif, thin, done, energy, mag, ovl,
            out_m, out_e, out_o, rec)
        done += b
    x.setflags(write=False)
    t = np.arange(nrec, dtype=np.int64) * thin
    return Trace(steps, thin, t, out_m / n, out_e, out_o / n, x)


def _adjacency(graph):
    return graph.adjacency()


def local_fields(graph, x, d):
    """All local fields -(2/sqrt(d)) A x."""
    if d <= 0:
        raise ValueError("d must be positive")
    x = np.asarray(as_spins(x, graph.n), dtype=np.float64)
    return -(2.0 / math.sqrt(d)) * (_adjacency(graph) @ x)


def local_field(graph, x, i, d):
    return float(local_fields(graph, x, d)[i])


def hamiltonian(graph, x, d):
    """-(1/sqrt(d)) <x, A x>."""
    if d <= 0:
        raise ValueError("d must be positive")
    x = np.asarray(as_spins(x, graph.n), dtype=np.float64)
    return -float(x @ (_adjacency(graph) @ x)) / math.sqrt(d)


@dataclass(frozen=True)
class GappedReport:
    kappa: float
    violating_sites: frozenset
    delta_achieved: float
    n: int

    def is_gapped(self, delta):
        return len(self.violating_sites) <= delta * self.n

    def to_dict(self):
        return {"kappa": self.kappa, "violating_sites": sorted(self.violating_sites),
                "delta_achieved": self.delta_achieved, "n": self.n}


def gapped_check(graph, x, kappa, d):
    """Sites where x_i dH_i < kappa."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    x_arr = np.asarray(as_spins(x, graph.n), dtype=np.float64)
    s = x_arr * local_fields(graph, x_arr, d)
    bad = frozenset(int(i) for i in np.flatnonzero(s < kappa))
    return GappedReport(float(kappa), bad, len(bad) / graph.n, graph.n)


def greedy_ascent(graph, x0, d, max_sweeps=100):
    """Sequential sweeps flipping every site with x_i dH_i < 0 until none remain.

    Ties (x_i dH_i = 0) are kept, so every flip strictly increases H and the loop terminates.
    """
    if max_sweeps < 1:
        raise ValueError("max_sweeps must be >= 1")
    if d <= 0:
        raise ValueError("d must be positive")
    A = _adjacency(graph)
    x = np.array(as_spins(x0, graph.n), dtype=np.int8)
    kernels.greedy_ascent_csr(A.indptr, A.indices, x, int(max_sweeps))
    x.setflags(write=False)
    return x


def _edge(A, i, j):
    row = A.indices[A.indptr[i]:A.indptr[i + 1]]
    k = np.searchsorted(row, j)
    return int(k < row.shape[0] and row[k] == j)


def balanced_greedy_ascent(graph, x0, d, max_sweeps=100):
    """Greedy ascent through pair swaps (one +1 and one -1 flip), keeping sum(x) = 0.

    Each round applies the best strictly improving swap; a swap of i (+1) and j (-1)
    changes <x,Ax> by -4 (g_i + g_j + 2 A_ij) where g = x * (A x). At most
    ``max_sweeps * n`` swaps are made.
    """
    if max_sweeps < 1:
        raise ValueError("max_sweeps must be >= 1")
    if d <= 0:
        raise ValueError("d must be positive")
    x = np.array(as_spins(x0, graph.n), dtype=np.int64)
    if graph.n % 2 or int(x.sum()) != 0:
        raise ValueError("balanced ascent needs n even and sum(x0) = 0")
    A = _adjacency(graph)
    s = np.asarray(A @ x).astype(np.int64)
    for _ in range(int(max_sweeps) * graph.n):
        g = x * s
        plus = np.flatnonzero(x > 0)
        minus = np.flatnonzero(x < 0)
        plus = plus[np.argsort(-g[plus], kind="stable")]
        minus = minus[np.argsort(-g[minus], kind="stable")]
        best, pair = 0, None
        for i in plus:
            if g[i] + g[minus[0]] + 2 <= best:
                break
            for j in minus:
                val = g[i] + g[j]
                if val + 2 <= best:
                    break
                val += 2 * _edge(A, i, j)
                if val > best:
                    best, pair = val, (i, j)
        if pair is None:
            break
        for k in pair:
            x[k] = -x[k]
            row = slice(A.indptr[k], A.indptr[k + 1])
            s[A.indices[row]] += 2 * x[k]
    out = x.astype(np.int8)
    out.setflags(write=False)
    return out


def cw_conductance_exact(n, beta0):
    """Q(S, S^c)/pi(S) for pi ~ exp(-beta0 (sum x)^2), S = {x_1 = +1}; returns (ratio, bound).

    pi depends on x only through sum(x), so the flow out of S is a sum over the number k
    of +1 spins among sites 2..n, weighted by binomial(n-1, k).
    """
    n = int(n)
    if n < 2 or n % 2:
        raise ValueError("n must be even and at least 2")
    k = np.arange(n, dtype=np.float64)
    logc = gammaln(n) - gammaln(k + 1) - gammaln(n - k)
    s_in = 2.0 * k - n + 2.0  # sum(x) with x_1 = +1
    s_out = s_in - 2.0
    e_in = -beta0 * s_in**2
    e_out = -beta0 * s_out**2
    # pi(x) P(x, x') with P = (1/n) pi(x')/(pi(x) + pi(x'))
    log_flow = logc + e_in + e_out - np.logaddexp(e_in, e_out) - math.log(n)
    K = np.arange(n + 1, dtype=np.float64)
    logZ = logsumexp(gammaln(n + 1) - gammaln(K + 1) - gammaln(n - K + 1) - beta0 * (2 * K - n) ** 2)
    log_piS = logsumexp(logc + e_in) - logZ
    ratio = math.exp(logsumexp(log_flow) - logZ - log_piS)
    bound = 4.0 / (n * math.exp(4.0 * beta0))
    return ratio, bound


@dataclass(frozen=True)
class EnergyDrop:
    holds: bool
    margin: float

    def __bool__(self):
        return self.holds


def energy_drop_check(graph, x, y, kappa, rho, d, tol=1e-9):
    """Check H(y) <= H(x) - rho kappa n / 4 for ||x - y||_1 = rho n; returns (holds, margin)."""
    xa = np.asarray(as_spins(x, graph.n), dtype=np.float64)
    ya = np.asarray(as_spins(y, graph.n), dtype=np.float64)
    dist = float(np.abs(xa - ya).sum())
    if abs(dist - rho * graph.n) > tol * max(1.0, graph.n):
        raise ValueError(f"||x - y||_1 = {dist} does not equal rho * n = {rho * graph.n}")
    margin = hamiltonian(graph, xa, d) - hamiltonian(graph, ya, d) - rho * kappa * graph.n / 4.0
    return EnergyDrop(bool(margin >= 0), float(margin))
