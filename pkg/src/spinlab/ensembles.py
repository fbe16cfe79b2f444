"""Random graphs and disorder, their spectra, outlier decompositions and regime thresholds."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .rng import make_rng

PAIRING_RETRIES = 500
DENSE_SPECTRUM_N = 4096
DEGENERATE_GAP = 1e-8


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph stored as a sorted (i < j) edge array."""

    n: int
    edges: np.ndarray
    model: str = "custom"
    params: dict = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if e.size:
            e = np.sort(e, axis=1)
            if np.any(e[:, 0] == e[:, 1]):
                raise ValueError("self-loops are not allowed")
            if e.min() < 0 or e.max() >= self.n:
                raise ValueError("edge endpoint out of range")
            e = np.unique(e, axis=0)
        e.setflags(write=False)
        object.__setattr__(self, "edges", e)
        deg = np.bincount(e.ravel(), minlength=self.n).astype(np.int64)
        deg.setflags(write=False)
        object.__setattr__(self, "degrees", deg)

    @property
    def num_edges(self):
        return self.edges.shape[0]

    def adjacency(self):
        """Symmetric CSR adjacency with int64 index arrays."""
        e = self.edges
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        A = sp.csr_matrix((np.ones(rows.shape[0]), (rows, cols)), shape=(self.n, self.n))
        A.indptr = A.indptr.astype(np.int64)
        A.indices = A.indices.astype(np.int64)
        A.sort_indices()
        return A

    def dense(self):
        return self.adjacency().toarray()

    def to_edge_list(self):
        """JSON header line followed by one "i j" line per edge."""
        header = {"n": self.n, "model": self.model, "params": self.params, "seed": self.seed}
        lines = [json.dumps(header, sort_keys=True)]
        lines += [f"{i} {j}" for i, j in self.edges]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_edge_list(cls, text):
        lines = text.strip().splitlines()
        header = json.loads(lines[0])
        edges = [tuple(int(t) for t in ln.split()) for ln in lines[1:] if ln.strip()]
        return cls(header["n"], np.array(edges, dtype=np.int64).reshape(-1, 2),
                   header.get("model", "custom"), header.get("params", {}), header.get("seed"))


def _pairing_attempt(n, d, rng):
    stubs = np.repeat(np.arange(n), d)
    rng.shuffle(stubs)
    e = np.sort(stubs.reshape(-1, 2), axis=1)
    if np.any(e[:, 0] == e[:, 1]):
        return None
    key = e[:, 0] * n + e[:, 1]
    if np.unique(key).shape[0] != key.shape[0]:
        return None
    return e


def _circulant_regular(n, d):
    edges = set()
    for i in range(n):
        for k in range(1, d // 2 + 1):
            j = (i + k) % n
            edges.add((min(i, j), max(i, j)))
        if d % 2:
            j = (i + n // 2) % n
            edges.add((min(i, j), max(i, j)))
    return np.array(sorted(edges), dtype=np.int64)


def _edge_switch(edges, n, rng, sweeps=10):
    """Degree-preserving double-edge swaps that keep the graph simple."""
    e = [tuple(x) for x in edges]
    present = set(e)
    m = len(e)
    for _ in range(sweeps * m):
        a, b = rng.integers(m, size=2)
        if a == b:
            continue
        (i, j), (k, l) = e[a], e[b]
        if rng.random() < 0.5:
            k, l = l, k
        if len({i, j, k, l}) < 4:
            continue
        new1, new2 = (min(i, k), max(i, k)), (min(j, l), max(j, l))
        if new1 in present or new2 in present:
            continue
        present.difference_update({e[a], e[b]})
        present.update({new1, new2})
        e[a], e[b] = new1, new2
    return np.array(sorted(e), dtype=np.int64)


def random_regular(n, d, seed, retries=PAIRING_RETRIES):
    """Uniform simple d-regular graph by rejection from the pairing model.

    After ``retries`` rejected pairings, randomizes a circulant d-regular graph by
    double-edge swaps instead (approximately uniform).
    """
    if not 0 < d < n:
        raise ValueError("need 0 < d < n")
    if (n * d) % 2:
        raise ValueError("n * d must be even")
    rng = make_rng(seed)
    params = {"d": int(d)}
    for _ in range(retries):
        e = _pairing_attempt(n, d, rng)
        if e is not None:
            return Graph(n, e, "random_regular", params, seed)
    e = _edge_switch(_circulant_regular(n, d), n, rng)
    return Graph(n, e, "random_regular", {**params, "method": "edge_switch"}, seed)


def _decode_pairs(idx, n):
    # row-major enumeration of i < j: row i starts at i*n - i*(i+1)/2 - ... solved for i
    idx = np.asarray(idx, dtype=np.int64)
    b = 2 * n - 1
    i = np.floor((b - np.sqrt(b * b - 8.0 * idx)) / 2).astype(np.int64)
    start = i * (2 * n - i - 1) // 2
    over = idx < start
    i[over] -= 1
    start = i * (2 * n - i - 1) // 2
    nxt = (i + 1) * (2 * n - i - 2) // 2
    under = idx >= nxt
    i[under] += 1
    start = i * (2 * n - i - 1) // 2
    j = idx - start + i + 1
    return np.stack([i, j], axis=1)


def erdos_renyi(n, p, seed):
    """G(n, p): each pair independently present with probability p."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    rng = make_rng(seed)
    total = n * (n - 1) // 2
    m = int(rng.binomial(total, p)) if total else 0
    idx = np.sort(rng.choice(total, size=m, replace=False)) if m else np.zeros(0, dtype=np.int64)
    return Graph(n, _decode_pairs(idx, n), "erdos_renyi", {"p": float(p)}, seed)


def sk_matrix(n, beta, mu_mean, seed):
    """Symmetric zero-diagonal matrix with i<j entries N(-mu/n, beta^2/n)."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    rng = make_rng(seed)
    iu = np.triu_indices(n, 1)
    M = np.zeros((n, n))
    M[iu] = rng.normal(-mu_mean / n, beta / math.sqrt(n), size=iu[0].shape[0])
    return M + M.T


@dataclass(frozen=True)
class SpectralReport:
    eigenvalues: np.ndarray  # descending; only the extremes when computed iteratively
    spectral_width: float
    second_width: float
    top_vector: np.ndarray
    top_vector_maxabs: float
    full: bool

    @property
    def lambda1(self):
        return float(self.eigenvalues[0])

    @property
    def lambda2(self):
        return float(self.eigenvalues[1]) if self.eigenvalues.shape[0] > 1 else float("nan")

    @property
    def lambda_min(self):
        return float(self.eigenvalues[-1])


def _as_symmetric(matrix):
    if isinstance(matrix, Graph):
        matrix = matrix.adjacency()
    if sp.issparse(matrix):
        M = matrix.tocsr().astype(np.float64)
        if M.shape[0] != M.shape[1] or (abs(M - M.T).max() if M.nnz else 0.0) > 1e-10:
            raise ValueError("matrix must be square and symmetric")
        return M
    M = np.asarray(matrix, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    if np.max(np.abs(M - M.T), initial=0.0) > 1e-10:
        raise ValueError("matrix must be symmetric")
    return 0.5 * (M + M.T)


def _canonical_sign(v):
    k = int(np.argmax(np.abs(v)))
    s = np.sign(v.sum()) or np.sign(v[k]) or 1.0
    return v * s


def spectrum(matrix):
    """Eigen-summary: full decomposition up to n = 4096, extreme eigenvalues above."""
    M = _as_symmetric(matrix)
    n = M.shape[0]
    if n <= DENSE_SPECTRUM_N:
        D = M.toarray() if sp.issparse(M) else M
        lam, vec = np.linalg.eigh(D)
        lam = lam[::-1].copy()
        top = vec[:, -1]
        full = True
    else:
        top_vals, top_vecs = eigsh(M, k=2, which="LA", tol=1e-10)
        bot = eigsh(M, k=1, which="SA", tol=1e-10, return_eigenvectors=False)
        order = np.argsort(top_vals)[::-1]
        lam = np.concatenate([top_vals[order], bot])
        top = top_vecs[:, order[0]]
        full = False
    top = _canonical_sign(top)
    second = float(lam[1] - lam[-1]) if lam.shape[0] > 1 else 0.0
    lam.setflags(write=False)
    top.setflags(write=False)
    return SpectralReport(lam, float(lam[0] - lam[-1]), second, top,
                          float(np.max(np.abs(top))), full)


@dataclass(frozen=True)
class AntiferroDecomposition:
    """-beta A + shift I = -(outlier_scale/n) u u^T + J with J PSD and max|u| = 1."""

    outlier_scale: float
    u: np.ndarray
    J: np.ndarray
    j_opnorm: float
    shift: float
    degenerate: bool

    def model(self, h=None):
        from .model import IsingModel
        return IsingModel(self.outlier_scale, self.u, self.J, h)


def decompose_antiferro(A, beta):
    """Split -beta A into a negative rank-one outlier along the top eigenvector plus a PSD rest.

    With eigenvalues l1 >= l2 >= ... >= ln and unit top eigenvector v, the remainder
    -beta (A - l1 v v^T) is shifted by beta max(l2, 0) to make it PSD. Its norm is
    beta (max(l2, 0) - ln), which is beta (l2 - ln) whenever l2 >= 0.
    """
    M = _as_symmetric(A)
    D = M.toarray() if sp.issparse(M) else M
    n = D.shape[0]
    lam, vec = np.linalg.eigh(D)
    lam = lam[::-1]
    v = _canonical_sign(vec[:, -1])
    l1 = float(lam[0])
    l2 = float(lam[1]) if n > 1 else l1
    ln = float(lam[-1])
    vmax = float(np.max(np.abs(v)))
    u = v / vmax
    outlier_scale = beta * l1 * n * vmax * vmax
    shift = beta * max(l2, 0.0)
    J = -beta * (D - l1 * np.outer(v, v)) + shift * np.eye(n)
    J = 0.5 * (J + J.T)
    j_opnorm = beta * (max(l2, 0.0) - ln) if n > 1 else shift
    u.setflags(write=False)
    J.setflags(write=False)
    return AntiferroDecomposition(float(outlier_scale), u, J, float(j_opnorm), float(shift),
                                  bool(l1 - l2 < DEGENERATE_GAP))


@dataclass(frozen=True)
class RegimeResult:
    name: str
    threshold: float
    passes: bool
    binding: str
    constraints: dict


def _rule(name, beta, constraints, extra_ok=True, extra_note=None):
    binding = min(constraints, key=constraints.get)
    threshold = constraints[binding]
    passes = bool(beta < threshold and extra_ok)
    if not extra_ok and extra_note:
        binding = extra_note
    return RegimeResult(name, float(threshold), passes, binding,
                        {k: float(v) for k, v in constraints.items()})


def regime_check(descriptor, beta, epsilon=0.1):
    """Evaluate the applicable sufficient conditions on beta for a described ensemble.

    ``descriptor`` is a dict with ``kind`` one of:
      regular (n, d, lambda2, lambda_min), random_regular (n, d, fixed_degree=True),
      erdos_renyi (n, p, c=1), sk (n, mu), curie_weiss_ferro (n), matrix (eigenvalue list or J).
    Returns a dict name -> RegimeResult.
    """
    kind = descriptor["kind"]
    n = descriptor.get("n")
    out = {}
    if kind == "regular":
        d, l2, ln = descriptor["d"], descriptor["lambda2"], descriptor["lambda_min"]
        width = l2 - ln
        c = {"second_width": 1.0 / (2.0 * width) if width > 0 else math.inf,
             "degree": n ** (1 - epsilon) / d}
        out["deterministic_regular"] = _rule("deterministic_regular", beta, c)
    elif kind == "random_regular":
        d = descriptor["d"]
        if descriptor.get("fixed_degree", True):
            c = {"fixed_degree": 1.0 / (8.0 * math.sqrt(d - 1)) if d > 1 else math.inf}
        else:
            c = {"degree_spectrum": 1.0 / (8.0 * math.sqrt(d * (1 - d / n))),
                 "degree": n ** (1 - epsilon) / d}
        out["random_regular"] = _rule("random_regular", beta, c)
    elif kind == "erdos_renyi":
        p, cst = descriptor["p"], descriptor.get("c", 1.0)
        c = {"edge_density": cst / (8.0 * math.sqrt(n * p)),
             "degree": n ** (1 - epsilon) / (n * p)}
        out["erdos_renyi"] = _rule("erdos_renyi", beta, c)
    elif kind == "sk":
        mu = descriptor["mu"]
        ok = 0 <= mu <= n ** (1 - epsilon)
        out["sk"] = _rule("sk", beta, {"temperature": 0.125}, ok, "mean_coupling")
    elif kind == "curie_weiss_ferro":
        # J = (beta/n) 1 1^T has eigenvalues beta and 0
        ok = beta < 0.5
        out["spectral_width"] = RegimeResult("spectral_width", 0.5, ok, "spectral_width",
                                             {"spectral_width": 0.5})
    elif kind == "matrix":
        if "eigenvalues" in descriptor:
            lam = np.asarray(descriptor["eigenvalues"], dtype=np.float64)
        else:
            lam = np.linalg.eigvalsh(np.asarray(descriptor["J"], dtype=np.float64))
        width = float(lam.max() - lam.min())
        ok = beta * width < 0.5
        thr = 0.5 / width if width > 0 else math.inf
        out["spectral_width"] = RegimeResult("spectral_width", thr, ok, "spectral_width",
                                             {"spectral_width": thr})
    else:
        raise ValueError(f"unknown ensemble kind {kind!r}")
    return out
