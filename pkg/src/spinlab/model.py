"""Spin configurations, the rank-one-outlier Ising measure and single-site Glauber updates.

The unnormalized log-weight of a configuration x in {-1,+1}^n is

    -(beta/n) <u, x>^2 + <x, J x> + <h, x>.

Everything is kept in log space; unnormalized weights are never exponentiated.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import ConfigError
from .rng import make_rng

SYMMETRY_TOL = 1e-12


def _frozen(a, dtype=np.float64):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def as_spins(x, n=None):
    """Validate ``x`` as a spin configuration and return it as a read-only int8 array."""
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise ValueError("spin configuration must be one-dimensional")
    if not np.all((arr == 1) | (arr == -1)):
        raise ValueError("spin entries must be exactly -1 or +1")
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"spin configuration has length {arr.shape[0]}, expected {n}")
    return _frozen(arr, np.int8)


@dataclass(frozen=True, eq=False)
class IsingModel:
    """Immutable model parameters (beta, u, J, h); ``n`` is derived from ``u``.

    ``J`` defaults to zero and ``h`` to zero. The diagonal of ``J`` is kept as given:
    it only adds a constant on the hypercube.
    """

    beta: float
    u: np.ndarray
    J: np.ndarray | None = None
    h: np.ndarray | None = None
    n: int = field(init=False)

    def __post_init__(self):
        u = _frozen(np.atleast_1d(self.u))
        if u.ndim != 1 or u.shape[0] == 0:
            raise ValueError("u must be a non-empty vector")
        n = u.shape[0]
        J = np.zeros((n, n)) if self.J is None else np.asarray(self.J, dtype=np.float64)
        h = np.zeros(n) if self.h is None else np.atleast_1d(np.asarray(self.h, dtype=np.float64))
        if J.shape != (n, n):
            raise ValueError(f"J has shape {J.shape}, expected {(n, n)}")
        if h.shape != (n,):
            raise ValueError(f"h has shape {h.shape}, expected {(n,)}")
        beta = float(self.beta)
        if not np.isfinite(beta) or beta < 0:
            raise ValueError("beta must be a finite nonnegative number")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(J)) and np.all(np.isfinite(h))):
            raise ValueError("model parameters must be finite")
        if np.max(np.abs(u)) > 1.0:
            raise ValueError("outlier direction must satisfy max|u_i| <= 1")
        if np.max(np.abs(J - J.T), initial=0.0) > SYMMETRY_TOL:
            raise ValueError("J must be symmetric")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "J", _frozen(J))
        object.__setattr__(self, "h", _frozen(h))
        object.__setattr__(self, "n", n)

    def coupling_matrix(self):
        """Quadratic form K = J - (beta/n) u u^T, so the log-weight is <x,Kx> + <h,x>."""
        K = np.array(self.J) - (self.beta / self.n) * np.outer(self.u, self.u)
        return 0.5 * (K + K.T)

    @property
    def has_interaction(self):
        return bool(np.any(self.J != 0.0))

    def to_dict(self):
        return {
            "n": self.n,
            "beta": self.beta,
            "u": [float(v) for v in self.u],
            "J": [[float(v) for v in row] for row in self.J],
            "h": [float(v) for v in self.h],
        }

    def to_json(self):
        # float repr is shortest round-trip, hence lossless
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d):
        allowed = {"n", "beta", "u", "J", "h"}
        extra = set(d) - allowed
        if extra:
            raise ConfigError(f"unknown model fields: {sorted(extra)}")
        missing = {"beta", "u"} - set(d)
        if missing:
            raise ConfigError(f"missing model fields: {sorted(missing)}")
        model = cls(beta=d["beta"], u=d["u"], J=d.get("J"), h=d.get("h"))
        if "n" in d and int(d["n"]) != model.n:
            raise ValueError("declared n does not match vector lengths")
        return model

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def digest(self):
        """SHA-256 of the canonical JSON form, used as ``model_hash`` in result records."""
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    def __eq__(self, other):
        if not isinstance(other, IsingModel):
            return NotImplemented
        return (
            self.beta == other.beta
            and np.array_equal(self.u, other.u)
            and np.array_equal(self.J, other.J)
            and np.array_equal(self.h, other.h)
        )

    __hash__ = None


def _check_dims(model, x):
    return as_spins(x, model.n).astype(np.float64)


def energy_exponent(model, x):
    """Unnormalized log-weight of ``x``."""
    xf = _check_dims(model, x)
    ux = float(model.u @ xf)
    return -(model.beta / model.n) * ux * ux + float(xf @ model.J @ xf) + float(model.h @ xf)


def _log_odds(model, xf, i):
    # log-weight(x_i=+1) - log-weight(x_i=-1); the diagonal J_ii cancels
    K = model.coupling_matrix()
    row = K[i] * xf
    return 4.0 * (float(row.sum()) - float(row[i])) + 2.0 * float(model.h[i])


def _check_site(model, i):
    if not (0 <= int(i) < model.n) or int(i) != i:
        raise IndexError(f"site index {i} out of range for n={model.n}")
    return int(i)


def conditional_plus_prob(model, x, i):
    """P(X_i = +1 | X_j = x_j for j != i)."""
    i = _check_site(model, i)
    return float(expit(_log_odds(model, _check_dims(model, x), i)))


def conditional_minus_prob(model, x, i):
    """P(X_i = -1 | X_j = x_j for j != i)."""
    i = _check_site(model, i)
    return float(expit(-_log_odds(model, _check_dims(model, x), i)))


def glauber_step(model, x, rng):
    """One random-scan heat-bath update; returns a new configuration."""
    rng = make_rng(rng)
    y = np.array(as_spins(x, model.n))
    i = int(rng.integers(model.n))
    p = conditional_plus_prob(model, y, i)
    y[i] = 1 if rng.random() < p else -1
    y.setflags(write=False)
    return y


def magnetization(u, x):
    """<u, x>/n."""
    u = np.asarray(u, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if u.shape != x.shape or u.ndim != 1:
        raise ValueError("u and x must be vectors of equal length")
    return float(u @ x) / u.shape[0]
