"""Compute independent reference values and freeze them in tests/data/oracles.json.

Nothing here imports spinlab. Everything is brute force in mpmath/sympy at high precision,
so the frozen numbers are a check on the package rather than a copy of it.
Run once; the JSON is committed.
"""
import itertools
import json
import pathlib

import mpmath as mp
import numpy as np
import sympy as sp

mp.mp.dps = 40
OUT = pathlib.Path(__file__).resolve().parents[1] / "tests" / "data" / "oracles.json"


def states(n):
    return [tuple(s) for s in itertools.product((-1, 1), repeat=n)]


def exponent(beta, u, J, h, x):
    n = len(x)
    ux = mp.fsum(mp.mpf(u[i]) * x[i] for i in range(n))
    xjx = mp.fsum(mp.mpf(J[i][j]) * x[i] * x[j] for i in range(n) for j in range(n))
    hx = mp.fsum(mp.mpf(h[i]) * x[i] for i in range(n))
    return -mp.mpf(beta) / n * ux**2 + xjx + hx


def gibbs(beta, u, J, h):
    n = len(u)
    S = states(n)
    w = [mp.exp(exponent(beta, u, J, h, x)) for x in S]
    Z = mp.fsum(w)
    mean = [mp.fsum(wi * x[i] for wi, x in zip(w, S)) / Z for i in range(n)]
    second = [[mp.fsum(wi * x[i] * x[j] for wi, x in zip(w, S)) / Z for j in range(n)]
              for i in range(n)]
    cov = [[second[i][j] - mean[i] * mean[j] for j in range(n)] for i in range(n)]
    return mp.log(Z), mean, cov, S, [wi / Z for wi in w]


def random_model(rng, n, beta_max=3.0, with_J=True):
    beta = float(rng.uniform(0, beta_max))
    u = rng.uniform(-1, 1, n).tolist()
    J = np.zeros((n, n))
    if with_J:
        G = rng.normal(0, 0.3, (n, n))
        J = (G + G.T) / 2
    h = rng.normal(0, 1, n).tolist()
    return {"beta": beta, "u": u, "J": J.tolist(), "h": h}


def kernel(model):
    """Heat-bath random-scan kernel, bitmask order with bit k set meaning x_k = +1."""
    n = len(model["u"])
    N = 1 << n
    xs = [tuple(1 if (s >> k) & 1 else -1 for k in range(n)) for s in range(N)]
    e = [exponent(model["beta"], model["u"], model["J"], model["h"], x) for x in xs]
    P = mp.zeros(N, N)
    for s in range(N):
        for k in range(n):
            t = s ^ (1 << k)
            P[s, t] = mp.mpf(1) / n / (1 + mp.exp(e[s] - e[t]))
        P[s, s] = 1 - mp.fsum(P[s, t] for t in range(N) if t != s)
    Z = mp.fsum(mp.exp(v) for v in e)
    pi = [mp.exp(v) / Z for v in e]
    return P, pi


def gap(model):
    P, pi = kernel(model)
    N = len(pi)
    S = mp.matrix(N, N)
    for i in range(N):
        for j in range(N):
            S[i, j] = mp.sqrt(pi[i]) * P[i, j] / mp.sqrt(pi[j])
    S = (S + S.T) / 2
    ev = sorted(mp.eigsy(S, eigvals_only=True), reverse=True)
    return 1 - ev[1]


def tv_mixing(model, eps, start_index):
    P, pi = kernel(model)
    N = len(pi)
    d = [mp.mpf(0)] * N
    d[start_index] = mp.mpf(1)
    t = 0
    while mp.fsum(abs(d[i] - pi[i]) for i in range(N)) / 2 > eps:
        d = [mp.fsum(d[i] * P[i, j] for i in range(N)) for j in range(N)]
        t += 1
    return t


def fixed_point(beta, u, h):
    n = len(u)
    g = lambda m: m - mp.fsum(mp.mpf(u[i]) * mp.tanh(h[i] - 2 * beta * m * u[i]) for i in range(n)) / n
    lo, hi = mp.mpf(-1), mp.mpf(1)
    for _ in range(200):
        mid = (lo + hi) / 2
        if g(mid) > 0:
            hi = mid
        else:
            lo = mid
    return (lo + hi) / 2


def main():
    rng = np.random.default_rng(20240601)
    out = {}

    # log Z and moments at n = 10 and n = 4
    m10 = random_model(rng, 10, with_J=True)
    logZ, mean, cov, _, _ = gibbs(m10["beta"], m10["u"], m10["J"], m10["h"])
    print("logz_n10", flush=True)
    out["logz_n10"] = {"model": m10, "logZ": mp.nstr(logZ, 30),
                       "mean": [mp.nstr(v, 30) for v in mean],
                       "cov": [[mp.nstr(v, 30) for v in row] for row in cov]}
    m4 = random_model(rng, 4)
    logZ, mean, cov, _, _ = gibbs(m4["beta"], m4["u"], m4["J"], m4["h"])
    out["moments_n4"] = {"model": m4, "logZ": mp.nstr(logZ, 30),
                         "mean": [mp.nstr(v, 30) for v in mean],
                         "cov": [[mp.nstr(v, 30) for v in row] for row in cov]}

    # spectral gap and mixing time of a random 3-spin chain
    m3 = random_model(rng, 3)
    print("chain_n3", flush=True)
    out["chain_n3"] = {"model": m3, "gap": mp.nstr(gap(m3), 30),
                       "tmix_eps_0.1_start_0": tv_mixing(m3, mp.mpf("0.1"), 0),
                       "tmix_eps_0.01_start_7": tv_mixing(m3, mp.mpf("0.01"), 7)}
    out["gap_free_n3"] = mp.nstr(gap({"beta": 0, "u": [0] * 3, "J": [[0] * 3] * 3, "h": [0] * 3}), 30)

    # fixed points by bisection
    print("fixed_point_ones", flush=True)
    out["fixed_point_ones"] = mp.nstr(fixed_point(mp.mpf(1), [1] * 5, [1] * 5), 30)
    u5, h5 = rng.uniform(-1, 1, 7).tolist(), rng.normal(0, 2, 7).tolist()
    out["fixed_point_random"] = {"beta": 2.5, "u": u5, "h": h5,
                                 "m_star": mp.nstr(fixed_point(mp.mpf("2.5"), u5, h5), 30)}

    # main mixing bound by quadrature
    def main_bound(j, a):
        c = 2 * (1 + mp.mpf(a)) * mp.mpf(j)
        return mp.exp(-mp.quad(lambda t: c / (1 - c * (1 - t)), [0, 1]))

    out["main_bound"] = {"0.3,0.01": mp.nstr(main_bound("0.3", "0.01"), 30),
                         "0.1,0.5": mp.nstr(main_bound("0.1", "0.5"), 30)}

    # Gaussian tilted moments by quadrature
    gm = {}
    for m in range(11):
        for g in ("0", "0.5", "2", "8"):
            val = mp.quad(lambda x: x**m * mp.exp(-mp.mpf(g) * x * x) * mp.npdf(x), [-mp.inf, 0, mp.inf])
            gm[f"{m},{g}"] = mp.nstr(val, 30)
    print("gaussian_moments", flush=True)
    out["gaussian_moments"] = gm

    # exact tilted moments: a general 6-site ensemble and an equal-weight binomial case
    a6 = rng.uniform(-1, 1, 6).tolist()
    p6 = rng.uniform(-0.6, 0.6, 6).tolist()
    omega = mp.fsum(mp.mpf(a) ** 2 * (1 - mp.mpf(p) ** 2) for a, p in zip(a6, p6))
    gamma, mu = mp.mpf("1.3"), mp.mpf("0.4")
    vals = {}
    for m in range(5):
        tot = mp.mpf(0)
        for xi in states(6):
            prob = mp.fprod((1 + x * mp.mpf(p)) / 2 for x, p in zip(xi, p6))
            z = mp.fsum(mp.mpf(a) * (x - mp.mpf(p)) for a, x, p in zip(a6, xi, p6)) / mp.sqrt(omega)
            y = z + mu
            tot += prob * y**m * mp.exp(-gamma * y * y)
        vals[str(m)] = mp.nstr(tot, 30)
    print("tilted_general", flush=True)
    out["tilted_general"] = {"weights": a6, "means": p6, "gamma": 1.3, "mu": 0.4, "moments": vals}

    n_eq, mean_eq, g_eq = 40, mp.mpf("0.2"), mp.mpf(3)
    om = n_eq * (1 - mean_eq**2)
    vals = {}
    for m in range(5):
        tot = mp.mpf(0)
        for k in range(n_eq + 1):
            prob = mp.binomial(n_eq, k) * ((1 + mean_eq) / 2) ** k * ((1 - mean_eq) / 2) ** (n_eq - k)
            z = ((2 * k - n_eq) - n_eq * mean_eq) / mp.sqrt(om)
            tot += prob * z**m * mp.exp(-g_eq * z * z)
        vals[str(m)] = mp.nstr(tot, 30)
    out["tilted_equal"] = {"n": n_eq, "mean": 0.2, "gamma": 3.0, "moments": vals}

    # tilted variance of W = n^{-1/2} sum (xi - E xi) for fair coins, summed directly
    n_w, beta_w, t_w = 64, mp.mpf(4), mp.mpf("0.5")
    num = [mp.mpf(0)] * 3
    for k in range(n_w + 1):
        w = (2 * k - n_w) / mp.sqrt(n_w)
        wt = mp.binomial(n_w, k) * mp.exp(t_w * w - beta_w * w * w)
        for p in range(3):
            num[p] += wt * w**p
    var = num[2] / num[0] - (num[1] / num[0]) ** 2
    out["tilted_variance"] = {"n": n_w, "beta": 4.0, "t": 0.5, "variance": mp.nstr(var, 30)}

    # derivative coefficient table: d^l/dx^l x^m e^{-g x^2} = sum_i c_i g^{(l+i)/2} x^{m+i} e^{-g x^2}
    x, g = sp.symbols("x g", positive=True)
    table = {}
    for m in range(7):
        for ell in range(5):
            expr = sp.expand(sp.diff(x**m * sp.exp(-g * x**2), x, ell) * sp.exp(g * x**2))
            coeffs = []
            for i in range(-ell, ell + 1):
                if m + i < 0 or (ell + i) % 2:
                    coeffs.append(0)
                    continue
                coeffs.append(int(expr.coeff(x, m + i).coeff(g, (ell + i) // 2)))
            table[f"{m},{ell}"] = coeffs
    print("derivative_coeffs", flush=True)
    out["derivative_coeffs"] = table

    # Stein identity, symbolically: f' - x f - (h~ - E h~) == 0
    def gauss(k):
        # E[G^k e^{-g G^2}] for standard normal G
        if k < 0 or k % 2:
            return 0
        return sp.factorial2(k - 1) * (1 + 2 * g) ** sp.Rational(-(k + 1), 2)

    stein = {}
    for m in range(1, 9):
        hm = lambda k: x**k * sp.exp(-g * x**2) if k >= 0 else 0
        f = -hm(m - 1) / (1 + 2 * g)
        ht = hm(m) - sp.Rational(m - 1) / (1 + 2 * g) * hm(m - 2)
        mean = sp.simplify(gauss(m) - sp.Rational(m - 1) / (1 + 2 * g) * gauss(m - 2))
        stein[str(m)] = {"residual_zero": bool(sp.simplify(sp.diff(f, x) - x * f - ht) == 0),
                         "mean_zero": bool(mean == 0)}
    print("stein_symbolic", flush=True)
    out["stein_symbolic"] = stein

    # Curie-Weiss antiferro conductance by brute force over 2^10 states
    n_cw = 10
    cw = {}
    for b in ("0", "0.5", "1"):
        b0 = mp.mpf(b)
        S = states(n_cw)
        e = [-b0 * sum(s) ** 2 for s in S]
        Z = mp.fsum(mp.exp(v) for v in e)
        idx = {s: i for i, s in enumerate(S)}
        Q = mp.mpf(0)
        piS = mp.mpf(0)
        for s, es in zip(S, e):
            if s[0] != 1:
                continue
            piS += mp.exp(es) / Z
            t = (-1,) + s[1:]
            et = e[idx[t]]
            Q += mp.exp(es) / Z / n_cw * mp.exp(et) / (mp.exp(es) + mp.exp(et))
        cw[b] = mp.nstr(Q / piS, 30)
    print("cw_conductance_n10", flush=True)
    out["cw_conductance_n10"] = cw

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(out, indent=1, sort_keys=True) + "\n")
    print("wrote", OUT)


if __name__ == "__main__":
    main()
