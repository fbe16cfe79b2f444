"""Acceptance battery shared by ``spinlab verify`` and the pytest acceptance module.

Every criterion returns a dict with its measured values and a pass flag. A criterion
passes only if its numerical condition holds AND it finishes within its time budget.
Seeds are fixed so reruns are reproducible.
"""
from __future__ import annotations

import math
import os
import tempfile
import time

import numpy as np

from . import __version__, approx, dynamics, ensembles, exact, tilted
from ._backend import BACKEND
from .model import IsingModel, conditional_plus_prob, energy_exponent, magnetization
from .rng import make_rng


def _result(cid, name, passed, measured, threshold, start, budget):
    runtime = time.perf_counter() - start
    return {
        "id": cid,
        "name": name,
        "passed": bool(passed and runtime <= budget),
        "condition_holds": bool(passed),
        "measured": measured,
        "threshold": threshold,
        "runtime_s": round(runtime, 3),
        "budget_s": budget,
    }


def _random_psd(rng, n, norm):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = rng.uniform(0.0, 1.0, n)
    lam *= norm / lam.max()
    J = (Q * lam) @ Q.T
    return 0.5 * (J + J.T)


def criterion_1():
    """Cavity covariance identities reproduce exact enumeration."""
    t0 = time.perf_counter()
    rng = make_rng(101)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 11))
        m = IsingModel(rng.uniform(0.0, 4.0), rng.uniform(-1, 1, n), None, rng.standard_normal(n))
        worst = max(worst, float(np.abs(approx.covariance_via_cavity(m)
                                        - exact.gibbs_moments(m).cov).max()))
    return _result(1, "cavity covariance equals exact covariance", worst <= 1e-10,
                   {"max_abs_diff": worst}, "<= 1e-10", t0, 30)


def criterion_2():
    """At beta = 0 the approximation is exact."""
    t0 = time.perf_counter()
    rng = make_rng(102)
    n = 8
    u = rng.uniform(-1, 1, n)
    worst = 0.0
    for _ in range(20):
        h = rng.standard_normal(n) * 2.0
        cov = exact.gibbs_moments(IsingModel(0.0, u, None, h)).cov
        A = approx.approx_covariance(approx.approx_params(0.0, u, h))
        worst = max(worst, float(np.abs(cov - A).max()), approx.opnorm_error(cov, A))
    return _result(2, "beta=0 collapse", worst <= 1e-12, {"max_error": worst}, "<= 1e-12", t0, 5)


def _criterion_3_errors(seed=103, draws=100, sizes=(8, 12, 16), beta=1.0):
    rng = make_rng(seed)
    errs, min_eig, max_eig = {}, math.inf, -math.inf
    for n in sizes:
        e = []
        for _ in range(draws):
            u = rng.uniform(-1, 1, n)
            h = rng.standard_normal(n)
            cor = exact.gibbs_moments(IsingModel(beta, u, None, h)).cor
            A = approx.approx_correlation(approx.approx_params(beta, u, h))
            e.append(approx.opnorm_error(cor, A))
            lam = np.linalg.eigvalsh(A)
            min_eig, max_eig = min(min_eig, lam[0]), max(max_eig, lam[-1])
        errs[n] = e
    return errs, float(min_eig), float(max_eig)


def criterion_3():
    """Median correlation error shrinks like 1/n."""
    t0 = time.perf_counter()
    errs, _, _ = _criterion_3_errors()
    med = {n: float(np.median(v)) for n, v in errs.items()}
    ratio = med[16] / med[8]
    return _result(3, "correlation approximation scaling", ratio <= 0.65,
                   {"median_error": med, "ratio_16_over_8": ratio}, "ratio <= 0.65", t0, 600)


def criterion_4():
    """The approximate correlation matrix is PSD and a contraction."""
    t0 = time.perf_counter()
    _, lo, hi = _criterion_3_errors()
    return _result(4, "approximate correlation eigenvalues in [0, 1]",
                   lo >= 0.0 and hi <= 1.0 + 1e-12, {"min_eig": lo, "max_eig": hi},
                   "eigenvalues in [0, 1 + 1e-12]", t0, 60)


def criterion_5():
    """Covariance norm bound for PSD interactions."""
    t0 = time.perf_counter()
    rng = make_rng(105)
    n = 10
    violations, worst_slack = 0, math.inf
    for _ in range(50):
        norm = rng.uniform(0.1, 0.4)
        J = _random_psd(rng, n, norm)
        jop = float(np.linalg.eigvalsh(J)[-1])
        bound = approx.hs_bound(1.0, jop)
        for _ in range(20):
            cov = exact.gibbs_moments(IsingModel(0.0, np.zeros(n), J, rng.standard_normal(n))).cov
            val = float(np.linalg.eigvalsh(cov)[-1])
            worst_slack = min(worst_slack, bound + 1e-9 - val)
            violations += val > bound + 1e-9
    return _result(5, "Hubbard-Stratonovich covariance bound", violations == 0,
                   {"violations": int(violations), "min_slack": worst_slack},
                   "||Cov|| <= 1/(1-2||J||) + 1e-9", t0, 300)


def criterion_6():
    """Ferromagnetic Curie-Weiss gap collapses across the transition."""
    t0 = time.perf_counter()
    n = 12
    gaps = {b: exact.spectral_gap(IsingModel(0.0, np.ones(n), (b / n) * np.ones((n, n))))
            for b in (0.3, 0.45, 0.7)}
    ok = n * gaps[0.3] >= 5 * n * gaps[0.7]
    return _result(6, "Curie-Weiss transition signature", ok,
                   {"n_gap": {str(b): n * g for b, g in gaps.items()},
                    "ratio": gaps[0.3] / gaps[0.7]}, "gap(0.3) >= 5 gap(0.7)", t0, 120)


def criterion_7():
    """Spectral gap of order 1/n for a strong negative outlier plus a PSD part."""
    t0 = time.perf_counter()
    rng = make_rng(107)
    n, jnorm = 12, 0.3
    floor = 0.5 * (1 - 2 * jnorm)
    worst = math.inf
    for beta in (1.0, 4.0):
        for _ in range(20):
            u = rng.uniform(-1, 1, n)
            J = _random_psd(rng, n, jnorm)
            h = rng.standard_normal(n)
            worst = min(worst, n * exact.spectral_gap(IsingModel(beta, u, J, h)))
    return _result(7, "outlier model spectral gap", worst >= floor,
                   {"min_n_gap": worst, "floor": floor}, "n gap >= 0.5 (1 - 0.6)", t0, 300)


def criterion_8():
    """Even deficits fall like 1/omega, odd ones like 1/sqrt(omega)."""
    t0 = time.perf_counter()
    omegas = (256, 512, 1024)
    even = [tilted.deficit(tilted.fair_coin(w, gamma=4.0), 2) for w in omegas]
    mean = 0.2  # P(xi = +1) = 0.6
    odd = [tilted.deficit(tilted.equal_weight(round(w / (1 - mean**2)), mean, gamma=4.0), 1)
           for w in omegas]
    r_even = [even[i + 1] / even[i] for i in range(2)]
    r_odd = [odd[i + 1] / odd[i] for i in range(2)]
    ok = all(0.35 <= r <= 0.7 for r in r_even) and all(0.55 <= r <= 0.85 for r in r_odd)
    return _result(8, "tilted-moment parity rates", ok,
                   {"even_ratios": r_even, "odd_ratios": r_odd},
                   "even in [0.35, 0.7], odd in [0.55, 0.85]", t0, 60)


def criterion_9():
    """Tilted variance matches the Gaussian prediction at rate 1/n."""
    t0 = time.perf_counter()
    beta = 16.0
    scaled = []
    for n in (512, 1024, 2048):
        r = tilted.tilted_variance(tilted.fair_coin(n), beta / math.sqrt(n), beta)
        scaled.append(abs(r.variance - r.prediction) * n * (1 + 2 * beta * r.zeta))
    cap = 10 * math.log1p(beta) ** 2
    ok = all(scaled[i + 1] <= 1.5 * scaled[i] for i in range(2)) and max(scaled) <= cap
    return _result(9, "tilted variance accuracy", ok, {"scaled_error": scaled, "cap": cap},
                   "non-increasing within 1.5x and <= 10 log^2(1+beta)", t0, 120)


def criterion_10():
    """Gaussian expectations of f_m^(l) vanish when m + l is even."""
    t0 = time.perf_counter()
    worst = 0.0
    for m in range(1, 7):
        for ell in range(5):
            if (m + ell) % 2:
                continue
            for a in (0.5, 0.75, 1.0):
                for g in (0.0, 0.5, 2.0, 8.0):
                    worst = max(worst, abs(tilted.gaussian_parity_expectation(m, ell, a, g)))
    return _result(10, "Gaussian parity identities", worst <= 1e-13, {"max_abs": worst},
                   "<= 1e-13", t0, 10)


def stein_residual(m, gamma, x):
    """f_m'(x) - x f_m(x) - (h~_m(x) - E h~_m(G))."""
    df = -tilted.hm_derivative_eval(m - 1, 1, gamma, x) / (1 + 2 * gamma)
    f = tilted.poisson_solution_eval(m, gamma, x)
    mean = tilted.gaussian_tilted_moment(m, gamma)
    if m >= 2:
        mean -= (m - 1) / (1 + 2 * gamma) * tilted.gaussian_tilted_moment(m - 2, gamma)
    return df - x * f - (tilted.tilde_h_eval(m, gamma, x) - mean)


def criterion_11():
    """Poisson-equation residual of the closed-form solutions."""
    t0 = time.perf_counter()
    rng = make_rng(111)
    worst = 0.0
    for m in range(1, 9):
        for g in (0.5, 2.0, 8.0):
            x = rng.uniform(-4, 4, 100)
            worst = max(worst, float(np.abs(stein_residual(m, g, x)).max()))
    return _result(11, "Stein residual", worst <= 1e-9, {"max_residual": worst}, "<= 1e-9", t0, 5)


def criterion_12():
    """Curie-Weiss conductance under the 4/(n e^{4 beta0}) bound."""
    t0 = time.perf_counter()
    cells = {}
    ok = True
    for n in (10**2, 10**4, 10**6):
        for b in (0.25, 0.5, 1.0, 2.0):
            ratio, bound = dynamics.cw_conductance_exact(n, b)
            cells[f"n={n},beta0={b}"] = ratio / bound
            ok &= ratio <= bound
    return _result(12, "Curie-Weiss conductance bound", ok,
                   {"ratio_over_bound": cells}, "ratio <= bound in all 12 cells", t0, 60)


def _flip_set(graph, x, kappa, d):
    H = dynamics.hamiltonian(graph, x, d)
    out = set()
    for i in range(graph.n):
        y = np.array(x)
        y[i] = -y[i]
        if (H - dynamics.hamiltonian(graph, y, d)) / 2 < kappa:
            out.add(i)
    return out


def criterion_13():
    """Local-field violating set equals the flip-difference set."""
    t0 = time.perf_counter()
    rng = make_rng(113)
    mismatches = 0
    for k in range(50):
        n = int(rng.integers(2, 13))
        g = ensembles.erdos_renyi(n, float(rng.uniform(0.2, 0.8)), 1000 + k)
        x = np.where(rng.random(n) < 0.5, 1, -1).astype(np.int8)
        kappa, d = float(rng.uniform(0.1, 3.0)), 3.0
        rep = dynamics.gapped_check(g, x, kappa, d)
        mismatches += set(rep.violating_sites) != _flip_set(g, x, kappa, d)
    return _result(13, "gapped-state detector soundness", mismatches == 0,
                   {"mismatches": int(mismatches)}, "exact agreement on 50 pairs", t0, 10)


def criterion_14():
    """Random 3-regular graphs have lambda_2 near 2 sqrt(2)."""
    t0 = time.perf_counter()
    seeds = np.random.SeedSequence(114).generate_state(20)
    lam2 = [ensembles.spectrum(ensembles.random_regular(1000, 3, int(s))).lambda2 for s in seeds]
    limit = 2 * math.sqrt(2) + 0.2
    good = sum(l <= limit for l in lam2)
    return _result(14, "regular-graph spectra", good >= 19,
                   {"runs_within": int(good), "max_lambda2": max(lam2)},
                   ">= 19 of 20 runs with lambda2 <= 2 sqrt 2 + 0.2", t0, 180)


CLI_CASES = [
    ("approx-error", {"n_list": [6, 8], "beta_list": [1.0, 2.0], "seeds": 2}),
    ("tilted-sweep", {"m_list": [1, 2], "gamma_list": [4.0], "omega_list": [256, 512],
                      "ensemble": {"type": "custom", "mean": 0.2}}),
    ("mixing", {"model": {"beta": 2.0, "u": [1.0, -0.5, 0.25, 1.0, 0.5],
                          "h": [0.1, -0.2, 0.3, 0.0, 0.5]}, "eps_list": [0.1, 0.25],
                "restarts": 2}),
    ("spectra", {"ensemble": "random_regular", "n": 200, "d": 3, "seeds": 2}),
    ("regime", {"descriptor": {"kind": "random_regular", "n": 1000, "d": 3}, "beta": 0.05}),
    ("cw-bound", {"n": 100, "beta0": 1.0}),
    ("gapped-search", {"n": 200, "d": 8, "seeds": 2, "sweeps": 50}),
    ("simulate", {"model": {"beta": 4.0, "u": [1.0] * 8}, "steps": 500, "thin": 50}),
]


def criterion_15():
    """Identical seeds give byte-identical CLI outputs and identical criterion measurements."""
    from .cli import main
    import json

    t0 = time.perf_counter()
    differing = []
    with tempfile.TemporaryDirectory() as tmp:
        for cmd, params in CLI_CASES:
            cfg = os.path.join(tmp, f"{cmd}.json")
            with open(cfg, "w") as fh:
                json.dump(params, fh)
            blobs = []
            for rep in range(2):
                out = os.path.join(tmp, f"{cmd}.{rep}.out")
                code = main([cmd, "--config", cfg, "--seed", "7", "--out", out])
                with open(out, "rb") as fh:
                    blobs.append((code, fh.read()))
            if blobs[0] != blobs[1] or blobs[0][0] != 0:
                differing.append(cmd)
    for crit in CRITERIA[:14]:
        first, second = (json.dumps(crit()["measured"], sort_keys=True) for _ in range(2))
        if first != second:
            differing.append(crit.__name__)
    return _result(15, "determinism", not differing,
                   {"commands": [c for c, _ in CLI_CASES], "differing": differing},
                   "byte-identical CLI outputs and criterion measurements", t0, 600)


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11, criterion_12,
            criterion_13, criterion_14, criterion_15]


def _check(name, cond):
    return {"name": name, "passed": bool(cond)}


def trivial_checks():
    """Quick spot checks of closed-form examples across the modules."""
    out = []
    m0 = IsingModel(0.0, np.zeros(3))
    out.append(_check("energy vanishes at beta=J=h=0", energy_exponent(m0, [1, -1, 1]) == 0.0))
    m1 = IsingModel(1.0, [1.0, 1.0])
    out.append(_check("energy of aligned pair", abs(energy_exponent(m1, [1, 1]) + 2) < 1e-15))
    m2 = IsingModel(0.0, [0.0], None, [0.5])
    out.append(_check("conditional probability sigma(2h)",
                      abs(conditional_plus_prob(m2, [1], 0) - 1 / (1 + math.exp(-1))) < 1e-15))
    out.append(_check("magnetization of balanced state",
                      magnetization(np.ones(4), [1, -1, 1, -1]) == 0.0))
    out.append(_check("log Z of free spins",
                      abs(exact.partition_function(m0) - 3 * math.log(2)) < 1e-12))
    out.append(_check("gap of free 3-spin chain", abs(exact.spectral_gap(m0) - 1 / 3) < 1e-12))
    one = IsingModel(0.0, [0.0])
    out.append(_check("one-spin kernel", np.allclose(exact.transition_matrix(one, sparse=False), 0.5)))
    out.append(_check("one-step mixing of one spin", exact.tv_mixing_time(one, 0.25, [1]) == 1))
    m_star, lam = approx.solve_fixed_point(0.0, np.ones(4), np.ones(4))
    out.append(_check("fixed point at beta=0", abs(m_star - math.tanh(1)) < 1e-12 and lam == 0))
    p = approx.approx_params(2.0, np.ones(5), np.zeros(5))
    out.append(_check("alpha for u=1, h=0", abs(p.alpha_star - 4 / 5) < 1e-15))
    out.append(_check("gamma bound at delta=0.5",
                      abs(approx.gamma_mlsi_bound(100, 0.5) - 1 / (1000 * math.sqrt(math.pi))) < 1e-15))
    out.append(_check("hs bound", approx.hs_bound(1, 0.25) == 2.0))
    out.append(_check("main bound at alpha=0", abs(approx.theorem_main_bound(0.2, 0.0) - 0.6) < 1e-12))
    out.append(_check("Gaussian tilted moment", abs(tilted.gaussian_tilted_moment(2, 1.5) - 0.125) < 1e-15))
    out.append(_check("single-sign tilted moment",
                      abs(tilted.exact_tilted_moment(tilted.fair_coin(1, gamma=0.7), 2)
                          - math.exp(-0.7)) < 1e-15))
    out.append(_check("derivative coefficients l=1",
                      tilted.hm_derivative_coeffs(5, 1).tolist() == [5, 0, -2]))
    out.append(_check("parity expectation at gamma=0",
                      tilted.gaussian_parity_expectation(1, 0, 0.75, 0.0) == -1.0))
    k4 = ensembles.random_regular(4, 3, 0)
    out.append(_check("K4 is the only 3-regular graph on 4 vertices", k4.num_edges == 6))
    kn = ensembles.spectrum(np.ones((6, 6)) - np.eye(6))
    out.append(_check("complete-graph spectrum", abs(kn.spectral_width - 6) < 1e-10))
    out.append(_check("fixed-degree regime threshold",
                      abs(ensembles.regime_check({"kind": "random_regular", "n": 1000, "d": 3}, 0.0)
                          ["random_regular"].threshold - 1 / (8 * math.sqrt(2))) < 1e-15))
    edge = ensembles.Graph(2, [[0, 1]])
    out.append(_check("edge Hamiltonian", dynamics.hamiltonian(edge, [1, 1], 1) == -2.0))
    out.append(_check("edge local field", dynamics.local_field(edge, [1, 1], 0, 1) == -2.0))
    out.append(_check("greedy ascent on an edge",
                      dynamics.hamiltonian(edge, dynamics.greedy_ascent(edge, [1, 1], 1, 5), 1) == 2.0))
    ratio, bound = dynamics.cw_conductance_exact(2, 0.0)
    out.append(_check("two-spin conductance", abs(ratio - 0.25) < 1e-15 and bound == 2.0))
    return out


FAST = [criterion_2, criterion_8, criterion_10, criterion_11, criterion_12, criterion_13]


def verify_suite(level="fast"):
    """Run the battery; ``fast`` covers spot checks and the quick criteria."""
    if level not in ("fast", "full"):
        raise ValueError("level must be fast or full")
    t0 = time.perf_counter()
    checks = trivial_checks()
    crits = [c() for c in (FAST if level == "fast" else CRITERIA)]
    passed = all(c["passed"] for c in checks) and all(c["passed"] for c in crits)
    return {
        "level": level,
        "version": __version__,
        "backend": BACKEND,
        "passed": passed,
        "checks": checks,
        "criteria": crits,
        "runtime_s": round(time.perf_counter() - t0, 3),
    }


__all__ = ["CRITERIA", "FAST", "verify_suite", "trivial_checks", "stein_residual"] + [
    c.__name__ for c in CRITERIA]
