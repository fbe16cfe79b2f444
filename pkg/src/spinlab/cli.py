"""``spinlab`` command line: strict JSON configs in, atomically written CSV/JSON out.

Exit codes: 0 success, 2 configuration error, 3 capacity error.
"""
from __future__ import annotations

import argparse
import copy
import hashlib
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from . import approx, dynamics, ensembles, exact, tilted
from .errors import CapacityError, ConfigError
from .model import IsingModel
from .rng import make_rng

EXIT_OK, EXIT_CONFIG, EXIT_CAPACITY = 0, 2, 3

COMMANDS = ("approx-error", "tilted-sweep", "mixing", "spectra", "regime",
            "cw-bound", "gapped-search", "simulate")

# Parameter schemas: name -> default (REQUIRED marks mandatory fields).
REQUIRED = object()
SCHEMAS = {
    "approx-error": {
        "n_list": [8, 12], "beta_list": [1.0], "seeds": 5,
        "field": {"dist": "normal", "scale": 1.0}, "u_dist": "uniform",
    },
    "tilted-sweep": {
        "m_list": [1, 2], "gamma_list": [4.0], "omega_list": [256, 512, 1024],
        "ensemble": {"type": "fair_coin"},
    },
    "mixing": {"model": REQUIRED, "eps_list": [0.25], "restarts": 4, "start": "minus"},
    "spectra": {"ensemble": "random_regular", "n": 1000, "d": 3, "p": None,
                "beta": 1.0, "mu": 0.0, "seeds": 5},
    "regime": {"descriptor": REQUIRED, "beta": REQUIRED, "epsilon": 0.1},
    "cw-bound": {"n": REQUIRED, "beta0": REQUIRED},
    "gapped-search": {"graph": "erdos_renyi", "n": 2000, "d": 64, "kappa": 0.1,
                      "seeds": 10, "sweeps": 1000, "balanced": False},
    "simulate": {"model": REQUIRED, "steps": 10000, "thin": 100, "start": "minus"},
}
FIELD_SCHEMA = {"dist": "normal", "scale": 1.0}
ENSEMBLE_SCHEMA = {"fair_coin": {"type": None}, "custom": {"type": None, "mean": 0.0, "weight": 1.0}}


def _strict(obj, schema, where):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = set(obj) - set(schema)
    if unknown:
        raise ConfigError(f"unknown field(s) in {where}: {sorted(unknown)}")
    out = {}
    for key, default in schema.items():
        if key in obj:
            out[key] = obj[key]
        elif default is REQUIRED:
            raise ConfigError(f"missing required field {where}.{key}")
        else:
            out[key] = copy.deepcopy(default)
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    params: dict
    seed: int
    output: str | None

    def digest(self):
        blob = json.dumps({"command": self.command, "params": self.params, "seed": self.seed},
                          sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def parse_config(command, raw, seed=0, output=None):
    """Validate a raw parameter dict against the command schema."""
    if command not in SCHEMAS:
        raise ConfigError(f"unknown command {command!r}")
    params = _strict(raw, SCHEMAS[command], command)
    if command == "approx-error":
        params["field"] = _strict(params["field"], FIELD_SCHEMA, "field")
        if params["field"]["dist"] not in ("normal", "uniform", "zero"):
            raise ConfigError("field.dist must be normal, uniform or zero")
        if params["u_dist"] not in ("uniform", "ones", "signs"):
            raise ConfigError("u_dist must be uniform, ones or signs")
    if command == "tilted-sweep":
        ens = params["ensemble"]
        if not isinstance(ens, dict) or ens.get("type") not in ENSEMBLE_SCHEMA:
            raise ConfigError("ensemble.type must be fair_coin or custom")
        params["ensemble"] = _strict(ens, ENSEMBLE_SCHEMA[ens["type"]], "ensemble")
    if command == "spectra" and params["ensemble"] not in ("random_regular", "erdos_renyi", "sk"):
        raise ConfigError("spectra.ensemble must be random_regular, erdos_renyi or sk")
    if command == "gapped-search" and params["graph"] not in ("random_regular", "erdos_renyi"):
        raise ConfigError("gapped-search.graph must be random_regular or erdos_renyi")
    if command in ("mixing", "simulate") and params["start"] not in ("minus", "plus", "random"):
        raise ConfigError("start must be minus, plus or random")
    if not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError("seed must be a 64-bit nonnegative integer")
    return ExperimentConfig(command, params, int(seed), output)


def _seed_list(seeds):
    if isinstance(seeds, bool):
        raise ConfigError("seeds must be a count or a list of integers")
    if isinstance(seeds, int):
        return list(range(seeds))
    if isinstance(seeds, list) and all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
        return seeds
    raise ConfigError("seeds must be a count or a list of integers")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _csv(header, rows, cfg):
    buf = io.StringIO()
    buf.write(",".join(header + ["config_hash", "version"]) + "\n")
    tail = [cfg.digest(), __version__]
    for row in rows:
        buf.write(",".join([_fmt(v) for v in row] + tail) + "\n")
    return buf.getvalue()


def _json(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"not serializable: {type(o)}")


def _provenance(cfg):
    return {"config_hash": cfg.digest(), "seed": cfg.seed, "version": __version__,
            "command": cfg.command}


def _pool_map(fn, items, threads):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _model_from(spec):
    try:
        return IsingModel.from_dict(spec)
    except (ValueError, TypeError, KeyError) as err:
        raise ConfigError(f"invalid model: {err}") from err


def _start_config(kind, n, rng):
    if kind == "minus":
        return -np.ones(n, dtype=np.int8)
    if kind == "plus":
        return np.ones(n, dtype=np.int8)
    return np.where(rng.random(n) < 0.5, 1, -1).astype(np.int8)


def cmd_approx_error(cfg, threads):
    p = cfg.params
    seeds = _seed_list(p["seeds"])
    points = [(n, b, s) for n in p["n_list"] for b in p["beta_list"] for s in seeds]
    for n, _, _ in points:
        if n > exact.MAX_ENUM_N:
            raise CapacityError(f"approx-error needs n <= {exact.MAX_ENUM_N}")

    def run(point):
        n, beta, s = point
        rng = make_rng(np.random.SeedSequence([cfg.seed, int(n), int(s)]))
        if p["u_dist"] == "ones":
            u = np.ones(n)
        elif p["u_dist"] == "signs":
            u = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        else:
            u = rng.uniform(-1.0, 1.0, n)
        scale = float(p["field"]["scale"])
        dist = p["field"]["dist"]
        if dist == "normal":
            h = scale * rng.standard_normal(n)
        elif dist == "uniform":
            h = rng.uniform(-scale, scale, n)
        else:
            h = np.zeros(n)
        summary = exact.gibbs_moments(IsingModel(beta, u, None, h))
        params = approx.approx_params(beta, u, h)
        return [n, float(beta), s,
                approx.opnorm_error(summary.cov, approx.approx_covariance(params)),
                approx.opnorm_error(summary.cor, approx.approx_correlation(params)),
                params.alpha_star, params.m_star]

    rows = _pool_map(run, points, threads)
    header = ["n", "beta", "seed", "opnorm_error_cov", "opnorm_error_cor", "alpha_star", "m_star"]
    return _csv(header, rows, cfg)


def _sweep_ensemble(spec, omega, gamma):
    if spec["type"] == "fair_coin":
        return tilted.fair_coin(int(omega), gamma)
    mean, weight = float(spec["mean"]), float(spec["weight"])
    n = max(1, int(round(omega / (weight**2 * (1.0 - mean**2)))))
    return tilted.equal_weight(n, mean, weight, gamma)


def cmd_tilted_sweep(cfg, threads):
    p = cfg.params
    rows = []
    for m in p["m_list"]:
        for gamma in p["gamma_list"]:
            for omega in p["omega_list"]:
                ens = _sweep_ensemble(p["ensemble"], omega, float(gamma))
                ex = tilted.exact_tilted_moment(ens, int(m))
                g = tilted.gaussian_tilted_moment(int(m), float(gamma))
                rows.append([int(m), float(gamma), ens.omega, abs(ex - g), g, ex])
    header = ["m", "gamma", "omega", "deficit", "gaussian_value", "exact_value"]
    return _csv(header, rows, cfg)


def _record(model_hash, cfg, quantity, value, **metadata):
    return {"model_hash": model_hash, "seed": cfg.seed, "quantity": quantity, "value": value,
            "metadata": {**_provenance(cfg), **metadata}}


def cmd_mixing(cfg, threads):
    p = cfg.params
    model = _model_from(p["model"])
    if model.n > exact.MAX_KERNEL_N:
        raise CapacityError(f"mixing needs n <= {exact.MAX_KERNEL_N}")
    start = _start_config(p["start"], model.n, make_rng(cfg.seed))
    digest = model.digest()
    records = [
        _record(digest, cfg, "log_partition", exact.partition_function(model)),
        _record(digest, cfg, "spectral_gap", exact.spectral_gap(model)),
    ]
    if model.n <= exact.MAX_MLSI_N:
        records.append(_record(digest, cfg, "mlsi_upper",
                               exact.mlsi_upper_estimate(model, int(p["restarts"]), cfg.seed),
                               kind="certified upper bound from witnesses"))
    for eps in sorted(float(e) for e in p["eps_list"]):
        records.append(_record(digest, cfg, "tv_mixing_time",
                               exact.tv_mixing_time(model, eps, start), eps=eps,
                               start=start.tolist()))
    return _json(records)


def cmd_spectra(cfg, threads):
    p = cfg.params
    seeds = _seed_list(p["seeds"])

    def run(s):
        sub = int(np.random.SeedSequence([cfg.seed, int(s)]).generate_state(1)[0])
        if p["ensemble"] == "random_regular":
            M = ensembles.random_regular(int(p["n"]), int(p["d"]), sub)
        elif p["ensemble"] == "erdos_renyi":
            if p["p"] is None:
                raise ConfigError("erdos_renyi spectra need p")
            M = ensembles.erdos_renyi(int(p["n"]), float(p["p"]), sub)
        else:
            M = ensembles.sk_matrix(int(p["n"]), float(p["beta"]), float(p["mu"]), sub)
        r = ensembles.spectrum(M)
        return [s, r.lambda1, r.lambda2, r.lambda_min, r.spectral_width, r.second_width]

    rows = _pool_map(run, seeds, threads)
    header = ["seed", "lambda1", "lambda2", "lambda_min", "spectral_width", "second_width"]
    return _csv(header, rows, cfg)


def cmd_regime(cfg, threads):
    p = cfg.params
    if not isinstance(p["descriptor"], dict) or "kind" not in p["descriptor"]:
        raise ConfigError("regime.descriptor must be an object with a kind")
    try:
        res = ensembles.regime_check(p["descriptor"], float(p["beta"]), float(p["epsilon"]))
    except (KeyError, ValueError) as err:
        raise ConfigError(f"invalid descriptor: {err}") from err
    out = {name: {"threshold": r.threshold, "passes": r.passes, "binding": r.binding,
                  "constraints": r.constraints} for name, r in res.items()}
    return _json({"results": out, "beta": float(p["beta"]), "epsilon": float(p["epsilon"]),
                  **_provenance(cfg)})


def cmd_cw_bound(cfg, threads):
    p = cfg.params
    n = p["n"]
    if isinstance(n, float) and n.is_integer():
        n = int(n)
    if not isinstance(n, int) or n < 2 or n % 2:
        raise ConfigError("cw-bound needs an even integer n >= 2")
    if n > 10**7:
        raise CapacityError("cw-bound supports n <= 1e7")
    ratio, bound = dynamics.cw_conductance_exact(n, float(p["beta0"]))
    return _json({"ratio": ratio, "bound": bound, "passes": ratio <= bound,
                  "n": n, "beta0": float(p["beta0"]), **_provenance(cfg)})


def cmd_gapped_search(cfg, threads):
    p = cfg.params
    n, d, kappa = int(p["n"]), float(p["d"]), float(p["kappa"])
    seeds = _seed_list(p["seeds"])

    def run(s):
        ss = np.random.SeedSequence([cfg.seed, int(s)])
        gseed = int(ss.generate_state(1)[0])
        if p["graph"] == "random_regular":
            g = ensembles.random_regular(n, int(d), gseed)
        else:
            g = ensembles.erdos_renyi(n, d / n, gseed)
        rng = make_rng(ss.spawn(1)[0])
        if p["balanced"]:
            x0 = rng.permutation(np.repeat(np.array([1, -1], dtype=np.int8), n // 2))
            x = dynamics.balanced_greedy_ascent(g, x0, d, int(p["sweeps"]))
        else:
            x0 = np.where(rng.random(n) < 0.5, 1, -1).astype(np.int8)
            x = dynamics.greedy_ascent(g, x0, d, int(p["sweeps"]))
        rep = dynamics.gapped_check(g, x, kappa, d)
        return {"seed": s, "delta_achieved": rep.delta_achieved,
                "violating": len(rep.violating_sites),
                "H_start": dynamics.hamiltonian(g, x0, d), "H_end": dynamics.hamiltonian(g, x, d)}

    if p["balanced"] and n % 2:
        raise ConfigError("balanced search needs even n")
    runs = _pool_map(run, seeds, threads)
    return _json({"diagnostic": True, "kappa": kappa, "n": n, "d": d, "graph": p["graph"],
                  "balanced": bool(p["balanced"]), "runs": runs, **_provenance(cfg)})


def cmd_simulate(cfg, threads):
    p = cfg.params
    model = _model_from(p["model"])
    x0 = _start_config(p["start"], model.n, make_rng(cfg.seed))
    tr = dynamics.run_glauber(model, x0, int(p["steps"]), int(p["thin"]),
                              np.random.SeedSequence([cfg.seed, 1]))
    rows = [[t, m, e, o] for t, m, e, o in zip(tr.t.tolist(), tr.magnetization.tolist(),
                                               tr.energy.tolist(), tr.overlap.tolist())]
    return _csv(["t", "magnetization", "energy", "overlap"], rows, cfg)


HANDLERS = {
    "approx-error": cmd_approx_error,
    "tilted-sweep": cmd_tilted_sweep,
    "mixing": cmd_mixing,
    "spectra": cmd_spectra,
    "regime": cmd_regime,
    "cw-bound": cmd_cw_bound,
    "gapped-search": cmd_gapped_search,
    "simulate": cmd_simulate,
}


def atomic_write(path, text):
    """Write ``text`` to ``path`` via a temporary file in the same directory and a rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".spinlab-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run(config, threads=1):
    """Execute a validated config; returns (exit_code, text or error message)."""
    try:
        text = HANDLERS[config.command](config, threads)
    except ConfigError as err:
        return EXIT_CONFIG, str(err)
    except CapacityError as err:
        return EXIT_CAPACITY, str(err)
    except (ValueError, TypeError, KeyError, IndexError) as err:
        # parameters that passed the schema but are rejected by the library
        return EXIT_CONFIG, f"{type(err).__name__}: {err}"
    if config.output:
        atomic_write(config.output, text)
    return EXIT_OK, text


def _threads(arg):
    if arg is not None:
        return max(1, int(arg))
    env = os.environ.get("SPINLAB_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def _global_flags(parser):
    parser.add_argument("--config", help="JSON file with command parameters")
    parser.add_argument("--seed", type=int, help="master seed (config value, else 0)")
    parser.add_argument("--out", help="output path (stdout when omitted)")
    parser.add_argument("--threads", type=int, help="worker threads (env SPINLAB_THREADS)")
    parser.add_argument("--max-enum-n", type=int, help="cap for exact enumeration")
    parser.add_argument("--max-kernel-n", type=int, help="cap for transition-kernel work")


def build_parser():
    parser = argparse.ArgumentParser(prog="spinlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"spinlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        _global_flags(sp)
        if name == "cw-bound":
            sp.add_argument("--n", type=int)
            sp.add_argument("--beta0", type=float)
        if name in ("simulate", "gapped-search", "spectra", "approx-error"):
            sp.add_argument("--seeds", type=int, help="number of seeds (overrides config)")
        if name == "simulate":
            sp.add_argument("--thin", type=int)
            sp.add_argument("--steps", type=int)
        if name == "gapped-search":
            sp.add_argument("--sweeps", type=int)
    vp = sub.add_parser("verify", help="run the acceptance battery")
    vp.add_argument("--level", choices=("fast", "full"), default="fast")
    vp.add_argument("--out", help="output path (stdout when omitted)")
    return parser


def _load_params(args):
    """Merge the config file (bare params or a full ExperimentConfig) with flag overrides."""
    raw, seed, output = {}, None, None
    if args.config:
        try:
            with open(args.config) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"cannot read config: {err}") from err
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        raw = dict(raw)
        if "command" in raw:
            outer = _strict(raw, {"command": REQUIRED, "params": {}, "seed": None,
                                  "output": None}, "config")
            if outer["command"] != args.command:
                raise ConfigError(f"config is for {outer['command']!r}, not {args.command!r}")
            raw, seed, output = dict(outer["params"]), outer["seed"], outer["output"]
        elif "seed" in raw:
            seed = raw.pop("seed")
    if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool)):
        raise ConfigError("seed must be an integer")
    for flag in ("n", "beta0", "seeds", "thin", "steps", "sweeps"):
        val = getattr(args, flag, None)
        if val is not None:
            raw[flag] = val
    seed = args.seed if args.seed is not None else (seed if seed is not None else 0)
    return raw, seed, args.out or output


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        from .verify import verify_suite
        report = verify_suite(args.level)
        text = _json(report)
        if args.out:
            atomic_write(args.out, text)
        else:
            sys.stdout.write(text)
        return EXIT_OK if report["passed"] else 1
    caps = exact.set_caps(args.max_enum_n, args.max_kernel_n)
    try:
        return _execute(args)
    finally:
        exact.set_caps(*caps)


def _execute(args):
    try:
        raw, seed, output = _load_params(args)
        cfg = parse_config(args.command, raw, seed, output)
    except ConfigError as err:
        print(f"spinlab: config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    code, text = run(cfg, _threads(args.threads))
    if code == EXIT_CONFIG:
        print(f"spinlab: config error: {text}", file=sys.stderr)
    elif code == EXIT_CAPACITY:
        print(f"spinlab: capacity error: {text}", file=sys.stderr)
    elif not cfg.output:
        sys.stdout.write(text)
    return code

if __name__ == "__main__":
    sys.exit(main())
