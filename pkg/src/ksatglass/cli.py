"""Command-line entry point.

Exit codes: 0 on success, 1 when a parameter fails validation (the message
names the field), 2 on runtime or capacity errors.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

from . import interp, ksat, mc, parisi, pspin

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class ConfigError(Exception):
    pass


def _int(name, value, minimum=None):
    try:
        out = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be an integer, got {value!r}") from None
    if isinstance(value, float) and value != out:
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if minimum is not None and out < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {out}")
    return out


def _float(name, value, positive=False, nonnegative=False):
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {value!r}") from None
    if not math.isfinite(out):
        raise ConfigError(f"{name} must be finite, got {value!r}")
    if positive and not out > 0:
        raise ConfigError(f"{name} must be > 0, got {out}")
    if nonnegative and not out >= 0:
        raise ConfigError(f"{name} must be >= 0, got {out}")
    return out


def _seed(value):
    if value is None:
        raise ConfigError("seed is required")
    if isinstance(value, bool):
        raise ConfigError(f"seed must be an integer or string, got {value!r}")
    if isinstance(value, int):
        if value < 0:
            raise ConfigError(f"seed must be non-negative, got {value}")
        return value
    return str(value)


def _alphas(value):
    if isinstance(value, str):
        parts = [p for p in value.split(",") if p.strip()]
    elif isinstance(value, (list, tuple)):
        parts = list(value)
    else:
        raise ConfigError(f"alphas must be a comma-separated list, got {value!r}")
    if not parts:
        raise ConfigError("alphas must not be empty")
    return [_float("alphas", p, positive=True) for p in parts]


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _settings(args, defaults: dict) -> dict:
    """Merge defaults, the --config file and explicit flags, in that order."""
    merged = dict(defaults)
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config: cannot read {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config: expected a JSON object")
        unknown = set(data) - set(defaults) - {"seed", "out", "threads"}
        if unknown:
            raise ConfigError(f"config: unknown field(s) {sorted(unknown)}")
        merged.update(data)
    for key in list(defaults) + ["seed", "out", "threads"]:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    merged.setdefault("out", None)
    merged["threads"] = _int("threads", merged.get("threads", 1), 1)
    return merged


def cmd_gen(args) -> int:
    cfg = _settings(args, {"n": None, "k": None, "alpha": None})
    n = _int("n", cfg["n"], 1)
    k = _int("k", cfg["k"], 2)
    alpha = _float("alpha", cfg["alpha"], positive=True)
    seed = _seed(cfg.get("seed"))
    inst = ksat.sample_instance(n, k, alpha, seed)
    _emit(inst.to_json() + "\n", cfg["out"])
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = _settings(args, {"instance": None, "limit": ksat.DEFAULT_LIMIT})
    if cfg["instance"] is None:
        raise ConfigError("instance: a path to an instance JSON file is required")
    limit = _int("limit", cfg["limit"], 1)
    inst = ksat.KSatInstance.from_json(Path(cfg["instance"]).read_text())
    start = time.perf_counter()
    best, argmin = ksat.ground_state(inst, limit)
    elapsed = time.perf_counter() - start
    _emit(_json({
        "n": inst.n, "k": inst.k, "m": inst.m,
        "min_unsat": best,
        "m_n_alpha": -best / inst.n,
        "argmin": argmin.tolist(),
        "wall_time": elapsed,
    }), cfg["out"])
    return EXIT_OK


def cmd_pspin_max(args) -> int:
    cfg = _settings(args, {"n": None, "k": None, "samples": 1, "limit": None})
    n = _int("n", cfg["n"], 1)
    k = _int("k", cfg["k"], 2)
    samples = _int("samples", cfg["samples"], 1)
    limit = None if cfg["limit"] is None else _int("limit", cfg["limit"], 1)
    seed = _seed(cfg.get("seed"))
    if samples == 1:
        h = pspin.sample_pspin(n, k, seed)
        m_n, argmax = pspin.max_pspin(h, limit)
        report = {"n": n, "k": k, "seed": str(seed), "m_n": m_n, "argmax": argmax.tolist()}
    else:
        est = mc.estimate_m_n(n, k, samples, seed, cfg["threads"], limit)
        report = {"n": n, "k": k, "seed": str(seed), "mean": est.mean, "stderr": est.stderr,
                  "n_samples": est.n_samples}
    _emit(_json(report), cfg["out"])
    return EXIT_OK


def _grid(cfg) -> parisi.GridConfig:
    kwargs = {}
    if cfg.get("dx") is not None:
        kwargs["dx"] = _float("dx", cfg["dx"], positive=True)
    if cfg.get("gh_nodes") is not None:
        kwargs["gh_nodes"] = _int("gh_nodes", cfg["gh_nodes"], 8)
    return parisi.GridConfig(**kwargs)


def cmd_parisi(args) -> int:
    cfg = _settings(args, {"k": None, "u": None, "levels": None, "restarts": 8, "dx": None,
                           "gh_nodes": None, "field_smoothing": False})
    k = _int("k", cfg["k"], 2)
    grid = _grid(cfg)
    field = bool(cfg["field_smoothing"])
    if (cfg["u"] is None) == (cfg["levels"] is None):
        raise ConfigError("u/levels: give exactly one of --u (evaluate) or --levels (minimize)")
    if cfg["u"] is not None:
        source = cfg["u"]
        text = source if isinstance(source, str) and source.lstrip().startswith("{") else None
        if text is None:
            try:
                text = Path(source).read_text()
            except OSError as exc:
                raise ConfigError(f"u: cannot read {source}: {exc}") from None
        try:
            u = parisi.StepFunction.from_json(text)
        except ValueError as exc:
            raise ConfigError(f"u: {exc}") from None
        value = parisi.parisi_functional(u, k, grid, field_smoothing=field)
        report = {"k": k, "u": json.loads(u.to_json()), "psi00": value.psi00,
                  "correction": value.correction, "value": value.p_of_u,
                  "grid": grid.as_dict(k), "field_smoothing": field}
    else:
        levels = _int("levels", cfg["levels"], 0)
        opt = parisi.OptimizerConfig(restarts=_int("restarts", cfg["restarts"], 1), threads=cfg["threads"])
        seed = _seed(cfg.get("seed", 0))
        chain, prev = [], None
        for level in range(levels + 1):
            res = parisi.minimize_parisi(k, level, opt, seed, grid, warm_start=prev, field_smoothing=field)
            prev = res.u
            chain.append({"levels": level, "value": res.value, "u_star": json.loads(res.u.to_json()),
                          "converged": res.converged, "message": res.message,
                          "evaluations": res.evaluations})
        report = {"k": k, "grid": grid.as_dict(k), "field_smoothing": field, "levels": chain,
                  "value": chain[-1]["value"], "u_star": chain[-1]["u_star"]}
    _emit(_json(report), cfg["out"])
    return EXIT_OK


def cmd_verify_theorem1(args) -> int:
    cfg = _settings(args, {"n": 12, "k": 2, "alphas": "16,64,256,1024", "samples": 2000})
    n = _int("n", cfg["n"], 1)
    k = _int("k", cfg["k"], 2)
    alphas = _alphas(cfg["alphas"])
    samples = _int("samples", cfg["samples"], 2)
    seed = _seed(cfg.get("seed", 0))
    sweep = mc.residual_sweep(n, k, alphas, samples, seed, cfg["threads"])
    _emit(sweep.to_csv(), cfg["out"])
    checks = mc.scaling_checks(sweep)
    stream = sys.stderr if not cfg["out"] else sys.stdout
    print(mc.summary_line(sweep, checks), file=stream)
    return EXIT_OK


def cmd_interp_check(args) -> int:
    cfg = _settings(args, {"n": 8, "k": 2, "alpha": 2.0, "delta": 0.5, "t": 0.5, "draws": 5000,
                           "step": interp.FD_STEP, "truncation": interp.DEFAULT_TRUNCATION})
    n = _int("n", cfg["n"], 1)
    k = _int("k", cfg["k"], 2)
    alpha = _float("alpha", cfg["alpha"], positive=True)
    delta = _float("delta", cfg["delta"], positive=True)
    t = _float("t", cfg["t"], nonnegative=True)
    step = _float("step", cfg["step"], positive=True)
    if not step <= t <= 1.0 - step:
        raise ConfigError(f"t must lie in [step, 1 - step], got {t}")
    draws = _int("draws", cfg["draws"], 2)
    truncation = _int("truncation", cfg["truncation"], 2)
    seed = _seed(cfg.get("seed", 0))
    point = interp.InterpolationPoint.matched(t, alpha, delta, k, n)
    res = interp.derivative_check(point, draws, seed, step, truncation)
    _emit(_json({
        "n": n, "k": k, "alpha": alpha, "delta": delta, "t": t, "beta": point.beta,
        "draws": draws, "step": step, "truncation": truncation,
        "fd_mean": res.fd_mean, "fd_stderr": res.fd_stderr,
        "terms_mean": res.terms_mean, "terms_stderr": res.terms_stderr,
        "remainder_bound": res.remainder_bound, "gap": res.gap, "passed": res.passed(),
    }), cfg["out"])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=lambda s: int(s) if s.isdigit() else s)
    common.add_argument("--out")
    common.add_argument("--threads", type=int)
    common.add_argument("--config", help="JSON object of parameters; flags override it")

    parser = argparse.ArgumentParser(prog="ksatglass", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="sample a K-sat instance as JSON")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--alpha", type=float)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", parents=[common], help="exact ground state of an instance file")
    p.add_argument("instance", nargs="?")
    p.add_argument("--limit", type=int)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("pspin-max", parents=[common], help="exact maximum of the p-spin Hamiltonian")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--limit", type=int)
    p.set_defaults(func=cmd_pspin_max)

    p = sub.add_parser("parisi", parents=[common], help="evaluate or minimize the Parisi functional")
    p.add_argument("--k", type=int)
    p.add_argument("--u", help="step function JSON file or inline JSON")
    p.add_argument("--levels", type=int, help="minimize over at most this many jumps")
    p.add_argument("--restarts", type=int)
    p.add_argument("--dx", type=float)
    p.add_argument("--gh-nodes", dest="gh_nodes", type=int)
    p.add_argument("--field-smoothing", dest="field_smoothing", action="store_true", default=None)
    p.set_defaults(func=cmd_parisi)

    p = sub.add_parser("verify-theorem1", parents=[common], help="residual sweep over alpha (CSV)")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--alphas")
    p.add_argument("--samples", type=int)
    p.set_defaults(func=cmd_verify_theorem1)

    p = sub.add_parser("interp-check", parents=[common], help="finite-difference check of the derivative terms")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--t", type=float)
    p.add_argument("--draws", type=int)
    p.add_argument("--step", type=float)
    p.add_argument("--truncation", type=int)
    p.set_defaults(func=cmd_interp_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ValueError, OSError, MemoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
