"""Command-line front end.

    halfspace-jump-lab <constant|pvop|simulate|green|occupation|verify> --config FILE
                       [--seed N] [--threads N] [--quick]

Every subcommand writes ``<command>.csv`` (header row, LF endings) and
``<command>.json`` (resolved config, package version, results) into the output
directory: ``$HJL_OUT`` if set, else ``output_dir`` from the config, else
``./hjl_out``.  Files contain no timestamps or timings so reruns with the same
config and seed are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import jsonschema
import numpy as np

from . import __version__
from .errors import LabError, ParameterOutOfRange, UsageError
from .kernel import BoxDomain, KernelParams
from .nonlocal_ops import constant_C, pv_apply
from .potential import (default_green_pairs, green_bound_form, green_estimate,
                        occupation_estimates, occupation_log_fit, fit_exponent)
from .profiles import PowerProfile, smooth_bump, triangle_bump
from .quad import QuadSpec
from .sim import OUTCOME_NAMES, Probes, SimConfig, dump_paths, estimate_batch, simulate

COMMANDS = ("constant", "pvop", "simulate", "green", "occupation", "verify")

_num = {"type": "number"}
_vec = {"type": "array", "items": _num, "minItems": 1}
_grid = {"type": "array", "items": _num}

DOMAIN_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["box", "strip", "ball", "halfspace"]},
        "a": _num, "b": _num, "r": _num,
        "center": {"type": "array", "items": _num},
    },
}

PROFILE_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["power", "bump", "triangle"]},
        "p": _num, "center": _num, "half_width": _num, "amplitude": _num,
        "lo": _num, "hi": _num, "height": _num,
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "kernel": {
            "type": "object",
            "required": ["alpha", "d"],
            "additionalProperties": False,
            "properties": {
                "alpha": _num,
                "d": {"type": "integer", "minimum": 1},
                "beta": {"type": "array", "items": _num, "minItems": 4, "maxItems": 4},
                "theta": _num,
            },
        },
        "sim": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "delta": _num, "eta_abs": _num,
                "max_steps": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "time_cap": {"type": ["number", "null"]},
            },
        },
        "quad": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"abs_tol": _num, "rel_tol": _num,
                           "max_subdivisions": {"type": "integer", "minimum": 1}},
        },
        "output_dir": {"type": "string"},
        "threads": {"type": "integer", "minimum": 1},
        "constant": {
            "type": "object", "required": ["p_grid"], "additionalProperties": False,
            "properties": {"p_grid": _grid},
        },
        "pvop": {
            "type": "object", "required": ["profile", "x_d_grid"], "additionalProperties": False,
            "properties": {"profile": PROFILE_SCHEMA, "x_d_grid": _grid, "tolerance": _num},
        },
        "simulate": {
            "type": "object", "required": ["x0", "domain", "n_paths"], "additionalProperties": False,
            "properties": {
                "x0": _vec, "domain": DOMAIN_SCHEMA, "target": DOMAIN_SCHEMA,
                "n_paths": {"type": "integer", "minimum": 0},
                "functional": {"enum": ["exit_time", "occupation", "indicator", "ball_time"]},
                "gamma": _num,
                "ball": {"type": "object", "required": ["center", "radius"],
                         "properties": {"center": _vec, "radius": _num}},
                "trace_steps": {"type": "integer", "minimum": 0},
                "dump_paths": {"type": "string"},
                "start_index": {"type": "integer", "minimum": 0},
            },
        },
        "green": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "pairs": {"type": "array", "items": {"type": "array", "items": _vec,
                                                      "minItems": 2, "maxItems": 2}},
                "n_paths": {"type": "integer", "minimum": 0},
                "rho_fraction": _num,
            },
        },
        "occupation": {
            "type": "object", "required": ["gamma", "x_d_grid"], "additionalProperties": False,
            "properties": {
                "gamma": _num, "x_d_grid": _grid, "domain": DOMAIN_SCHEMA, "R": _num,
                "n_paths": {"type": "integer", "minimum": 0},
            },
        },
        "verify": {
            "type": "object", "additionalProperties": False,
            "properties": {"criteria": {"type": "array",
                                        "items": {"type": "integer", "minimum": 1, "maximum": 14}}},
        },
    },
}


# ---------------------------------------------------------------------------
# config handling


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from None
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise UsageError(f"config error at {where}: {exc.message}") from None


def _section(cfg: dict, name: str) -> dict:
    if name not in cfg:
        raise UsageError(f"config has no '{name}' block")
    return cfg[name]


def _kernel(cfg: dict) -> KernelParams:
    try:
        return KernelParams.from_dict(_section(cfg, "kernel"))
    except (LabError, ValueError) as exc:
        if isinstance(exc, UsageError):
            raise
        raise UsageError(f"config error at kernel: {exc}") from None


def _sim(cfg: dict, seed) -> SimConfig:
    s = dict(cfg.get("sim", {}))
    if s.get("time_cap") is None:
        s.pop("time_cap", None)
    if seed is not None:
        s["seed"] = seed
    try:
        return SimConfig(**s)
    except ValueError as exc:
        raise UsageError(f"config error at sim: {exc}") from None


def _quad(cfg: dict, default: QuadSpec | None = None) -> QuadSpec | None:
    if "quad" not in cfg:
        return default
    try:
        return QuadSpec(**cfg["quad"])
    except ValueError as exc:
        raise UsageError(f"config error at quad: {exc}") from None


def _domain(spec: dict, d: int) -> BoxDomain:
    kind = spec["kind"]
    try:
        if kind == "strip":
            return BoxDomain.strip(d, spec.get("r", 1.0))
        if kind == "halfspace":
            return BoxDomain.halfspace(d)
        if kind == "ball":
            return BoxDomain.ball(spec["center"], spec["r"])
        return BoxDomain.box(d, spec["a"], spec["b"], spec.get("center"))
    except (KeyError, ValueError) as exc:
        raise UsageError(f"config error at domain: {exc}") from None


def _profile(spec: dict):
    kind = spec["kind"]
    try:
        if kind == "power":
            return PowerProfile(spec["p"])
        if kind == "bump":
            return smooth_bump(spec["center"], spec["half_width"], spec.get("amplitude", 1.0))
        return triangle_bump(spec["lo"], spec["hi"], spec.get("height", 1.0))
    except KeyError as exc:
        raise UsageError(f"config error at pvop/profile: missing {exc}") from None


def _paths(n: int, quick: bool) -> int:
    if n <= 0:
        raise UsageError("n_paths must be positive")
    return max(2, n // 10) if quick else n


# ---------------------------------------------------------------------------
# output


def output_dir(cfg: dict) -> str:
    out = os.environ.get("HJL_OUT") or cfg.get("output_dir") or "hjl_out"
    os.makedirs(out, exist_ok=True)
    return out


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return "" if v is None else str(v)


def write_csv(path: str, header: list, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_summary(path: str, command: str, resolved: dict, results) -> None:
    doc = {"command": command, "version": __version__, "config": resolved, "results": results}
    with open(path, "w", newline="\n") as fh:
        json.dump(_clean(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands; each returns (header, rows, results, resolved_config)


def cmd_constant(cfg: dict, args):
    params = _kernel(cfg)
    grid = list(_section(cfg, "constant")["p_grid"])
    if not grid:
        raise UsageError("constant: p_grid is empty")
    spec = _quad(cfg)
    rows, values = [], []
    for p in grid:
        try:
            r = constant_C(params, float(p), spec)
            flag = "zero" if abs(r.value) < 1e-8 else ("positive" if r.value > 0 else "negative")
            rows.append([p, r.value, r.error, flag, ""])
            values.append((p, r.value, r.error))
        except ParameterOutOfRange as exc:
            rows.append([p, None, None, "error", str(exc)])
    ordered = sorted(values)
    pos = [v for v in ordered if v[1] > 0 and v[0] > params.alpha - 1]
    increasing = all(b[1] - b[2] > a[1] + a[2] for a, b in zip(pos, pos[1:]))
    results = {"n_points": len(grid), "n_errors": sum(r[3] == "error" for r in rows),
               "increasing_on_positive_branch": increasing}
    header = ["p", "C", "error_estimate", "flag", "error_message"]
    return header, rows, results, {"kernel": params.to_dict(), "constant": {"p_grid": grid},
                                   "quad": cfg.get("quad")}


def cmd_pvop(cfg: dict, args):
    params = _kernel(cfg)
    block = _section(cfg, "pvop")
    grid = list(block["x_d_grid"])
    if not grid:
        raise UsageError("pvop: x_d_grid is empty")
    f = _profile(block["profile"])
    spec = _quad(cfg)
    tol = float(block.get("tolerance", 1e-5))
    expected = None
    if block["profile"]["kind"] == "power":
        p = block["profile"]["p"]
        C = 0.0 if abs(p - (params.alpha - 1)) < 1e-15 or p == 0 else constant_C(params, p).value
        expected = lambda xd: C * xd ** (p - params.alpha)  # noqa: E731
    rows = []
    for xd in grid:
        r = pv_apply(params, f, float(xd), spec)
        exp = expected(xd) if expected else None
        # absolute tolerance scaled like the operator output of g_p at height x_d
        t = tol * max(abs(exp), 1.0 / xd) if exp is not None else tol
        ok = "" if exp is None else str(abs(r.value - exp) <= t)
        rows.append([xd, r.value, r.quadrature_error, *r.decomposition, exp, t, ok])
    header = ["x_d", "value", "error_estimate", "near", "correction", "far", "expected",
              "tolerance", "within_tolerance"]
    resolved = {"kernel": params.to_dict(), "pvop": {**block, "tolerance": tol}, "quad": cfg.get("quad")}
    return header, rows, {"n_points": len(grid)}, resolved


def cmd_simulate(cfg: dict, args):
    params = _kernel(cfg)
    block = _section(cfg, "simulate")
    sc = _sim(cfg, args.seed)
    n = _paths(block["n_paths"], args.quick)
    D = _domain(block["domain"], params.d)
    x0 = np.asarray(block["x0"], dtype=float)
    if x0.size != params.d:
        raise UsageError("simulate: x0 must have d coordinates")
    gamma = block.get("gamma")
    ball = block.get("ball")
    probes = Probes(gamma=gamma if gamma is not None else None,
                    ball_center=tuple(ball["center"]) if ball else None,
                    ball_radius=ball["radius"] if ball else 0.0)
    trace = int(block.get("trace_steps", 0))
    if block.get("dump_paths") and trace == 0:
        trace = 10_000
    batch = simulate(params, sc, x0, D, n, probes=probes, threads=args.threads,
                     start_index=int(block.get("start_index", 0)), trace_steps=trace)
    rows = []
    for i in range(batch.n):
        rows.append([batch.start_index + i, OUTCOME_NAMES[batch.outcome[i]], batch.exit_time[i],
                     int(batch.steps[i]), *batch.exit_position[i], batch.gamma_integral[i],
                     batch.ball_time[i]])
    header = ["path_id", "outcome", "exit_time", "steps"] + [f"exit_x_{k + 1}" for k in range(params.d)] \
        + ["occupation_integral", "ball_time"]
    results = {"outcome_fractions": batch.fractions(), "n_paths": n}
    functional = block.get("functional")
    if functional:
        target = _domain(block["target"], params.d) if "target" in block else None
        results["estimate"] = estimate_batch(batch, functional, target=target).to_dict()
    if block.get("dump_paths"):
        out = os.path.join(output_dir(cfg), block["dump_paths"])
        dump_paths(batch, out)
        results["paths_file"] = block["dump_paths"]
    resolved = {"kernel": params.to_dict(), "sim": sc.to_dict(), "simulate": {**block, "n_paths": n}}
    return header, rows, results, resolved


def cmd_green(cfg: dict, args):
    params = _kernel(cfg)
    block = cfg.get("green", {})
    sc = _sim(cfg, args.seed)
    n = _paths(block.get("n_paths", 100_000), args.quick)
    pairs = block.get("pairs")
    pairs = [(np.asarray(x, float), np.asarray(y, float)) for x, y in pairs] if pairs is not None \
        else default_green_pairs(params.d)
    if not pairs:
        raise UsageError("green: pairs is empty")
    frac = float(block.get("rho_fraction", 0.125))
    rows, ratios = [], []
    for k, (x, y) in enumerate(pairs):
        if x.size != params.d or y.size != params.d:
            raise UsageError("green: points must have d coordinates")
        rho = frac * float(np.linalg.norm(x - y))
        e = green_estimate(params, sc, x, y, rho=rho, n_paths=n, threads=args.threads,
                           start_index=k * n)
        f = green_bound_form(params, x, y)
        ratios.append(e.mean / f)
        rows.append([k, *x, *y, rho, e.mean, e.std_error, f, e.mean / f])
    d = params.d
    header = (["pair"] + [f"x_{i + 1}" for i in range(d)] + [f"y_{i + 1}" for i in range(d)]
              + ["rho", "green_estimate", "std_error", "bound_form", "ratio"])
    lo = min(ratios)
    results = {"sup_inf_ratio": max(ratios) / lo if lo > 0 else math.inf, "n_paths": n}
    resolved = {"kernel": params.to_dict(), "sim": sc.to_dict(),
                "green": {"pairs": [[x.tolist(), y.tolist()] for x, y in pairs], "n_paths": n,
                          "rho_fraction": frac}}
    return header, rows, results, resolved


def cmd_occupation(cfg: dict, args):
    params = _kernel(cfg)
    block = _section(cfg, "occupation")
    sc = _sim(cfg, args.seed)
    grid = list(block["x_d_grid"])
    if not grid:
        raise UsageError("occupation: x_d_grid is empty")
    n = _paths(block.get("n_paths", 40_000), args.quick)
    R = float(block.get("R", 1.0))
    D = _domain(block.get("domain", {"kind": "strip", "r": R}), params.d)
    gamma = float(block["gamma"])
    ests = occupation_estimates(params, sc, gamma, grid, D, n, args.threads)
    rows = [[x, e.mean, e.std_error, e.mean / x ** (params.alpha - 1)] for x, e in zip(grid, ests)]
    results = {"n_paths": n}
    if len(grid) >= 4:
        results["fit"] = fit_exponent(grid, [e.mean for e in ests]).to_dict()
        results["log_fit"] = occupation_log_fit(params, grid, ests, R).__dict__
    resolved = {"kernel": params.to_dict(), "sim": sc.to_dict(),
                "occupation": {**block, "n_paths": n, "R": R}}
    return header_occ(), rows, results, resolved


def header_occ():
    return ["x_d", "estimate", "std_error", "estimate_over_x_d^(alpha-1)"]


def cmd_verify(cfg: dict, args):
    from .verify import Profile, run_all

    s = cfg.get("sim", {})
    kw = {"threads": args.threads}
    if args.seed is not None:
        kw["seed"] = args.seed
    elif "seed" in s:
        kw["seed"] = s["seed"]
    for key in ("delta", "eta_abs"):
        if key in s:
            kw[key] = s[key]
    profile = Profile.quick(**kw) if args.quick else Profile(**kw)
    ids = cfg.get("verify", {}).get("criteria")
    echo = (lambda line: print(line, flush=True))  # noqa: E731
    results = run_all(profile, ids, echo=echo)
    rows = [[r.criterion_id, r.title, r.status, json.dumps(_clean(r.measured), sort_keys=True),
             json.dumps(_clean(r.budget), sort_keys=True)] for r in results]
    summary = []
    for r in results:
        d = r.to_dict()
        d.pop("runtime_s", None)
        summary.append(d)
    resolved = {"profile": {k: v for k, v in profile.__dict__.items() if k != "threads"},
                "criteria": [r.criterion_id for r in results]}
    return ["criterion_id", "title", "status", "measured", "budget"], rows, summary, resolved


HANDLERS = {"constant": cmd_constant, "pvop": cmd_pvop, "simulate": cmd_simulate,
            "green": cmd_green, "occupation": cmd_occupation, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="halfspace-jump-lab", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=False, help="JSON run configuration")
    ap.add_argument("--seed", type=int, default=None, help="override sim.seed")
    ap.add_argument("--threads", type=int, default=None, help="worker threads (default 1)")
    ap.add_argument("--quick", action="store_true", help="10x fewer paths")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.config:
        cfg = load_config(args.config)
    elif args.command == "verify":
        cfg = {}
    else:
        raise UsageError(f"{args.command} needs --config")
    if args.threads is None:
        args.threads = int(cfg.get("threads", 1))
    if args.threads < 1:
        raise UsageError("--threads must be >= 1")
    header, rows, results, resolved = HANDLERS[args.command](cfg, args)
    out = output_dir(cfg)
    write_csv(os.path.join(out, f"{args.command}.csv"), header, rows)
    write_summary(os.path.join(out, f"{args.command}.json"), args.command, resolved, results)
    if args.command == "verify":
        return 1 if any(r["status"] == "fail" for r in results) else 0
    return 0


def main(argv=None) -> int:
    try:
        code = run(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        code = 2
    except LabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        code = 1
    return code


if __name__ == "__main__":
    sys.exit(main())
