"""Command line front end.

``nsbesov {norms|stationary|evolve|verify|stability} [--config FILE] [overrides]``

Exit codes: 0 success, 2 precondition violation, 3 numerical failure,
4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .errors import NSBesovError, PreconditionError
from .experiments import (
    SUITES,
    ExperimentConfig,
    SuiteOptions,
    emit_report,
    geometric_times,
    render_report,
    run_stability_experiment,
    run_verification_suites,
)
from .norms import BesovIndex, besov, besov_norm, critical_s, lp_norm, weak_lp_norm
from .perturbed import Background
from .solvers import solve_ns_direct, solve_perturbation_picard, solve_stationary
from .spectral import VectorField, load_snapshot, save_snapshot


def _float(text: str) -> float:
    return math.inf if text.lower() in ("inf", "infinity") else float(text)


def _load_config(args) -> ExperimentConfig:
    base = ExperimentConfig.from_json(args.config).to_dict() if args.config else {}
    overrides = {k: v for k, v in (getattr(args, "set", None) or [])}
    for key in ("N", "L", "p", "s", "tau_H", "tau_L", "t_min", "t_max", "dt", "epsilon", "method"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    return ExperimentConfig.from_dict({**base, **overrides})


def _parse_set(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError("expected KEY=VALUE")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


# ---------------------------------------------------------------------------
# subcommands


def cmd_norms(args) -> int:
    f = load_snapshot(args.input)
    rep = besov_norm(f, BesovIndex(args.s, args.p, args.q))
    weak = weak_lp_norm(f, args.weak_lp) if args.weak_lp else None
    if args.report == "csv":
        lines = ["j,block_lp,weighted"]
        lines += [f"{j},{lp!r},{w!r}" for (j, w), lp in zip(rep.per_block, rep.block_lp)]
        lines.append(f"total,,{rep.value!r}")
        if weak is not None:
            lines.append(f"weak_lp,{args.weak_lp!r},{weak!r}")
        text = "\n".join(lines) + "\n"
    else:
        out = {
            "s": args.s,
            "p": args.p,
            "q": None if math.isinf(args.q) else args.q,
            "value": rep.value,
            "per_block": [{"j": j, "block_lp": lp, "weighted": w} for (j, w), lp in zip(rep.per_block, rep.block_lp)],
            "warnings": rep.warnings,
        }
        if weak is not None:
            out["weak_lp"] = {"p": args.weak_lp, "value": weak}
        text = json.dumps(out, indent=2) + "\n"
    _write(text, args.out)
    return 0


def cmd_stationary(args) -> int:
    f = load_snapshot(args.force)
    if not isinstance(f, VectorField):
        raise PreconditionError("forcing snapshot must hold a vector field")
    res = solve_stationary(f, args.p, s_extra=args.s, tol=args.tol, max_iter=args.max_iter)
    report = {
        "iterations": res.iterations,
        "residual": res.residual,
        "norm_crit": res.norm_crit,
        "norm_extra": res.norm_extra,
        "extra_ratio": res.extra_ratio,
        "contraction_factors": res.contraction_factors,
    }
    if args.out:
        save_snapshot(res.U, args.out)
    _write(json.dumps(report, indent=2) + "\n", args.report)
    return 0


def cmd_evolve(args) -> int:
    a = load_snapshot(args.initial)
    f = load_snapshot(args.force) if args.force else None
    grid = a.grid
    if args.background == "zero":
        U = VectorField.zeros(grid)
    elif args.background == "solve":
        if f is None:
            raise PreconditionError("--background solve needs --force")
        U = solve_stationary(f, args.p).U
    else:
        U = load_snapshot(args.background)
    ts = geometric_times(args.T / 2 ** ((args.samples - 1) / 2), args.T) if args.samples > 1 else np.array([args.T])
    if args.method == "direct":
        path = solve_ns_direct(a, f, args.T, args.dt, ts)
        states = [u - U for u in path.states]
    else:
        path = solve_perturbation_picard(a - U, Background(U), args.T, ts, dt=args.dt)
        states = path.states
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    for i, st in enumerate(path.states):
        save_snapshot(st, f"{prefix}_{i:04d}.nsbf")
    n, p = grid.n, args.p
    cols = ["t", "besov_crit", "l2"]
    rows = []
    for t, d in zip(path.times, states):
        rows.append([t, besov(d, critical_s(n, p), p), lp_norm(d, 2)])
    text = ",".join(cols) + "\n" + "".join(",".join(repr(float(v)) for v in r) + "\n" for r in rows)
    Path(f"{prefix}_norms.csv").write_text(text)
    return 0


def cmd_verify(args) -> int:
    cfg = _load_config(args)
    U = None if args.U in (None, "zero") else load_snapshot(args.U)
    if U is not None and not isinstance(U, VectorField):
        raise PreconditionError("--U must hold a vector field")
    if args.U == "zero":
        cfg = cfg.replace(forcing_amplitude=0.0)
    opts = SuiteOptions(U=U, s=args.suite_s, tau=args.tau)
    results = run_verification_suites(args.suite or ["all"], cfg, opts)
    out = Path(args.out or cfg.output_dir)
    for r in results:
        emit_report(r, "csv", out / f"{r.name}.csv")
    emit_report(results, "json", out / "summary.json")
    print(render_report(results, "json"), end="")
    return 0


def cmd_stability(args) -> int:
    cfg = _load_config(args)
    rep = run_stability_experiment(cfg)
    out = Path(args.out or cfg.output_dir)
    emit_report(rep, "csv", out / "stability.csv")
    emit_report(rep, "json", out / "summary.json")
    print(render_report(rep, "json"), end="")
    return 0


def _write(text: str, path) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# parser


def _add_config(p: argparse.ArgumentParser, with_s: bool = True) -> None:
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--set", action="append", type=_parse_set, metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--N", type=int)
    p.add_argument("--L", type=float)
    p.add_argument("--p", type=float)
    if with_s:
        p.add_argument("--s", type=float)
    p.add_argument("--tau-H", dest="tau_H", type=float)
    p.add_argument("--tau-L", dest="tau_L", type=float)
    p.add_argument("--t-min", dest="t_min", type=float)
    p.add_argument("--t-max", dest="t_max", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nsbesov", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("norms", help="Besov and weak-L^p norms of a snapshot")
    p.add_argument("--config", help="ignored; accepted for uniformity")
    p.add_argument("--input", required=True)
    p.add_argument("--s", type=float, default=0.0)
    p.add_argument("--p", type=_float, default=2.0)
    p.add_argument("--q", type=_float, default=math.inf)
    p.add_argument("--weak-lp", dest="weak_lp", type=float)
    p.add_argument("--report", choices=("csv", "json"), default="json")
    p.add_argument("--out")
    p.set_defaults(func=cmd_norms)

    p = sub.add_parser("stationary", help="stationary Picard iteration")
    p.add_argument("--config", help="ignored; accepted for uniformity")
    p.add_argument("--force", required=True)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--s", type=float, help="extra smoothness index in (0, 1)")
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=100)
    p.add_argument("--out", help="snapshot path for U")
    p.add_argument("--report", help="report path (default stdout)")
    p.set_defaults(func=cmd_stationary)

    p = sub.add_parser("evolve", help="time evolution from a snapshot")
    p.add_argument("--config", help="ignored; accepted for uniformity")
    p.add_argument("--initial", required=True)
    p.add_argument("--force")
    p.add_argument("--background", default="zero", help="snapshot path, 'solve' or 'zero'")
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--dt", type=float, default=1e-2)
    p.add_argument("--samples", type=int, default=8)
    p.add_argument("--method", choices=("picard", "direct"), default="direct")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--out-prefix", dest="out_prefix", default="evolve")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("verify", help="run verification suites")
    _add_config(p, with_s=False)
    p.add_argument("--suite", action="append", choices=SUITES + ("all",))
    p.add_argument("--U", help="background snapshot or 'zero' (default: from the config forcing)")
    p.add_argument("--s", dest="suite_s", type=float, help="smoothness index for the sweep suites")
    p.add_argument("--tau", type=float, help="gain exponent for the sweep suites")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("stability", help="nonlinear stability experiment")
    _add_config(p)
    p.add_argument("--method", choices=("picard", "direct"))
    p.set_defaults(func=cmd_stability)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NSBesovError as exc:
        print(f"nsbesov: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
