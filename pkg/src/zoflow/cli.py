"""Command-line entry point.

Subcommands map configs onto the library: ``bound`` estimates the step-size
bound, ``invert``/``edit``/``sweep`` run the corresponding experiments,
``run`` dispatches on the config's ``task`` field, and ``selftest``
executes the fast invariant suite. All artifacts are CSV/JSON written
atomically; figure rendering lives in a separate consumer package.

Exit codes: 0 success, 2 usage, 3 config error, 4 divergence,
5 bound assumption violated.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import configfile
from .bound import estimate_bound_mc
from .errors import AssumptionViolatedError, ConfigError, DivergenceError, InvalidArgumentError
from .experiments import (
    run_editing_experiment,
    run_inversion_experiment,
    run_step_size_sweep,
    summarize,
)
from .io_utils import write_csv, write_json, write_trace_csv
from .selftest import run_selftest

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_DIVERGENCE = 4
EXIT_ASSUMPTION = 5

OUT_ROOT_ENV = "ZOFLOW_OUT_ROOT"


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="zoflow", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("run", "run the task declared in the config"),
        ("invert", "reconstruction experiment (forces task=inversion)"),
        ("edit", "direct-editing experiment (forces task=direct-edit)"),
        ("sweep", "step-size sweep (forces task=sweep)"),
        ("bound", "estimate the step-size bound"),
        ("selftest", "fast invariant suite"),
    ]:
        sp = sub.add_parser(name, help=helptext)
        if name != "selftest":
            sp.add_argument("--config", required=True, help="path to a YAML config")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="override config seeds")
        sp.add_argument("--jobs", type=int, default=1, help="parallel workers per seed")
        sp.add_argument("--quiet", action="store_true")
    return p


def _out_dir(args) -> Path:
    root = args.out or os.environ.get(OUT_ROOT_ENV) or "zoflow-out"
    out = Path(root)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _say(args, msg: str):
    if not args.quiet:
        print(msg)


def _seeds(raw: dict, args) -> list:
    if args.seed is not None:
        return [args.seed]
    seeds = raw.get("seeds", [0])
    return [int(s) for s in seeds]


def _fan_out(fn, seeds, jobs):
    """Run a per-seed callable across workers; merge preserving seed order."""
    if jobs <= 1 or len(seeds) <= 1:
        chunks = [fn(s) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(fn, seeds))
    merged = []
    for c in chunks:
        merged.extend(c)
    return merged


def _resolve_etas(raw, flow, entries):
    """Sweep entries: numbers pass through, '<k>x' scales the estimated bound."""
    needs_bound = any(isinstance(e, str) for e in entries)
    bound = None
    if needs_bound:
        est = estimate_bound_mc(flow.spawn(), **configfile.bound_kwargs(raw))
        bound = est.bound
    out = []
    for e in entries:
        if isinstance(e, str):
            if not e.endswith("x"):
                raise ConfigError(f"bad eta entry {e!r}; use a number or '<factor>x'")
            out.append(float(e[:-1]) * bound)
        else:
            out.append(float(e))
    return out


def cmd_bound(args) -> int:
    raw = configfile.load_config(args.config)
    flow = configfile.build_flow(raw)
    out = _out_dir(args)
    est = estimate_bound_mc(flow, **configfile.bound_kwargs(raw, args.seed))
    write_json(out / "bound.json", est.to_json_dict())
    write_csv(
        out / "alpha_curve.csv", "alpha-curve", ["alpha", "min_ratio"],
        [(f"{a:g}", repr(m)) for a, m in sorted(est.per_alpha_min.items())],
    )
    _say(args, f"bound: eta < {est.bound:.6g} (suggested eta {est.suggested_eta:.6g}, "
               f"beta_min {est.beta_min:.4f})")
    return EXIT_OK


def cmd_invert(args, raw) -> int:
    flow = configfile.build_flow(raw)
    out = _out_dir(args)
    codec = configfile.build_codec(raw, flow.dim)
    methods = raw.get("methods", ["zero-order", "naive-ode"])
    iters = [int(n) for n in raw.get("iters", [10])]
    refine = [int(r) for r in raw.get("refine_iters", [1, 2, 3, 4])]
    seeds = _seeds(raw, args)
    bk = configfile.bound_kwargs(raw)

    def one_seed(seed):
        return run_inversion_experiment(
            flow, methods, iters, [seed], eta=raw.get("eta", "auto"),
            init=raw.get("init", "naive-ode"), refine_iters=refine, codec=codec,
            bound_kwargs=bk, stop_tol=raw.get("stop_tol"),
        )

    rows = _fan_out(one_seed, seeds, args.jobs)
    header = ["method", "seed", "n_iters", "eta", "nfe", "rmse"]
    if codec is not None:
        header += ["rmse_to_precodec", "codec_floor"]
    write_csv(out / "inversion_rows.csv", "inversion-rows", header,
              [[r.get(h, "") for h in header] for r in rows])
    summary = summarize(rows)
    write_json(out / "inversion_summary.json", summary)
    curve_header = ["method", "nfe", "rmse_mean", "rmse_stderr"]
    curve_rows = [
        [s["method"], s["nfe_mean"], repr(s["rmse_mean"]), repr(s["rmse_stderr"])]
        for s in summary
    ]
    if codec is not None:
        curve_header.append("codec_floor")
        floor = float(np.mean([r["codec_floor"] for r in rows]))
        for row in curve_rows:
            row.append(repr(floor))
    write_csv(out / "nfe_curve.csv", "nfe-curve", curve_header, curve_rows)
    for s in summary:
        _say(args, f"{s['method']:<12} N={s['n_iters']} nfe={s['nfe_mean']:.0f} "
                   f"rmse={s['rmse_mean']:.3e} +/- {s['rmse_stderr']:.1e}")
    return EXIT_OK


def cmd_edit(args, raw) -> int:
    flow = configfile.build_flow(raw)
    target = configfile.build_target_condition(raw)
    if target is None:
        raise ConfigError("direct-edit task needs a target_condition")
    out = _out_dir(args)
    iters = [int(n) for n in raw.get("iters", [2, 3, 4, 5])]
    seeds = _seeds(raw, args)
    bk = configfile.bound_kwargs(raw)

    def one_seed(seed):
        return run_editing_experiment(flow, target, iters, [seed],
                                      eta=raw.get("eta", "auto"), bound_kwargs=bk)

    rows = _fan_out(one_seed, seeds, args.jobs)
    header = ["method", "seed", "n_iters", "eta", "nfe",
              "source_similarity", "target_adherence"]
    write_csv(out / "edit_rows.csv", "edit-rows", header,
              [[r[h] for h in header] for r in rows])
    summary = summarize(rows, value_key="source_similarity")
    write_json(out / "edit_summary.json", summary)
    for s in summary:
        _say(args, f"N={s['n_iters']} source_similarity="
                   f"{s['source_similarity_mean']:.4f} nfe={s['nfe_mean']:.0f}")
    return EXIT_OK


def cmd_sweep(args, raw) -> int:
    flow = configfile.build_flow(raw)
    out = _out_dir(args)
    entries = raw.get("eta_list")
    if not entries:
        raise ConfigError("sweep task needs eta_list")
    etas = _resolve_etas(raw, flow, entries)
    seeds = _seeds(raw, args)
    n_iters = int(raw.get("iters", [100])[0] if isinstance(raw.get("iters"), list)
                  else raw.get("iters", 100))
    curve_rows, classes = run_step_size_sweep(
        flow, etas, n_iters, seeds, tol=float(raw.get("stop_tol") or 1e-6),
        init=raw.get("init", "naive-ode"),
    )
    write_csv(out / "sweep_curves.csv", "convergence",
              ["eta", "seed", "iteration", "residual"],
              [(repr(e), s, i, repr(r)) for e, s, i, r in curve_rows])
    write_json(out / "sweep_classification.json", classes)
    for c in classes:
        _say(args, f"eta={c['eta']:.6g} seed={c['seed']}: {c['classification']} "
                   f"(final residual {c['final_residual']:.3e})")
    return EXIT_OK


def cmd_selftest(args) -> int:
    results = run_selftest()
    ok = True
    for name, passed, detail in results:
        status = "PASS" if passed else "FAIL"
        suffix = f" ({detail})" if detail else ""
        _say(args, f"[{status}] {name}{suffix}")
        ok = ok and passed
    if args.out is not None:
        _write_sample_artifacts(args)
    return EXIT_OK if ok else 1


def _write_sample_artifacts(args):
    """Emit one CSV of each documented kind so downstream renderers have
    known-good inputs to exercise."""
    from .selftest import affine_effective_map, default_affine_flow
    from .bound import affine_bound_exact

    out = _out_dir(args)
    flow = default_affine_flow(dim=2)
    exact = affine_bound_exact(affine_effective_map(flow))
    curve_rows, classes = run_step_size_sweep(
        flow, [0.9 * exact, 5.0 * exact], 60, [0], tol=1e-6)
    write_csv(out / "sweep_curves.csv", "convergence",
              ["eta", "seed", "iteration", "residual"],
              [(repr(e), s, i, repr(r)) for e, s, i, r in curve_rows])
    write_json(out / "sweep_classification.json", classes)

    rows = run_inversion_experiment(
        flow, ["zero-order", "naive-ode"], [2, 5, 10], [0, 1],
        eta=0.9 * exact)
    summary = summarize(rows)
    write_csv(out / "nfe_curve.csv", "nfe-curve",
              ["method", "nfe", "rmse_mean", "rmse_stderr"],
              [[s["method"], s["nfe_mean"], repr(s["rmse_mean"]),
                repr(s["rmse_stderr"])] for s in summary])

    est = estimate_bound_mc(flow, num_realizations=200, seed=0)
    write_csv(out / "alpha_curve.csv", "alpha-curve", ["alpha", "min_ratio"],
              [(f"{a:g}", repr(m)) for a, m in sorted(est.per_alpha_min.items())])


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    cfg = getattr(args, "config", None)
    if cfg is not None and not Path(cfg).exists():
        print(f"usage error: config file not found: {cfg}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "selftest":
            return cmd_selftest(args)
        if args.command == "bound":
            return cmd_bound(args)
        raw = configfile.load_config(args.config)
        task = {"invert": "inversion", "edit": "direct-edit", "sweep": "sweep"}.get(
            args.command, raw.get("task", "inversion"))
        if args.command == "run" and task == "bound":
            return cmd_bound(args)
        if task == "inversion":
            return cmd_invert(args, raw)
        if task == "direct-edit":
            return cmd_edit(args, raw)
        if task == "sweep":
            return cmd_sweep(args, raw)
        raise ConfigError(f"unknown task {task!r}")
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except InvalidArgumentError as err:
        print(f"invalid argument: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as err:
        print(f"divergence: {err}", file=sys.stderr)
        if err.partial_trace is not None and args.out is not None:
            write_trace_csv(Path(args.out) / "partial_trace.csv", err.partial_trace)
        return EXIT_DIVERGENCE
    except AssumptionViolatedError as err:
        print(f"bound assumption violated: {err}", file=sys.stderr)
        return EXIT_ASSUMPTION


if __name__ == "__main__":
    sys.exit(main())
