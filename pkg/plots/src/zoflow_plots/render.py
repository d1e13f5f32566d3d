"""Render figures from zoflow CSV artifacts.

Strictly a consumer of the stable CSV contract: each input file opens with
a schema comment line ``# zoflow-csv v1 kind=<kind>``. Three plot kinds are
supported:

* ``convergence``: residual vs. iteration, one curve per (eta, seed), log
  residual axis;
* ``nfe-curve``: mean RMSE vs. evaluation budget, one curve per method,
  with error bars and an optional dashed codec-floor line;
* ``alpha-curve``: minimum pair ratio vs. interpolation coefficient.

Invoked as ``zoflow-plot <kind> <csv...> --out fig.png`` or with a JSON
spec file via ``--spec``. Inputs are never modified.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SCHEMA = 3

KINDS = ("convergence", "nfe-curve", "alpha-curve")

# required columns per plot kind; the CSV may carry more
REQUIRED_COLUMNS = {
    "convergence": ("eta", "seed", "iteration", "residual"),
    "nfe-curve": ("method", "nfe", "rmse_mean", "rmse_stderr"),
    "alpha-curve": ("alpha", "min_ratio"),
}

SCHEMA_PREFIX = "# zoflow-csv v1 "


class SchemaError(Exception):
    """Input CSV does not match the documented contract."""


@dataclass(frozen=True)
class PlotSpec:
    kind: str
    csv_paths: tuple
    out_path: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown plot kind {self.kind!r}; expected one of {KINDS}")
        if not self.csv_paths:
            raise SchemaError("spec lists no input CSVs")


def load_table(path, expected_kind: str | None = None):
    """Parse one artifact CSV into (declared_kind, list-of-dict rows).

    Raises SchemaError when the header comment is absent, the declared kind
    disagrees with ``expected_kind``, or a required column is missing.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        first = fh.readline().rstrip("\n")
        if not first.startswith(SCHEMA_PREFIX) or "kind=" not in first:
            raise SchemaError(f"{path}: missing schema comment line")
        declared = first.split("kind=", 1)[1].strip()
        rows = list(csv.DictReader(fh))
    if expected_kind is not None:
        required = REQUIRED_COLUMNS[expected_kind]
        have = set(rows[0].keys()) if rows else set()
        missing = [c for c in required if c not in have]
        if missing:
            raise SchemaError(f"{path}: missing column {missing[0]!r} "
                              f"(required for {expected_kind})")
    return declared, rows


def _floats(rows, column):
    return np.array([float(r[column]) for r in rows])


def _plot_convergence(ax, rows):
    curves = {}
    for r in rows:
        curves.setdefault((r["eta"], r["seed"]), []).append(
            (int(r["iteration"]), float(r["residual"]))
        )
    for (eta, seed), pts in sorted(curves.items()):
        pts.sort()
        it = [p[0] for p in pts]
        res = [max(p[1], 1e-300) for p in pts]  # log axis cannot take 0
        ax.semilogy(it, res, marker=".", markersize=3,
                    label=f"eta={float(eta):.4g}, seed={seed}")
    ax.set_xlabel("iteration")
    ax.set_ylabel("residual")
    _maybe_floor_line(ax, rows)
    ax.legend(fontsize=7)


def _plot_nfe_curve(ax, rows):
    by_method = {}
    for r in rows:
        by_method.setdefault(r["method"], []).append(r)
    for method, group in sorted(by_method.items()):
        group.sort(key=lambda r: float(r["nfe"]))
        nfe = _floats(group, "nfe")
        mean = _floats(group, "rmse_mean")
        err = _floats(group, "rmse_stderr")
        ax.errorbar(nfe, mean, yerr=err, marker="o", markersize=4,
                    capsize=3, label=method)
    ax.set_yscale("log")
    ax.set_xlabel("function evaluations")
    ax.set_ylabel("RMSE")
    _maybe_floor_line(ax, rows)
    ax.legend(fontsize=8)


def _maybe_floor_line(ax, rows):
    if rows and "codec_floor" in rows[0] and rows[0]["codec_floor"] not in ("", None):
        floor = float(rows[0]["codec_floor"])
        ax.axhline(floor, linestyle="--", color="gray", linewidth=1,
                   label="codec floor")


def _plot_alpha_curve(ax, rows):
    rows = sorted(rows, key=lambda r: float(r["alpha"]))
    ax.plot(_floats(rows, "alpha"), _floats(rows, "min_ratio"), marker="o")
    ax.set_xlabel("interpolation coefficient alpha")
    ax.set_ylabel("minimum pair ratio")


_PLOTTERS = {
    "convergence": _plot_convergence,
    "nfe-curve": _plot_nfe_curve,
    "alpha-curve": _plot_alpha_curve,
}


def render(spec: PlotSpec) -> Path:
    """Render one figure; returns the written image path."""
    all_rows = []
    for p in spec.csv_paths:
        _, rows = load_table(p, expected_kind=spec.kind)
        all_rows.extend(rows)
    fig, ax = plt.subplots(figsize=(6, 4), dpi=120)
    try:
        _PLOTTERS[spec.kind](ax, all_rows)
        ax.set_title(spec.kind)
        fig.tight_layout()
        out = Path(spec.out_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out)
    finally:
        plt.close(fig)
    return out


def specs_from_json(path) -> list:
    """Load one spec or a list of specs from a JSON file."""
    raw = json.loads(Path(path).read_text())
    entries = raw if isinstance(raw, list) else [raw]
    specs = []
    for e in entries:
        try:
            specs.append(PlotSpec(kind=e["kind"], csv_paths=tuple(e["csv"]),
                                  out_path=e["out"]))
        except KeyError as err:
            raise SchemaError(f"spec entry missing key {err}") from err
    return specs


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="zoflow-plot",
                                     description=__doc__.split("\n\n")[0])
    parser.add_argument("kind", nargs="?", choices=KINDS, help="plot kind")
    parser.add_argument("csv", nargs="*", help="input CSV files")
    parser.add_argument("--out", default=None, help="output image path")
    parser.add_argument("--spec", default=None, help="JSON spec file")
    args = parser.parse_args(argv)

    try:
        if args.spec is not None:
            specs = specs_from_json(args.spec)
        else:
            if args.kind is None or not args.csv or args.out is None:
                parser.print_usage(sys.stderr)
                return EXIT_USAGE
            specs = [PlotSpec(kind=args.kind, csv_paths=tuple(args.csv),
                              out_path=args.out)]
        for spec in specs:
            out = render(spec)
            print(out)
    except FileNotFoundError as err:
        print(f"input not found: {err}", file=sys.stderr)
        return EXIT_USAGE
    except SchemaError as err:
        print(f"schema error: {err}", file=sys.stderr)
        return EXIT_SCHEMA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
