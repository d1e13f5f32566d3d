"""Atomic CSV/JSON output helpers and trace serialization.

Every file is written to a temporary sibling and renamed into place, so an
interrupted run never leaves a partial artifact. CSV files open with a
schema comment line ``# zoflow-csv v1 kind=<kind>`` that downstream
consumers key on.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

CSV_SCHEMA_VERSION = 1


def atomic_write_text(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_csv(path, kind: str, header: Sequence[str], rows: Iterable[Sequence]):
    buf = io.StringIO()
    buf.write(f"# zoflow-csv v{CSV_SCHEMA_VERSION} kind={kind}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    atomic_write_text(path, buf.getvalue())


def trace_rows(trace, include_state: bool = False):
    """Per-iteration rows (iteration, residual[, z_0, z_1, ...])."""
    rows = []
    for i, res in enumerate(trace.residual_norms):
        row = [i, repr(res)]
        if include_state:
            row.extend(repr(x) for x in trace.iterates[i])
        rows.append(row)
    return rows


def write_trace_csv(path, trace, include_state: bool = False):
    header = ["iteration", "residual"]
    if include_state:
        header.extend(f"z{j}" for j in range(len(trace.iterates[0])))
    write_csv(path, "trace", header, trace_rows(trace, include_state))


def trace_json_dict(trace, config=None) -> dict:
    out = {
        "iterates": [list(map(float, z)) for z in trace.iterates],
        "outputs": [list(map(float, z)) for z in trace.outputs],
        "residual_norms": list(map(float, trace.residual_norms)),
        "nfe_total": trace.nfe_total,
        "stopped_early_at": trace.stopped_early_at,
    }
    if config is not None:
        out["config"] = {
            "eta": config.eta,
            "max_iters": config.max_iters,
            "stop_tol": config.stop_tol,
            "delta_scale": config.delta_scale,
        }
    return out
