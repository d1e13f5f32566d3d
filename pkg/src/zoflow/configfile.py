"""Declarative YAML config loading.

Schema (version 1), top-level keys:

    schema_version: 1                 # required
    backend: {kind, dim}              # affine | gaussian-mixture | ddim-noise-pred
    condition:                        # payload for the backend kind
      tag: src
      mixture: {weights, means, covariances}
      # or: affine: {matrix, offset}
    schedule: {num_steps, t_start}    # t_start optional (default 1.0)
    ddim: {num_steps}                 # used instead of schedule for ddim backends
    task: inversion | direct-edit | sweep | bound
    target_condition: {...}           # direct-edit only
    methods: [zero-order, naive-ode, fixed-point, jacobian-gd]
    eta: auto | <float>
    eta_list: [<float>, ...]          # sweep only; "auto" entries scale the bound
    iters: [<int>, ...]
    refine_iters: [<int>, ...]
    init: random | naive-ode
    seeds: [<int>, ...]
    stop_tol: <float>                 # optional
    codec: {keep_dim, seed}           # optional lossy codec
    bound: {num_realizations, alpha_grid, seed}

Unknown top-level keys are rejected so typos fail loudly.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .backends import AffineParams, Condition, make_backend
from .codec import make_random_codec
from .errors import ConfigError
from .flow import BlackBoxFlow
from .mixtures import GaussianMixture
from .schedule import make_cosine_ddim_schedule, make_uniform_schedule

SCHEMA_VERSION = 1

_TOP_KEYS = {
    "schema_version", "backend", "condition", "schedule", "ddim", "task",
    "target_condition", "methods", "eta", "eta_list", "iters", "refine_iters",
    "init", "seeds", "stop_tol", "codec", "bound",
}


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as err:
        raise ConfigError(f"config does not parse: {err}") from err
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(
            f"unsupported schema_version {raw.get('schema_version')!r}; expected {SCHEMA_VERSION}"
        )
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return raw


def bundled_config_path(name: str) -> Path:
    """Path of a config shipped with the package (no .yaml suffix needed)."""
    if not name.endswith(".yaml"):
        name += ".yaml"
    ref = resources.files("zoflow.configs") / name
    with resources.as_file(ref) as p:
        return Path(p)


def _build_condition(spec: dict, kind: str) -> Condition:
    if not isinstance(spec, dict):
        raise ConfigError("condition must be a mapping")
    tag = spec.get("tag", "default")
    try:
        if "mixture" in spec:
            m = spec["mixture"]
            payload = GaussianMixture(
                weights=np.asarray(m["weights"], dtype=float),
                means=np.asarray(m["means"], dtype=float),
                covariances=np.asarray(m["covariances"], dtype=float),
            )
        elif "affine" in spec:
            a = spec["affine"]
            payload = AffineParams(
                matrix=np.asarray(a["matrix"], dtype=float),
                offset=np.asarray(a["offset"], dtype=float),
            )
        else:
            raise ConfigError("condition needs a 'mixture' or 'affine' payload")
    except (KeyError, ValueError) as err:
        raise ConfigError(f"invalid condition payload: {err}") from err
    if kind == "affine" and "affine" not in spec:
        raise ConfigError("affine backend needs an affine condition payload")
    if kind in ("gaussian-mixture", "ddim-noise-pred") and "mixture" not in spec:
        raise ConfigError(f"{kind} backend needs a mixture condition payload")
    return Condition(tag=tag, payload=payload)


def build_flow(raw: dict) -> BlackBoxFlow:
    try:
        bk = raw["backend"]
        kind, dim = bk["kind"], int(bk["dim"])
    except (KeyError, TypeError) as err:
        raise ConfigError(f"invalid backend spec: {err}") from err
    try:
        backend = make_backend(kind, dim)
    except ValueError as err:
        raise ConfigError(str(err)) from err
    condition = _build_condition(raw.get("condition", {}), kind)
    try:
        if kind == "ddim-noise-pred":
            dd = raw.get("ddim", {})
            schedule = make_cosine_ddim_schedule(int(dd.get("num_steps", 50)))
        else:
            sc = raw.get("schedule", {})
            schedule = make_uniform_schedule(
                int(sc.get("num_steps", 10)), float(sc.get("t_start", 1.0))
            )
        return BlackBoxFlow(backend, schedule, condition)
    except ValueError as err:
        raise ConfigError(str(err)) from err


def build_target_condition(raw: dict):
    spec = raw.get("target_condition")
    if spec is None:
        return None
    return _build_condition(spec, raw["backend"]["kind"])


def build_codec(raw: dict, dim: int):
    spec = raw.get("codec")
    if spec is None:
        return None
    try:
        return make_random_codec(
            dim, int(spec["keep_dim"]), np.random.default_rng(int(spec.get("seed", 0)))
        )
    except (KeyError, ValueError) as err:
        raise ConfigError(f"invalid codec spec: {err}") from err


def bound_kwargs(raw: dict, seed_override=None) -> dict:
    spec = raw.get("bound", {}) or {}
    out = {}
    if "num_realizations" in spec:
        out["num_realizations"] = int(spec["num_realizations"])
    if "alpha_grid" in spec:
        out["alpha_grid"] = [float(a) for a in spec["alpha_grid"]]
    out["seed"] = int(seed_override if seed_override is not None else spec.get("seed", 0))
    return out
