"""Fast invariant suite behind the ``selftest`` CLI subcommand.

Each check returns (name, passed, detail). The whole suite is meant to run
in seconds: it is a smoke test of the load-bearing identities, not the
full test suite.
"""

from __future__ import annotations

import numpy as np

from .backends import AffineParams, Condition, make_backend
from .baselines import FixedPointInversionConfig, invert_fixed_point
from .bound import affine_bound_exact, estimate_bound_mc
from .errors import InvalidArgumentError
from .flow import BlackBoxFlow, invert_naive
from .mixtures import GaussianMixture
from .optimizer import OptConfig, stopgrad_equivalence_check, zero_order_run
from .schedule import ddim_delta, make_cosine_ddim_schedule, make_uniform_schedule


def default_affine_flow(dim: int = 8, num_steps: int = 10) -> BlackBoxFlow:
    """Symmetric expansive affine chain whose effective map has a modest
    eigenvalue spread (roughly [1.4, 2])."""
    targets = np.linspace(1.4, 2.0, dim)
    rates = num_steps * (1.0 - targets ** (1.0 / num_steps))  # (1 - a/T)^T = target
    params = AffineParams(matrix=np.diag(rates), offset=np.zeros(dim))
    backend = make_backend("affine", dim)
    sched = make_uniform_schedule(num_steps, 1.0)
    return BlackBoxFlow(backend, sched, Condition("affine-default", params))


def default_mixture_flow(num_steps: int = 10) -> BlackBoxFlow:
    mix = GaussianMixture(
        weights=[0.4, 0.35, 0.25],
        means=[[1.5, 0.0], [-1.2, 1.0], [0.3, -1.4]],
        covariances=[np.eye(2) * 0.5, np.eye(2) * 0.45, np.eye(2) * 0.55],
    )
    backend = make_backend("gaussian-mixture", 2)
    sched = make_uniform_schedule(num_steps, 1.0)
    return BlackBoxFlow(backend, sched, Condition("src", mix))


def affine_effective_map(flow: BlackBoxFlow) -> np.ndarray:
    a = flow.condition.payload.matrix
    dt = flow.schedule.delta_t
    m = np.eye(flow.dim)
    step = np.eye(flow.dim) + a * dt
    for _ in range(flow.num_steps):
        m = step @ m
    return m


def run_selftest(ddim_schedule_factory=make_cosine_ddim_schedule, seed: int = 0):
    """Execute the invariant checks; returns a list of result triples."""
    rng = np.random.default_rng(seed)
    results = []

    def check(name, fn):
        try:
            detail = fn()
            results.append((name, True, detail or ""))
        except Exception as err:  # noqa: BLE001 - report, don't crash the suite
            results.append((name, False, f"{type(err).__name__}: {err}"))

    def telescoping():
        for t in (5, 20, 50):
            sched = ddim_schedule_factory(t)
            delta = ddim_delta(sched)
            closed = 1.0 / np.sqrt(sched.alpha_bar[-1])
            if abs(delta - closed) > 1e-12 * closed:
                raise AssertionError("product/closed form disagree")
        return "T in {5, 20, 50}"

    def affine_tightness():
        flow = default_affine_flow()
        exact = affine_bound_exact(affine_effective_map(flow))
        est = estimate_bound_mc(flow, num_realizations=1700, seed=seed)
        if not exact <= est.bound <= 1.05 * exact:
            raise AssertionError(f"estimate {est.bound:.4f} vs oracle {exact:.4f}")
        return f"oracle {exact:.4f}, estimate {est.bound:.4f}"

    def stopgrad():
        for flow in (default_affine_flow(dim=4), default_mixture_flow()):
            z = rng.standard_normal(flow.dim)
            y = rng.standard_normal(flow.dim)
            dev = stopgrad_equivalence_check(flow, z, y)
            if dev > 1e-6:
                raise AssertionError(f"deviation {dev:.2e}")
        return "affine and mixture"

    def uniqueness():
        flow = default_mixture_flow()
        est = estimate_bound_mc(flow, num_realizations=500, seed=seed)
        cfg = OptConfig(est.suggested_eta, 5000, stop_tol=1e-10)
        z_true = rng.standard_normal(2)
        y = flow.run(z_true)
        finals = []
        for _ in range(2):
            trace = zero_order_run(flow.spawn(), y, cfg, rng.standard_normal(2))
            finals.append(trace.final_iterate)
        gap = float(np.linalg.norm(finals[0] - finals[1]))
        if gap > 1e-6:
            raise AssertionError(f"iterates {gap:.2e} apart")
        return f"gap {gap:.1e}"

    def fixed_point_degenerate():
        flow = default_mixture_flow()
        z0 = rng.standard_normal(2)
        a = invert_naive(flow.spawn(), z0)
        b = invert_fixed_point(flow.spawn(), z0, FixedPointInversionConfig(1))
        if not np.array_equal(a, b):
            raise AssertionError("refine_iters=1 differs from naive inversion")
        return ""

    check("ddim-telescoping", telescoping)
    check("affine-bound-tightness-d8", affine_tightness)
    check("stop-grad-equivalence", stopgrad)
    check("fixed-point-uniqueness", uniqueness)
    check("fixed-point-refine-degenerate", fixed_point_degenerate)
    return results
