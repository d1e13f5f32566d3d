"""Comparison methods: per-step fixed-point inversion refinement and a
finite-difference whole-chain gradient-descent oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, InvalidArgumentError
from .flow import BlackBoxFlow
from .optimizer import DIVERGENCE_FACTOR, OptTrace


@dataclass(frozen=True)
class FixedPointInversionConfig:
    refine_iters: int = 1

    def __post_init__(self):
        if self.refine_iters < 1:
            raise InvalidArgumentError("refine_iters must be at least 1")


@dataclass(frozen=True)
class JacobianGDConfig:
    """Finite-difference gradient descent through the whole chain.

    The gradient costs 2d forward passes per iteration, so the dimension is
    capped: this is a correctness oracle, not a practical method.
    """

    eta: float
    max_iters: int
    fd_step: float = 1e-5
    stop_tol: float | None = None

    MAX_DIM = 8

    def __post_init__(self):
        if self.eta <= 0 or self.max_iters < 1 or self.fd_step <= 0:
            raise InvalidArgumentError("eta, max_iters and fd_step must be positive")


def invert_fixed_point(flow: BlackBoxFlow, z0, cfg: FixedPointInversionConfig):
    """Invert the chain one step at a time, refining each implicit step.

    The first inner evaluation is the naive step (field at the known lower
    state); subsequent ones re-evaluate the field at the current upper
    estimate, the fixed-point iteration for the implicit relation
    ``z_low = z_up + v(z_up) dt``. With ``refine_iters = 1`` this is the
    naive inversion, bit for bit. Costs ``num_steps * refine_iters``
    evaluations.
    """
    if flow.is_ddim:
        raise InvalidArgumentError("fixed-point inversion is defined for velocity chains")
    z = np.asarray(z0, dtype=float)
    if z.shape[-1:] != (flow.dim,):
        raise InvalidArgumentError("z0 dimension mismatch")
    sched = flow.schedule
    batch = 1 if z.ndim == 1 else int(np.prod(z.shape[:-1]))
    for i in range(flow.num_steps, 0, -1):
        t_low = float(sched.t_grid[i])
        t_up = float(sched.t_grid[i - 1])
        z_low = z
        v = flow.backend.eval_velocity(z_low, t_low, flow.condition)
        flow.nfe_counter.add(batch)
        z = z_low - v * sched.delta_t
        for _ in range(cfg.refine_iters - 1):
            v = flow.backend.eval_velocity(z, t_up, flow.condition)
            flow.nfe_counter.add(batch)
            z = z_low - v * sched.delta_t
    return z


def jacobian_gd(flow: BlackBoxFlow, y, cfg: JacobianGDConfig, z_init) -> OptTrace:
    """Gradient descent on the squared error with central-difference
    gradients of the full chain."""
    if flow.dim > JacobianGDConfig.MAX_DIM:
        raise InvalidArgumentError(
            f"finite-difference oracle capped at d <= {JacobianGDConfig.MAX_DIM}"
        )
    y = np.asarray(y, dtype=float)
    z = np.asarray(z_init, dtype=float)
    if y.shape != z.shape or z.shape != (flow.dim,):
        raise InvalidArgumentError("target/init dimension mismatch")
    nfe_before = flow.nfe_counter.value
    trace = OptTrace()

    def loss(zp):
        d = flow.run(zp) - y
        return 0.5 * float(d @ d)

    def record(z_cur):
        z0 = flow.run(z_cur)
        trace.iterates.append(z_cur)
        trace.outputs.append(z0)
        trace.residual_norms.append(float(np.linalg.norm(z0 - y)))
        trace.nfe_total = flow.nfe_counter.value - nfe_before
        return z0

    record(z)
    initial_res = trace.residual_norms[0]
    h = cfg.fd_step
    for i in range(cfg.max_iters):
        if cfg.stop_tol is not None and trace.residual_norms[-1] <= cfg.stop_tol:
            trace.stopped_early_at = i
            break
        grad = np.empty_like(z)
        for j in range(z.size):
            e = np.zeros_like(z)
            e[j] = h
            grad[j] = (loss(z + e) - loss(z - e)) / (2.0 * h)
        z = z - cfg.eta * grad
        record(z)
        res = trace.residual_norms[-1]
        if not np.isfinite(res) or (initial_res > 0 and res > DIVERGENCE_FACTOR * initial_res):
            raise DivergenceError(
                f"gradient descent diverged at step {i + 1}", partial_trace=trace
            )
    return trace
