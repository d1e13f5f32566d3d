"""Zero-order fixed-point iterations on the black-box chain.

The core update is ``z <- z - eta * scale * (f(z) - y)``: a gradient step
on the squared error in which the chain's Jacobian is replaced by the
identity. For noise-prediction chains the same update applies with the
telescoped state coefficient as the multiplicative scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DivergenceError, InvalidArgumentError
from .flow import BlackBoxFlow

DIVERGENCE_FACTOR = 1e6


@dataclass(frozen=True)
class OptConfig:
    """Step size, iteration budget and optional residual stopping rule."""

    eta: float
    max_iters: int
    stop_tol: Optional[float] = None
    delta_scale: float = 1.0

    def __post_init__(self):
        if self.eta <= 0:
            raise InvalidArgumentError("eta must be positive")
        if self.max_iters < 1:
            raise InvalidArgumentError("max_iters must be at least 1")
        if self.delta_scale <= 0:
            raise InvalidArgumentError("delta_scale must be positive")
        if self.stop_tol is not None and self.stop_tol < 0:
            raise InvalidArgumentError("stop_tol must be nonnegative")


@dataclass
class OptTrace:
    """Full record of one optimization run.

    ``iterates[i]`` is the i-th optimization variable, ``outputs[i]`` the
    chain output at it, ``residual_norms[i]`` the distance of that output
    to the target. All three have the same length (iterations run + 1).
    """

    iterates: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    residual_norms: list = field(default_factory=list)
    nfe_total: int = 0
    stopped_early_at: Optional[int] = None

    def __len__(self):
        return len(self.iterates)

    @property
    def final_iterate(self) -> np.ndarray:
        return self.iterates[-1]

    @property
    def final_output(self) -> np.ndarray:
        return self.outputs[-1]

    @property
    def final_residual(self) -> float:
        return self.residual_norms[-1]


@dataclass(frozen=True)
class LossSpec:
    """Loss applied to the chain output; only its gradient enters the update.

    kinds: ``squared-l2`` (1/2 ||f - y||^2), ``weighted-squared-l2``
    (per-coordinate weights), ``huber`` (quadratic inside ``threshold``,
    linear outside, applied coordinate-wise).
    """

    kind: str = "squared-l2"
    weights: Optional[np.ndarray] = None
    threshold: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("squared-l2", "weighted-squared-l2", "huber"):
            raise InvalidArgumentError(f"unknown loss kind {self.kind!r}")
        if self.kind == "weighted-squared-l2":
            if self.weights is None:
                raise InvalidArgumentError("weighted loss needs weights")
            w = np.asarray(self.weights, dtype=float)
            if np.any(w < 0):
                raise InvalidArgumentError("loss weights must be nonnegative")
            object.__setattr__(self, "weights", w)
        if self.kind == "huber" and (self.threshold is None or self.threshold <= 0):
            raise InvalidArgumentError("huber loss needs a positive threshold")

    def value(self, f_out: np.ndarray, y: np.ndarray) -> float:
        r = np.asarray(f_out, dtype=float) - np.asarray(y, dtype=float)
        if self.kind == "squared-l2":
            return 0.5 * float(r @ r)
        if self.kind == "weighted-squared-l2":
            return 0.5 * float(r @ (self.weights * r))
        a = np.abs(r)
        d = self.threshold
        return float(np.sum(np.where(a <= d, 0.5 * r * r, d * (a - 0.5 * d))))

    def gradient(self, f_out: np.ndarray, y: np.ndarray) -> np.ndarray:
        r = np.asarray(f_out, dtype=float) - np.asarray(y, dtype=float)
        if self.kind == "squared-l2":
            return r
        if self.kind == "weighted-squared-l2":
            return self.weights * r
        return np.clip(r, -self.threshold, self.threshold)


def _iterate(flow: BlackBoxFlow, y, cfg: OptConfig, z_init,
             grad_fn: Callable[[np.ndarray], np.ndarray]) -> OptTrace:
    y = np.asarray(y, dtype=float)
    z = np.asarray(z_init, dtype=float)
    if y.shape != z.shape or z.shape != (flow.dim,):
        raise InvalidArgumentError("target/init dimension mismatch")
    nfe_before = flow.nfe_counter.value
    trace = OptTrace()

    def record(z_cur):
        z0 = flow.run(z_cur)
        trace.iterates.append(z_cur)
        trace.outputs.append(z0)
        trace.residual_norms.append(float(np.linalg.norm(z0 - y)))
        trace.nfe_total = flow.nfe_counter.value - nfe_before
        return z0

    z0 = record(z)
    initial_res = trace.residual_norms[0]
    for i in range(cfg.max_iters):
        if cfg.stop_tol is not None and trace.residual_norms[-1] <= cfg.stop_tol:
            trace.stopped_early_at = i
            break
        z = z - cfg.eta * cfg.delta_scale * grad_fn(z0)
        z0 = record(z)
        res = trace.residual_norms[-1]
        if not np.isfinite(res) or not np.all(np.isfinite(z0)) or (
            initial_res > 0 and res > DIVERGENCE_FACTOR * initial_res
        ):
            raise DivergenceError(
                f"iteration diverged at step {i + 1} (residual {res:g})",
                partial_trace=trace,
            )
    return trace


def zero_order_run(flow: BlackBoxFlow, y, cfg: OptConfig, z_init) -> OptTrace:
    """Run the raw-residual update for up to ``max_iters`` iterations.

    The final trace entry is the chain applied to the last iterate, so a
    full run costs ``num_steps * (iterations_run + 1)`` evaluations.
    """
    return _iterate(flow, y, cfg, z_init, lambda z0: z0 - np.asarray(y, dtype=float))


def zero_order_general(flow: BlackBoxFlow, y, cfg: OptConfig, z_init,
                       loss: LossSpec) -> OptTrace:
    """Same loop with the loss gradient in place of the raw residual.

    With the plain squared loss the gradient is exactly the residual, so the
    trace is bit-identical to ``zero_order_run``.
    """
    y_arr = np.asarray(y, dtype=float)
    return _iterate(flow, y, cfg, z_init, lambda z0: loss.gradient(z0, y_arr))


def stopgrad_equivalence_check(flow: BlackBoxFlow, z, y, fd_step: Optional[float] = None) -> float:
    """Max deviation between the frozen-chain finite-difference gradient and
    the raw residual.

    Freezing the per-step field outputs at their forward-pass values makes
    the chain behave as ``z' + const``, whose squared-error gradient is the
    residual itself; the check differentiates that frozen objective with
    central differences and returns the largest absolute discrepancy.
    """
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    f_z = flow.run(z)
    offset = f_z - z  # frozen chain: f_frozen(z') = z' + offset
    residual = f_z - y
    h = fd_step if fd_step is not None else 1e-4 * (1.0 + float(np.max(np.abs(z))))

    def frozen_loss(zp):
        d = zp + offset - y
        return 0.5 * float(d @ d)

    grad = np.empty_like(z)
    for j in range(z.size):
        e = np.zeros_like(z)
        e[j] = h
        grad[j] = (frozen_loss(z + e) - frozen_loss(z - e)) / (2.0 * h)
    return float(np.max(np.abs(grad - residual)))


def early_stop_select(trace: OptTrace, threshold: Optional[float] = None,
                      index: Optional[int] = None):
    """Pick an entry from a trace: the first one whose residual meets the
    threshold, an explicit index, or the last entry as fallback."""
    if len(trace) == 0:
        raise InvalidArgumentError("trace is empty")
    if index is not None:
        if not 0 <= index < len(trace):
            raise InvalidArgumentError("index outside trace")
        return trace.iterates[index], trace.outputs[index]
    if threshold is not None:
        for i, res in enumerate(trace.residual_norms):
            if res <= threshold:
                return trace.iterates[i], trace.outputs[i]
    return trace.iterates[-1], trace.outputs[-1]
