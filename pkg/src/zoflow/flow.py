"""The unrolled sampling chain as a black-box map.

``BlackBoxFlow`` composes a backend, a timestep schedule and a condition
into the map ``f`` taking a starting state to the generated sample. The
only observable side effect is the evaluation counter; everything else is
deterministic and pure, so the same flow value can be shared read-only
across workers.
"""

from __future__ import annotations

import threading
from typing import Union

import numpy as np

from .backends import DDIM_NOISE_PRED, Condition, VelocityBackend
from .errors import InvalidArgumentError
from .schedule import DdimSchedule, FlowSchedule


class NfeCounter:
    """Thread-safe monotone count of backend evaluations.

    Batched states count once per state per step, so per-sample accounting
    is identical whether states are pushed one at a time or in a batch.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._count = 0

    def add(self, n: int):
        with self._lock:
            self._count += int(n)

    @property
    def value(self) -> int:
        return self._count

    def reset(self):
        with self._lock:
            self._count = 0


def _batch_count(z: np.ndarray) -> int:
    return 1 if z.ndim == 1 else int(np.prod(z.shape[:-1]))


def flow_step(backend, z, t, cond, delta_t, counter: NfeCounter | None = None):
    """One explicit Euler step ``z + v_t(z, c) * delta_t``."""
    if t + delta_t < -1e-12:
        raise InvalidArgumentError("step would cross t = 0")
    z = np.asarray(z, dtype=float)
    v = backend.eval_velocity(z, t, cond)
    if counter is not None:
        counter.add(_batch_count(z))
    return z + v * delta_t


def ddim_step(backend, z, index, sched: DdimSchedule, cond, counter: NfeCounter | None = None):
    """One denoising step of the rearranged implicit-model chain.

    Takes the state at grid index ``index`` to index ``index - 1``:
    ``z' = sqrt(a[i-1]/a[i]) z + (sqrt(1-a[i-1]) - sqrt(a[i-1]/a[i]) sqrt(1-a[i])) eps_hat``.
    """
    if not 1 <= index <= sched.num_steps:
        raise InvalidArgumentError(f"index {index} outside [1, {sched.num_steps}]")
    ab = sched.alpha_bar
    a_cur, a_prev = float(ab[index]), float(ab[index - 1])
    z = np.asarray(z, dtype=float)
    eps_hat = backend.eval_velocity(z, a_cur, cond)
    if counter is not None:
        counter.add(_batch_count(z))
    coef_z = np.sqrt(a_prev / a_cur)
    coef_eps = np.sqrt(1.0 - a_prev) - coef_z * np.sqrt(1.0 - a_cur)
    return coef_z * z + coef_eps * eps_hat


class BlackBoxFlow:
    """The composed map from a starting state to a generated sample.

    For velocity backends the schedule is a ``FlowSchedule`` integrated by
    explicit Euler steps; for the noise-prediction backend it is a
    ``DdimSchedule`` stepped by ``ddim_step``. One forward pass costs
    exactly ``num_steps`` evaluations per state.
    """

    def __init__(self, backend: VelocityBackend, schedule: Union[FlowSchedule, DdimSchedule],
                 condition: Condition):
        is_ddim = backend.kind == DDIM_NOISE_PRED
        if is_ddim and not isinstance(schedule, DdimSchedule):
            raise InvalidArgumentError("noise-prediction backend needs a DdimSchedule")
        if not is_ddim and not isinstance(schedule, FlowSchedule):
            raise InvalidArgumentError("velocity backend needs a FlowSchedule")
        self.backend = backend
        self.schedule = schedule
        self.condition = condition
        self.nfe_counter = NfeCounter()

    @property
    def dim(self) -> int:
        return self.backend.dim

    @property
    def num_steps(self) -> int:
        return self.schedule.num_steps

    @property
    def is_ddim(self) -> bool:
        return self.backend.kind == DDIM_NOISE_PRED

    def with_condition(self, condition: Condition) -> "BlackBoxFlow":
        """Same chain under another condition, with a fresh counter."""
        return BlackBoxFlow(self.backend, self.schedule, condition)

    def spawn(self) -> "BlackBoxFlow":
        """Identical flow with an isolated counter, for parallel runs."""
        return self.with_condition(self.condition)

    def run(self, z_start: np.ndarray) -> np.ndarray:
        """Apply the full chain, returning only the final state."""
        z_final, _ = run_flow(self, z_start, keep_trajectory=False)
        return z_final

    def run_with_trajectory(self, z_start: np.ndarray):
        return run_flow(self, z_start, keep_trajectory=True)


def run_flow(flow: BlackBoxFlow, z_start: np.ndarray, keep_trajectory: bool = True):
    """Push ``z_start`` through the whole chain.

    Returns ``(z_final, trajectory)``; the trajectory has ``num_steps + 1``
    entries starting at ``z_start`` (or None when not kept).
    """
    z = np.asarray(z_start, dtype=float)
    if z.shape[-1:] != (flow.dim,):
        raise InvalidArgumentError("z_start dimension mismatch")
    trajectory = [z] if keep_trajectory else None
    if flow.is_ddim:
        for index in range(flow.num_steps, 0, -1):
            z = ddim_step(flow.backend, z, index, flow.schedule, flow.condition,
                          flow.nfe_counter)
            if keep_trajectory:
                trajectory.append(z)
    else:
        sched = flow.schedule
        for i in range(flow.num_steps):
            z = flow_step(flow.backend, z, float(sched.t_grid[i]), flow.condition,
                          sched.delta_t, flow.nfe_counter)
            if keep_trajectory:
                trajectory.append(z)
    return z, trajectory


def invert_naive(flow: BlackBoxFlow, z0: np.ndarray) -> np.ndarray:
    """First-order inversion: run the chain upward, reusing each step's
    velocity at the already-known lower state.

    Costs ``num_steps`` evaluations, like one forward pass.
    """
    z = np.asarray(z0, dtype=float)
    if z.shape[-1:] != (flow.dim,):
        raise InvalidArgumentError("z0 dimension mismatch")
    if flow.is_ddim:
        ab = flow.schedule.alpha_bar
        for index in range(1, flow.num_steps + 1):
            a_cur, a_prev = float(ab[index]), float(ab[index - 1])
            eps_hat = flow.backend.eval_velocity(z, a_prev, flow.condition)
            flow.nfe_counter.add(_batch_count(z))
            coef_z = np.sqrt(a_prev / a_cur)
            coef_eps = np.sqrt(1.0 - a_prev) - coef_z * np.sqrt(1.0 - a_cur)
            z = (z - coef_eps * eps_hat) / coef_z
    else:
        sched = flow.schedule
        for i in range(flow.num_steps, 0, -1):
            t_low = float(sched.t_grid[i])
            v = flow.backend.eval_velocity(z, t_low, flow.condition)
            flow.nfe_counter.add(_batch_count(z))
            z = z - v * sched.delta_t
    return z
