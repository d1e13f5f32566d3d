"""Timestep grids for the flow solver and the DDIM-style chain."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

_GRID_TOL = 1e-12


@dataclass(frozen=True)
class FlowSchedule:
    """Uniform grid of times running from ``t_start`` down to 0.

    ``delta_t`` is the signed (negative) step; ``num_steps`` is the chain
    length T, i.e. the number of solver steps in one forward pass.
    """

    t_grid: np.ndarray
    delta_t: float
    num_steps: int

    def __post_init__(self):
        grid = np.asarray(self.t_grid, dtype=float)
        object.__setattr__(self, "t_grid", grid)
        if grid.ndim != 1 or grid.size < 2:
            raise InvalidArgumentError("t_grid needs at least two entries")
        if self.num_steps != grid.size - 1:
            raise InvalidArgumentError("num_steps must equal len(t_grid) - 1")
        if abs(grid[-1]) > _GRID_TOL:
            raise InvalidArgumentError("t_grid must end at 0")
        if not 0.0 < grid[0] <= 1.0 + _GRID_TOL:
            raise InvalidArgumentError("t_grid must start in (0, 1]")
        diffs = np.diff(grid)
        if np.any(np.abs(diffs - self.delta_t) > _GRID_TOL):
            raise InvalidArgumentError("t_grid spacing must equal delta_t everywhere")
        if self.delta_t >= 0:
            raise InvalidArgumentError("delta_t must be negative")

    @property
    def t_start(self) -> float:
        return float(self.t_grid[0])


def make_uniform_schedule(num_steps: int, t_start: float = 1.0) -> FlowSchedule:
    """Uniform schedule from ``t_start`` to 0 in ``num_steps`` steps.

    A truncated chain (optimizing from an intermediate time rather than
    pure noise) is expressed by ``t_start = n_max / T < 1``.
    """
    if not isinstance(num_steps, (int, np.integer)) or num_steps < 1:
        raise InvalidArgumentError("num_steps must be a positive integer")
    if not 0.0 < t_start <= 1.0:
        raise InvalidArgumentError("t_start must lie in (0, 1]")
    delta_t = -t_start / num_steps
    grid = t_start + delta_t * np.arange(num_steps + 1)
    grid[-1] = 0.0
    return FlowSchedule(t_grid=grid, delta_t=delta_t, num_steps=int(num_steps))


@dataclass(frozen=True)
class DdimSchedule:
    """Diffusion coefficient grid ``alpha_bar[0..T]`` for the DDIM chain.

    Index 0 is the clean end (``alpha_bar[0] = 1``), index T the noisy end.
    With that convention the per-step coefficients on the state telescope:
    the product of ``sqrt(alpha_bar[t-1] / alpha_bar[t])`` over the whole
    chain equals ``1 / sqrt(alpha_bar[T])`` exactly.
    """

    alpha_bar: np.ndarray

    def __post_init__(self):
        ab = np.asarray(self.alpha_bar, dtype=float)
        object.__setattr__(self, "alpha_bar", ab)
        if ab.ndim != 1 or ab.size < 2:
            raise InvalidArgumentError("alpha_bar needs at least two entries")
        if np.any(ab <= 0) or np.any(ab > 1):
            raise InvalidArgumentError("alpha_bar values must lie in (0, 1]")
        if np.any(np.diff(ab) >= 0):
            raise InvalidArgumentError("alpha_bar must strictly decrease from the clean end")
        if abs(ab[0] - 1.0) > _GRID_TOL:
            raise InvalidArgumentError("alpha_bar[0] must be 1")

    @property
    def num_steps(self) -> int:
        return self.alpha_bar.size - 1


def make_cosine_ddim_schedule(num_steps: int, offset: float = 0.008,
                              t_max: float = 0.995) -> DdimSchedule:
    """Cosine-profile alpha_bar grid, normalized so the clean end is 1.

    The profile is evaluated on [0, t_max] with t_max < 1 so the noisy-end
    coefficient stays bounded away from zero (the telescoped coefficient is
    its inverse square root).
    """
    if num_steps < 1:
        raise InvalidArgumentError("num_steps must be a positive integer")
    if not 0.0 < t_max < 1.0 + offset:
        raise InvalidArgumentError("t_max must lie in (0, 1 + offset)")
    t = t_max * np.arange(num_steps + 1) / num_steps
    f = np.cos((t + offset) / (1.0 + offset) * np.pi / 2.0) ** 2
    return DdimSchedule(alpha_bar=f / f[0])


def ddim_delta(sched: DdimSchedule) -> float:
    """Telescoped product of the per-step state coefficients.

    Computes both the explicit product and the closed form
    ``1 / sqrt(alpha_bar[T])`` and insists they agree to 1e-12 (relative),
    which also guards against a corrupted grid injected after construction.
    """
    ab = np.asarray(sched.alpha_bar, dtype=float)
    prod = float(np.prod(np.sqrt(ab[:-1] / ab[1:])))
    closed = 1.0 / float(np.sqrt(ab[-1]))
    if abs(prod - closed) > 1e-12 * max(1.0, abs(closed)):
        raise InvalidArgumentError(
            f"telescoping identity violated: product {prod!r} vs closed form {closed!r}"
        )
    return closed
