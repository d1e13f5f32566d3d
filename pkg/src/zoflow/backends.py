"""Conditional velocity (and noise-prediction) backends.

A backend is the analytic stand-in for the denoiser network: a pure
function of ``(z, t, condition)``. The condition carries the actual field
parameters, so the same backend evaluates under a source or a target
condition (the editing setting) without being rebuilt.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import InvalidArgumentError
from .mixtures import GaussianMixture

AFFINE = "affine"
GAUSSIAN_MIXTURE = "gaussian-mixture"
DDIM_NOISE_PRED = "ddim-noise-pred"


@dataclass(frozen=True)
class AffineParams:
    """Parameters of the affine field ``v(z) = A z + b`` (time independent)."""

    matrix: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        b = np.atleast_1d(np.asarray(self.offset, dtype=float))
        if a.shape[0] != a.shape[1] or b.shape != (a.shape[0],):
            raise InvalidArgumentError("affine matrix/offset shapes are inconsistent")
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "offset", b)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class Condition:
    """Named parameter block paired with a backend kind at evaluation time."""

    tag: str
    payload: Any

    def payload_dim(self) -> int:
        if isinstance(self.payload, AffineParams):
            return self.payload.dim
        if isinstance(self.payload, GaussianMixture):
            return self.payload.dim
        raise InvalidArgumentError(f"unsupported condition payload {type(self.payload).__name__}")


class VelocityBackend:
    """Base evaluator: subclasses implement ``eval_velocity``.

    Evaluation must be a pure function of its arguments; all parameter
    validation happens when the condition payload is constructed.
    """

    kind: str

    def __init__(self, dim: int):
        if dim < 1:
            raise InvalidArgumentError("dim must be positive")
        self.dim = int(dim)

    def _check(self, z: np.ndarray, cond: Condition) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.shape[-1:] != (self.dim,):
            raise InvalidArgumentError(
                f"state dimension {z.shape[-1] if z.ndim else 0} != backend dim {self.dim}"
            )
        if cond.payload_dim() != self.dim:
            raise InvalidArgumentError("condition payload dimension mismatch")
        return z

    def eval_velocity(self, z: np.ndarray, t: float, cond: Condition) -> np.ndarray:
        raise NotImplementedError


class AffineBackend(VelocityBackend):
    """``v(z) = A z + b`` with A, b taken from the condition payload."""

    kind = AFFINE

    def eval_velocity(self, z, t, cond):
        z = self._check(z, cond)
        p = cond.payload
        if not isinstance(p, AffineParams):
            raise InvalidArgumentError("affine backend requires an AffineParams payload")
        return z @ p.matrix.T + p.offset


class MixtureBackend(VelocityBackend):
    """Exact marginal straight-path velocity of a Gaussian mixture."""

    kind = GAUSSIAN_MIXTURE

    def eval_velocity(self, z, t, cond):
        z = self._check(z, cond)
        p = cond.payload
        if not isinstance(p, GaussianMixture):
            raise InvalidArgumentError("mixture backend requires a GaussianMixture payload")
        if not 0.0 <= t <= 1.0:
            raise InvalidArgumentError("t must lie in [0, 1]")
        return p.straight_path_velocity(z, t)


class DdimNoiseBackend(VelocityBackend):
    """Exact noise prediction for the variance-preserving path.

    The time argument of ``eval_velocity`` is interpreted as the cumulative
    diffusion coefficient alpha_bar at which the state lives; the DDIM
    solver passes the grid value directly.
    """

    kind = DDIM_NOISE_PRED

    def eval_velocity(self, z, alpha_bar, cond):
        z = self._check(z, cond)
        p = cond.payload
        if not isinstance(p, GaussianMixture):
            raise InvalidArgumentError("ddim backend requires a GaussianMixture payload")
        return p.vp_noise_prediction(z, alpha_bar)


_BACKENDS = {
    AFFINE: AffineBackend,
    GAUSSIAN_MIXTURE: MixtureBackend,
    DDIM_NOISE_PRED: DdimNoiseBackend,
}


def make_backend(kind: str, dim: int) -> VelocityBackend:
    try:
        cls = _BACKENDS[kind]
    except KeyError:
        raise InvalidArgumentError(f"unknown backend kind {kind!r}") from None
    return cls(dim)


def eval_velocity(backend: VelocityBackend, z, t, cond: Condition) -> np.ndarray:
    """Functional form of backend evaluation."""
    return backend.eval_velocity(z, t, cond)
