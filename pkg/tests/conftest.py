import numpy as np
import pytest

from zoflow import (
    AffineParams,
    BlackBoxFlow,
    Condition,
    GaussianMixture,
    make_backend,
    make_uniform_schedule,
)


def affine_flow(matrix, offset=None, num_steps=10, t_start=1.0):
    """Flow over the affine field v(z) = A z + b."""
    a = np.atleast_2d(np.asarray(matrix, dtype=float))
    b = np.zeros(a.shape[0]) if offset is None else np.asarray(offset, dtype=float)
    backend = make_backend("affine", a.shape[0])
    sched = make_uniform_schedule(num_steps, t_start)
    return BlackBoxFlow(backend, sched, Condition("affine", AffineParams(a, b)))


def identity_flow(dim=2, num_steps=10):
    """Zero field: f is the identity map."""
    return affine_flow(np.zeros((dim, dim)), num_steps=num_steps)


def effective_map(flow):
    """Closed-form effective linear map prod(I + A dt) of an affine flow."""
    a = flow.condition.payload.matrix
    step = np.eye(flow.dim) + a * flow.schedule.delta_t
    m = np.eye(flow.dim)
    for _ in range(flow.num_steps):
        m = step @ m
    return m


DEFAULT_MIXTURE = GaussianMixture(
    weights=[0.4, 0.35, 0.25],
    means=[[1.5, 0.0], [-1.2, 1.0], [0.3, -1.4]],
    covariances=[np.eye(2) * 0.5, np.eye(2) * 0.45, np.eye(2) * 0.55],
)

TARGET_MIXTURE = GaussianMixture(
    weights=[0.35, 0.35, 0.3],
    means=[[-1.5, -0.2], [1.0, 1.3], [0.3, -1.4]],
    covariances=[np.eye(2) * 0.5, np.eye(2) * 0.45, np.eye(2) * 0.55],
)


def mixture_flow(mixture=None, num_steps=10, t_start=1.0, tag="src"):
    mix = DEFAULT_MIXTURE if mixture is None else mixture
    backend = make_backend("gaussian-mixture", mix.dim)
    sched = make_uniform_schedule(num_steps, t_start)
    return BlackBoxFlow(backend, sched, Condition(tag, mix))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
