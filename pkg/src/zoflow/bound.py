"""Monte-Carlo estimation of the contraction step-size bound.

The sufficient condition for convergence of the zero-order iteration is
``eta < 2 inf <u1 - u2, f(u1) - f(u2)> / ||f(u1) - f(u2)||^2``. The inf is
approximated by sampling pairs of marginally standard-normal states whose
distance is controlled through an interpolation coefficient, taking the
minimum of the per-pair quotient. For affine chains the inf is available
in closed form and serves as an exact oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .backends import Condition
from .errors import (
    AssumptionViolatedError,
    DegeneratePairError,
    InvalidArgumentError,
)
from .flow import BlackBoxFlow

DEFAULT_ALPHA_GRID = (0.0, 0.5, 0.9, 0.99, 0.999, 0.9999)
DEFAULT_REALIZATIONS = 2000
SAFETY_FACTOR = 0.9
DEGENERATE_TOL = 1e-12
MAX_RESAMPLES = 100


@dataclass(frozen=True)
class PairSample:
    """One evaluated pair: the quotient entering the bound and the cosine
    entering the positivity assumption."""

    u1: np.ndarray
    u2: np.ndarray
    alpha: float
    ratio: float
    cosine: float


@dataclass(frozen=True)
class BoundEstimate:
    """Result of the pair-sampling estimate.

    ``bound = 2 * global_min`` is the estimated sufficient step-size bound;
    ``suggested_eta`` applies a safety factor below it. ``beta_min`` is the
    smallest observed cosine; it must be positive for the bound to apply.
    """

    per_alpha_min: dict
    global_min: float
    bound: float
    suggested_eta: float
    beta_min: float
    num_realizations: int
    seed: int
    samples: tuple = field(default=(), repr=False)

    def to_json_dict(self) -> dict:
        return {
            "per_alpha_min": {f"{a:g}": m for a, m in self.per_alpha_min.items()},
            "global_min": self.global_min,
            "bound": self.bound,
            "suggested_eta": self.suggested_eta,
            "beta_min": self.beta_min,
            "num_realizations": self.num_realizations,
            "seed": self.seed,
        }


def pairwise_ratio(flow: BlackBoxFlow, u1, u2):
    """Quotient ``<du, df> / ||df||^2`` and cosine for one pair.

    Costs two forward passes. Pairs whose outputs nearly coincide carry no
    information and raise so the caller can resample.
    """
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    du = u1 - u2
    if np.linalg.norm(du) == 0.0:
        raise InvalidArgumentError("pair points must differ")
    df = flow.run(u1) - flow.run(u2)
    df_sq = float(df @ df)
    if df_sq < DEGENERATE_TOL**2:
        raise DegeneratePairError("output displacement below degeneracy threshold")
    inner = float(du @ df)
    cosine = inner / (float(np.linalg.norm(du)) * float(np.sqrt(df_sq)))
    return inner / df_sq, cosine


def _batch_ratios(flow, u1, u2):
    """Vectorized quotients for (n, d) batches; returns (ratio, cosine, df_norm)."""
    f1 = flow.run(u1)
    f2 = flow.run(u2)
    du = u1 - u2
    df = f1 - f2
    inner = np.einsum("nd,nd->n", du, df)
    df_norm = np.linalg.norm(df, axis=1)
    du_norm = np.linalg.norm(du, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = inner / df_norm**2
        cosine = inner / (du_norm * df_norm)
    return ratio, cosine, df_norm


def estimate_bound_mc(
    flow: BlackBoxFlow,
    num_realizations: int = DEFAULT_REALIZATIONS,
    alpha_grid: Sequence[float] = DEFAULT_ALPHA_GRID,
    seed: int = 0,
    conditions: Optional[Sequence[Condition]] = None,
    keep_samples: bool = False,
) -> BoundEstimate:
    """Estimate the step-size bound from interpolated noise pairs.

    For each interpolation coefficient ``alpha`` and each realization the
    second point is ``sqrt(alpha) u1 + sqrt(1 - alpha) eps`` with fresh
    standard-normal ``u1, eps``, so both points stay marginally standard
    normal while their distance shrinks as alpha approaches 1.
    ``num_realizations`` counts pairs per alpha value. Deterministic given
    the seed; degenerate pairs are resampled (bounded retries). When a list
    of conditions is given, realizations cycle through it.
    """
    if num_realizations < 1:
        raise InvalidArgumentError("num_realizations must be at least 1")
    alphas = [float(a) for a in alpha_grid]
    if not alphas or any(not 0.0 <= a < 1.0 for a in alphas):
        raise InvalidArgumentError("alpha values must lie in [0, 1)")
    conds = list(conditions) if conditions else [flow.condition]
    d = flow.dim

    per_alpha_min: dict = {}
    beta_min = np.inf
    kept = []
    for ai, alpha in enumerate(alphas):
        ratios = np.empty(0)
        cosines = np.empty(0)
        for ci, cond in enumerate(conds):
            # dedicated stream per (alpha, condition): growing the
            # realization count extends the draws instead of reshuffling
            # them, so the sampled minimum is monotone in the count
            rng = np.random.default_rng([seed, ai, ci])
            n = num_realizations // len(conds) + (
                1 if ci < num_realizations % len(conds) else 0
            )
            if n == 0:
                continue
            cflow = flow.with_condition(cond)
            # interleaved draws: pair i uses the same values whatever n is,
            # so a larger realization count extends the pair set
            draws = rng.standard_normal((n, 2, d))
            u1, eps = draws[:, 0], draws[:, 1]
            u2 = np.sqrt(alpha) * u1 + np.sqrt(1.0 - alpha) * eps
            r, c, df_norm = _batch_ratios(cflow, u1, u2)
            for _ in range(MAX_RESAMPLES):
                bad = df_norm < DEGENERATE_TOL
                if not np.any(bad):
                    break
                m = int(bad.sum())
                drawsb = rng.standard_normal((m, 2, d))
                u1b, epsb = drawsb[:, 0], drawsb[:, 1]
                u2b = np.sqrt(alpha) * u1b + np.sqrt(1.0 - alpha) * epsb
                rb, cb, db = _batch_ratios(cflow, u1b, u2b)
                u1[bad], u2[bad] = u1b, u2b
                r[bad], c[bad], df_norm[bad] = rb, cb, db
            if np.any(df_norm < DEGENERATE_TOL):
                raise DegeneratePairError(
                    "could not draw a non-degenerate pair within the retry cap"
                )
            flow.nfe_counter.add(cflow.nfe_counter.value)
            ratios = np.concatenate([ratios, r])
            cosines = np.concatenate([cosines, c])
            if keep_samples:
                kept.extend(
                    PairSample(u1[i], u2[i], alpha, float(r[i]), float(c[i]))
                    for i in range(n)
                )
        per_alpha_min[alpha] = float(ratios.min())
        beta_min = min(beta_min, float(cosines.min()))

    if beta_min <= 0.0:
        raise AssumptionViolatedError(
            f"observed a nonpositive pair cosine ({beta_min:g}); "
            "the contraction bound does not apply to this chain"
        )
    global_min = min(per_alpha_min.values())
    bound = 2.0 * global_min
    return BoundEstimate(
        per_alpha_min=per_alpha_min,
        global_min=global_min,
        bound=bound,
        suggested_eta=SAFETY_FACTOR * bound,
        beta_min=beta_min,
        num_realizations=num_realizations,
        seed=seed,
        samples=tuple(kept),
    )


def affine_bound_exact(matrix: np.ndarray) -> float:
    """Exact bound ``2 / lambda_max`` for a symmetric-PD effective map.

    For linear f, the quotient over a direction decomposed in the
    eigenbasis is a weighted mean of ``lambda / lambda^2 = 1 / lambda``,
    minimized on the top eigendirection.
    """
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    if m.shape[0] != m.shape[1]:
        raise InvalidArgumentError("matrix must be square")
    if not np.allclose(m, m.T, atol=1e-10):
        raise InvalidArgumentError("matrix must be symmetric")
    eigs = np.linalg.eigvalsh(m)
    if eigs[0] <= 0:
        raise InvalidArgumentError("matrix must be positive definite")
    return 2.0 / float(eigs[-1])


def proof_interval(samples: Sequence[PairSample], kappa: float):
    """Conservative step-size interval endpoints for a fixed contraction
    margin ``kappa`` in (0, 1].

    Uses the sampled extrema of the pair quotient and the worst cosine:
    ``eta2 = inf_ratio * (1 + sqrt(1 - kappa / beta^2))`` and
    ``eta1 = sup_ratio * (1 - sqrt(1 - kappa / beta^2))``. As kappa -> 0
    the upper endpoint approaches the factor-2 bound and the lower one
    approaches 0.
    """
    samples = list(samples)
    if not samples:
        raise InvalidArgumentError("no samples given")
    if not 0.0 < kappa <= 1.0:
        raise InvalidArgumentError("kappa must lie in (0, 1]")
    ratios = np.array([s.ratio for s in samples])
    beta = float(min(s.cosine for s in samples))
    if beta <= 0.0:
        raise AssumptionViolatedError("positivity assumption violated (beta <= 0)")
    disc = 1.0 - kappa / beta**2
    if disc < 0.0:
        raise InvalidArgumentError("kappa / beta^2 exceeds 1; no admissible interval")
    root = float(np.sqrt(disc))
    eta1_bar = float(ratios.max()) * (1.0 - root)
    eta2_bar = float(ratios.min()) * (1.0 + root)
    return eta1_bar, eta2_bar


def proof_interval_from_flow(flow: BlackBoxFlow, kappa: float,
                             num_realizations: int = DEFAULT_REALIZATIONS,
                             alpha_grid: Sequence[float] = DEFAULT_ALPHA_GRID,
                             seed: int = 0):
    """Convenience wrapper sampling pairs from the flow first."""
    est = estimate_bound_mc(flow, num_realizations, alpha_grid, seed, keep_samples=True)
    return proof_interval(est.samples, kappa)
