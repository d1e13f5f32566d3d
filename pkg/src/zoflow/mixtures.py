"""Gaussian mixtures with closed-form posterior expectations along two
interpolation paths.

The mixture plays the role of the data distribution. Because every quantity
is Gaussian, the conditional expectations that a trained denoiser would
approximate are available exactly:

* straight-path interpolation ``z_t = (1 - t) x0 + t eps`` (data at t=0,
  noise at t=1) gives the marginal velocity ``E[eps - x0 | z_t = z]``;
* variance-preserving interpolation ``z = sqrt(a) x0 + sqrt(1 - a) eps``
  gives the marginal noise prediction ``E[eps | z]``.

Both are mixtures of linear functions of ``z`` weighted by component
responsibilities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError

_LOG_2PI = float(np.log(2.0 * np.pi))


def _as_batch(z: np.ndarray, dim: int):
    """Reshape ``z`` to (n, dim), returning the original leading shape."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1:] != (dim,):
        raise InvalidArgumentError(
            f"state has trailing dimension {z.shape[-1] if z.ndim else 0}, expected {dim}"
        )
    lead = z.shape[:-1]
    return z.reshape(-1, dim), lead


@dataclass(frozen=True)
class GaussianMixture:
    """A K-component Gaussian mixture in d dimensions.

    Weights must be positive and sum to one (within 1e-12); covariances must
    be symmetric positive definite. Both are checked at construction so that
    evaluation never fails.
    """

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        mu = np.atleast_2d(np.asarray(self.means, dtype=float))
        cov = np.asarray(self.covariances, dtype=float)
        if cov.ndim == 2:
            cov = cov[None, :, :]
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covariances", cov)
        k, d = mu.shape
        if w.shape != (k,) or cov.shape != (k, d, d):
            raise InvalidArgumentError("mixture parameter shapes are inconsistent")
        if np.any(w <= 0):
            raise InvalidArgumentError("mixture weights must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise InvalidArgumentError("mixture weights must sum to 1 (within 1e-12)")
        for sigma in cov:
            if not np.allclose(sigma, sigma.T, atol=1e-12):
                raise InvalidArgumentError("covariance must be symmetric")
            try:
                np.linalg.cholesky(sigma)
            except np.linalg.LinAlgError:
                raise InvalidArgumentError("covariance must be positive definite") from None

    @property
    def num_components(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    # -- per-time mixing solves -------------------------------------------

    def _path_factors(self, key, scale_mean, scale_cov, noise_var):
        """Cholesky factors of ``scale_cov * Sigma_k + noise_var * I``.

        Cached per interpolation time: a flow solve revisits the same grid
        times for every state it pushes.
        """
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        d = self.dim
        cov_t = scale_cov * self.covariances + noise_var * np.eye(d)
        chol = np.linalg.cholesky(cov_t)
        logdet = 2.0 * np.log(np.einsum("kii->ki", chol)).sum(axis=1)
        mean_t = scale_mean * self.means
        self._cache[key] = (mean_t, chol, logdet)
        return self._cache[key]

    def _posterior_linear(self, z, mean_t, chol, logdet):
        """Responsibilities and whitened residuals for a batch of states.

        Returns ``(resp, solved)`` where ``solved[k] = S_k^{-1} (z - m_k)``
        and ``resp`` are the component posteriors, shapes (n, K) and
        (K, n, d).
        """
        diff = z[None, :, :] - mean_t[:, None, :]  # (K, n, d)
        half = np.linalg.solve(chol[:, None, :, :], diff[..., None])[..., 0]
        maha = np.einsum("knd,knd->kn", half, half)
        log_comp = -0.5 * (maha + logdet[:, None] + self.dim * _LOG_2PI)
        log_post = np.log(self.weights)[:, None] + log_comp
        log_post -= log_post.max(axis=0, keepdims=True)
        resp = np.exp(log_post)
        resp /= resp.sum(axis=0, keepdims=True)
        solved = np.linalg.solve(
            np.swapaxes(chol, -1, -2)[:, None, :, :], half[..., None]
        )[..., 0]
        return resp, solved

    # -- public evaluation ------------------------------------------------

    def straight_path_velocity(self, z: np.ndarray, t: float) -> np.ndarray:
        """Exact marginal velocity ``E[eps - x0 | z_t = z]``.

        Under the straight path, for component k the pair ``(z_t, eps - x0)``
        is jointly Gaussian with ``z_t ~ N((1-t) mu_k, (1-t)^2 Sigma_k + t^2 I)``,
        so the conditional mean is linear in ``z``. The time-dependent
        covariance is positive definite for every t in [0, 1], including both
        endpoints.
        """
        zb, lead = _as_batch(z, self.dim)
        s = 1.0 - float(t)
        mean_t, chol, logdet = self._path_factors(
            ("straight", float(t)), s, s * s, t * t
        )
        resp, solved = self._posterior_linear(zb, mean_t, chol, logdet)
        # E[eps | z, k] = t S^-1 r,  E[x0 | z, k] = mu_k + s Sigma_k S^-1 r
        sig_solved = np.einsum("kde,kne->knd", self.covariances, solved)
        comp = float(t) * solved - s * sig_solved - self.means[:, None, :]
        v = np.einsum("kn,knd->nd", resp, comp)
        return v.reshape(*lead, self.dim)

    def vp_noise_prediction(self, z: np.ndarray, alpha_bar: float) -> np.ndarray:
        """Exact ``E[eps | z]`` for ``z = sqrt(a) x0 + sqrt(1 - a) eps``."""
        a = float(alpha_bar)
        if not 0.0 < a <= 1.0:
            raise InvalidArgumentError("alpha_bar must lie in (0, 1]")
        zb, lead = _as_batch(z, self.dim)
        mean_t, chol, logdet = self._path_factors(
            ("vp", a), np.sqrt(a), a, 1.0 - a
        )
        resp, solved = self._posterior_linear(zb, mean_t, chol, logdet)
        comp = np.sqrt(1.0 - a) * solved
        eps_hat = np.einsum("kn,knd->nd", resp, comp)
        return eps_hat.reshape(*lead, self.dim)

    def log_density(self, x: np.ndarray) -> np.ndarray:
        """Mixture log-density, broadcast over leading axes of ``x``."""
        xb, lead = _as_batch(x, self.dim)
        mean_t, chol, logdet = self._path_factors(("straight", 0.0), 1.0, 1.0, 0.0)
        diff = xb[None, :, :] - mean_t[:, None, :]
        half = np.linalg.solve(chol[:, None, :, :], diff[..., None])[..., 0]
        maha = np.einsum("knd,knd->kn", half, half)
        log_comp = -0.5 * (maha + logdet[:, None] + self.dim * _LOG_2PI)
        out = np.logaddexp.reduce(np.log(self.weights)[:, None] + log_comp, axis=0)
        return out.reshape(lead) if lead else float(out[0])

    def mean(self) -> np.ndarray:
        return self.weights @ self.means

    def covariance(self) -> np.ndarray:
        mu = self.mean()
        centered = self.means - mu
        return np.einsum("k,kde->de", self.weights, self.covariances) + np.einsum(
            "k,kd,ke->de", self.weights, centered, centered
        )

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw n samples (n, d)."""
        counts = rng.multinomial(n, self.weights)
        out = np.empty((n, self.dim))
        pos = 0
        for k, c in enumerate(counts):
            if c == 0:
                continue
            chol = np.linalg.cholesky(self.covariances[k])
            out[pos : pos + c] = self.means[k] + rng.standard_normal((c, self.dim)) @ chol.T
            pos += c
        return rng.permutation(out, axis=0)
