"""Lossy linear codec modeling an irreducible reconstruction floor.

The encode/decode pair projects onto a k-dimensional subspace (k < d), so
round-tripping a generic state loses the orthogonal component. Targets
built from round-tripped states give reconstruction experiments a floor no
method can beat, mimicking pipelines whose loss lives behind a lossy
autoencoder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class LinearCodec:
    encode: np.ndarray  # (k, d)
    decode: np.ndarray  # (d, k)

    def __post_init__(self):
        e = np.atleast_2d(np.asarray(self.encode, dtype=float))
        d = np.atleast_2d(np.asarray(self.decode, dtype=float))
        object.__setattr__(self, "encode", e)
        object.__setattr__(self, "decode", d)
        if e.shape[::-1] != d.shape:
            raise InvalidArgumentError("encode/decode shapes are inconsistent")
        if e.shape[0] >= e.shape[1]:
            raise InvalidArgumentError("codec must reduce dimension (k < d)")
        proj = d @ e
        if not (np.allclose(proj @ proj, proj, atol=1e-10)
                and np.allclose(proj, proj.T, atol=1e-10)):
            raise InvalidArgumentError("decode @ encode must be an orthogonal projector")

    @property
    def dim(self) -> int:
        return self.encode.shape[1]

    @property
    def keep_dim(self) -> int:
        return self.encode.shape[0]


def make_random_codec(dim: int, keep_dim: int, rng: np.random.Generator) -> LinearCodec:
    """Codec projecting onto a uniformly random keep_dim-subspace."""
    if not 1 <= keep_dim < dim:
        raise InvalidArgumentError("need 1 <= keep_dim < dim")
    q, _ = np.linalg.qr(rng.standard_normal((dim, keep_dim)))
    return LinearCodec(encode=q.T, decode=q)


def codec_roundtrip(codec: LinearCodec, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (codec.dim,):
        raise InvalidArgumentError("state dimension mismatch")
    return (x @ codec.encode.T) @ codec.decode.T
