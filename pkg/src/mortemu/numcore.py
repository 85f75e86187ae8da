"""Dense SPD linear algebra and reproducible random streams.

Matrices are plain 2-d ``numpy`` float64 arrays. Random streams wrap a
PCG64 generator keyed by ``(seed, stream key)`` through
``numpy.random.SeedSequence`` so that child streams never overlap.
Normal draws use numpy's ziggurat sampler, which is fixed for a given
numpy release.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

from .errors import NotPositiveDefiniteError, SingularMatrixError

JITTER_BASE = 1e-10
JITTER_FACTOR = 10.0
JITTER_ATTEMPTS = 8


class RngStream:
    """Deterministic random stream identified by a seed and a stream key.

    Parameters
    ----------
    seed : int
        Master seed (64-bit).
    stream_id : int or tuple of int
        Stream identifier. Tuples address nested child streams.
    """

    def __init__(self, seed: int, stream_id: int | tuple[int, ...] = 0):
        if isinstance(stream_id, (int, np.integer)):
            key = (int(stream_id),)
        else:
            key = tuple(int(k) for k in stream_id)
        if any(k < 0 for k in key) or int(seed) < 0:
            raise ValueError("seed and stream ids must be non-negative")
        self.seed = int(seed)
        self.key = key
        ss = np.random.SeedSequence(self.seed, spawn_key=self.key)
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, key={self.key})"

    def spawn(self, child_id: int) -> "RngStream":
        """Child stream with key ``self.key + (child_id,)``."""
        return RngStream(self.seed, self.key + (int(child_id),))

    def normal(self, size=None) -> np.ndarray:
        return self._gen.standard_normal(size)

    def uniform(self, size=None) -> np.ndarray:
        return self._gen.random(size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)


def sample_normal(stream: RngStream, mean: float, sd: float, size=None):
    """Draw from N(mean, sd**2); ``sd == 0`` returns ``mean`` exactly."""
    if sd < 0:
        raise ValueError(f"sd must be non-negative, got {sd}")
    z = stream.normal(size)
    if sd == 0:
        return mean + 0.0 * z
    return mean + sd * z


def sample_zero_modified_normal(stream: RngStream, p: float, mu: float, sd: float,
                                size=None):
    """Zero with probability ``1 - p``, otherwise a N(mu, sd**2) draw.

    The indicator uniform is drawn before the normal magnitude, for every
    draw, so the stream advances identically whatever ``p`` is.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if sd < 0:
        raise ValueError(f"sd must be non-negative, got {sd}")
    u = stream.uniform(size)
    x = sample_normal(stream, mu, sd, size)
    return np.where(u < p, x, 0.0) if size is not None else (x if u < p else 0.0)


def _check_symmetric(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    scale = np.max(np.abs(a))
    if np.max(np.abs(a - a.T)) > 1e-12 * max(scale, 1e-300):
        raise ValueError("matrix is not symmetric")
    return a


def cholesky(a, max_attempts: int = JITTER_ATTEMPTS, base_jitter: float = JITTER_BASE):
    """Lower Cholesky factor of a symmetric matrix with jitter escalation.

    Returns
    -------
    L : ndarray
        Lower-triangular factor with ``L @ L.T == a + delta * I``.
    delta : float
        Diagonal jitter that was needed (0 if ``a`` factored as is).
    """
    a = _check_symmetric(a)
    try:
        return np.linalg.cholesky(a), 0.0
    except np.linalg.LinAlgError:
        pass
    mean_diag = float(np.mean(np.abs(np.diag(a))))
    if mean_diag == 0.0:
        mean_diag = 1.0
    eye = np.eye(a.shape[0])
    delta = base_jitter * mean_diag
    for _ in range(max_attempts):
        try:
            return np.linalg.cholesky(a + delta * eye), delta
        except np.linalg.LinAlgError:
            delta *= JITTER_FACTOR
    raise NotPositiveDefiniteError(
        f"matrix not positive definite after {max_attempts} jitter attempts"
    )


def solve_spd(l, b):
    """Solve ``(L L^T) x = b`` by forward and back substitution."""
    l = np.asarray(l, dtype=float)
    b = np.asarray(b, dtype=float)
    if l.ndim != 2 or l.shape[0] != l.shape[1]:
        raise ValueError("factor must be square")
    if b.shape[0] != l.shape[0]:
        raise ValueError(f"dimension mismatch: factor {l.shape}, rhs {b.shape}")
    if np.any(np.diag(l) == 0.0):
        raise SingularMatrixError("zero on the factor diagonal")
    w = solve_triangular(l, b, lower=True, check_finite=False)
    return solve_triangular(l, w, lower=True, trans="T", check_finite=False)


def log_det_from_factor(l) -> float:
    """log |L L^T| for a Cholesky factor."""
    return 2.0 * float(np.sum(np.log(np.diag(l))))
