"""Random direction sets and the geometric-mean projected Gaussian kernel.

For a pattern ``A`` with ``|A| = k`` we draw a ``B x k`` matrix ``V`` and
compare two points ``u, w`` through their projections ``V u`` and ``V w``.
The geometric mean of the ``B`` univariate Gaussian kernels is

    prod_b K_h(v_b'(u - w)) ** (1/B)  ∝  exp(-sum_b (v_b'(u - w))**2 / (2 B h**2))

Everything is kept in log space; the ``(h sqrt(2 pi))**-1`` factor is dropped
because it cancels in a normalized weighted average.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .core import AvailabilityPattern, ProjectionSpec
from .errors import ValidationError

# distinguishes the direction stream from the simulation streams of the same seed
_DIRECTION_STREAM = 0x5052494D


@dataclass(frozen=True, eq=False)
class DirectionSet:
    pattern: AvailabilityPattern
    v: np.ndarray

    @property
    def b(self) -> int:
        return self.v.shape[0]

    def project(self, points: np.ndarray) -> np.ndarray:
        """Project rows of ``points`` (m x |A|) onto every direction -> m x B."""
        return np.asarray(points, dtype=float) @ self.v.T


def direction_rng(seed: int, pattern: AvailabilityPattern) -> np.random.Generator:
    key = (_DIRECTION_STREAM, len(pattern), *pattern.observed)
    return np.random.default_rng(np.random.SeedSequence(int(seed) % 2**64, spawn_key=key))


def sample_directions(spec: ProjectionSpec, pattern: AvailabilityPattern) -> DirectionSet:
    """Draw the ``B x |A|`` direction matrix for ``pattern``.

    The draw depends only on ``(spec.seed, pattern)`` so that every row with
    the same availability pattern sees the same directions.
    """
    k = len(pattern)
    if k < 1:
        raise ValidationError("cannot sample directions for an empty pattern", "pattern")
    rng = direction_rng(spec.seed, pattern)
    shape = (spec.b, k)
    if spec.dist == "gaussian":
        v = rng.standard_normal(shape)
    elif spec.dist == "uniform":
        v = np.sqrt(3.0) * rng.uniform(-1.0, 1.0, shape)
    else:
        s = spec.resolve_s(k)
        if s < 1.0:
            raise ValidationError(f"sparse projection needs s >= 1, got {s}", "s")
        u = rng.random(shape)
        tail = 1.0 / (2.0 * s)
        v = np.sqrt(s) * ((u < tail).astype(float) - (u >= 1.0 - tail).astype(float))
    v.setflags(write=False)
    return DirectionSet(pattern, v)


class DirectionCache:
    """One :class:`DirectionSet` per distinct pattern, created on first use.

    Content is a pure function of ``(spec, pattern)``, so concurrent fills
    can only ever store identical matrices.
    """

    def __init__(self, spec: ProjectionSpec):
        self.spec = spec
        self._sets: dict[AvailabilityPattern, DirectionSet] = {}
        self._lock = threading.Lock()

    def get(self, pattern: AvailabilityPattern) -> DirectionSet:
        dirs = self._sets.get(pattern)
        if dirs is None:
            dirs = sample_directions(self.spec, pattern)
            with self._lock:
                dirs = self._sets.setdefault(pattern, dirs)
        return dirs

    def __len__(self) -> int:
        return len(self._sets)

    def __contains__(self, pattern) -> bool:
        return pattern in self._sets


def log_geo_kernel(dirs: DirectionSet, donor_proj_diff, h: float) -> float:
    """Log of the un-normalized geometric-mean kernel for one donor.

    ``donor_proj_diff[b]`` is ``(x_donor - x_target)' v_b``.
    """
    diff = np.asarray(donor_proj_diff, dtype=float).reshape(-1)
    if diff.shape[0] != dirs.b:
        raise ValidationError(f"expected {dirs.b} projected differences, got {diff.shape[0]}")
    if not np.all(np.isfinite(diff)):
        raise ValidationError("projected differences must be finite")
    if not h > 0:
        raise ValidationError(f"bandwidth must be positive, got {h}", "bandwidth")
    return float(-(diff @ diff) / (2.0 * diff.shape[0] * h * h))


def log_geo_kernel_rows(proj_diff: np.ndarray, h: float) -> np.ndarray:
    """Vectorized :func:`log_geo_kernel` over the rows of an m x B array."""
    proj_diff = np.asarray(proj_diff, dtype=float)
    b = proj_diff.shape[1]
    return -np.einsum("ij,ij->i", proj_diff, proj_diff) / (2.0 * b * h * h)


def log_plain_kernel_rows(diff: np.ndarray, h: float) -> np.ndarray:
    """Log of the un-normalized product Gaussian kernel, ``-||d||^2 / (2 h^2)``."""
    diff = np.asarray(diff, dtype=float)
    return -np.einsum("ij,ij->i", diff, diff) / (2.0 * h * h)


def normalize_log_weights(logw: np.ndarray) -> np.ndarray:
    """Exponentiate and normalize with max subtraction; result sums to 1."""
    logw = np.asarray(logw, dtype=float)
    w = np.exp(logw - logw.max())
    return w / w.sum()
