"""Finite-dimensional model of a separable Hilbert space.

Points are plain numpy vectors of shape ``(d,)``; batches of points are
``(m, d)`` arrays.  Covariance operators are dense symmetric PSD matrices.
The ambient dimension ``d`` is a run-time parameter: every kernel used at
desk scale lands in a finite-dimensional subspace, so a basis truncation
loses nothing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SYMMETRY_TOL = 1e-10
PSD_TOL = 1e-8


def as_point(x, dim: int | None = None) -> np.ndarray:
    """Coerce ``x`` to a finite 1-d float vector, optionally checking its dimension."""
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.ndim != 1:
        raise ValueError(f"point must be a 1-d vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("point has non-finite coordinates")
    if dim is not None and v.shape[0] != dim:
        raise ValueError(f"point has dimension {v.shape[0]}, expected {dim}")
    return v


def inner(x, y) -> float:
    """Euclidean inner product of two points of equal dimension."""
    x = as_point(x)
    y = as_point(y, dim=x.shape[0])
    return float(x @ y)


def norm(x) -> float:
    return float(np.linalg.norm(as_point(x)))


def inner_and_norm(x, y) -> tuple[float, float]:
    """Return ``(<x, y>, ||x||)``.  Errors on dimension mismatch."""
    x = as_point(x)
    y = as_point(y, dim=x.shape[0])
    return float(x @ y), float(np.linalg.norm(x))


@dataclass(frozen=True)
class CovOperator:
    """Symmetric PSD matrix acting as a covariance operator on R^d.

    Construction symmetrizes within tolerance and clips negative eigenvalues
    at zero; the clipped mass is kept in ``clipped`` so callers can see how
    indefinite the input was (truncated long-run covariance series can be
    slightly indefinite).
    """

    matrix: np.ndarray
    clipped: float = field(default=0.0, compare=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"covariance must be a square matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("covariance has non-finite entries")
        asym = np.max(np.abs(m - m.T)) if m.size else 0.0
        if asym > SYMMETRY_TOL * max(1.0, np.max(np.abs(m))):
            raise ValueError(f"covariance is not symmetric (max asymmetry {asym:.3e})")
        m = 0.5 * (m + m.T)
        w, v = np.linalg.eigh(m)
        scale = max(1.0, float(np.max(np.abs(w))) if w.size else 1.0)
        if np.min(w) < -PSD_TOL * scale:
            raise ValueError(f"covariance is not PSD within tolerance (min eigenvalue {np.min(w):.3e})")
        clipped = float(-np.sum(np.minimum(w, 0.0)))
        w = np.maximum(w, 0.0)
        m = (v * w) @ v.T
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "clipped", clipped)
        object.__setattr__(self, "_eigvals", w)
        object.__setattr__(self, "_eigvecs", v)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix))

    def factor(self) -> np.ndarray:
        """A matrix ``L`` with ``L L^T`` equal to the operator (eigen square root)."""
        w = getattr(self, "_eigvals")
        v = getattr(self, "_eigvecs")
        return v * np.sqrt(w)

    @classmethod
    def zero(cls, dim: int) -> "CovOperator":
        return cls(np.zeros((dim, dim)))

    @classmethod
    def identity(cls, dim: int) -> "CovOperator":
        return cls(np.eye(dim))


def sample_gaussian(gamma: CovOperator, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Mean-zero Gaussian sample(s) with covariance ``gamma``.

    Returns a ``(d,)`` vector, or an ``(size, d)`` array when ``size`` is given.
    """
    d = gamma.dim
    n = 1 if size is None else int(size)
    z = rng.standard_normal((n, d))
    out = z @ gamma.factor().T
    return out[0] if size is None else out


def sample_brownian_path(
    gamma: CovOperator, grid, rng: np.random.Generator, size: int | None = None
) -> np.ndarray:
    """Brownian path(s) with increment covariance ``(t_i - t_{i-1}) * gamma``.

    ``grid`` must start at 0, be strictly increasing and end at 1.  The value
    at ``grid[0]`` is the zero vector and increments over consecutive grid
    cells are independent Gaussians.  Returns ``(len(grid), d)`` or
    ``(size, len(grid), d)``.
    """
    t = np.asarray(grid, dtype=float)
    if t.ndim != 1 or t.shape[0] < 1:
        raise ValueError("grid must be a non-empty 1-d array of times")
    if abs(t[0]) > 0.0 or abs(t[-1] - 1.0) > 1e-12:
        raise ValueError("grid must start at 0 and end at 1")
    dt = np.diff(t)
    if t.shape[0] > 1 and np.min(dt) <= 0:
        raise ValueError("grid times must be strictly increasing")
    d = gamma.dim
    n = 1 if size is None else int(size)
    z = rng.standard_normal((n, max(t.shape[0] - 1, 0), d))
    incr = (z * np.sqrt(dt)[None, :, None]) @ gamma.factor().T
    path = np.zeros((n, t.shape[0], d))
    path[:, 1:, :] = np.cumsum(incr, axis=1)
    return path[0] if size is None else path
