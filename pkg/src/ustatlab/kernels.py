"""Kernel catalog and kernel transforms.

A kernel is an evaluable map ``h: S x S -> R^d`` used inside an order-two
U-statistic.  Kernels are vectorized: calling one on two batches of points of
common length ``m`` yields an ``(m, d)`` array.  Finite-domain kernels consume
integer state indices and may carry an explicit value table, which makes every
expectation below an exact weighted sum.

Transforms implemented here:

* first-order projections ``h10(x) = E[h(x, X')] - mu`` and
  ``h01(y) = E[h(X, y)] - mu`` with ``mu = E[h(X, X')]`` for ``X, X'``
  independent with the given marginal law,
* the degenerate remainder ``h2 = h - h10 - h01 - mu`` (equivalently, the
  degeneration of ``h``: both conditional means of ``h2`` vanish under the
  law),
* norm truncation ``h = h_le + h_gt`` at a radius ``R``.

Note on the degeneration formula: the source display for the degenerated
kernel reads "E[h1(X1, y)]" with a unary h1; we evaluate ``E[h(X1, y)]``,
which is the reading under which the stated conditional-mean property
actually holds (verified exactly on finite supports in the test suite).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class FiniteStates:
    """Domain of ``size`` discrete states, encoded as integers 0..size-1."""

    size: int


@dataclass(frozen=True)
class Euclidean:
    """Domain R^dim; points are float vectors (scalars allowed for dim=1)."""

    dim: int


Domain = FiniteStates | Euclidean


def _as_batch(x, domain: Domain) -> np.ndarray:
    if isinstance(domain, FiniteStates):
        b = np.atleast_1d(np.asarray(x))
        if not np.issubdtype(b.dtype, np.integer):
            raise TypeError("finite-domain kernels take integer state indices")
        if b.size and (b.min() < 0 or b.max() >= domain.size):
            raise ValueError(f"state index out of range 0..{domain.size - 1}")
        return b
    b = np.asarray(x, dtype=float)
    if domain.dim == 1:
        return np.atleast_1d(b) if b.ndim <= 1 else b
    if b.ndim == 1:
        b = b[None, :]
    if b.shape[-1] != domain.dim:
        raise ValueError(f"expected points in R^{domain.dim}, got shape {b.shape}")
    return b


class Kernel:
    """Evaluable map ``h: S x S -> R^d`` with a symmetry flag.

    ``fn(xb, yb)`` receives equal-length batches prepared for ``domain`` and
    must return an ``(m, out_dim)`` array.  ``table`` (states x states x d),
    when present, is the exact value table of a finite-domain kernel.
    """

    def __init__(
        self,
        fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
        domain: Domain,
        out_dim: int,
        symmetric: bool = False,
        name: str = "kernel",
        table: np.ndarray | None = None,
    ):
        self._fn = fn
        self.domain = domain
        self.out_dim = int(out_dim)
        self.symmetric = bool(symmetric)
        self.name = name
        self.table = None
        if table is not None:
            t = np.asarray(table, dtype=float)
            if t.ndim == 2:
                t = t[:, :, None]
            if t.ndim != 3 or t.shape[0] != t.shape[1] or t.shape[2] != self.out_dim:
                raise ValueError(f"bad table shape {t.shape}")
            t.setflags(write=False)
            self.table = t

    def __call__(self, x, y) -> np.ndarray:
        xb = _as_batch(x, self.domain)
        yb = _as_batch(y, self.domain)
        if len(xb) != len(yb):
            raise ValueError("kernel batches must have equal length")
        out = np.asarray(self._fn(xb, yb), dtype=float)
        if out.ndim == 1:
            out = out[:, None]
        return out

    def pair(self, x, y) -> np.ndarray:
        """Evaluate on a single pair; returns a ``(d,)`` vector."""
        if isinstance(self.domain, FiniteStates):
            return self(np.asarray([x]), np.asarray([y]))[0]
        return self(np.asarray(x, dtype=float)[None, ...] if np.ndim(x) else [x],
                    np.asarray(y, dtype=float)[None, ...] if np.ndim(y) else [y])[0]

    def __repr__(self):
        return f"Kernel({self.name}, d={self.out_dim}, symmetric={self.symmetric})"


class PointMap:
    """A map ``S -> R^d`` (e.g. a first-order kernel projection)."""

    def __init__(self, fn, domain: Domain, out_dim: int, name="pointmap", table=None):
        self._fn = fn
        self.domain = domain
        self.out_dim = int(out_dim)
        self.name = name
        self.table = None
        if table is not None:
            t = np.asarray(table, dtype=float)
            if t.ndim == 1:
                t = t[:, None]
            t.setflags(write=False)
            self.table = t

    def __call__(self, x) -> np.ndarray:
        xb = _as_batch(x, self.domain)
        out = np.asarray(self._fn(xb), dtype=float)
        if out.ndim == 1:
            out = out[:, None]
        return out

    def point(self, x) -> np.ndarray:
        if isinstance(self.domain, FiniteStates):
            return self(np.asarray([x]))[0]
        return self(np.asarray(x, dtype=float)[None, ...] if np.ndim(x) else [x])[0]


# ---------------------------------------------------------------------------
# marginal laws


@dataclass(frozen=True)
class FiniteLaw:
    """Finite-support law: ``atoms[i]`` carries probability ``weights[i]``.

    Atoms are integer state indices for finite-domain kernels, or float
    points (``(S,)`` scalars / ``(S, m)`` vectors) for Euclidean kernels.
    """

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.atoms)
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or len(a) != len(w):
            raise ValueError("atoms and weights must have equal length")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1 within 1e-12")
        a = a.copy()
        w = w.copy()
        a.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "atoms", a)
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return len(self.weights)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        idx = rng.choice(self.size, size=size, p=self.weights)
        return self.atoms[idx]


@dataclass
class SampledLaw:
    """Law given only through a sampler; expectations need an MC budget."""

    sampler: Callable[[np.random.Generator, int], np.ndarray]
    budget: int | None = None
    _cache: np.ndarray | None = field(default=None, repr=False)

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        if self.budget is None:
            raise ValueError("SampledLaw used for expectations without a Monte-Carlo budget")
        if self._cache is None:
            self._cache = self.sampler(rng, self.budget)
        return self._cache


MarginalLaw = FiniteLaw | SampledLaw


def uniform_finite(n_states: int) -> FiniteLaw:
    return FiniteLaw(np.arange(n_states), np.full(n_states, 1.0 / n_states))


# ---------------------------------------------------------------------------
# catalog


def spatial_sign_kernel(dim: int) -> Kernel:
    """(x - y)/||x - y|| for x != y, zero for x = y."""

    def fn(xb, yb):
        diff = np.atleast_2d(xb - yb) if dim == 1 else xb - yb
        if dim == 1:
            diff = diff.reshape(-1, 1)
        nrm = np.linalg.norm(diff, axis=1)
        out = np.zeros_like(diff)
        nz = nrm > 0
        out[nz] = diff[nz] / nrm[nz, None]
        return out

    return Kernel(fn, Euclidean(dim), dim, symmetric=False, name="spatial_sign")


def product_kernel() -> Kernel:
    """Scalar product kernel x*y on the real line."""
    return Kernel(lambda x, y: x * y, Euclidean(1), 1, symmetric=True, name="product")


def gini_kernel() -> Kernel:
    """Gini mean-difference kernel |x - y| (norm of the difference for vectors)."""
    return Kernel(lambda x, y: np.abs(x - y), Euclidean(1), 1, symmetric=True, name="gini")


def dot_kernel(dim: int) -> Kernel:
    """Scalar kernel <x, y> on R^dim."""
    if dim == 1:
        return Kernel(lambda x, y: x * y, Euclidean(1), 1, symmetric=True, name="dot")
    return Kernel(lambda x, y: np.sum(x * y, axis=1), Euclidean(dim), 1, symmetric=True, name="dot")


def table_kernel(table, symmetric: bool | None = None, name: str = "custom_table") -> Kernel:
    """Kernel on a finite state space given by an explicit value table."""
    t = np.asarray(table, dtype=float)
    if t.ndim == 2:
        t = t[:, :, None]
    if t.ndim != 3 or t.shape[0] != t.shape[1]:
        raise ValueError(f"table must be (S, S) or (S, S, d), got {t.shape}")
    if symmetric is None:
        symmetric = bool(np.allclose(t, np.swapaxes(t, 0, 1)))
    dom = FiniteStates(t.shape[0])
    return Kernel(lambda x, y, _t=t: _t[x, y], dom, t.shape[2], symmetric=symmetric,
                  name=name, table=t)


def table_kernel_from_csv(path) -> Kernel:
    """Load a finite-table kernel from CSV columns (state_i, state_j, coord_1..coord_d)."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["state_i", "state_j"]:
            raise ValueError("expected header starting with state_i,state_j")
        d = len(header) - 2
        if d < 1:
            raise ValueError("table CSV needs at least one coordinate column")
        for rec in reader:
            if not rec:
                continue
            rows.append((int(rec[0]), int(rec[1]), [float(v) for v in rec[2 : 2 + d]]))
    if not rows:
        raise ValueError("empty kernel table")
    n = 1 + max(max(i, j) for i, j, _ in rows)
    t = np.full((n, n, d), np.nan)
    for i, j, vals in rows:
        t[i, j] = vals
    if np.any(np.isnan(t)):
        raise ValueError("kernel table CSV does not cover all state pairs")
    return table_kernel(t)


_CATALOG = {
    "spatial_sign": lambda params: spatial_sign_kernel(int(params.get("dim", params.get("d", 1)))),
    "product": lambda params: product_kernel(),
    "gini": lambda params: gini_kernel(),
    "dot": lambda params: dot_kernel(int(params.get("dim", params.get("d", 1)))),
    "custom_table": lambda params: (
        table_kernel_from_csv(params["csv"]) if "csv" in params else table_kernel(params["table"])
    ),
}


def kernel_catalog(name: str, **params) -> Kernel:
    """Instantiate a named kernel from the catalog."""
    try:
        make = _CATALOG[name]
    except KeyError:
        raise ValueError(f"unknown kernel {name!r}; known: {sorted(_CATALOG)}") from None
    return make(params)


# ---------------------------------------------------------------------------
# transforms


def _law_atoms(law: MarginalLaw, rng: np.random.Generator | None):
    """Atoms and weights realizing the law's expectation (exact or MC)."""
    if isinstance(law, FiniteLaw):
        return law.atoms, law.weights, True
    if rng is None:
        raise ValueError("a SampledLaw expectation requires an rng")
    atoms = law.draw(rng)
    w = np.full(len(atoms), 1.0 / len(atoms))
    return atoms, w, False


def _pair_grid(h: Kernel, atoms) -> np.ndarray:
    """Evaluate h on the full atoms x atoms grid; returns (S, S, d)."""
    if h.table is not None and isinstance(h.domain, FiniteStates):
        return h.table[np.ix_(np.asarray(atoms), np.asarray(atoms))]
    s = len(atoms)
    xi = np.repeat(np.arange(s), s)
    yi = np.tile(np.arange(s), s)
    vals = h(np.asarray(atoms)[xi], np.asarray(atoms)[yi])
    return vals.reshape(s, s, h.out_dim)


def hoeffding_components(
    h: Kernel, law: MarginalLaw, rng: np.random.Generator | None = None
) -> tuple[PointMap, PointMap, Kernel, np.ndarray]:
    """First-order projections, degenerate remainder and mean of ``h`` under ``law``.

    Returns ``(h10, h01, h2, mean)`` with
    ``h10(x) = E[h(x, X')] - mean``, ``h01(y) = E[h(X, y)] - mean``,
    ``h2 = h - h10 - h01 - mean`` and ``mean = E[h(X, X')]``, so that
    ``h = h2 + h10 + h01 + mean`` holds pointwise.  Expectations are exact
    weighted sums for a :class:`FiniteLaw`, Monte-Carlo with the declared
    budget for a :class:`SampledLaw`.
    """
    atoms, w, exact = _law_atoms(law, rng)
    atoms = np.asarray(atoms)
    mean_of = lambda grid: np.einsum("i,ij->j", w, grid)

    def h10_fn(xb):
        m = len(xb)
        vals = h(np.repeat(xb, len(atoms), axis=0), np.tile(atoms, (m,) + (1,) * (atoms.ndim - 1)))
        return np.einsum("j,mjd->md", w, vals.reshape(m, len(atoms), h.out_dim))

    def h01_fn(yb):
        m = len(yb)
        vals = h(np.tile(atoms, (m,) + (1,) * (atoms.ndim - 1)), np.repeat(yb, len(atoms), axis=0))
        return np.einsum("j,mjd->md", w, vals.reshape(m, len(atoms), h.out_dim))

    grid = _pair_grid(h, atoms)
    mean = np.einsum("i,j,ijd->d", w, w, grid)

    h10_table = h01_table = h2_table = None
    if isinstance(h.domain, FiniteStates) and exact and h.table is not None \
            and np.array_equal(atoms, np.arange(h.domain.size)):
        h10_table = np.einsum("j,ijd->id", w, h.table) - mean
        h01_table = np.einsum("i,ijd->jd", w, h.table) - mean
        h2_table = h.table - h10_table[:, None, :] - h01_table[None, :, :] - mean

    if h10_table is not None:
        h10 = PointMap(lambda x: h10_table[x], h.domain, h.out_dim, name=f"{h.name}:h10", table=h10_table)
        h01 = PointMap(lambda y: h01_table[y], h.domain, h.out_dim, name=f"{h.name}:h01", table=h01_table)
        h2 = Kernel(lambda x, y: h2_table[x, y], h.domain, h.out_dim, symmetric=h.symmetric,
                    name=f"{h.name}:h2", table=h2_table)
    else:
        h10 = PointMap(lambda x: h10_fn(x) - mean, h.domain, h.out_dim, name=f"{h.name}:h10")
        h01 = PointMap(lambda y: h01_fn(y) - mean, h.domain, h.out_dim, name=f"{h.name}:h01")
        h2 = Kernel(lambda x, y: h(x, y) - h10(x) - h01(y) - mean, h.domain, h.out_dim,
                    symmetric=h.symmetric, name=f"{h.name}:h2")
    return h10, h01, h2, mean


def degenerate(h: Kernel, law: MarginalLaw, rng: np.random.Generator | None = None) -> Kernel:
    """Degeneration of ``h`` under ``law``: subtract both conditional means, add back the mean.

    The result satisfies ``E[h_deg(X, X') | X] = E[h_deg(X, X') | X'] = 0``
    (exactly, on finite supports) and coincides with the ``h2`` component of
    the decomposition.
    """
    _, _, h2, _ = hoeffding_components(h, law, rng)
    return Kernel(h2._fn if h2.table is None else (lambda x, y, _t=h2.table: _t[x, y]),
                  h.domain, h.out_dim, symmetric=h.symmetric,
                  name=f"{h.name}:deg", table=h2.table)


def h1_component(h: Kernel, law: MarginalLaw, rng: np.random.Generator | None = None) -> PointMap:
    """``h1(x) = E[h(x, X1)] - E[h(X1, X1')]`` (equal to ``h10``; for symmetric
    kernels also equal to ``h01`` pointwise)."""
    h10, _, _, _ = hoeffding_components(h, law, rng)
    return PointMap(h10._fn, h.domain, h.out_dim, name=f"{h.name}:h1", table=h10.table)


def truncate(h: Kernel, radius: float) -> tuple[Kernel, Kernel]:
    """Split ``h = h_le + h_gt`` by the norm threshold ``radius``.

    ``h_le`` keeps values with ``||h|| <= radius`` and is zero elsewhere;
    ``h_gt`` is the complement, so the two add back to ``h`` exactly.
    """
    if not radius > 0:
        raise ValueError("truncation radius must be positive")

    def le_fn(xb, yb):
        v = h(xb, yb)
        keep = np.linalg.norm(v, axis=1) <= radius
        return v * keep[:, None]

    def gt_fn(xb, yb):
        v = h(xb, yb)
        keep = np.linalg.norm(v, axis=1) > radius
        return v * keep[:, None]

    le_t = gt_t = None
    if h.table is not None:
        keep = np.linalg.norm(h.table, axis=2) <= radius
        le_t = h.table * keep[:, :, None]
        gt_t = h.table - le_t
    h_le = Kernel(le_fn if le_t is None else (lambda x, y, _t=le_t: _t[x, y]),
                  h.domain, h.out_dim, symmetric=h.symmetric, name=f"{h.name}:le", table=le_t)
    h_gt = Kernel(gt_fn if gt_t is None else (lambda x, y, _t=gt_t: _t[x, y]),
                  h.domain, h.out_dim, symmetric=h.symmetric, name=f"{h.name}:gt", table=gt_t)
    return h_le, h_gt
