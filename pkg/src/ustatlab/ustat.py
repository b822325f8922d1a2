"""Order-two U-statistic engine.

``U_n(h) = sum_{1 <= i < j <= n} h(X_i, X_j)`` and its prefix family,
computed incrementally: ``U_k = U_{k-1} + sum_{i<k} h(X_i, X_k)``, so a full
prefix path costs exactly ``n(n-1)/2`` kernel evaluations and no pair matrix
is ever materialized.

Sequences are one-sided arrays ``seq[0..n-1]`` holding X_1..X_n (integer
states for finite-domain kernels, floats or point rows otherwise).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from math import comb, floor

import numpy as np

from .kernels import FiniteLaw, Kernel, MarginalLaw, hoeffding_components


def _increment(h: Kernel, seq: np.ndarray, k: int) -> np.ndarray:
    """sum_{i <= k} h(X_i, X_{k+1}) with 0-based seq (k entries before index k)."""
    x = seq[:k]
    y = seq[k]
    if np.ndim(y) == 0:
        yb = np.full(k, y, dtype=seq.dtype)
    else:
        yb = np.broadcast_to(y, (k,) + y.shape)
    return h(x, yb).sum(axis=0)


def u_statistic(h: Kernel, seq) -> np.ndarray:
    """U_n(h) as a ``(d,)`` vector; requires len(seq) >= 2."""
    seq = np.asarray(seq)
    n = len(seq)
    if n < 2:
        raise ValueError("a U-statistic of order two needs at least two observations")
    total = np.zeros(h.out_dim)
    for k in range(1, n):
        total += _increment(h, seq, k)
    return total


@dataclass(frozen=True)
class UStatPath:
    """Prefix values U_k(h), k = 2..n, as rows of ``values``."""

    n: int
    values: np.ndarray  # (n-1, d)
    kernel_id: str = ""
    sequence_id: str = ""

    def u_at(self, k: int) -> np.ndarray:
        if not 2 <= k <= self.n:
            raise IndexError(f"k={k} outside 2..{self.n}")
        return self.values[k - 2]

    def padded(self) -> np.ndarray:
        """U_0..U_n as an (n+1, d) array (U_0 = U_1 = 0)."""
        d = self.values.shape[1]
        out = np.zeros((self.n + 1, d))
        out[2:] = self.values
        return out

    def to_csv(self, path) -> None:
        d = self.values.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k"] + [f"coord_{i + 1}" for i in range(d)])
            for k in range(2, self.n + 1):
                w.writerow([k] + [repr(v) for v in self.values[k - 2]])


def u_stat_prefixes(h: Kernel, seq, kernel_id: str = "", sequence_id: str = "") -> UStatPath:
    """All prefix values U_2..U_n in one incremental pass."""
    seq = np.asarray(seq)
    n = len(seq)
    if n < 2:
        raise ValueError("a U-statistic of order two needs at least two observations")
    vals = np.empty((n - 1, h.out_dim))
    acc = np.zeros(h.out_dim)
    for k in range(1, n):
        acc = acc + _increment(h, seq, k)
        vals[k - 1] = acc
    return UStatPath(n, vals, kernel_id, sequence_id)


def prefix_path_table(table: np.ndarray, states: np.ndarray) -> np.ndarray:
    """Padded prefix array U_0..U_n for a finite-table kernel on integer states.

    Same values as :func:`u_stat_prefixes` (verified in the test suite), but
    computed by aggregating per-state occupation counts, O(n * S * d), so the
    Monte-Carlo harness can afford long paths.
    """
    t = np.asarray(table, dtype=float)
    if t.ndim == 2:
        t = t[:, :, None]
    s = t.shape[0]
    st = np.asarray(states)
    n = len(st)
    onehot = np.zeros((n, s))
    onehot[np.arange(n), st] = 1.0
    counts = np.cumsum(onehot, axis=0)
    cols = t[:, st[1:], :]  # (S, n-1, d)
    delta = np.einsum("ms,smd->md", counts[:-1], cols)
    out = np.zeros((n + 1, t.shape[2]))
    out[2:] = np.cumsum(delta, axis=0)
    return out


def polygonal_process(path: UStatPath, seq=None, h: Kernel | None = None):
    """The linear interpolation of k/n -> U_k as a function of t in [0, 1].

    At t the value is ``U_k + (nt - k) * sum_{i <= k} h(X_i, X_{k+1})`` with
    ``k = floor(nt)``; the inner sum is exactly the stored prefix increment
    ``U_{k+1} - U_k``, so no kernel re-evaluation is needed.
    """
    u = path.padded()
    n = path.n

    def at(t: float) -> np.ndarray:
        if not 0.0 <= t <= 1.0:
            raise ValueError("t must lie in [0, 1]")
        k = floor(n * t)
        frac = n * t - k
        if k >= n:
            return u[n].copy()
        return u[k] + frac * (u[k + 1] - u[k])

    return at


def polygonal_values(u_padded: np.ndarray, t_grid) -> np.ndarray:
    """Vectorized polygonal evaluation from a padded prefix array; (T, d)."""
    u = np.asarray(u_padded)
    n = u.shape[0] - 1
    t = np.asarray(t_grid, dtype=float)
    k = np.minimum(np.floor(n * t).astype(int), n)
    frac = n * t - k
    nxt = np.minimum(k + 1, n)
    return u[k] + frac[:, None] * (u[nxt] - u[k])


def hoeffding_split_check(h: Kernel, law: MarginalLaw, seq, return_details: bool = False):
    """Exact two-sided evaluation of the prefix decomposition of U_n(h).

    For every n up to len(seq), compares U_n(h) against

        sum_i (n-i)(h10(X_i) - E h10) + sum_j (j-1)(h01(X_j) - E h01)
        + U_n(h2) + C(n,2) * E h(X_1, X_1')

    and, for symmetric kernels, against the collapsed form
    ``(n-1) * sum_k (h10(X_k) - E h10) + U_n(h2) + C(n,2) * mean``.
    Returns the maximum norm discrepancy relative to max(1, ||U_n(h)||).
    """
    seq = np.asarray(seq)
    n = len(seq)
    if n < 2:
        raise ValueError("need at least two observations")
    if not isinstance(law, FiniteLaw):
        raise ValueError("hoeffding_split_check needs an exact finite-support law")
    h10, h01, h2, mean = hoeffding_components(h, law)
    w = law.weights
    e10 = np.einsum("i,id->d", w, h10(law.atoms))
    e01 = np.einsum("i,id->d", w, h01(law.atoms))

    u_h = u_stat_prefixes(h, seq).padded()
    u_h2 = u_stat_prefixes(h2, seq).padded()
    a = h10(seq) - e10
    b = h01(seq) - e01
    idx = np.arange(1, n + 1)[:, None]
    cs_a = np.vstack([np.zeros(h.out_dim), np.cumsum(a, axis=0)])
    cs_ia = np.vstack([np.zeros(h.out_dim), np.cumsum(idx * a, axis=0)])
    cs_b = np.vstack([np.zeros(h.out_dim), np.cumsum(b, axis=0)])
    cs_ib = np.vstack([np.zeros(h.out_dim), np.cumsum(idx * b, axis=0)])

    worst = 0.0
    worst_sym = 0.0
    for m in range(2, n + 1):
        lin1 = m * cs_a[m] - cs_ia[m]
        lin2 = cs_ib[m] - cs_b[m]
        rhs = lin1 + lin2 + u_h2[m] + comb(m, 2) * mean
        scale = max(1.0, float(np.linalg.norm(u_h[m])))
        worst = max(worst, float(np.linalg.norm(u_h[m] - rhs)) / scale)
        if h.symmetric:
            rhs_sym = (m - 1) * cs_a[m] + u_h2[m] + comb(m, 2) * mean
            worst_sym = max(worst_sym, float(np.linalg.norm(u_h[m] - rhs_sym)) / scale)
    if return_details:
        return worst, (worst_sym if h.symmetric else None)
    return max(worst, worst_sym)
