"""Strictly stationary process models with exact mixing metadata.

Three model families are supported: i.i.d. draws from a finite law, a finite
stationary Markov chain, and a Gaussian AR(1).  For the finite models the
mixing coefficients are computed exactly; for the AR(1) only the classical
geometric envelope is stored, flagged as an upper bound (the limit theorems
consume upper bounds on the decay, so this is all that is needed).

Indices are integers; a :class:`StationaryPath` may start at a negative
index.  Two-sided paths are produced by simulating a longer stationary
stretch and re-indexing, which is distribution-preserving by strict
stationarity.

The full past/future beta coefficient ``beta(k) = sup_l beta(F_1^l,
F_{l+k}^inf)`` reduces, for Markov models, to the single-pair coefficient
``beta(sigma(X_0), sigma(X_k))``: conditioning the future on the past is
conditioning on the last state, and the total variation between the
conditional and stationary block laws collapses onto the first future
coordinate.  The profile is therefore flagged exact only for Markov and
i.i.d. models.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

ROW_SUM_TOL = 1e-12
STATIONARY_TOL = 1e-10


def replication_rng(base_seed: int, replication: int) -> np.random.Generator:
    """Independent deterministic stream for one replication.

    Streams are derived as ``SeedSequence(base_seed, spawn_key=(replication,))``,
    numpy's splitmix-style key derivation, so any subset of replications can be
    reproduced without generating the others.
    """
    ss = np.random.SeedSequence(int(base_seed), spawn_key=(int(replication),))
    return np.random.default_rng(ss)


# ---------------------------------------------------------------------------
# models


@dataclass(frozen=True)
class IIDFinite:
    """I.i.d. draws from a finite law; optional embedding of states into R^m."""

    weights: np.ndarray
    embedding: np.ndarray | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or np.any(w < 0) or abs(w.sum() - 1.0) > ROW_SUM_TOL:
            raise ValueError("weights must be a probability vector")
        object.__setattr__(self, "weights", w)
        if self.embedding is not None:
            e = np.asarray(self.embedding, dtype=float)
            if e.shape[0] != len(w):
                raise ValueError("embedding must have one row per state")
            object.__setattr__(self, "embedding", e)

    @property
    def n_states(self) -> int:
        return len(self.weights)

    @property
    def stationary(self) -> np.ndarray:
        return self.weights

    def sample_states(self, n: int, rng: np.random.Generator) -> np.ndarray:
        cum = np.cumsum(self.weights)
        return np.searchsorted(cum, rng.random(n), side="right").astype(np.int64)


def _stationary_of(p: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eig(p.T)
    i = int(np.argmin(np.abs(w - 1.0)))
    pi = np.real(v[:, i])
    pi = np.abs(pi)
    return pi / pi.sum()


@dataclass(frozen=True)
class MarkovFinite:
    """Stationary finite Markov chain started from its stationary law."""

    transition: np.ndarray
    stationary: np.ndarray | None = None
    embedding: np.ndarray | None = None

    def __post_init__(self):
        p = np.asarray(self.transition, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError("transition matrix must be square")
        if np.any(p < -ROW_SUM_TOL) or np.max(np.abs(p.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
            raise ValueError("transition matrix must be row-stochastic within 1e-12")
        object.__setattr__(self, "transition", p)
        pi = _stationary_of(p) if self.stationary is None else np.asarray(self.stationary, dtype=float)
        if np.max(np.abs(pi @ p - pi)) > STATIONARY_TOL:
            raise ValueError("stationary vector does not satisfy pi P = pi within 1e-10")
        object.__setattr__(self, "stationary", pi)
        if self.embedding is not None:
            e = np.asarray(self.embedding, dtype=float)
            if e.shape[0] != p.shape[0]:
                raise ValueError("embedding must have one row per state")
            object.__setattr__(self, "embedding", e)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    def sample_states(self, n: int, rng: np.random.Generator) -> np.ndarray:
        cum_pi = np.cumsum(self.stationary)
        cum_p = np.cumsum(self.transition, axis=1)
        u = rng.random(n)
        out = np.empty(n, dtype=np.int64)
        s = int(np.searchsorted(cum_pi, u[0], side="right"))
        out[0] = s
        for t in range(1, n):
            s = int(np.searchsorted(cum_p[s], u[t], side="right"))
            out[t] = s
        return out


@dataclass(frozen=True)
class AR1Gaussian:
    """Gaussian AR(1): X_t = rho X_{t-1} + eps_t, eps ~ N(0, noise_var)."""

    rho: float
    noise_var: float = 1.0

    def __post_init__(self):
        if not abs(self.rho) < 1:
            raise ValueError("|rho| < 1 required for stationarity")
        if not self.noise_var > 0:
            raise ValueError("noise_var must be positive")

    @property
    def stationary_var(self) -> float:
        return self.noise_var / (1.0 - self.rho**2)

    def sample_values(self, n: int, rng: np.random.Generator) -> np.ndarray:
        x = np.empty(n)
        x[0] = rng.normal(0.0, np.sqrt(self.stationary_var))
        if n > 1:
            eps = rng.normal(0.0, np.sqrt(self.noise_var), size=n - 1)
            from scipy.signal import lfilter

            x[1:] = lfilter([1.0], [1.0, -self.rho], eps, zi=np.array([self.rho * x[0]]))[0]
        return x


ProcessModel = IIDFinite | MarkovFinite | AR1Gaussian


# ---------------------------------------------------------------------------
# paths


@dataclass(frozen=True)
class StationaryPath:
    """A simulated stretch X_lo..X_hi of a stationary sequence.

    ``values[i - first_index]`` is X_i; entries are integer states for finite
    models and floats for the AR(1).
    """

    values: np.ndarray
    first_index: int = 1

    @property
    def lo(self) -> int:
        return self.first_index

    @property
    def hi(self) -> int:
        return self.first_index + len(self.values) - 1

    def covers(self, lo: int, hi: int) -> bool:
        return self.lo <= lo and hi <= self.hi

    def at(self, i: int):
        if not self.lo <= i <= self.hi:
            raise IndexError(f"index {i} outside simulated range [{self.lo}, {self.hi}]")
        return self.values[i - self.first_index]

    def window(self, lo: int, hi: int) -> np.ndarray:
        """Values for indices lo..hi inclusive."""
        if not self.covers(lo, hi):
            raise IndexError(f"window [{lo}, {hi}] outside simulated range [{self.lo}, {self.hi}]")
        o = self.first_index
        return self.values[lo - o : hi - o + 1]

    def gather(self, idx) -> np.ndarray:
        idx = np.asarray(idx)
        if idx.size and (idx.min() < self.lo or idx.max() > self.hi):
            raise IndexError("gather index outside simulated range")
        return self.values[idx - self.first_index]


def simulate(model: ProcessModel, n: int, rng: np.random.Generator, first_index: int = 1) -> StationaryPath:
    """Length-n stationary sample as a path starting at ``first_index``."""
    if n < 1:
        raise ValueError("n >= 1 required")
    if isinstance(model, (IIDFinite, MarkovFinite)):
        vals = model.sample_states(n, rng)
    elif isinstance(model, AR1Gaussian):
        vals = model.sample_values(n, rng)
    else:
        raise TypeError(f"unknown process model {type(model).__name__}")
    return StationaryPath(vals, first_index)


def simulate_two_sided(model: ProcessModel, lo: int, hi: int, rng: np.random.Generator) -> StationaryPath:
    """Stationary sample covering integer indices lo..hi (lo may be <= 0)."""
    if hi < lo:
        raise ValueError("hi >= lo required")
    return simulate(model, hi - lo + 1, rng, first_index=lo)


def embed_states(model, states: np.ndarray) -> np.ndarray:
    """Map integer state indices to their point embedding in R^m."""
    if getattr(model, "embedding", None) is None:
        raise ValueError("model has no state embedding")
    return model.embedding[states]


# ---------------------------------------------------------------------------
# mixing coefficients


def _check_chain(p: np.ndarray, pi: np.ndarray):
    p = np.asarray(p, dtype=float)
    pi = np.asarray(pi, dtype=float)
    if np.any(p < -ROW_SUM_TOL) or np.max(np.abs(p.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
        raise ValueError("transition matrix must be row-stochastic")
    return p, pi


def beta_pair_exact(p, pi, k: int) -> float:
    """Exact beta(sigma(X_0), sigma(X_k)) for a stationary finite chain.

    Equals ``0.5 * sum_i pi_i sum_j |P^k(i, j) - pi_j|``, the total variation
    between the lag-k pair law and the product of its marginals, which
    realizes the partition supremum.
    """
    p, pi = _check_chain(p, pi)
    if k < 1:
        raise ValueError("k >= 1 required")
    pk = np.linalg.matrix_power(p, k)
    return float(0.5 * np.sum(pi[:, None] * np.abs(pk - pi[None, :])))


def alpha_pair_exact(p, pi, k: int, max_states: int = 12) -> float:
    """Exact alpha(sigma(X_0), sigma(X_k)) by exhaustive search over event pairs.

    Enumerates all 2^S x 2^S pairs of state subsets; refuses chains larger
    than ``max_states`` states.
    """
    p, pi = _check_chain(p, pi)
    if k < 1:
        raise ValueError("k >= 1 required")
    s = p.shape[0]
    if s > max_states:
        raise ValueError(f"alpha_pair_exact limited to {max_states} states, got {s}")
    joint = pi[:, None] * np.linalg.matrix_power(p, k)
    masks = ((np.arange(2**s)[:, None] >> np.arange(s)[None, :]) & 1).astype(float)
    pa = masks @ pi
    jm = masks @ joint @ masks.T  # P(X_0 in A, X_k in B) for all subset pairs
    return float(np.max(np.abs(jm - np.outer(pa, pa))))


@dataclass(frozen=True)
class MixingProfile:
    """Tabulated beta(k), alpha(k) for k = 1..K with an exactness flag."""

    beta: np.ndarray
    alpha: np.ndarray | None
    flag: str  # "exact" | "upper_bound"

    def __post_init__(self):
        b = np.asarray(self.beta, dtype=float)
        if np.any(b < -1e-15) or np.any(b > 1 + 1e-12):
            raise ValueError("beta values must lie in [0, 1]")
        if np.any(np.diff(b) > 1e-12):
            raise ValueError("beta values must be nonincreasing in k")
        object.__setattr__(self, "beta", b)
        if self.alpha is not None:
            a = np.asarray(self.alpha, dtype=float)
            if np.any(a < -1e-15) or np.any(a > 0.5 + 1e-12):
                raise ValueError("alpha values must lie in [0, 1/2]")
            if np.any(np.diff(a) > 1e-12):
                raise ValueError("alpha values must be nonincreasing in k")
            object.__setattr__(self, "alpha", a)
        if self.flag not in ("exact", "upper_bound"):
            raise ValueError("flag must be 'exact' or 'upper_bound'")

    @property
    def K(self) -> int:
        return len(self.beta)

    def beta_at(self, k: int) -> float:
        if not 1 <= k <= self.K:
            raise IndexError(f"k={k} outside tabulated range 1..{self.K}")
        return float(self.beta[k - 1])


def mixing_profile(model: ProcessModel, K: int) -> MixingProfile:
    """Mixing coefficients of a model for lags 1..K.

    Exact for finite models (pair reduction via the Markov property);
    geometric envelope ``|rho|^k`` for the AR(1), flagged as an upper bound,
    with ``alpha <= beta / 2``.
    """
    if isinstance(model, IIDFinite):
        z = np.zeros(K)
        return MixingProfile(z, z.copy(), "exact")
    if isinstance(model, MarkovFinite):
        beta = np.array([beta_pair_exact(model.transition, model.stationary, k) for k in range(1, K + 1)])
        alpha = None
        if model.n_states <= 12:
            alpha = np.array(
                [alpha_pair_exact(model.transition, model.stationary, k) for k in range(1, K + 1)]
            )
        return MixingProfile(beta, alpha, "exact")
    if isinstance(model, AR1Gaussian):
        beta = np.minimum(1.0, np.abs(model.rho) ** np.arange(1, K + 1))
        return MixingProfile(beta, np.minimum(0.25, beta / 2.0), "upper_bound")
    raise TypeError(f"unknown process model {type(model).__name__}")


# ---------------------------------------------------------------------------
# coupling


def beta_of_joint(joint: np.ndarray) -> float:
    """beta(sigma(X), sigma(Y)) of a finite joint law table (rows X, columns Y)."""
    j = np.asarray(joint, dtype=float)
    if np.any(j < -1e-15) or abs(j.sum() - 1.0) > 1e-10:
        raise ValueError("joint table must be a normalized probability table")
    px = j.sum(axis=1)
    py = j.sum(axis=0)
    return float(0.5 * np.sum(np.abs(j - np.outer(px, py))))


def couple_against_marginal(cond_rows: np.ndarray, marginal: np.ndarray, realized: np.ndarray,
                            rng: np.random.Generator) -> np.ndarray:
    """Maximal-coupling copies of realized draws against a target marginal.

    ``cond_rows[t]`` is the law the draw ``realized[t]`` came from.  Returns
    ``ystar`` with ``ystar[t] ~ marginal`` independent of whatever generated
    ``cond_rows[t]``, and ``P(ystar != realized)`` equal to the total
    variation between ``cond_rows[t]`` and ``marginal`` for each ``t``.
    """
    cond = np.asarray(cond_rows, dtype=float)
    q = np.asarray(marginal, dtype=float)
    y = np.asarray(realized)
    m = np.minimum(cond, q[None, :])
    omega = m.sum(axis=1)
    py = np.take_along_axis(cond, y[:, None], axis=1)[:, 0]
    my = np.take_along_axis(m, y[:, None], axis=1)[:, 0]
    accept = rng.random(len(y)) * py <= my
    ystar = y.astype(np.int64).copy()
    rej = ~accept
    if np.any(rej):
        resid = q[None, :] - m[rej]
        tot = 1.0 - omega[rej]
        # residual supports of cond and marginal are disjoint, so a rejected
        # draw can never land back on the realized value
        cum = np.cumsum(resid, axis=1)
        u = rng.random(rej.sum()) * tot
        ystar[rej] = (u[:, None] >= cum).sum(axis=1)
    return ystar


class BerbeeCoupler:
    """Sampler of (X, Y, Y*) for a finite joint law of (X, Y).

    Y* is independent of X, distributed as the Y-marginal, and differs from Y
    with probability exactly beta(sigma(X), sigma(Y)).  Construction:
    conditional maximal coupling of law(Y | X = x) with law(Y).
    """

    def __init__(self, joint: np.ndarray):
        j = np.asarray(joint, dtype=float)
        self.beta = beta_of_joint(j)
        self.joint = j
        self.px = j.sum(axis=1)
        self.py = j.sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            cond = np.where(self.px[:, None] > 0, j / self.px[:, None], 0.0)
        self.cond = cond

    def draw(self, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        x = np.searchsorted(np.cumsum(self.px), rng.random(size), side="right").astype(np.int64)
        cum_rows = np.cumsum(self.cond, axis=1)[x]
        y = (rng.random(size)[:, None] >= cum_rows).sum(axis=1).astype(np.int64)
        ystar = couple_against_marginal(self.cond[x], self.py, y, rng)
        return x, y, ystar


def berbee_couple(joint: np.ndarray) -> BerbeeCoupler:
    """Build the (X, Y, Y*) sampler for a finite joint probability table."""
    return BerbeeCoupler(joint)


# ---------------------------------------------------------------------------
# blocks


def block_vectors(path: StationaryPath, q: int, k: int, n_blocks: int) -> np.ndarray:
    """Blocks V_{k,u} = (X_{2qu+k}, ..., X_{2qu+k+q-1}) for u = 0..n_blocks-1.

    Entries are taken verbatim from the path; an index outside the simulated
    range raises (simulate two-sided for negative start offsets).
    """
    if q < 1:
        raise ValueError("q >= 1 required")
    if n_blocks < 1:
        raise ValueError("n_blocks >= 1 required")
    u = np.arange(n_blocks)
    idx = 2 * q * u[:, None] + k + np.arange(q)[None, :]
    return path.gather(idx)
