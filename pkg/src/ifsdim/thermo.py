"""Locally constant potentials on the full shift and their Gibbs measures.

A k-local potential ``psi(omega) = table[omega_1 .. omega_k]`` has an exact
transfer matrix on (k-1)-word states. Pressure is the log of its Perron
eigenvalue and the equilibrium state is the Markov measure built from the left
and right Perron vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

POWER_TOL = 1e-13
POWER_MAX_ITER = 100_000
# log of the smallest normal double; stands in for log 0 in weight potentials
LOG_FLOOR = math.log(np.finfo(float).tiny)


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class LocalPotential:
    """``m`` symbols, locality ``k``; ``table`` is indexed row-major with
    ``omega_1`` the most significant digit."""

    m: int
    k: int
    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float).reshape(-1)
        if self.m < 1 or self.k < 1:
            raise ValueError("need m >= 1 and k >= 1")
        if t.size != self.m**self.k:
            raise ValueError(f"table has {t.size} entries, expected {self.m**self.k}")
        if not np.all(np.isfinite(t)):
            raise ValueError("potential table must be finite")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    @classmethod
    def zero(cls, m: int) -> "LocalPotential":
        return cls(m, 1, np.zeros(m))

    @classmethod
    def from_weights(cls, p: Sequence[float]) -> "LocalPotential":
        p = np.asarray(p, dtype=float)
        with np.errstate(divide="ignore"):
            logs = np.maximum(np.log(p), LOG_FLOOR)
        return cls(len(p), 1, logs)

    @classmethod
    def from_transition(cls, T) -> "LocalPotential":
        T = np.asarray(T, dtype=float)
        with np.errstate(divide="ignore"):
            return cls(T.shape[0], 2, np.maximum(np.log(T), LOG_FLOOR).reshape(-1))

    def shifted(self, c: float) -> "LocalPotential":
        return LocalPotential(self.m, self.k, self.table + c)

    @property
    def oscillation(self) -> float:
        """Tail sensitivity of Birkhoff sums: ``(k-1)*(max - min)``."""
        return (self.k - 1) * float(self.table.max() - self.table.min())

    @property
    def spread(self) -> float:
        return float(self.table.max() - self.table.min())

    def index(self, w: Sequence[int]) -> int:
        i = 0
        for s in w:
            i = i * self.m + int(s)
        return i

    def to_dict(self) -> dict:
        return {"k": self.k, "table": [float(v) for v in self.table]}


@dataclass(frozen=True)
class BernoulliWeights:
    p: tuple

    def __post_init__(self):
        p = tuple(float(v) for v in self.p)
        if not p or any(v < 0 or not math.isfinite(v) for v in p):
            raise ValueError("weights must be finite and non-negative")
        if abs(sum(p) - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {sum(p)!r}, not 1")
        object.__setattr__(self, "p", p)

    @classmethod
    def uniform(cls, m: int) -> "BernoulliWeights":
        return cls(tuple([1.0 / m] * m))

    @property
    def m(self) -> int:
        return len(self.p)

    def potential(self) -> LocalPotential:
        return LocalPotential.from_weights(self.p)


@dataclass(frozen=True, eq=False)
class GibbsMeasure:
    """Stationary Markov measure on (k-1)-word states.

    ``transition[s, a]`` is the probability that symbol ``a`` follows state
    ``s``; the next state is ``(s*m + a) % m**(k-1)``. For ``k == 1`` there is
    a single state and the measure is Bernoulli.
    """

    m: int
    k: int
    transition: np.ndarray
    stationary: np.ndarray
    pressure: float
    potential: LocalPotential | None = None
    right: np.ndarray | None = field(default=None, repr=False)
    left: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_states(self) -> int:
        return self.m ** (self.k - 1)

    def next_state(self, s, a):
        return (s * self.m + a) % self.n_states

    @property
    def symbol_marginal(self) -> np.ndarray:
        """Probability of each symbol in position one."""
        if self.k == 1:
            return self.transition[0].copy()
        return self.stationary.reshape(self.m, -1).sum(axis=1)

    def integral(self, pot: LocalPotential) -> float:
        """``int psi d(mu)`` for a potential of the same locality."""
        if pot.k != self.k or pot.m != self.m:
            raise ValueError("potential does not match the measure's alphabet/locality")
        w = self.stationary[:, None] * self.transition
        return float(np.sum(w.reshape(-1) * pot.table))


def bernoulli_measure(weights: BernoulliWeights | Sequence[float]) -> GibbsMeasure:
    if not isinstance(weights, BernoulliWeights):
        weights = BernoulliWeights(tuple(weights))
    p = np.array(weights.p)
    with np.errstate(divide="ignore"):
        pot = LocalPotential.from_weights(p)
    return GibbsMeasure(weights.m, 1, p[None, :], np.ones(1), 0.0, pot)


def markov_measure(T) -> GibbsMeasure:
    """The stationary 1-step chain with row-stochastic matrix ``T``."""
    T = np.asarray(T, dtype=float)
    if np.any(np.abs(T.sum(axis=1) - 1.0) > 1e-10):
        raise ValueError("rows must sum to 1")
    vals, vecs = np.linalg.eig(T.T)
    i = int(np.argmin(np.abs(vals - 1.0)))
    pi = np.abs(np.real(vecs[:, i]))
    return GibbsMeasure(T.shape[0], 2, T, pi / pi.sum(), 0.0, None)


def _transfer_matrix(pot: LocalPotential, shift: float) -> np.ndarray:
    m, S = pot.m, pot.m ** (pot.k - 1)
    M = np.zeros((S, S))
    weights = np.exp(pot.table - shift)
    for s in range(S):
        for a in range(m):
            M[s, (s * m + a) % S] += weights[s * m + a]
    return M


def _perron(M: np.ndarray) -> tuple[float, np.ndarray]:
    """Power iteration; returns the eigenvalue and an l1-normalised positive vector."""
    v = np.full(M.shape[0], 1.0 / M.shape[0])
    lam = 0.0
    for _ in range(POWER_MAX_ITER):
        w = M @ v
        new = float(w.sum())
        w /= new
        if abs(new - lam) < POWER_TOL * max(1.0, new) and np.max(np.abs(w - v)) < 1e-13:
            return new, w
        v, lam = w, new
    raise ConvergenceError("power iteration did not converge; the potential table is ill-conditioned")


def _solve(pot: LocalPotential):
    shift = float(pot.table.max())
    M = _transfer_matrix(pot, shift)
    lam, right = _perron(M)
    _, left = _perron(M.T)
    return lam, shift, M, right, left


def pressure(pot: LocalPotential) -> float:
    if pot.k == 1:
        t = pot.table
        c = float(t.max())
        return c + math.log(float(np.sum(np.exp(t - c))))
    lam, shift, *_ = _solve(pot)
    return shift + math.log(lam)


def equilibrium_measure(pot: LocalPotential) -> GibbsMeasure:
    """Gibbs state of ``pot`` as a stationary Markov measure."""
    P = pressure(pot)
    if pot.k == 1:
        p = np.exp(pot.table - P)
        p /= p.sum()
        return GibbsMeasure(pot.m, 1, p[None, :], np.ones(1), P, pot)
    lam, shift, M, right, left = _solve(pot)
    m, S = pot.m, M.shape[0]
    trans = np.empty((S, m))
    weights = np.exp(pot.table - shift)
    for s in range(S):
        for a in range(m):
            trans[s, a] = weights[s * m + a] * right[(s * m + a) % S] / (lam * right[s])
    trans /= trans.sum(axis=1, keepdims=True)
    pi = left * right
    pi /= pi.sum()
    return GibbsMeasure(m, pot.k, trans, pi, P, pot, right, left)


def entropy(mu: GibbsMeasure) -> float:
    T = mu.transition
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(T > 0, T * np.log(T), 0.0)
    return float(-np.sum(mu.stationary[:, None] * terms))


def cylinder_mass(mu: GibbsMeasure, w: Sequence[int]) -> float:
    w = [int(s) for s in w]
    if not w:
        raise ValueError("cylinders need at least one symbol")
    if any(not 0 <= s < mu.m for s in w):
        raise ValueError("symbol out of range")
    r = mu.k - 1
    if len(w) < r:
        marg = mu.stationary.reshape((mu.m,) * r)
        return float(marg[tuple(w)].sum())
    s = 0
    for a in w[:r]:
        s = s * mu.m + a
    mass = float(mu.stationary[s])
    for a in w[r:]:
        mass *= float(mu.transition[s, a])
        s = mu.next_state(s, a)
    return mass


def sample_words(mu: GibbsMeasure, n: int, rng: np.random.Generator) -> np.ndarray:
    """One word of length ``n`` as an int array."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if mu.k == 1:
        p = mu.transition[0]
        return rng.choice(mu.m, size=n, p=p)
    r = mu.k - 1
    u = rng.random(n + 1)
    s = int(np.searchsorted(np.cumsum(mu.stationary), u[0] * mu.stationary.sum(), side="right"))
    s = min(s, mu.n_states - 1)
    out = np.empty(n + r, dtype=np.int64)
    # unpack the initial state into its r symbols
    digits = []
    t = s
    for _ in range(r):
        digits.append(t % mu.m)
        t //= mu.m
    out[:r] = digits[::-1]
    cum = np.cumsum(mu.transition, axis=1)
    for j in range(n):
        a = int(np.searchsorted(cum[s], u[j + 1] * cum[s, -1], side="right"))
        a = min(a, mu.m - 1)
        out[r + j] = a
        s = mu.next_state(s, a)
    return out[:n]


def sample_word(mu: GibbsMeasure, n: int, rng: np.random.Generator) -> tuple:
    return tuple(int(a) for a in sample_words(mu, n, rng))


def birkhoff_sum(pot: LocalPotential, w: Sequence[int]) -> tuple[float, float]:
    """``S_n psi`` on ``w`` followed by the all-zeros tail, with its tail-oscillation bound."""
    w = [int(s) for s in w]
    if not w:
        raise ValueError("birkhoff_sum needs a non-empty word")
    padded = w + [0] * (pot.k - 1)
    total = 0.0
    for j in range(len(w)):
        total += float(pot.table[pot.index(padded[j : j + pot.k])])
    return total, pot.oscillation


def variational_residual(pot: LocalPotential, mu: GibbsMeasure) -> float:
    """``|h(mu) + int psi d(mu) - P(psi)|``."""
    return abs(entropy(mu) + mu.integral(pot) - mu.pressure)


def gibbs_ratio(mu: GibbsMeasure, w: Sequence[int]) -> float:
    """``mu[w] / exp(S_n psi(w) - n P)``; bounded above and below for Gibbs states."""
    if mu.potential is None:
        raise ValueError("measure carries no potential")
    s, _ = birkhoff_sum(mu.potential, w)
    return cylinder_mass(mu, w) / math.exp(s - len(w) * mu.pressure)
