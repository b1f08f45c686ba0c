"""Overlap counting and Monte Carlo overlap numbers.

``beta_n(x)`` counts words ``w`` of length ``n`` with ``x`` in ``phi_w(Lambda)``.
Membership is tested backwards: ``x`` lies in ``phi_w(V)`` exactly when
``phi_w^{-1}(x)`` lies in ``V``, so the enumeration carries an outward-rounded
enclosure of the inverse image and extends it one symbol at a time. A prefix
is dropped as soon as that enclosure leaves the ``eta``-inflated seed. At full
length the enclosure must meet the depth-``cover_depth`` cover of the limit
set (the upper count) and, for the ``lower`` count, also the finer cover at
depth ``cover_depth + refine``. Both are upper bounds for the true count; the
gap between them shows how much the cover depth matters.

The enumeration is depth-first over chunks of the frontier and vectorised
within a chunk.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import streams
from .ifs_core import IfsSystem, as_word
from .thermo import GibbsMeasure, LocalPotential, birkhoff_sum, equilibrium_measure, sample_words

DEFAULT_COVER_DEPTH = 10
DEFAULT_REFINE = 2
DEFAULT_BURN_IN = 40
DEFAULT_NODE_BUDGET = 10_000_000
BRUTE_FORCE_CAP = 10_000_000
CELL_CAP = 1 << 22
CHUNK = 1 << 15
BRACKET_Z = 3.0


class GenericityWarning(UserWarning):
    """Genericity tolerance below the tail sensitivity of the Birkhoff sums."""


# -- covers ------------------------------------------------------------------


def _merge(lo: np.ndarray, hi: np.ndarray):
    order = np.argsort(lo, kind="stable")
    lo, hi = lo[order], hi[order]
    reach = np.maximum.accumulate(hi)
    start = np.ones(lo.size, dtype=bool)
    start[1:] = lo[1:] > reach[:-1]
    groups = np.cumsum(start) - 1
    mlo = lo[start]
    mhi = np.zeros(mlo.size)
    np.maximum.at(mhi, groups, hi)
    mhi = np.maximum(mhi, mlo)
    return mlo, mhi


def _cover_1d(system: IfsSystem, depth: int):
    lo = np.array([system.seed.lo])
    hi = np.array([system.seed.hi])
    for _ in range(depth):
        parts = [f.image(lo, hi) for f in system.maps]
        lo, hi = _merge(np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]))
        if lo.size > CELL_CAP:
            raise MemoryError(f"limit-set cover exceeds {CELL_CAP} cells at depth {depth}")
    return lo, hi


def _cover_2d(system: IfsSystem, depth: int) -> np.ndarray:
    pieces = [system.seed_piece]
    for _ in range(depth):
        nxt = []
        for i in range(system.m):
            nxt.extend(system.image_pieces(i, pieces))
        pieces = list(dict.fromkeys(nxt))
        if len(pieces) > CELL_CAP:
            raise MemoryError(f"limit-set cover exceeds {CELL_CAP} cells at depth {depth}")
    return np.array([system.piece_box(p) for p in pieces])


@dataclass(frozen=True, eq=False)
class MembershipTester:
    """Decides ``x in phi_w(Lambda)`` against outer covers of the limit set.

    ``eta`` defaults to ``1e-12 * diam(V)``. Points within ``eta`` of a cell
    count as inside.
    """

    system: IfsSystem
    cover_depth: int = DEFAULT_COVER_DEPTH
    refine: int = DEFAULT_REFINE
    eta: float | None = None
    coarse: tuple = field(init=False, repr=False)
    fine: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if self.cover_depth < 0 or self.refine < 0:
            raise ValueError("cover depths must be non-negative")
        if self.eta is None:
            object.__setattr__(self, "eta", 1e-12 * self.system.seed.diameter)
        build = _cover_1d if self.system.dim == 1 else _cover_2d
        object.__setattr__(self, "coarse", build(self.system, self.cover_depth))
        object.__setattr__(self, "fine", build(self.system, self.cover_depth + self.refine))

    @property
    def dim(self) -> int:
        return self.system.dim

    def cells(self, fine: bool = False) -> int:
        c = self.fine if fine else self.coarse
        return len(c[0]) if self.dim == 1 else len(c)

    # 1-D --------------------------------------------------------------------
    def meets_1d(self, lo, hi, fine: bool = False) -> np.ndarray:
        clo, chi = self.fine if fine else self.coarse
        idx = np.searchsorted(chi, lo - self.eta, side="left")
        ok = idx < clo.size
        idx = np.minimum(idx, clo.size - 1)
        return ok & (clo[idx] <= hi + self.eta)

    def in_seed_1d(self, lo, hi) -> np.ndarray:
        s = self.system.seed
        return (lo <= s.hi + self.eta) & (hi >= s.lo - self.eta)

    # 2-D --------------------------------------------------------------------
    def meets_2d(self, box, fine: bool = False) -> bool:
        c = self.fine if fine else self.coarse
        e = self.eta
        xl, xh, yl, yh = box
        return bool(
            np.any((c[:, 0] <= xh + e) & (xl <= c[:, 1] + e) & (c[:, 2] <= yh + e) & (yl <= c[:, 3] + e))
        )

    def in_seed_2d(self, box) -> bool:
        from .interval import modulus_range

        rlo, rhi = modulus_range(*box)
        s = self.system.seed
        return rlo <= s.r_hi + self.eta and rhi >= s.r_lo - self.eta

    def preimage_box(self, i: int, box):
        f = self.system.maps[i]
        return f.preimage_box(box, pad=max(self.eta, 1e-12))

    def accepts(self, x, w: Sequence[int], fine: bool = False) -> bool:
        """Membership of ``x`` in ``phi_w(Lambda)`` for one word, by direct evaluation."""
        w = as_word(w)
        if self.dim == 1:
            lo = hi = np.array([float(x)])
            for s in w:
                lo, hi = self.system.maps[s].preimage(lo, hi, self.system.seed)
                if not self.in_seed_1d(lo, hi)[0]:
                    return False
            ok = self.meets_1d(lo, hi)[0]
            return bool(ok and (not fine or self.meets_1d(lo, hi, fine=True)[0]))
        box = _point_box(x)
        for s in w:
            box = self.preimage_box(s, box)
            if box is None or not self.in_seed_2d(box):
                return False
        return self.meets_2d(box) and (not fine or self.meets_2d(box, fine=True))


def _point_box(z) -> tuple:
    z = complex(z)
    return (z.real, z.real, z.imag, z.imag)


# -- genericity filter -------------------------------------------------------


@dataclass(frozen=True)
class _Genericity:
    table: np.ndarray
    m: int
    k: int
    target: float
    taus: tuple  # ascending

    @property
    def states(self) -> int:
        return self.m ** (self.k - 1)

    @property
    def widest(self) -> float:
        return self.taus[-1]


def _genericity(pot: LocalPotential, mu: GibbsMeasure, taus: Sequence[float]) -> _Genericity:
    return _Genericity(pot.table, pot.m, pot.k, mu.integral(pot), tuple(sorted(taus)))


# -- enumeration -------------------------------------------------------------


class Counts(NamedTuple):
    upper: tuple  # one entry per tau (a single entry without a filter)
    lower: tuple
    nodes: int
    truncated: bool


class _Budget:
    def __init__(self, cap: int):
        self.cap = cap
        self.used = 0
        self.hit = False

    def take(self, k: int) -> bool:
        self.used += k
        if self.used > self.cap:
            self.hit = True
        return not self.hit


def _enumerate_1d(tester: MembershipTester, x: float, n: int, gen: _Genericity | None, budget: _Budget):
    system = tester.system
    seed = system.seed
    ntau = len(gen.taus) if gen else 1
    upper = np.zeros(ntau, dtype=np.int64)
    lower = np.zeros(ntau, dtype=np.int64)
    if gen:
        tmin, tmax = float(gen.table.min()), float(gen.table.max())

    def leaves(lo, hi, S):
        up = tester.meets_1d(lo, hi)
        fn = up & tester.meets_1d(lo, hi, fine=True)
        if gen is None:
            upper[0] += int(up.sum())
            lower[0] += int(fn.sum())
            return
        dev = np.abs(S / n - gen.target)
        for t, tau in enumerate(gen.taus):
            ok = dev < tau
            upper[t] += int((up & ok).sum())
            lower[t] += int((fn & ok).sum())

    def walk(lo, hi, S, ctx, depth):
        if budget.hit:
            return
        if depth == n:
            leaves(lo, hi, S)
            return
        rem = n - depth - 1
        parts = []
        for i, f in enumerate(system.maps):
            a, b = f.preimage(lo, hi, seed)
            keep = tester.in_seed_1d(a, b)
            nS, nctx = S, ctx
            if gen is not None:
                word = i * gen.states + ctx
                nS = S + gen.table[word]
                nctx = word // gen.m
                keep &= ((nS + rem * tmin) / n < gen.target + gen.widest) & (
                    (nS + rem * tmax) / n > gen.target - gen.widest
                )
            if keep.any():
                parts.append((a[keep], b[keep], nS[keep] if gen else S, nctx[keep] if gen else ctx))
        if not parts:
            return
        lo = np.concatenate([p[0] for p in parts])
        hi = np.concatenate([p[1] for p in parts])
        S = np.concatenate([p[2] for p in parts]) if gen else None
        ctx = np.concatenate([p[3] for p in parts]) if gen else None
        if not budget.take(lo.size):
            return
        for start in range(0, lo.size, CHUNK):
            sl = slice(start, start + CHUNK)
            walk(lo[sl], hi[sl], S[sl] if gen else None, ctx[sl] if gen else None, depth + 1)

    x = np.array([float(x)])
    walk(x, x.copy(), np.zeros(1) if gen else None, np.zeros(1, dtype=np.int64) if gen else None, 0)
    return tuple(int(v) for v in upper), tuple(int(v) for v in lower)


def _enumerate_2d(tester: MembershipTester, x: complex, n: int, gen: _Genericity | None, budget: _Budget):
    system = tester.system
    ntau = len(gen.taus) if gen else 1
    upper = [0] * ntau
    lower = [0] * ntau
    if gen:
        tmin, tmax = float(gen.table.min()), float(gen.table.max())
    stack = [(_point_box(x), 0.0, 0, 0)]
    while stack and not budget.hit:
        box, S, ctx, depth = stack.pop()
        if depth == n:
            up = tester.meets_2d(box)
            fn = up and tester.meets_2d(box, fine=True)
            if gen is None:
                upper[0] += up
                lower[0] += fn
                continue
            dev = abs(S / n - gen.target)
            for t, tau in enumerate(gen.taus):
                if dev < tau:
                    upper[t] += up
                    lower[t] += fn
            continue
        rem = n - depth - 1
        for i in range(system.m - 1, -1, -1):
            nS, nctx = S, ctx
            if gen is not None:
                word = i * gen.states + ctx
                nS = S + float(gen.table[word])
                nctx = word // gen.m
                if not ((nS + rem * tmin) / n < gen.target + gen.widest and (nS + rem * tmax) / n > gen.target - gen.widest):
                    continue
            child = tester.preimage_box(i, box)
            if child is None or not tester.in_seed_2d(child):
                continue
            if not budget.take(1):
                break
            stack.append((child, nS, nctx, depth + 1))
    return tuple(int(v) for v in upper), tuple(int(v) for v in lower)


def _count(tester: MembershipTester, x, n: int, gen: _Genericity | None = None, budget: int = DEFAULT_NODE_BUDGET) -> Counts:
    if n < 1:
        raise ValueError("n must be >= 1")
    if not tester.system.seed.contains(x, tester.system.tolerance):
        raise ValueError(f"point {x} lies outside the seed set")
    b = _Budget(budget)
    run = _enumerate_1d if tester.dim == 1 else _enumerate_2d
    up, lo = run(tester, x, n, gen, b)
    return Counts(up, lo, b.used, b.hit)


class BetaCount(NamedTuple):
    lower: int
    upper: int
    truncated: bool = False
    nodes: int = 0


def beta_n(tester: MembershipTester, x, n: int, budget: int = DEFAULT_NODE_BUDGET) -> BetaCount:
    """Pruned count of ``n``-words whose limit-set image contains ``x``."""
    c = _count(tester, x, n, None, budget)
    return BetaCount(c.lower[0], c.upper[0], c.truncated, c.nodes)


def _all_words(m: int, n: int) -> np.ndarray:
    if m**n > BRUTE_FORCE_CAP:
        raise MemoryError(f"{m}**{n} words exceed the brute-force cap {BRUTE_FORCE_CAP}")
    idx = np.arange(m**n, dtype=np.int64)
    cols = [(idx // m ** (n - 1 - j)) % m for j in range(n)]
    return np.stack(cols, axis=1) if n else np.zeros((1, 0), dtype=np.int64)


def _brute_members(tester: MembershipTester, x, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Every ``n``-word and whether ``x`` lies in its image, without pruning."""
    words = _all_words(tester.system.m, n)
    if tester.dim == 2:
        ok = np.array([tester.accepts(x, w) for w in words], dtype=bool)
        return words, ok
    system = tester.system
    lo = np.full(words.shape[0], float(x))
    hi = lo.copy()
    alive = np.ones(words.shape[0], dtype=bool)
    for j in range(n):
        col = words[:, j]
        for i, f in enumerate(system.maps):
            sel = col == i
            if sel.any():
                a, b = f.preimage(lo[sel], hi[sel], system.seed)
                lo[sel], hi[sel] = a, b
        alive &= tester.in_seed_1d(lo, hi)
    with np.errstate(invalid="ignore"):
        ok = alive & tester.meets_1d(np.where(alive, lo, 0.0), np.where(alive, hi, 0.0))
    return words, ok


def brute_force_beta(tester: MembershipTester, x, n: int) -> int:
    """Unpruned enumeration of all ``m**n`` words; equals the pruned upper count."""
    _, ok = _brute_members(tester, x, n)
    return int(ok.sum())


# -- generic preimage counts ---------------------------------------------------


def default_tau(pot: LocalPotential) -> float:
    """``0.1 * (max - min)`` of the table, floored so constant potentials stay positive."""
    return max(0.1 * pot.spread, 1e-9 * max(1.0, float(np.abs(pot.table).max())))


class GenericCount(NamedTuple):
    count: int
    lower: int
    truncated: bool
    point: object
    by_tau: tuple = ()


def iterated_point(system: IfsSystem, omega: Sequence[int], x, n: int):
    """``phi_{omega_n ... omega_1}(x)``: the fibre point after ``n`` skew-product steps."""
    omega = as_word(omega)
    if len(omega) < n:
        raise ValueError("omega must have at least n symbols")
    return system.apply_word(omega[:n][::-1], x)


def generic_count_bn(
    tester: MembershipTester,
    mu: GibbsMeasure,
    pot: LocalPotential,
    omega: Sequence[int],
    x,
    n: int,
    tau: float,
    budget: int = DEFAULT_NODE_BUDGET,
) -> GenericCount:
    """Number of ``eta`` in ``I^n`` with ``phi_{omega_n..omega_1}(x)`` in ``phi_{eta_n..eta_1}(Lambda)``
    and ``|S_n psi(eta)/n - int psi d(mu)| < tau``."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    _warn_tau(pot, n, tau)
    y = iterated_point(tester.system, omega, x, n)
    c = _count(tester, y, n, _genericity(pot, mu, (tau,)), budget)
    return GenericCount(c.upper[0], c.lower[0], c.truncated, y)


def brute_force_bn(tester: MembershipTester, mu: GibbsMeasure, pot: LocalPotential, y, n: int, tau: float) -> int:
    """Unpruned oracle for ``b_n`` at the already-iterated point ``y``."""
    words, ok = _brute_members(tester, y, n)
    target = mu.integral(pot)
    total = 0
    for u in words[ok]:
        s, _ = birkhoff_sum(pot, u[::-1])
        total += abs(s / n - target) < tau
    return int(total)


def _warn_tau(pot: LocalPotential, n: int, tau: float) -> bool:
    if tau < pot.oscillation / n:
        warnings.warn(
            f"tau={tau:g} is below the tail oscillation bound {pot.oscillation / n:g} at n={n}; "
            "generic counts depend on the tail convention",
            GenericityWarning,
            stacklevel=3,
        )
        return True
    return False


# -- Monte Carlo estimates ---------------------------------------------------


@dataclass(frozen=True)
class OverlapEstimate:
    """Finite-``n`` estimate of ``log o`` with its cover-depth bracket.

    ``values`` holds ``(1/n) log count`` per sample that has a non-zero
    count; samples whose own word fails the genericity filter are counted in
    ``excluded``. ``lower``/``upper`` bracket ``log o`` by
    ``refined_mean - 3 se`` (clipped at 0) and ``mean + 3 se``.
    """

    n: int
    tau: float
    samples: int
    values: tuple
    mean: float
    stderr: float
    lower: float
    upper: float
    refined_mean: float
    excluded: int
    truncated: int
    cover_depth: int
    sensitivity: tuple = ()
    warnings: tuple = ()

    @property
    def flags(self) -> tuple:
        return ("truncated",) if self.truncated else ()

    def to_dict(self) -> dict:
        return {
            "log_o": self.mean,
            "log_o_err": self.stderr,
            "log_o_lower": self.lower,
            "log_o_upper": self.upper,
            "refined_mean": self.refined_mean,
            "n": self.n,
            "tau": self.tau,
            "samples": self.samples,
            "used": len(self.values),
            "excluded": self.excluded,
            "truncated": self.truncated,
            "cover_depth": self.cover_depth,
            "sensitivity": [{"tau": t, "log_o": v} for t, v in self.sensitivity],
            "warnings": list(self.warnings),
            "flags": list(self.flags),
        }


def _mean_se(v: np.ndarray) -> tuple[float, float]:
    if v.size == 0:
        return math.nan, math.nan
    if v.size == 1:
        return float(v[0]), 0.0
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def _estimate(n, tau, counts: list[Counts], cover_depth, taus, warn) -> OverlapEstimate:
    up = np.array([c.upper for c in counts], dtype=float)
    lo = np.array([c.lower for c in counts], dtype=float)
    main = taus.index(tau) if tau in taus else 0
    keep = up[:, main] > 0
    with np.errstate(divide="ignore"):
        vals = np.log(up[keep, main]) / n
        fine = np.log(np.maximum(lo[keep, main], 1.0)) / n
    mean, se = _mean_se(vals)
    fmean, fse = _mean_se(fine)
    lower = max(0.0, fmean - BRACKET_Z * fse) if vals.size else math.nan
    upper = mean + BRACKET_Z * se if vals.size else math.nan
    sens = []
    for t, tv in enumerate(taus):
        if t == main:
            continue
        k = up[:, t] > 0
        sens.append((tv, _mean_se(np.log(up[k, t]) / n)[0]))
    return OverlapEstimate(
        n=n,
        tau=tau,
        samples=len(counts),
        values=tuple(float(v) for v in vals),
        mean=mean,
        stderr=se,
        lower=lower,
        upper=upper,
        refined_mean=fmean,
        excluded=int((~keep).sum()),
        truncated=sum(c.truncated for c in counts),
        cover_depth=cover_depth,
        sensitivity=tuple(sens),
        warnings=tuple(warn),
    )


def _tester_for(system, tester, cover_depth):
    if tester is not None:
        if tester.system is not system:
            raise ValueError("tester belongs to a different system")
        return tester
    return MembershipTester(system, cover_depth)


def topological_overlap(
    system: IfsSystem,
    n: int,
    samples: int,
    seed: int,
    *,
    cover_depth: int = DEFAULT_COVER_DEPTH,
    burn_in: int = DEFAULT_BURN_IN,
    tester: MembershipTester | None = None,
    budget: int = DEFAULT_NODE_BUDGET,
    workers: int = 1,
) -> OverlapEstimate:
    """``(1/n) E log beta_n(pi omega)`` with ``omega`` uniform Bernoulli."""
    if n < 1 or samples < 1:
        raise ValueError("need n >= 1 and samples >= 1")
    from .thermo import bernoulli_measure

    tester = _tester_for(system, tester, cover_depth)
    mu = bernoulli_measure([1.0 / system.m] * system.m)
    anchor = system.seed.anchor

    def one(i: int) -> Counts:
        rng = streams.stream(seed, streams.OVERLAP, i)
        w = sample_words(mu, n + burn_in, rng)
        x = system.apply_words(w[None, :], anchor)[0]
        return _count(tester, x, n, None, budget)

    counts = streams.map_ordered(one, range(samples), workers)
    return _estimate(n, 0.0, counts, tester.cover_depth, (0.0,), ())


def measure_overlap(
    system: IfsSystem,
    pot: LocalPotential,
    n: int,
    samples: int,
    seed: int,
    *,
    tau: float | None = None,
    cover_depth: int = DEFAULT_COVER_DEPTH,
    burn_in: int = DEFAULT_BURN_IN,
    tester: MembershipTester | None = None,
    budget: int = DEFAULT_NODE_BUDGET,
    workers: int = 1,
) -> OverlapEstimate:
    """``(1/n) E log b_n`` under the lifted Gibbs state of ``pot``.

    Each sample draws ``omega`` of length ``burn_in + n``; the fibre point is
    ``x = phi_{omega_N..omega_1}(anchor)`` for the first ``N = burn_in``
    symbols and ``b_n`` is counted at the image of ``x`` under the next ``n``.
    Counts at ``tau/2`` and ``2 tau`` are reported as ``sensitivity``.
    """
    if n < 1 or samples < 1:
        raise ValueError("need n >= 1 and samples >= 1")
    if pot.m != system.m:
        raise ValueError("potential alphabet does not match the system")
    tau = default_tau(pot) if tau is None else float(tau)
    if tau <= 0:
        raise ValueError("tau must be positive")
    tester = _tester_for(system, tester, cover_depth)
    mu = equilibrium_measure(pot)
    taus = (tau / 2, tau, 2 * tau)
    gen = _genericity(pot, mu, taus)
    warn = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", GenericityWarning)
        if _warn_tau(pot, n, tau):
            warn.append(str(caught[-1].message))
    anchor = system.seed.anchor

    def one(i: int) -> Counts:
        rng = streams.stream(seed, streams.OVERLAP, i)
        w = sample_words(mu, burn_in + n, rng)
        y = system.apply_words(w[::-1][None, :], anchor)[0]
        return _count(tester, y, n, gen, budget)

    counts = streams.map_ordered(one, range(samples), workers)
    return _estimate(n, tau, counts, tester.cover_depth, taus, warn)
