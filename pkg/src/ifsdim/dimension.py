"""Dimension formula, Lyapunov exponents, drop detection, partition bounds and
an empirical pointwise-dimension check."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import streams
from .ifs_core import AffineMap, IfsSystem, as_word
from .overlap import (
    DEFAULT_BURN_IN,
    DEFAULT_COVER_DEPTH,
    DEFAULT_NODE_BUDGET,
    MembershipTester,
    OverlapEstimate,
    measure_overlap,
)
from .thermo import (
    BernoulliWeights,
    GibbsMeasure,
    LocalPotential,
    cylinder_mass,
    entropy,
    equilibrium_measure,
    sample_words,
)

CLAMP = 1e-12
DROP_RESOLUTION = 0.05
PARTITION_CAP = 1 << 12


class BoundWarning(UserWarning):
    pass


def hd_formula(h: float, log_o: float, chi: float) -> float:
    """``(h - log o) / |chi|``; tiny negative numerators are clamped to 0."""
    if not chi < 0:
        raise ValueError(f"Lyapunov exponent must be negative, got {chi}")
    if h < 0 or log_o < 0:
        raise ValueError("entropy and log overlap must be non-negative")
    num = h - log_o
    if num < -CLAMP:
        raise ValueError(f"log o = {log_o} exceeds the entropy h = {h}")
    return max(num, 0.0) / abs(chi)


# -- Lyapunov exponents --------------------------------------------------------


class LyapunovEstimate(NamedTuple):
    chi: float
    stderr: float
    exact: float | None


def exact_lyapunov(system: IfsSystem, mu: GibbsMeasure) -> float | None:
    """``sum_i mu[i] log|a_i|`` for affine systems; ``None`` otherwise."""
    if not all(isinstance(f, AffineMap) for f in system.maps):
        return None
    logs = np.array([math.log(abs(f.a)) for f in system.maps])
    return float(mu.symbol_marginal @ logs)


def lyapunov(
    system: IfsSystem, mu: GibbsMeasure, n: int, samples: int, seed: int, workers: int = 1
) -> LyapunovEstimate:
    """Average of ``(1/n) log|phi_w'(anchor)|`` over ``mu``-random words ``w``."""
    if n < 1 or samples < 1:
        raise ValueError("need n >= 1 and samples >= 1")
    if mu.m != system.m:
        raise ValueError("measure alphabet does not match the system")

    def draw(i):
        return sample_words(mu, n, streams.stream(seed, streams.LYAPUNOV, i))

    words = np.stack(streams.map_ordered(draw, range(samples), workers))
    vals = system.log_word_derivatives(words, system.seed.anchor) / n
    se = float(vals.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    return LyapunovEstimate(float(vals.mean()), se, exact_lyapunov(system, mu))


# -- reports -----------------------------------------------------------------


class Drop(NamedTuple):
    drop: bool
    separated: bool

    @property
    def state(self) -> str:
        return "drop" if self.drop else "separated" if self.separated else "inconclusive"


@dataclass(frozen=True)
class EmpiricalDimension:
    median: float
    iqr: float
    slopes: tuple = field(repr=False, default=())
    radii: tuple = field(repr=False, default=())


@dataclass(frozen=True)
class DimensionReport:
    h: float
    chi: float
    chi_err: float
    log_o: float
    log_o_err: float
    log_o_lower: float
    log_o_upper: float
    hd: float
    hd_err: float
    hd_naive: float
    bound: float | None = None
    overlap: OverlapEstimate | None = field(default=None, repr=False)
    chi_exact: float | None = None
    empirical: EmpiricalDimension | None = None
    resolution: float = DROP_RESOLUTION

    @property
    def decision(self) -> Drop:
        return dimension_drop(self)

    @property
    def drop(self) -> bool:
        return self.decision.drop

    @property
    def separated(self) -> bool:
        return self.decision.separated

    @property
    def flags(self) -> tuple:
        out = list(self.overlap.flags) if self.overlap else []
        if self.decision.state == "inconclusive":
            out.append("inconclusive")
        return tuple(out)

    def with_(self, **kw) -> "DimensionReport":
        from dataclasses import replace

        return replace(self, **kw)

    def to_dict(self) -> dict:
        d = {
            "h": self.h,
            "chi": self.chi,
            "log_o": self.log_o,
            "log_o_err": self.log_o_err,
            "hd": self.hd,
            "hd_naive": self.hd_naive,
            "bound": self.bound,
            "drop": self.drop,
            "separated": self.separated,
            "flags": list(self.flags),
            "state": self.decision.state,
            "chi_err": self.chi_err,
            "chi_exact": self.chi_exact,
            "log_o_lower": self.log_o_lower,
            "log_o_upper": self.log_o_upper,
            "hd_err": self.hd_err,
        }
        if self.empirical is not None:
            d["empirical_median"] = self.empirical.median
            d["empirical_iqr"] = self.empirical.iqr
        if self.overlap is not None:
            d["overlap"] = self.overlap.to_dict()
        return d


def dimension_drop(report, resolution: float | None = None) -> Drop:
    """Decide from the ``log o`` bracket: drop when it excludes 0, separated
    when it reaches 0 and stays below ``resolution``, else inconclusive."""
    res = getattr(report, "resolution", DROP_RESOLUTION) if resolution is None else resolution
    lo, hi = report.log_o_lower, report.log_o_upper
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return Drop(False, False)
    if lo > 0:
        return Drop(True, False)
    return Drop(False, hi < res)


def _assemble(h, lyap: LyapunovEstimate, est: OverlapEstimate, bound=None) -> DimensionReport:
    chi = lyap.exact if lyap.exact is not None else lyap.chi
    chi_err = 0.0 if lyap.exact is not None else lyap.stderr
    log_o = min(max(est.mean, 0.0), h) if math.isfinite(est.mean) else math.nan
    hd = hd_formula(h, log_o, chi) if math.isfinite(log_o) else math.nan
    hd_err = math.hypot(est.stderr / abs(chi), (h - log_o) * chi_err / chi**2) if math.isfinite(hd) else math.nan
    return DimensionReport(
        h=h,
        chi=chi,
        chi_err=chi_err,
        log_o=log_o,
        log_o_err=est.stderr,
        log_o_lower=est.lower,
        log_o_upper=est.upper,
        hd=hd,
        hd_err=hd_err,
        hd_naive=h / abs(chi),
        bound=bound,
        overlap=est,
        chi_exact=lyap.exact,
    )


def gibbs_dimension(
    system: IfsSystem,
    pot: LocalPotential,
    *,
    n: int = 12,
    samples: int = 2000,
    seed: int = 0,
    tau: float | None = None,
    cover_depth: int = DEFAULT_COVER_DEPTH,
    burn_in: int = DEFAULT_BURN_IN,
    lyap_n: int = 1000,
    lyap_samples: int = 200,
    tester: MembershipTester | None = None,
    budget: int = DEFAULT_NODE_BUDGET,
    scheme: "PartitionScheme | None" = None,
    workers: int = 1,
) -> DimensionReport:
    """Dimension of the projected Gibbs state of ``pot`` from its entropy,
    Lyapunov exponent and measure overlap number."""
    mu = equilibrium_measure(pot)
    h = entropy(mu)
    lyap = lyapunov(system, mu, lyap_n, lyap_samples, seed, workers)
    est = measure_overlap(
        system, pot, n, samples, seed, tau=tau, cover_depth=cover_depth, burn_in=burn_in,
        tester=tester, budget=budget, workers=workers,
    )
    rep = _assemble(h, lyap, est)
    if scheme is not None:
        rep = rep.with_(bound=qint_lower_bound(scheme, pot, mu, rep.chi))
    return rep


def self_conformal_dimension(system: IfsSystem, p, **kw) -> DimensionReport:
    """Dimension of ``pi_* mu_p`` for Bernoulli weights ``p``; keywords as in :func:`gibbs_dimension`."""
    if not isinstance(p, BernoulliWeights):
        p = BernoulliWeights(tuple(p))
    if p.m != system.m:
        raise ValueError("weights do not match the alphabet")
    scheme = kw.pop("scheme", None)
    rep = gibbs_dimension(system, p.potential(), **kw)
    if scheme is not None:
        rep = rep.with_(bound=scm_lower_bound(scheme, p, rep.chi))
    return rep


# -- partitions --------------------------------------------------------------


@dataclass(frozen=True)
class PartitionScheme:
    """Groups of ``q``-words; ``m`` is the alphabet size."""

    q: int
    groups: tuple
    m: int

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("q must be >= 1")
        groups = tuple(frozenset(as_word(w) for w in g) for g in self.groups)
        if any(not g for g in groups):
            raise ValueError("empty group")
        seen: set = set()
        for g in groups:
            if seen & g:
                raise ValueError(f"groups overlap in {sorted(seen & g)[:3]}")
            seen |= g
        every = set(itertools.product(range(self.m), repeat=self.q))
        if seen != every:
            missing = sorted(every - seen)[:3]
            extra = sorted(seen - every)[:3]
            raise ValueError(f"groups do not partition I^q (missing {missing}, extra {extra})")
        object.__setattr__(self, "groups", groups)

    @classmethod
    def from_symbols(cls, groups: Sequence[Sequence[int]], m: int) -> "PartitionScheme":
        """``q = 1`` scheme from plain symbol lists."""
        return cls(1, tuple(tuple((s,) for s in g) for g in groups), m)

    @property
    def sizes(self) -> tuple:
        return tuple(len(g) for g in self.groups)

    def group_of(self, w) -> int:
        w = as_word(w)
        for j, g in enumerate(self.groups):
            if w in g:
                return j
        raise KeyError(w)

    def theta(self) -> LocalPotential:
        """The ``q``-local potential ``log m_j`` on words of group ``j``."""
        table = np.zeros(self.m**self.q)
        for g in self.groups:
            for w in g:
                table[int(np.ravel_multi_index(w, (self.m,) * self.q))] = math.log(len(g))
        return LocalPotential(self.m, self.q, table)

    def to_dict(self) -> dict:
        return {"q": self.q, "groups": [sorted(list(w) for w in g) for g in self.groups]}


def _word_enclosures(system: IfsSystem, q: int) -> dict:
    if system.m**q > PARTITION_CAP:
        raise MemoryError(f"{system.m}**{q} words exceed the partition cap {PARTITION_CAP}")
    return {w: system.enclosure(w) for w in itertools.product(range(system.m), repeat=q)}


def verify_partition(system: IfsSystem, scheme: PartitionScheme, eta: float | None = None):
    """``(ok, violations)``: enclosures of words in different groups may touch
    but their interiors must not overlap by more than ``eta``."""
    if scheme.m != system.m:
        raise ValueError("scheme alphabet does not match the system")
    eta = 1e-12 * system.seed.diameter if eta is None else eta
    enc = _word_enclosures(system, scheme.q)
    bad = []
    for (i, gi), (j, gj) in itertools.combinations(enumerate(scheme.groups), 2):
        for u in sorted(gi):
            for v in sorted(gj):
                if enc[u].meets(enc[v], eta):
                    bad.append((u, v))
    return not bad, bad


def default_partition(system: IfsSystem, q: int, eta: float | None = None) -> PartitionScheme:
    """Connected components of the enclosure-overlap graph on ``q``-words."""
    eta = 1e-12 * system.seed.diameter if eta is None else eta
    enc = _word_enclosures(system, q)
    words = sorted(enc)
    parent = {w: w for w in words}

    def find(w):
        while parent[w] != w:
            parent[w] = parent[parent[w]]
            w = parent[w]
        return w

    for u, v in itertools.combinations(words, 2):
        if enc[u].meets(enc[v], eta):
            parent[find(u)] = find(v)
    comps: dict = {}
    for w in words:
        comps.setdefault(find(w), []).append(w)
    groups = sorted((tuple(sorted(c)) for c in comps.values()), key=lambda g: g[0])
    return PartitionScheme(q, tuple(groups), system.m)


def _bound(h: float, theta_mean: float, q: int, chi: float) -> float:
    if not chi < 0:
        raise ValueError("Lyapunov exponent must be negative")
    val = (h - theta_mean / q) / abs(chi)
    if val < -CLAMP:
        warnings.warn(f"partition bound {val:g} is negative; clamped to 0", BoundWarning, stacklevel=3)
        return 0.0
    return max(val, 0.0)


def qint_lower_bound(scheme: PartitionScheme, pot: LocalPotential, mu: GibbsMeasure, chi: float) -> float:
    """``(h(mu) - (1/q) sum_j log m_j mu(U_j)) / |chi|``."""
    if pot.m != scheme.m:
        raise ValueError("potential alphabet does not match the scheme")
    theta = sum(math.log(len(g)) * sum(cylinder_mass(mu, w) for w in g) for g in scheme.groups)
    return _bound(entropy(mu), theta, scheme.q, chi)


def scm_lower_bound(scheme: PartitionScheme, p, chi: float) -> float:
    """Bernoulli case of :func:`qint_lower_bound` with product cylinder weights."""
    if not isinstance(p, BernoulliWeights):
        p = BernoulliWeights(tuple(p))
    pr = np.array(p.p)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = float(-np.sum(np.where(pr > 0, pr * np.log(pr), 0.0)))
    theta = sum(math.log(len(g)) * sum(math.prod(pr[list(w)]) for w in g) for g in scheme.groups)
    return _bound(h, theta, scheme.q, chi)


# -- empirical pointwise dimension -----------------------------------------------


def sample_cloud(system: IfsSystem, mu: GibbsMeasure, N: int, seed: int, depth: int = 40) -> np.ndarray:
    """``N`` points ``phi_w(anchor)`` with ``w`` a ``mu``-random word of length ``depth``."""
    words = np.stack([sample_words(mu, depth, streams.stream(seed, streams.CLOUD, i)) for i in range(N)])
    return system.apply_words(words, system.seed.anchor)


def dyadic_ladder(system: IfsSystem, depth: int = 40) -> np.ndarray:
    diam = system.seed.diameter
    r, floor = diam / 10, system.contraction_bounds().kappa_max ** depth * diam
    out = []
    while r >= floor:
        out.append(r)
        r /= 2
    return np.array(out)


def empirical_pointwise_dimension(
    system: IfsSystem,
    p,
    N: int,
    seed: int,
    *,
    radii: np.ndarray | None = None,
    pivots: int = 200,
    min_count: int = 20,
    depth: int = 40,
) -> EmpiricalDimension:
    """Median and IQR over pivots of the slope of ``log nu(B(x, r))`` against ``log r``."""
    if N < 1000:
        raise ValueError("need at least 1000 points")
    if not isinstance(p, BernoulliWeights):
        p = BernoulliWeights(tuple(p))
    from .thermo import bernoulli_measure

    pts = sample_cloud(system, bernoulli_measure(p), N, seed, depth)
    radii = dyadic_ladder(system, depth) if radii is None else np.sort(np.asarray(radii, float))[::-1]
    rng = streams.stream(seed, streams.PIVOTS)
    piv = pts[rng.choice(N, size=min(pivots, N), replace=False)]
    if system.dim == 1:
        srt = np.sort(pts)
        counts = np.searchsorted(srt, piv[:, None] + radii, "right") - np.searchsorted(srt, piv[:, None] - radii, "left")
    else:
        d = np.abs(piv[:, None] - pts[None, :])
        counts = (d[:, :, None] <= radii).sum(axis=1)
    logr = np.log(radii)
    slopes = []
    for c in counts:
        ok = c >= min_count
        if ok.sum() < 4:
            continue
        x, y = logr[ok], np.log(c[ok] / N)
        if np.ptp(y) == 0:
            slopes.append(0.0)
            continue
        slopes.append(float(np.polyfit(x, y, 1)[0]))
    if not slopes:
        raise ValueError("degenerate ladder: fewer than 4 usable radii at every pivot")
    s = np.array(slopes)
    q1, med, q3 = np.percentile(s, [25, 50, 75])
    return EmpiricalDimension(float(med), float(q3 - q1), tuple(slopes), tuple(float(r) for r in radii))
