"""Conformal contraction systems on an interval or an annulus.

A system is an ordered tuple of maps ``phi_0 .. phi_{m-1}`` sharing a seed set
``V``. Words compose with the first symbol applied last, so
``apply_word((i, j), x) == phi_i(phi_j(x))``.

Enclosures are axis-aligned boxes computed with outward rounding; they are
the only geometric objects the overlap counters look at.
"""

from __future__ import annotations

import itertools
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import interval as iv

Word = tuple  # tuple[int, ...]

TWO_PI = 2.0 * math.pi
DEFAULT_COVER_CAP = 1 << 20


class ValidationError(ValueError):
    """A system, map or seed violates a structural invariant."""


def as_word(w: Iterable[int]) -> Word:
    return tuple(int(s) for s in w)


# -- seeds -------------------------------------------------------------------


@dataclass(frozen=True)
class IntervalSeed:
    lo: float
    hi: float

    dim = 1

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            raise ValidationError(f"bad seed interval [{self.lo}, {self.hi}]")

    @property
    def diameter(self) -> float:
        return self.hi - self.lo

    @property
    def anchor(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def box(self) -> tuple:
        return (self.lo, self.hi)

    def contains(self, x, tol: float = 0.0) -> bool:
        return self.lo - tol <= x <= self.hi + tol

    def random_points(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size)


@dataclass(frozen=True)
class AnnulusSeed:
    """Closed annulus ``r_lo <= |z| <= r_hi`` centred at the origin."""

    r_lo: float
    r_hi: float

    dim = 2

    def __post_init__(self):
        if not (0.0 < self.r_lo < self.r_hi and math.isfinite(self.r_hi)):
            raise ValidationError(f"bad annulus ({self.r_lo}, {self.r_hi})")

    @property
    def diameter(self) -> float:
        return 2.0 * self.r_hi

    @property
    def anchor(self) -> complex:
        # the centre of the annulus is not in V; use the midpoint radius on the
        # negative real axis, away from the branch cut
        return complex(-0.5 * (self.r_lo + self.r_hi), 0.0)

    @property
    def box(self) -> tuple:
        r = self.r_hi
        return (-r, r, -r, r)

    def contains(self, z, tol: float = 0.0) -> bool:
        return self.r_lo - tol <= abs(z) <= self.r_hi + tol

    def random_points(self, rng: np.random.Generator, size: int) -> np.ndarray:
        r = np.sqrt(rng.uniform(self.r_lo**2, self.r_hi**2, size))
        t = rng.uniform(0.0, TWO_PI, size)
        return r * np.exp(1j * t)


Seed = IntervalSeed | AnnulusSeed


# -- enclosures --------------------------------------------------------------


@dataclass(frozen=True)
class Enclosure:
    """Axis-aligned box; ``lo``/``hi`` hold one entry per real coordinate."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("coordinate count mismatch")
        for a, b in zip(self.lo, self.hi):
            if not (math.isfinite(a) and math.isfinite(b) and a <= b):
                raise ValueError(f"invalid enclosure bounds {self.lo} {self.hi}")

    @classmethod
    def from_box(cls, box: Sequence[float]) -> "Enclosure":
        return cls(tuple(float(v) for v in box[0::2]), tuple(float(v) for v in box[1::2]))

    @property
    def box(self) -> tuple:
        return tuple(v for pair in zip(self.lo, self.hi) for v in pair)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def widths(self) -> tuple:
        return tuple(b - a for a, b in zip(self.lo, self.hi))

    @property
    def diameter(self) -> float:
        return math.hypot(*self.widths)

    @property
    def center(self):
        c = [0.5 * (a + b) for a, b in zip(self.lo, self.hi)]
        return c[0] if self.dim == 1 else complex(c[0], c[1])

    def inflate(self, eta: float) -> "Enclosure":
        return Enclosure(tuple(a - eta for a in self.lo), tuple(b + eta for b in self.hi))

    def contains(self, x, tol: float = 0.0) -> bool:
        coords = _coords(x)
        return all(a - tol <= c <= b + tol for a, b, c in zip(self.lo, self.hi, coords))

    def contains_box(self, other: "Enclosure", tol: float = 0.0) -> bool:
        return all(
            a - tol <= c and d <= b + tol
            for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi)
        )

    def overlap(self, other: "Enclosure") -> tuple:
        """Per-coordinate overlap length (negative when separated)."""
        return tuple(
            min(b, d) - max(a, c) for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi)
        )

    def meets(self, other: "Enclosure", margin: float = 0.0) -> bool:
        """Interiors overlap by more than ``margin`` in every coordinate."""
        return all(v > margin for v in self.overlap(other))

    def hull(self, other: "Enclosure") -> "Enclosure":
        return Enclosure(
            tuple(min(a, c) for a, c in zip(self.lo, other.lo)),
            tuple(max(b, d) for b, d in zip(self.hi, other.hi)),
        )


def _coords(x) -> tuple:
    if isinstance(x, complex) or np.iscomplexobj(x):
        return (float(np.real(x)), float(np.imag(x)))
    return (float(x),)


# -- maps --------------------------------------------------------------------


class ConformalMap(ABC):
    """One contraction of an IFS."""

    dim: int = 1
    kind: str = ""

    @abstractmethod
    def __call__(self, x):
        ...

    @abstractmethod
    def evaluate(self, x: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def deriv_abs(self, x):
        """``|phi'(x)|``; vectorised."""

    @abstractmethod
    def derivative_bounds(self, seed, cells: int) -> tuple[float, float]:
        """Rigorous ``(min, max)`` of ``|phi'|`` over the seed."""

    @abstractmethod
    def log_deriv_lipschitz(self, seed, cells: int) -> float:
        """Upper bound on the Lipschitz constant of ``log|phi'|`` over the seed."""

    @abstractmethod
    def image_pieces(self, piece: tuple, seed) -> list:
        """Pieces covering the image of ``piece``.

        A piece is an interval ``(lo, hi)`` in 1-D and a polar sector
        ``(r0, r1, a0, a1)`` in 2-D.
        """

    def to_dict(self) -> dict:
        raise NotImplementedError


class Map1D(ConformalMap):
    dim = 1

    @abstractmethod
    def image(self, lo, hi):
        """Vectorised outer enclosure of the image of ``[lo, hi]``."""

    @abstractmethod
    def preimage(self, lo, hi, seed):
        """Vectorised outer enclosure of ``phi^{-1}([lo, hi])`` near the seed.

        Entries whose preimage misses a neighbourhood of the seed come back as
        ``(+inf, -inf)``.
        """

    def image_pieces(self, piece, seed):
        lo, hi = self.image(np.float64(piece[0]), np.float64(piece[1]))
        return [(float(lo), float(hi))]


@dataclass(frozen=True, eq=True)
class AffineMap(Map1D):
    a: float
    b: float

    kind = "affine1d"

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)) or self.a == 0:
            raise ValidationError(f"affine map needs a finite non-zero slope, got a={self.a}")

    def __call__(self, x):
        return self.a * x + self.b

    def evaluate(self, x):
        return self.a * x + self.b

    def deriv_abs(self, x):
        return np.full_like(np.asarray(x, dtype=float), abs(self.a)) if np.ndim(x) else abs(self.a)

    def derivative_bounds(self, seed, cells):
        return abs(self.a), abs(self.a)

    def log_deriv_lipschitz(self, seed, cells):
        return 0.0

    def image(self, lo, hi):
        lo, hi = iv.scale(lo, hi, self.a)
        return iv.shift(lo, hi, self.b)

    def preimage(self, lo, hi, seed):
        lo, hi = iv.shift(lo, hi, -self.b)
        return iv.div_scalar(lo, hi, self.a)

    def to_dict(self):
        return {"a": self.a, "b": self.b}


@dataclass(frozen=True, eq=True)
class CubicMap(Map1D):
    """``x -> lam*x + eps*x**2 + eps*x**3 + offset``."""

    lam: float
    eps: float
    offset: float

    kind = "cubic1d"

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.lam, self.eps, self.offset)):
            raise ValidationError("cubic map coefficients must be finite")
        if self.lam <= 0 or self.eps < 0:
            raise ValidationError(f"cubic map needs lam > 0 and eps >= 0, got {self.lam}, {self.eps}")

    def __call__(self, x):
        return self.lam * x + self.eps * x * x + self.eps * x * x * x + self.offset

    evaluate = __call__

    def deriv(self, x):
        return self.lam + 2.0 * self.eps * x + 3.0 * self.eps * x * x

    def deriv_abs(self, x):
        return np.abs(self.deriv(x))

    def eval_iv(self, lo, hi):
        t = iv.scale(lo, hi, self.lam)
        if self.eps:
            x2 = iv.sqr(lo, hi)
            x3 = iv.powi(lo, hi, 3)
            t = iv.add(*t, *iv.scale(*x2, self.eps))
            t = iv.add(*t, *iv.scale(*x3, self.eps))
        return iv.shift(*t, self.offset)

    def deriv_iv(self, lo, hi):
        t = iv.shift(*iv.scale(lo, hi, 2.0 * self.eps), self.lam)
        if self.eps:
            t = iv.add(*t, *iv.scale(*iv.sqr(lo, hi), 3.0 * self.eps))
        return t

    def _cells(self, seed, cells):
        edges = np.linspace(seed.lo, seed.hi, cells + 1)
        return edges[:-1], edges[1:]

    def derivative_bounds(self, seed, cells):
        dlo, dhi = self.deriv_iv(*self._cells(seed, cells))
        if np.any(dlo <= 0):
            raise ValidationError("cubic map is not monotone on the seed interval")
        return float(dlo.min()), float(dhi.max())

    def log_deriv_lipschitz(self, seed, cells):
        if self.eps == 0:
            return 0.0
        lo, hi = self._cells(seed, cells)
        # |phi''| / |phi'| with phi'' = 2 eps + 6 eps x
        slo, shi = iv.shift(*iv.scale(lo, hi, 6.0 * self.eps), 2.0 * self.eps)
        num = np.maximum(np.abs(slo), np.abs(shi))
        dlo, _ = self.deriv_iv(lo, hi)
        return float(iv.up(np.max(num / dlo)))

    def image(self, lo, hi):
        return self.eval_iv(lo, hi)

    def preimage(self, lo, hi, seed):
        if self.eps == 0:
            lo, hi = iv.shift(lo, hi, -self.offset)
            return iv.div_scalar(lo, hi, self.lam)
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        margin = 0.01 * seed.diameter
        a, b = seed.lo - margin, seed.hi + margin
        f_a = float(self.eval_iv(a, a)[0])
        f_b = float(self.eval_iv(b, b)[1])
        miss = (hi < f_a) | (lo > f_b)
        ylo = self._certified_inverse(np.clip(lo, f_a, f_b), a, b, lower=True)
        yhi = self._certified_inverse(np.clip(hi, f_a, f_b), a, b, lower=False)
        ylo = np.where(miss, np.inf, ylo)
        yhi = np.where(miss, -np.inf, yhi)
        return ylo, yhi

    def _certified_inverse(self, t, a, b, lower):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        y = np.clip((t - self.offset) / self.lam, a, b)
        for _ in range(60):
            step = (self(y) - t) / self.deriv(y)
            y = np.clip(y - step, a, b)
            if np.all(np.abs(step) <= 1e-17 + 1e-16 * np.abs(y)):
                break
        # walk outward until interval evaluation certifies the side of the root
        for _ in range(64):
            flo, fhi = self.eval_iv(y, y)
            bad = (fhi > t) if lower else (flo < t)
            bad &= (y > a) if lower else (y < b)
            if not bad.any():
                break
            width = np.maximum(np.abs(y) * 2e-16, 5e-324) * 4
            y = np.where(bad, y - width if lower else y + width, y)
        return y if y.shape != () else float(y)

    def to_dict(self):
        return {"lambda": self.lam, "epsilon": self.eps, "offset": self.offset}


@dataclass(frozen=True, eq=True)
class ComplexBranch(ConformalMap):
    """Branch ``k`` of the inverse of ``R(z) = gamma*z**d + c``.

    ``f(w) = |u|**(1/d) * exp(i*(arg u + 2*pi*k)/d)`` with ``u = (w - c)/gamma``
    and ``arg u`` taken in ``[0, 2*pi)``. The image of branch ``k`` lies in the
    sector of arguments ``[2*pi*k/d, 2*pi*(k+1)/d)``.
    """

    degree: int
    gamma: complex
    c: complex
    branch: int

    dim = 2
    kind = "julia2d"

    def __post_init__(self):
        if self.degree < 2:
            raise ValidationError("degree must be >= 2")
        if not 0 <= self.branch < self.degree:
            raise ValidationError(f"branch index {self.branch} out of range for degree {self.degree}")
        if self.gamma == 0:
            raise ValidationError("leading coefficient must be non-zero")

    def forward(self, z):
        return self.gamma * z**self.degree + self.c

    def __call__(self, w):
        return complex(self.evaluate(np.asarray(w, dtype=complex)))

    def evaluate(self, w):
        u = (np.asarray(w, dtype=complex) - self.c) / self.gamma
        theta = np.mod(np.angle(u), TWO_PI)
        theta = np.where(theta >= TWO_PI, 0.0, theta)
        d = self.degree
        return np.abs(u) ** (1.0 / d) * np.exp(1j * (theta + TWO_PI * self.branch) / d)

    def deriv_abs(self, w):
        d = self.degree
        return (1.0 / d) * np.abs(np.asarray(w) - self.c) ** ((1.0 - d) / d) * abs(self.gamma) ** (-1.0 / d)

    def _u_modulus_bounds(self, seed):
        g, c = abs(self.gamma), abs(self.c)
        if seed.r_lo <= c:
            raise ValidationError("the constant term reaches the inner radius of the annulus")
        return (seed.r_lo - c) / g, (seed.r_hi + c) / g

    def image_radius_range(self, seed):
        lo, hi = self._u_modulus_bounds(seed)
        d = self.degree
        return lo ** (1.0 / d), hi ** (1.0 / d)

    def derivative_bounds(self, seed, cells):
        d = self.degree
        c = abs(self.c)
        near, far = seed.r_lo - c, seed.r_hi + c
        if near <= 0:
            raise ValidationError("the constant term reaches the inner radius of the annulus")
        g = abs(self.gamma) ** (-1.0 / d) / d
        hi = g * near ** ((1.0 - d) / d)
        lo = g * far ** ((1.0 - d) / d)
        return float(iv.down(lo, 8)), float(iv.up(hi, 8))

    def log_deriv_lipschitz(self, seed, cells):
        near = seed.r_lo - abs(self.c)
        return (self.degree - 1.0) / self.degree / near

    def image_pieces(self, piece, seed):
        """Sectors covering the image of the sector ``(r0, r1, a0, a1)``.

        Two sound bounds for the argument of ``u = (w - c)/gamma`` are formed:
        the sector widened by ``asin(|c|/r0)``, and the argument range of the
        translated bounding box. The narrower one is kept; the first wins for
        wide sectors, the second once pieces are small.
        """
        r0, r1, a0, a1 = piece
        g, cabs = abs(self.gamma), abs(self.c)
        rot = math.atan2(self.gamma.imag, self.gamma.real)
        blo, bhi = self._u_modulus_bounds(seed)
        rlo, rhi = max((r0 - cabs) / g, blo), min((r1 + cabs) / g, bhi)

        if cabs == 0:
            wide = _wrap(a0 - rot - ANGLE_PAD, a1 - rot + ANGLE_PAD)
        elif cabs < r0:
            delta = math.asin(cabs / r0) + ANGLE_PAD
            wide = _wrap(a0 - delta - rot, a1 + delta - rot)
        else:
            wide = [(0.0, TWO_PI)]

        ub = iv.cshift(tuple(np.float64(v) for v in iv.sector_box(*piece)), -self.c)
        ub = iv.cmul(ub, _point_box(1.0 / self.gamma))
        xl, xh, yl, yh = (float(v) for v in ub)
        boxed = iv.angle_ranges(xl, xh, yl, yh)
        mlo, mhi = iv.modulus_range(xl, xh, yl, yh)
        rlo, rhi = max(rlo, mlo), min(rhi, mhi)
        if rlo > rhi:
            return []
        half = self._half_plane(a0, a1)
        if half is not None:
            boxed, wide = _clip(boxed, *half), _clip(wide, *half)
        ranges = boxed if _measure(boxed) < _measure(wide) else wide
        if not ranges:
            return []

        d = self.degree
        q0 = float(iv.down(max(rlo, 0.0) ** (1.0 / d), iv.LIBM_ULPS))
        q1 = float(iv.up(rhi ** (1.0 / d), iv.LIBM_ULPS))
        k = TWO_PI * self.branch
        return [(q0, q1, (b0 + k) / d, (b1 + k) / d) for b0, b1 in ranges]

    def _half_plane(self, a0: float, a1: float):
        """Argument range of ``u`` forced by the sign of ``Im w``, when known.

        With real positive ``gamma`` and real ``c``, ``Im u`` has the sign of
        ``Im w``, so a piece inside a closed half plane cannot wrap across the
        cut. This keeps padding from pushing slivers to the far end of a branch.
        """
        if self.gamma.imag != 0 or self.gamma.real <= 0 or self.c.imag != 0:
            return None
        if 0.0 <= a0 and a1 <= math.pi:
            return 0.0, math.pi
        if math.pi <= a0 and a1 <= TWO_PI:
            return math.pi, TWO_PI
        return None

    def sector(self) -> tuple[float, float]:
        d = self.degree
        return TWO_PI * self.branch / d, TWO_PI * (self.branch + 1) / d

    def preimage_box(self, box, pad: float = 1e-12):
        """Outer box of ``R(box)`` if ``box`` can meet this branch's image sector."""
        s0, s1 = self.sector()
        hit = any(a0 <= s1 + pad and s0 - pad <= a1 for a0, a1 in iv.angle_ranges(*box))
        if not hit:
            return None
        b = tuple(np.float64(v) for v in box)
        z = iv.cpow(b, self.degree)
        z = iv.cmul(z, _point_box(self.gamma))
        z = iv.cshift(z, self.c)
        return tuple(float(v) for v in z)

    def to_dict(self):
        return {
            "degree": self.degree,
            "gamma": [self.gamma.real, self.gamma.imag],
            "c": [self.c.real, self.c.imag],
            "branch": self.branch,
        }


ANGLE_PAD = 1e-14


def _wrap(b0: float, b1: float) -> list:
    """Split the angle range [b0, b1] into pieces of [0, 2pi]."""
    if b1 - b0 >= TWO_PI:
        return [(0.0, TWO_PI)]
    s = math.floor(b0 / TWO_PI)
    b0, b1 = b0 - TWO_PI * s, b1 - TWO_PI * s
    if b1 <= TWO_PI:
        return [(b0, b1)]
    return [(b0, TWO_PI), (0.0, b1 - TWO_PI)]


def _clip(ranges, lo: float, hi: float) -> list:
    out = [(max(a, lo), min(b, hi)) for a, b in ranges]
    return [(a, b) for a, b in out if a <= b]


def _measure(ranges) -> float:
    return sum(b - a for a, b in ranges)


def _point_box(z: complex):
    x, y = np.float64(z.real), np.float64(z.imag)
    # 1/gamma and friends are rounded once; widen by an ulp each way
    return iv.down(x), iv.up(x), iv.down(y), iv.up(y)


# -- systems -----------------------------------------------------------------


class ContractionBounds(NamedTuple):
    kappa_min: float
    kappa_max: float
    distortion: float


@dataclass(frozen=True, eq=False)
class IfsSystem:
    """Finite conformal IFS ``maps`` on the seed ``seed``.

    Construction validates containment ``phi_i(V) in V`` and uniform
    contraction; a :class:`ValidationError` names the first violation.
    """

    maps: tuple
    seed: Seed
    name: str = ""
    grid_cells: int = 1024

    def __post_init__(self):
        object.__setattr__(self, "maps", tuple(self.maps))
        if not self.maps:
            raise ValidationError("a system needs at least one map")
        for i, f in enumerate(self.maps):
            if f.dim != self.seed.dim:
                raise ValidationError(f"map {i} has dimension {f.dim}, seed has {self.seed.dim}")
        self._check_containment()
        b = self.contraction_bounds()
        if b.kappa_max >= 1.0:
            raise ValidationError(f"system is not uniformly contracting: kappa_max = {b.kappa_max}")

    # basic shape ------------------------------------------------------------
    @property
    def m(self) -> int:
        return len(self.maps)

    @property
    def dim(self) -> int:
        return self.seed.dim

    @property
    def tolerance(self) -> float:
        return 1e-9 * self.seed.diameter

    def _check_containment(self):
        tol = self.tolerance
        for i, f in enumerate(self.maps):
            if self.dim == 1:
                lo, hi = f.image(np.float64(self.seed.lo), np.float64(self.seed.hi))
                if lo < self.seed.lo - tol or hi > self.seed.hi + tol:
                    raise ValidationError(
                        f"map {i} sends V=[{self.seed.lo}, {self.seed.hi}] to [{float(lo)}, {float(hi)}], not inside V"
                    )
            else:
                rlo, rhi = f.image_radius_range(self.seed)
                if rlo < self.seed.r_lo - tol or rhi > self.seed.r_hi + tol:
                    raise ValidationError(
                        f"branch {i} sends the annulus to radii [{rlo}, {rhi}], outside "
                        f"[{self.seed.r_lo}, {self.seed.r_hi}]"
                    )

    def _check_symbol(self, i: int):
        if not 0 <= i < self.m:
            raise ValueError(f"symbol {i} out of range for alphabet of size {self.m}")

    def _check_point(self, x):
        if not self.seed.contains(x, self.tolerance):
            raise ValueError(f"point {x} lies outside the seed set")

    # point evaluation -------------------------------------------------------
    def apply_map(self, i: int, x):
        self._check_symbol(i)
        self._check_point(x)
        return self.maps[i](x)

    def apply_word(self, w: Sequence[int], x):
        self._check_point(x)
        for s in reversed(as_word(w)):
            self._check_symbol(s)
            x = self.maps[s](x)
        return x

    def apply_words(self, words: np.ndarray, x0) -> np.ndarray:
        """Vectorised ``apply_word`` over the rows of a 2-D symbol array."""
        words = np.asarray(words, dtype=np.int64)
        dtype = complex if self.dim == 2 else float
        x = np.full(words.shape[0], x0, dtype=dtype)
        for pos in range(words.shape[1] - 1, -1, -1):
            col = words[:, pos]
            for i, f in enumerate(self.maps):
                sel = col == i
                if sel.any():
                    x[sel] = f.evaluate(x[sel])
        return x

    def log_word_derivative(self, w: Sequence[int], x) -> float:
        self._check_point(x)
        total = 0.0
        for s in reversed(as_word(w)):
            self._check_symbol(s)
            total += math.log(float(self.maps[s].deriv_abs(x)))
            x = self.maps[s](x)
        return total

    def word_derivative_modulus(self, w: Sequence[int], x) -> float:
        """``|phi_w'(x)|`` by the chain rule along the orbit of ``x``."""
        return math.exp(self.log_word_derivative(w, x))

    def log_word_derivatives(self, words: np.ndarray, x0) -> np.ndarray:
        words = np.asarray(words, dtype=np.int64)
        dtype = complex if self.dim == 2 else float
        x = np.full(words.shape[0], x0, dtype=dtype)
        total = np.zeros(words.shape[0])
        affine = all(isinstance(f, AffineMap) for f in self.maps)
        if affine:
            logs = np.log([abs(f.a) for f in self.maps])
            return logs[words].sum(axis=1)
        for pos in range(words.shape[1] - 1, -1, -1):
            col = words[:, pos]
            for i, f in enumerate(self.maps):
                sel = col == i
                if sel.any():
                    total[sel] += np.log(f.deriv_abs(x[sel]))
                    x[sel] = f.evaluate(x[sel])
        return total

    # enclosures -------------------------------------------------------------
    @property
    def seed_piece(self) -> tuple:
        if self.dim == 1:
            return (self.seed.lo, self.seed.hi)
        return (self.seed.r_lo, self.seed.r_hi, 0.0, TWO_PI)

    def piece_box(self, piece) -> tuple:
        return tuple(piece) if self.dim == 1 else iv.sector_box(*piece)

    def image_pieces(self, i: int, pieces: list) -> list:
        f = self.maps[i]
        return _dedupe([q for p in pieces for q in f.image_pieces(p, self.seed)])

    def enclosure_pieces(self, w: Sequence[int]) -> list:
        pieces = [self.seed_piece]
        for s in reversed(as_word(w)):
            self._check_symbol(s)
            pieces = self.image_pieces(s, pieces)
        return pieces

    def enclosure(self, w: Sequence[int]) -> Enclosure:
        """Outer box of ``phi_w(V)``."""
        pieces = [Enclosure.from_box(self.piece_box(p)) for p in self.enclosure_pieces(w)]
        out = pieces[0]
        for p in pieces[1:]:
            out = out.hull(p)
        return out

    def limit_set_cover(self, depth: int, cap: int = DEFAULT_COVER_CAP) -> list:
        """``[(word, enclosure)]`` for every word of length ``depth``."""
        if depth < 0:
            raise ValueError("depth must be >= 0")
        if self.m**depth > cap:
            raise MemoryError(f"cover of depth {depth} needs {self.m**depth} cells, cap is {cap}")
        if depth == 0:
            return [((), Enclosure.from_box(self.seed.box))]
        return [(w, self.enclosure(w)) for w in itertools.product(range(self.m), repeat=depth)]

    def pi_point(self, w: Sequence[int]):
        """``(phi_w(anchor), r)`` with ``|pi(omega) - point| <= r`` for every extension of ``w``."""
        w = as_word(w)
        if not w:
            raise ValueError("pi_point needs a non-empty word")
        x = self.apply_word(w, self.seed.anchor)
        enc = self.enclosure(w)
        c = _coords(x)
        far = [max(abs(v - a), abs(b - v)) for v, a, b in zip(c, enc.lo, enc.hi)]
        return x, float(iv.up(math.hypot(*far), 2))

    # contraction ------------------------------------------------------------
    def contraction_bounds(self) -> ContractionBounds:
        return self._bounds

    @cached_property
    def _bounds(self) -> ContractionBounds:
        lo, hi, lip = math.inf, 0.0, 0.0
        for f in self.maps:
            a, b = f.derivative_bounds(self.seed, self.grid_cells)
            lo, hi = min(lo, a), max(hi, b)
            lip = max(lip, f.log_deriv_lipschitz(self.seed, self.grid_cells))
        if hi >= 1.0:
            return ContractionBounds(lo, hi, math.inf)
        # summed oscillation of log|phi'| along nested images of V
        distortion = math.exp(lip * self.seed.diameter / (1.0 - hi)) if lip else 1.0
        return ContractionBounds(lo, hi, distortion)

    def to_dict(self) -> dict:
        kind = self.maps[0].kind
        seed = (
            [self.seed.lo, self.seed.hi]
            if self.dim == 1
            else {"r_lo": self.seed.r_lo, "r_hi": self.seed.r_hi}
        )
        return {"type": kind, "maps": [f.to_dict() for f in self.maps], "seed": seed}


def _dedupe(boxes: list) -> list:
    seen, out = set(), []
    for b in boxes:
        if b not in seen:
            seen.add(b)
            out.append(b)
    return out
