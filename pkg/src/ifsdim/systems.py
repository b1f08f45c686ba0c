"""Constructors for the example families and test fixtures."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .ifs_core import (
    AffineMap,
    AnnulusSeed,
    ComplexBranch,
    CubicMap,
    IfsSystem,
    IntervalSeed,
    ValidationError,
)

CUBIC_DIGITS = (0, 1, 3)


def cantor_affine(ratios: Sequence[float], offsets: Sequence[float], seed=(0.0, 1.0), name: str = "") -> IfsSystem:
    """Affine system ``x -> r_i*x + b_i`` on an interval seed (default ``[0, 1]``)."""
    if len(ratios) != len(offsets):
        raise ValidationError("ratios and offsets differ in length")
    for r in ratios:
        if not abs(r) < 1:
            raise ValidationError(f"ratio {r} is not a contraction")
    maps = [AffineMap(float(r), float(b)) for r, b in zip(ratios, offsets)]
    return IfsSystem(maps, IntervalSeed(float(seed[0]), float(seed[1])), name=name)


def middle_thirds() -> IfsSystem:
    return cantor_affine((1 / 3, 1 / 3), (0.0, 2 / 3), name="cantor")


def duplicated_binary() -> IfsSystem:
    """``{x/2, x/2 + 1/2, x/2 + 1/2}``: the second digit is listed twice."""
    return cantor_affine((0.5, 0.5, 0.5), (0.0, 0.5, 0.5), name="dupbin")


def coincident_pair() -> IfsSystem:
    return cantor_affine((0.5, 0.5), (0.0, 0.0), name="coincident")


def cubic_seed(lam: float) -> tuple[float, float]:
    return 0.0, 3.0 * lam / (1.0 - lam) + 0.1


def cubic_family(lam: float, eps: float = 0.0, seed: tuple[float, float] | None = None) -> IfsSystem:
    """Maps ``F_j(x) = lam*x + eps*x**2 + eps*x**3 + lam*j`` for ``j`` in (0, 1, 3).

    Symbol 2 of the returned system is the map with digit 3.
    """
    if not 0.25 <= lam <= 1 / 3 + 1e-15:
        raise ValidationError(f"lambda must lie in [1/4, 1/3], got {lam}")
    if eps < 0:
        raise ValidationError("epsilon must be non-negative")
    lo, hi = seed if seed is not None else cubic_seed(lam)
    maps = [CubicMap(float(lam), float(eps), lam * j) for j in CUBIC_DIGITS]
    return IfsSystem(maps, IntervalSeed(lo, hi), name=f"cubic(lam={lam}, eps={eps})")


@dataclass(frozen=True)
class JuliaMap:
    degree: int
    gamma: complex = 1.0 + 0.0j
    c: complex = 0.0j
    lower: tuple = ()


@dataclass(frozen=True)
class JuliaSpec:
    maps: tuple
    r_lo: float = 0.8
    r_hi: float = 1.25
    shrink: float = 0.8
    floor: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "maps", tuple(self.maps))


def mixed_julia(spec: JuliaSpec) -> IfsSystem:
    """IFS of all inverse branches of the maps ``gamma_j*z**d_j + c_j``.

    The annulus is shrunk towards the unit circle (log-radii scaled by
    ``spec.shrink``) until every branch validates or its width drops below
    ``spec.floor``.
    """
    if not spec.maps:
        raise ValidationError("no rational maps given")
    for jm in spec.maps:
        if any(v != 0 for v in jm.lower):
            raise ValidationError("lower-order coefficients are not supported; only gamma*z**d + c")
        if jm.degree < 2:
            raise ValidationError("degree must be at least 2")
    branches = [
        ComplexBranch(jm.degree, complex(jm.gamma), complex(jm.c), k) for jm in spec.maps for k in range(jm.degree)
    ]
    lo, hi = math.log(spec.r_lo), math.log(spec.r_hi)
    last = None
    while math.exp(hi) - math.exp(lo) >= spec.floor:
        try:
            return IfsSystem(branches, AnnulusSeed(math.exp(lo), math.exp(hi)), name="mixed-julia")
        except ValidationError as exc:
            last = exc
            lo, hi = lo * spec.shrink, hi * spec.shrink
    raise ValidationError(f"no annulus around the unit circle validates: {last}")


def quadratic_julia(c: complex = 0.05, r_lo: float = 0.8, r_hi: float = 1.25) -> IfsSystem:
    return mixed_julia(JuliaSpec((JuliaMap(2, 1.0, complex(c)),), r_lo, r_hi))


FIXTURES = {
    "cantor": middle_thirds,
    "dupbin": duplicated_binary,
    "coincident": coincident_pair,
    "cubic": lambda: cubic_family(0.25, 0.0),
}
