"""Outward-rounded interval primitives.

Every function works on float64 scalars or numpy arrays of matching shape and
returns ``(lo, hi)`` pairs. Results of basic operations are computed in
round-to-nearest and then pushed one ulp outward, which is enough to contain
the exact result of a correctly rounded IEEE operation. Library functions
(``sqrt``, ``log``, ``atan2``, ``cos``, ...) are padded by ``LIBM_ULPS``.
"""

from __future__ import annotations

import math

import numpy as np

LIBM_ULPS = 4
_TWO_PI = 2.0 * math.pi


def down(x, steps: int = 1):
    x = np.asarray(x, dtype=float)
    for _ in range(steps):
        x = np.nextafter(x, -np.inf)
    return x


def up(x, steps: int = 1):
    x = np.asarray(x, dtype=float)
    for _ in range(steps):
        x = np.nextafter(x, np.inf)
    return x


def point(x):
    x = np.asarray(x, dtype=float)
    return x, x


def add(alo, ahi, blo, bhi):
    return down(alo + blo), up(ahi + bhi)


def sub(alo, ahi, blo, bhi):
    return down(alo - bhi), up(ahi - blo)


def mul(alo, ahi, blo, bhi):
    p1, p2, p3, p4 = alo * blo, alo * bhi, ahi * blo, ahi * bhi
    lo = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4))
    hi = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4))
    return down(lo), up(hi)


def scale(alo, ahi, c: float):
    """Multiply by an exactly representable scalar."""
    if c >= 0:
        return down(alo * c), up(ahi * c)
    return down(ahi * c), up(alo * c)


def div_scalar(alo, ahi, c: float):
    if c == 0:
        raise ZeroDivisionError("interval division by zero")
    if c > 0:
        return down(alo / c), up(ahi / c)
    return down(ahi / c), up(alo / c)


def shift(alo, ahi, c: float):
    return down(alo + c), up(ahi + c)


def sqr(alo, ahi):
    alo = np.asarray(alo, dtype=float)
    ahi = np.asarray(ahi, dtype=float)
    a2, b2 = alo * alo, ahi * ahi
    lo = np.where((alo <= 0) & (ahi >= 0), 0.0, np.minimum(a2, b2))
    hi = np.maximum(a2, b2)
    return np.maximum(down(lo), 0.0), up(hi)


def powi(alo, ahi, n: int):
    """Integer power ``n >= 1`` with the tight even-power rule."""
    if n == 1:
        return np.asarray(alo, dtype=float), np.asarray(ahi, dtype=float)
    if n % 2 == 0:
        lo, hi = sqr(alo, ahi)
        return powi(lo, hi, n // 2) if n > 2 else (lo, hi)
    lo, hi = powi(alo, ahi, n - 1)
    return mul(lo, hi, alo, ahi)


def hull(alo, ahi, blo, bhi):
    return np.minimum(alo, blo), np.maximum(ahi, bhi)


def intersects(alo, ahi, blo, bhi, margin: float = 0.0):
    """True where [alo, ahi] and [blo, bhi] meet, after inflating by ``margin``."""
    return (alo <= bhi + margin) & (blo <= ahi + margin)


def pad_libm(lo, hi):
    return down(lo, LIBM_ULPS), up(hi, LIBM_ULPS)


# -- complex boxes -----------------------------------------------------------
# A box is (xlo, xhi, ylo, yhi); points are x + iy.


def cmul(a, b):
    """Product of two complex boxes."""
    axl, axh, ayl, ayh = a
    bxl, bxh, byl, byh = b
    rr = mul(axl, axh, bxl, bxh)
    ii = mul(ayl, ayh, byl, byh)
    ri = mul(axl, axh, byl, byh)
    ir = mul(ayl, ayh, bxl, bxh)
    re = sub(rr[0], rr[1], ii[0], ii[1])
    im = add(ri[0], ri[1], ir[0], ir[1])
    return re[0], re[1], im[0], im[1]


def cmul_point(a, z: complex):
    return cmul(a, (z.real, z.real, z.imag, z.imag))


def cpow(a, n: int):
    out = a
    for _ in range(n - 1):
        out = cmul(out, a)
    return out


def cshift(a, z: complex):
    xl, xh, yl, yh = a
    x = shift(xl, xh, z.real)
    y = shift(yl, yh, z.imag)
    return x[0], x[1], y[0], y[1]


def modulus_range(xlo, xhi, ylo, yhi):
    """Range of |z| over a box (scalars)."""
    dx = 0.0 if xlo <= 0.0 <= xhi else min(abs(xlo), abs(xhi))
    dy = 0.0 if ylo <= 0.0 <= yhi else min(abs(ylo), abs(yhi))
    fx = max(abs(xlo), abs(xhi))
    fy = max(abs(ylo), abs(yhi))
    lo = float(down(math.hypot(dx, dy), LIBM_ULPS))
    hi = float(up(math.hypot(fx, fy), LIBM_ULPS))
    return max(lo, 0.0), hi


def _angle(y: float, x: float) -> float:
    t = math.atan2(y, x)
    return t + _TWO_PI if t < 0 else t


def angle_ranges(xlo, xhi, ylo, yhi, pad: float = 1e-15):
    """Arguments in [0, 2pi) covered by a box, as one or two closed ranges.

    The cut sits on the positive real axis, so a box straddling it yields one
    range starting at 0 and one ending at 2pi.
    """
    if xlo <= 0.0 <= xhi and ylo <= 0.0 <= yhi:
        return [(0.0, _TWO_PI)]
    if xhi > 0.0 and ylo < 0.0 <= yhi:
        # xlo > 0 here, otherwise the box would contain the origin
        top = _angle(yhi, xlo) + pad
        bottom = _angle(ylo, xlo) - pad
        return [(0.0, top), (bottom, _TWO_PI)]
    corners = [_angle(y, x) for x in (xlo, xhi) for y in (ylo, yhi)]
    return [(max(min(corners) - pad, 0.0), min(max(corners) + pad, _TWO_PI))]


def _trig_range(a0: float, a1: float, fn, peaks, troughs):
    vals = [fn(a0), fn(a1)]
    lo, hi = min(vals), max(vals)
    for base, target in ((peaks, 1.0), (troughs, -1.0)):
        k = math.ceil((a0 - base) / _TWO_PI)
        if base + k * _TWO_PI <= a1:
            if target > 0:
                hi = 1.0
            else:
                lo = -1.0
    return lo, hi


def sector_box(r0: float, r1: float, a0: float, a1: float):
    """Bounding box of the polar sector r in [r0, r1], angle in [a0, a1]."""
    clo, chi = _trig_range(a0, a1, math.cos, 0.0, math.pi)
    slo, shi = _trig_range(a0, a1, math.sin, math.pi / 2, 3 * math.pi / 2)
    xlo = min(r0 * clo, r1 * clo)
    xhi = max(r0 * chi, r1 * chi)
    ylo = min(r0 * slo, r1 * slo)
    yhi = max(r0 * shi, r1 * shi)
    # cos/sin and the products carry a few ulps; pad relative to the radius
    slack = 4e-16 * r1
    return (
        float(down(xlo - slack, LIBM_ULPS)),
        float(up(xhi + slack, LIBM_ULPS)),
        float(down(ylo - slack, LIBM_ULPS)),
        float(up(yhi + slack, LIBM_ULPS)),
    )
