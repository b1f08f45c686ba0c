import cmath
import math

import numpy as np
import pytest

from ifsdim.ifs_core import ValidationError
from ifsdim.systems import (
    FIXTURES,
    JuliaMap,
    JuliaSpec,
    cantor_affine,
    cubic_family,
    cubic_seed,
    mixed_julia,
    quadratic_julia,
)


def test_fixtures_validate():
    for make in FIXTURES.values():
        s = make()
        assert s.contraction_bounds().kappa_max < 1


def test_cantor_affine_errors():
    with pytest.raises(ValidationError):
        cantor_affine((1.2,), (0.0,))
    with pytest.raises(ValidationError):
        cantor_affine((0.5, 0.5), (0.0,))


def test_cubic_examples():
    s = cubic_family(0.25)
    assert (s.seed.lo, s.seed.hi) == pytest.approx((0.0, 1.1))
    assert [f.offset for f in s.maps] == pytest.approx([0.0, 0.25, 0.75])
    s = cubic_family(1 / 3)
    assert s.seed.hi == pytest.approx(1.6)
    assert s.enclosure((0,)).hi[0] >= s.enclosure((1,)).lo[0]
    assert cubic_family(0.25, 1e-3).contraction_bounds().kappa_max < 0.26
    with pytest.raises(ValidationError):
        cubic_family(0.2)
    with pytest.raises(ValidationError):
        cubic_family(0.25, 1.0)


@pytest.mark.parametrize("lam", [0.25, 0.28, 0.3, 1 / 3])
def test_cubic_image_intersections(lam):
    s = cubic_family(lam)
    e0, e1, e3 = (s.enclosure((i,)) for i in range(3))
    assert min(e0.overlap(e1)) >= 0
    assert max(e0.overlap(e3)) < 0 and max(e1.overlap(e3)) < 0


def test_cubic_seed_formula():
    assert cubic_seed(0.3) == pytest.approx((0.0, 0.9 / 0.7 + 0.1))


def test_julia_examples():
    s = quadratic_julia(0.0)
    assert s.m == 2
    assert s.contraction_bounds().kappa_max <= 0.559 + 1e-3
    s = quadratic_julia(0.05)
    assert s.m == 2 and s.contraction_bounds().kappa_max < 0.6
    s = mixed_julia(JuliaSpec((JuliaMap(2), JuliaMap(3))))
    assert s.m == 5


def test_julia_branch_completeness(rng):
    spec = JuliaSpec((JuliaMap(2, 1.0, 0.05), JuliaMap(3, cmath.exp(0.3j), 0.02j)))
    s = mixed_julia(spec)
    w = s.seed.random_points(rng, 1000)
    k = 0
    for jm in spec.maps:
        for b in range(jm.degree):
            z = s.maps[k].evaluate(w)
            assert np.max(np.abs(jm.gamma * z**jm.degree + jm.c - w)) < 1e-10
            k += 1
    # the branches of one map are distinct preimages
    z = np.stack([s.maps[i].evaluate(w) for i in range(2)])
    assert np.min(np.abs(z[0] - z[1])) > 0.1


def test_julia_rejections():
    with pytest.raises(ValidationError):
        mixed_julia(JuliaSpec((JuliaMap(2, 1.0, 0.0, (0.01,)),)))
    with pytest.raises(ValidationError):
        mixed_julia(JuliaSpec((JuliaMap(1),)))
    with pytest.raises(ValidationError):
        mixed_julia(JuliaSpec((JuliaMap(2, 1.0, 0.9),)))
    with pytest.raises(ValidationError):
        mixed_julia(JuliaSpec(()))
