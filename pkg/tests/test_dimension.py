import math

import numpy as np
import pytest

from ifsdim.dimension import (
    BoundWarning,
    DimensionReport,
    PartitionScheme,
    default_partition,
    dimension_drop,
    empirical_pointwise_dimension,
    exact_lyapunov,
    hd_formula,
    lyapunov,
    qint_lower_bound,
    scm_lower_bound,
    self_conformal_dimension,
    verify_partition,
)
from ifsdim.systems import cantor_affine, coincident_pair, cubic_family, duplicated_binary, middle_thirds
from ifsdim.thermo import LocalPotential, bernoulli_measure, equilibrium_measure

LOG2, LOG3 = math.log(2), math.log(3)
CANTOR_DIM = 0.6309297535714574  # log 2 / log 3
DUPBIN_DIM = 0.9182958340544898  # (log 3 - (2/3) log 2) / log 2
CUBIC_SCM = 0.4591479170272449  # (log 3 - (2/3) log 2) / log 4


def test_hd_formula_examples():
    assert hd_formula(LOG2, 0.0, -LOG3) == pytest.approx(CANTOR_DIM, abs=1e-15)
    assert hd_formula(LOG2, LOG2, -LOG2) == 0.0
    assert hd_formula(LOG3, 2 / 3 * LOG2, -LOG2) == pytest.approx(DUPBIN_DIM, abs=1e-15)
    assert hd_formula(0.5, 0.0, -0.7) == 0.5 / 0.7
    assert hd_formula(0.5, 0.5 + 5e-13, -1.0) == 0.0
    with pytest.raises(ValueError):
        hd_formula(0.5, 0.6, -1.0)
    with pytest.raises(ValueError):
        hd_formula(0.5, 0.1, 0.2)


def test_lyapunov_examples():
    s = middle_thirds()
    est = lyapunov(s, bernoulli_measure([0.5, 0.5]), 50, 20, seed=1)
    assert est.chi == pytest.approx(-LOG3, abs=1e-14) and est.exact == pytest.approx(-LOG3)
    s = cantor_affine((0.5, 0.25), (0.0, 0.75))
    est = lyapunov(s, bernoulli_measure([0.5, 0.5]), 1000, 200, seed=2)
    assert est.exact == pytest.approx(-1.5 * LOG2, abs=1e-15)
    assert abs(est.chi - est.exact) <= 3 * est.stderr
    s = cubic_family(0.25, 1e-3)
    b = s.contraction_bounds()
    est = lyapunov(s, bernoulli_measure([1 / 3] * 3), 200, 50, seed=3)
    assert est.exact is None
    assert math.log(b.kappa_min) <= est.chi <= math.log(b.kappa_max)


def test_markov_exact_lyapunov():
    s = cantor_affine((0.5, 0.25), (0.0, 0.75))
    T = np.array([[0.7, 0.3], [0.4, 0.6]])
    mu = equilibrium_measure(LocalPotential.from_transition(T))
    assert exact_lyapunov(s, mu) == pytest.approx(4 / 7 * math.log(0.5) + 3 / 7 * math.log(0.25))
    est = lyapunov(s, mu, 500, 200, seed=4)
    assert abs(est.chi - est.exact) <= 3 * est.stderr


def _report(lo, hi, mean=0.0):
    return DimensionReport(1.0, -1.0, 0.0, mean, 0.0, lo, hi, 1.0 - mean, 0.0, 1.0)


def test_dimension_drop_states():
    assert dimension_drop(_report(0.0, 0.01)) == (False, True)
    assert dimension_drop(_report(0.4, 0.5, 0.45)) == (True, False)
    d = dimension_drop(_report(0.0, 0.3, 0.1))
    assert d == (False, False) and d.state == "inconclusive"
    for lo, hi in [(0, 0.01), (0.2, 0.3), (0, 0.2)]:
        d = dimension_drop(_report(lo, hi))
        assert not (d.drop and d.separated)


def test_self_conformal_examples():
    r = self_conformal_dimension(middle_thirds(), [0.5, 0.5], n=8, samples=200, seed=1)
    assert r.hd == pytest.approx(CANTOR_DIM, abs=0.02)
    assert (r.drop, r.separated) == (False, True)
    r = self_conformal_dimension(coincident_pair(), [0.5, 0.5], n=8, samples=50, seed=1)
    assert r.hd == 0.0 and r.log_o == pytest.approx(LOG2, abs=1e-15)
    assert (r.drop, r.separated) == (True, False)
    r = self_conformal_dimension(duplicated_binary(), [1 / 3] * 3, n=10, samples=300, seed=1)
    assert r.hd == pytest.approx(DUPBIN_DIM, abs=0.03)
    assert r.hd <= r.hd_naive + 1e-12
    assert (r.drop, r.separated) == (True, False)


def test_scale_covariance():
    base = cantor_affine((1 / 3, 1 / 3), (0.0, 2 / 3))
    sq = cantor_affine((1 / 9, 1 / 9), (0.0, 8 / 9))
    a = self_conformal_dimension(base, [0.5, 0.5], n=6, samples=50, seed=5)
    b = self_conformal_dimension(sq, [0.5, 0.5], n=6, samples=50, seed=5)
    assert b.chi == pytest.approx(2 * a.chi, rel=1e-14)
    assert b.hd == pytest.approx(a.hd / 2, rel=1e-14)
    assert (a.h, a.log_o) == (b.h, b.log_o)


def test_verify_partition_examples():
    cub = cubic_family(0.25)
    assert verify_partition(cub, PartitionScheme.from_symbols([[0, 1], [2]], 3))[0]
    assert verify_partition(middle_thirds(), PartitionScheme.from_symbols([[0], [1]], 2))[0]
    d = duplicated_binary()
    assert verify_partition(d, PartitionScheme.from_symbols([[0], [1, 2]], 3))[0]
    ok, bad = verify_partition(d, PartitionScheme.from_symbols([[0, 1], [2]], 3))
    assert not ok and ((1,), (2,)) in bad
    with pytest.raises(ValueError):
        PartitionScheme.from_symbols([[0], [0, 1]], 2)
    with pytest.raises(ValueError):
        PartitionScheme.from_symbols([[0]], 2)


def test_default_partition_examples():
    assert default_partition(middle_thirds(), 1).groups == (frozenset({(0,)}), frozenset({(1,)}))
    assert default_partition(duplicated_binary(), 1).sizes == (1, 2)
    cub = default_partition(cubic_family(0.25), 1)
    assert cub.groups == (frozenset({(0,), (1,)}), frozenset({(2,)}))
    for s in (middle_thirds(), duplicated_binary(), cubic_family(0.25, 1e-3)):
        for q in (1, 2):
            assert verify_partition(s, default_partition(s, q))[0]


def test_lower_bound_examples():
    uni = [1 / 3] * 3
    everything = PartitionScheme.from_symbols([[0, 1, 2]], 3)
    assert scm_lower_bound(everything, uni, -LOG2) == pytest.approx(0.0, abs=1e-15)
    cub = PartitionScheme.from_symbols([[0, 1], [2]], 3)
    assert scm_lower_bound(cub, uni, -math.log(4)) == pytest.approx(CUBIC_SCM, abs=1e-12)
    p = [0.2, 0.5, 0.3]
    plug = (-sum(v * math.log(v) for v in p) - LOG2 * (p[0] + p[1])) / math.log(4)
    assert scm_lower_bound(cub, p, -math.log(4)) == pytest.approx(plug, abs=1e-15)
    dup = PartitionScheme.from_symbols([[0], [1, 2]], 3)
    assert scm_lower_bound(dup, uni, -LOG2) == pytest.approx(DUPBIN_DIM, abs=1e-12)
    singles = PartitionScheme.from_symbols([[0], [1], [2]], 3)
    assert scm_lower_bound(singles, p, -1.0) == pytest.approx(-sum(v * math.log(v) for v in p))
    with pytest.warns(BoundWarning):
        assert scm_lower_bound(dup, [0.0, 1.0, 0.0], -LOG2) == 0.0


@pytest.mark.parametrize("q", [1, 2])
def test_qint_agrees_with_scm(q, rng):
    s = cubic_family(0.25)
    scheme = default_partition(s, q)
    for _ in range(5):
        p = rng.dirichlet(np.ones(3))
        pot = LocalPotential.from_weights(p)
        a = qint_lower_bound(scheme, pot, equilibrium_measure(pot), -math.log(4))
        b = scm_lower_bound(scheme, p, -math.log(4))
        assert a == pytest.approx(b, abs=1e-12)


def test_ordering_chain_with_scheme():
    s = duplicated_binary()
    scheme = default_partition(s, 1)
    r = self_conformal_dimension(s, [0.5, 0.25, 0.25], n=10, samples=300, seed=8, scheme=scheme)
    assert r.bound <= r.hd + 3 * r.hd_err + 1e-12
    assert r.hd <= r.hd_naive + 1e-12


def test_empirical_examples():
    e = empirical_pointwise_dimension(middle_thirds(), [0.5, 0.5], 2000, seed=1)
    assert e.median == pytest.approx(CANTOR_DIM, abs=0.08)
    e = empirical_pointwise_dimension(coincident_pair(), [0.5, 0.5], 1000, seed=1)
    assert e.median == 0.0 and e.iqr == 0.0
    with pytest.raises(ValueError):
        empirical_pointwise_dimension(middle_thirds(), [0.5, 0.5], 10, seed=1)
    with pytest.raises(ValueError):
        empirical_pointwise_dimension(middle_thirds(), [0.5, 0.5], 1000, seed=1, radii=[0.1, 0.05])


def test_empirical_julia(julia):
    e = empirical_pointwise_dimension(julia, [0.5, 0.5], 2000, seed=2, pivots=50)
    assert 0.5 < e.median < 1.5


@pytest.mark.parametrize("name,make,p,target", [
    ("cantor", middle_thirds, [0.5, 0.5], CANTOR_DIM),
    ("dupbin", duplicated_binary, [1 / 3] * 3, DUPBIN_DIM),
])
def test_empirical_iqr_exact_dimensionality(name, make, p, target):
    # exact-dimensionality proxy: slopes concentrate at N = 10^4
    e = empirical_pointwise_dimension(make(), p, 10_000, seed=7)
    assert abs(e.median - target) < 0.05
    assert e.iqr < 0.1, f"{name}: IQR {e.iqr:.3f}"
