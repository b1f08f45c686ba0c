"""Acceptance suite: one line per criterion, tolerances pinned.

Oracle values were computed independently before the build:

* log 2 / log 3 = 0.6309297535714574
* (log 3 - (2/3) log 2) / log 2 = 0.9182958340544898, (2/3) log 2 = 0.46209812037329684
* (log 3 - (2/3) log 2) / log 4 = 0.4591479170272449, log 3 / log 4 = 0.7924812503605781
"""

import itertools
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from ifsdim import streams
from ifsdim.cli_io import run
from ifsdim.dimension import (
    PartitionScheme,
    dimension_drop,
    empirical_pointwise_dimension,
    hd_formula,
    lyapunov,
    scm_lower_bound,
    self_conformal_dimension,
    verify_partition,
)
from ifsdim.overlap import MembershipTester, beta_n, brute_force_beta, measure_overlap, topological_overlap
from ifsdim.systems import FIXTURES, cantor_affine, coincident_pair, cubic_family, duplicated_binary, middle_thirds, quadratic_julia
from ifsdim.thermo import LocalPotential, bernoulli_measure, equilibrium_measure, gibbs_ratio, pressure, variational_residual

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
CANTOR_DIM = 0.6309297535714574
DUPBIN_DIM = 0.9182958340544898
DUPBIN_LOG_O = 0.46209812037329684
CUBIC_SCM = 0.4591479170272449
CUBIC_NAIVE = 0.7924812503605781
SEED = 7


def test_criterion_1_cantor(criterion):
    t0 = time.perf_counter()
    s = middle_thirds()
    topo = topological_overlap(s, 12, 2000, SEED)
    rep = self_conformal_dimension(s, [0.5, 0.5], n=12, samples=2000, seed=SEED)
    emp = empirical_pointwise_dimension(s, [0.5, 0.5], 10_000, SEED)
    dt = time.perf_counter() - t0
    checks = {
        "|log o|<0.02": abs(topo.mean) < 0.02,
        "|hd-0.630930|<0.02": abs(rep.hd - CANTOR_DIM) < 0.02,
        "no drop, separated": tuple(dimension_drop(rep)) == (False, True),
        "|emp-0.6309|<0.05": abs(emp.median - CANTOR_DIM) < 0.05,
        "IQR<0.1": emp.iqr < 0.1,
        "t<60s": dt < 60,
    }
    ok = criterion(1, all(checks.values()),
                   f"log_o={topo.mean:.5f} hd={rep.hd:.5f} state={rep.decision.state} "
                   f"emp={emp.median:.4f} iqr={emp.iqr:.4f} t={dt:.1f}s failed={[k for k, v in checks.items() if not v]}")
    assert ok


def test_criterion_2_duplicated_binary(criterion):
    t0 = time.perf_counter()
    s = duplicated_binary()
    uni = [1 / 3] * 3
    est = measure_overlap(s, LocalPotential.from_weights(uni), 14, 2000, SEED)
    rep = self_conformal_dimension(s, uni, n=14, samples=2000, seed=SEED)
    emp = empirical_pointwise_dimension(s, uni, 10_000, SEED)
    dt = time.perf_counter() - t0
    checks = {
        "|log o-0.4621|<0.03": abs(est.mean - DUPBIN_LOG_O) < 0.03,
        "|hd-0.9183|<0.03": abs(rep.hd - DUPBIN_DIM) < 0.03,
        "drop, not separated": tuple(dimension_drop(rep)) == (True, False),
        "|emp-0.9183|<0.05": abs(emp.median - DUPBIN_DIM) < 0.05,
        "t<120s": dt < 120,
    }
    ok = criterion(2, all(checks.values()),
                   f"log_o={est.mean:.5f} hd={rep.hd:.5f} state={rep.decision.state} emp={emp.median:.4f} "
                   f"(iqr={emp.iqr:.3f}) t={dt:.1f}s failed={[k for k, v in checks.items() if not v]}")
    assert ok


def test_criterion_3_coincident(criterion):
    t0 = time.perf_counter()
    s = coincident_pair()
    t = MembershipTester(s)
    exact = all(beta_n(t, 0.0, n)[:2] == (2**n, 2**n) for n in range(1, 13))
    est = topological_overlap(s, 12, 200, SEED)
    eps = np.finfo(float).eps
    hd_exact = hd_formula(math.log(2), math.log(2), -math.log(2))
    hd = hd_formula(math.log(2), est.mean, -math.log(2))
    dt = time.perf_counter() - t0
    ok = exact and abs(est.mean - math.log(2)) <= 2 * eps and hd_exact == 0.0 and hd <= 4 * eps and dt < 5
    criterion(3, ok, f"beta_n(0)=2^n n<=12: {exact}; log_o-log2={est.mean - math.log(2):.1e} "
                     f"hd(log2)={hd_exact} hd(estimate)={hd:.1e} t={dt:.2f}s")
    assert ok


def test_criterion_4_cubic(criterion):
    t0 = time.perf_counter()
    s = cubic_family(0.25, 0.0)
    scheme = PartitionScheme.from_symbols([[0, 1], [2]], 3)  # digit groups {0,1} and {3}
    accepted, _ = verify_partition(s, scheme)
    uni = [1 / 3] * 3
    rep = self_conformal_dimension(s, uni, n=12, samples=2000, seed=SEED, scheme=scheme)
    bound = scm_lower_bound(scheme, uni, rep.chi)
    dt = time.perf_counter() - t0
    slack = 3 * rep.hd_err
    checks = {
        "partition accepted": accepted,
        "|scm-0.459148|<1e-10": abs(bound - CUBIC_SCM) < 1e-10,
        "bound<=hd": bound <= rep.hd + slack,
        "hd<=h/|chi|": rep.hd <= rep.hd_naive + slack and abs(rep.hd_naive - CUBIC_NAIVE) < 1e-12,
        "t<60s": dt < 60,
    }
    ok = criterion(4, all(checks.values()),
                   f"bound={bound:.12f} hd={rep.hd:.5f}+-{rep.hd_err:.1e} naive={rep.hd_naive:.6f} t={dt:.1f}s "
                   f"failed={[k for k, v in checks.items() if not v]}")
    assert ok


def test_criterion_5_oracle_equivalence(criterion):
    t0 = time.perf_counter()
    mismatches = 0
    total = 0
    for idx, (name, make) in enumerate(sorted(FIXTURES.items())):
        s = make()
        t = MembershipTester(s, cover_depth=8)
        rng = streams.stream(SEED, streams.FIXTURE, 50 + idx)
        pts = [s.pi_point(tuple(rng.integers(0, s.m, 40)))[0] for _ in range(50)]
        pts += list(s.seed.lo + rng.random(50) * s.seed.diameter)
        for x in pts:
            for n in range(1, 9):
                total += 1
                mismatches += beta_n(t, x, n).upper != brute_force_beta(t, x, n)
    dt = time.perf_counter() - t0
    ok = mismatches == 0 and dt < 60
    criterion(5, ok, f"{total} (system, point, n) cases, {mismatches} mismatches, t={dt:.1f}s")
    assert ok


def _partition_sum(pot: LocalPotential, n: int) -> float:
    words = np.array(list(itertools.product(range(pot.m), repeat=n)))
    idx = np.zeros(len(words), dtype=np.int64)
    sums = np.zeros(len(words))
    for j in range(n):
        idx = np.zeros(len(words), dtype=np.int64)
        for i in range(pot.k):
            idx = idx * pot.m + words[:, (j + i) % n]
        sums += pot.table[idx]
    c = sums.max()
    return (c + math.log(np.exp(sums - c).sum())) / n


def test_criterion_6_thermodynamics(criterion):
    t0 = time.perf_counter()
    rng = streams.stream(SEED, streams.FIXTURE, 6)
    worst_res, ratio_ok, worst_p = 0.0, True, 0.0
    for i in range(50):
        m, k = int(rng.integers(1, 5)), int(rng.integers(1, 3))
        pot = LocalPotential(m, k, rng.normal(size=m**k))
        mu = equilibrium_measure(pot)
        worst_res = max(worst_res, variational_residual(pot, mu))
        C = math.exp(2 * pot.oscillation)
        for _ in range(20):
            w = tuple(rng.integers(0, m, rng.integers(1, 21)))
            r = gibbs_ratio(mu, w)
            ratio_ok &= (1 / C) * (1 - 1e-12) <= r <= C * (1 + 1e-12)
    for i in range(5):
        pot = LocalPotential(2, 2, rng.normal(size=4))
        worst_p = max(worst_p, abs(pressure(pot) - _partition_sum(pot, 16)))
    dt = time.perf_counter() - t0
    ok = worst_res < 1e-6 and worst_p < 1e-3 and ratio_ok and dt < 30
    criterion(6, ok, f"max residual={worst_res:.1e} max |P-partition|={worst_p:.1e} "
                     f"gibbs ratios on 1000 cylinders ok={ratio_ok} t={dt:.1f}s")
    assert ok


def test_criterion_7_lyapunov(criterion):
    t0 = time.perf_counter()
    rng = streams.stream(SEED, streams.FIXTURE, 7)
    worst = 0.0
    for i in range(20):
        m = int(rng.integers(2, 5))
        r = rng.uniform(0.05, 0.9, m) * rng.choice([-1, 1], m)
        s = cantor_affine(r, np.full(m, 0.5 - 0.5 * np.abs(r)) + np.where(r < 0, np.abs(r), 0.0))
        p = rng.dirichlet(np.ones(m))
        est = lyapunov(s, bernoulli_measure(p / p.sum()), 1000, 200, seed=SEED + i)
        analytic = float(np.sum(p / p.sum() * np.log(np.abs(r))))
        worst = max(worst, abs(est.chi - analytic) / est.stderr)
    dt = time.perf_counter() - t0
    ok = worst <= 3 and dt < 30
    criterion(7, ok, f"20 systems, worst |MC-analytic|/se={worst:.2f} t={dt:.1f}s")
    assert ok


def test_criterion_8_julia(criterion, tmp_path):
    t0 = time.perf_counter()
    s = quadratic_julia(0.05)
    contracting = s.contraction_bounds().kappa_max < 1
    w = s.seed.random_points(streams.stream(SEED, streams.FIXTURE, 8), 1000)
    roundtrip = max(float(np.max(np.abs(f.evaluate(w) ** 2 + 0.05 - w))) for f in s.maps)
    out = tmp_path / "julia.json"
    code = run(["dimension", "--system", str(CONFIGS / "julia.json"), "--n", "10", "--samples", "300",
                "--seed", str(SEED), "--out", str(out)])
    hd = json.loads(out.read_text())["hd"]
    dt = time.perf_counter() - t0
    ok = contracting and roundtrip < 1e-10 and code in (0, 2) and hd is not None and 0 < hd <= 2 and dt < 60
    criterion(8, ok, f"kappa_max={s.contraction_bounds().kappa_max:.4f} |R(f(w))-w|<={roundtrip:.1e} "
                     f"exit={code} hd={hd} t={dt:.1f}s")
    assert ok


COMMANDS = [
    ["dimension", "--system", "cantor.json", "--n", "12", "--samples", "2000"],
    ["overlap", "--system", "cantor.json", "--n", "12", "--samples", "2000", "--topological"],
    ["overlap", "--system", "dupbin.json", "--n", "14", "--samples", "2000"],
    ["verify", "--system", "dupbin.json", "--n", "14", "--samples", "2000"],
    ["dimension", "--system", "coincident.json", "--n", "12", "--samples", "200"],
    ["bound", "--system", "cubic.json"],
    ["dimension", "--system", "cubic.json", "--n", "12", "--samples", "2000", "--q", "1"],
    ["pressure", "--system", "markov.json", "--psi", "file"],
    ["lyapunov", "--system", "cubic.json"],
    ["dimension", "--system", "julia.json", "--n", "10", "--samples", "300"],
    ["cloud", "--system", "julia.json", "--points", "500", "--format", "csv"],
]


def test_criterion_9_determinism(criterion, tmp_path):
    t0 = time.perf_counter()
    differing = []
    for i, cmd in enumerate(COMMANDS):
        argv = [a if not a.endswith(".json") else str(CONFIGS / a) for a in cmd] + ["--seed", str(SEED)]
        outs = []
        for rep in range(2):
            out = tmp_path / f"r{i}_{rep}"
            run(argv + ["--out", str(out)])
            outs.append(out.read_bytes())
        if outs[0] != outs[1] or not outs[0]:
            differing.append(cmd[0] + " " + cmd[2])
    dt = time.perf_counter() - t0
    ok = not differing
    criterion(9, ok, f"{len(COMMANDS)} commands rerun, byte-identical={not differing} {differing} t={dt:.1f}s")
    assert ok
