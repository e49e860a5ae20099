"""Acceptance suite: one test (and one printed PASS/FAIL line) per criterion.

Every tolerance is pinned here, not computed at run time.  Stochastic
criteria use fixed master seeds; reruns are bit-identical.  Run with
``pytest -s tests/test_acceptance.py`` to see the per-criterion lines.
"""

import math
import time
from fractions import Fraction

import numpy as np

from smallforms import (
    ApproximatingFunction,
    DimensionFunction,
    MatrixPoint,
    SearchBudget,
    UbiquityConfig,
    boxdim_estimate,
    certify_A_membership,
    constant_absorption_check,
    dimension_formula,
    dirichlet_bound,
    dirichlet_witness,
    estimate_E_t,
    gamma_dichotomy,
    height_obstruction,
    min_form,
    tail_dichotomy,
    ubiquity_density,
    verdict,
    witnesses,
)
from smallforms.boxdim import coupled_schedule
from smallforms.functions import OmegaFunction
from smallforms.manifold import absorption_constant, sample_gamma_points
from smallforms.measure import tail_quadrature
from smallforms.search import band_vectors


def report(criterion, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
    print(line)
    return line


def psi_pow(tau, c=1.0):
    return ApproximatingFunction.power(c, tau)


# ---------------------------------------------------------------------------
# 1. verdict engine exactness on a 200+ tuple grid, < 1 s
# ---------------------------------------------------------------------------

def expected_tag(m, n, tau, s):
    """Hand-derived piecewise classification for psi = r^-tau, f = r^s."""
    if m == 1:
        return "singleton"
    gamma = Fraction((m - 1) * n)
    critical = gamma + Fraction(m) / (tau + 1)
    if s > critical:
        return "zero"
    if m > n:
        return "full-lebesgue" if s == m * n else "infinite-hf"
    return "hf-of-gamma" if s == (m - 1) * (n + 1) else "infinite-hf"


def expected_dimension(m, n, tau):
    if m == 1:
        return Fraction(0)
    sloped = Fraction((m - 1) * n) + Fraction(m) / (tau + 1)
    if m > n:
        return sloped if tau > Fraction(m, n) - 1 else Fraction(m * n)
    return sloped if tau > Fraction(1, m - 1) else Fraction((m - 1) * (n + 1))


def build_grid():
    grid = []
    for m in (1, 2, 3, 4):
        for n in (1, 2, 3):
            threshold = Fraction(m, n) - 1 if m > n else Fraction(1, max(m - 1, 1))
            taus = {Fraction(3, 10), Fraction(2), Fraction(7, 2)}
            if threshold > 0:
                taus |= {threshold, threshold + Fraction(1, 4)}
                if threshold - Fraction(1, 8) > 0:
                    taus.add(threshold - Fraction(1, 8))
            gamma = (m - 1) * n
            top = m * n if m > n else (m - 1) * (n + 1)
            span = top - gamma
            if m == 1:
                esses = [Fraction(1, 2), Fraction(n)]   # gauge is irrelevant: singleton
            else:
                esses = [Fraction(gamma) + Fraction(k, 4) * span for k in (1, 2, 3, 4)]
            for tau in sorted(taus):
                for s in esses:
                    grid.append((m, n, tau, s))
    return grid


def test_criterion_1_verdict_grid():
    grid = build_grid()
    assert len(grid) >= 200
    start = time.perf_counter()
    mismatches = []
    for m, n, tau, s in grid:
        got = verdict(m, n, DimensionFunction.power(s), psi_pow(tau)).tag
        want = expected_tag(m, n, tau, s)
        if got != want:
            mismatches.append((m, n, tau, s, got, want))
        dim_got = dimension_formula(m, n, tau)
        dim_want = float(expected_dimension(m, n, tau))
        if dim_got != dim_want:
            mismatches.append((m, n, tau, "dim", dim_got, dim_want))
    elapsed = time.perf_counter() - start
    ok = not mismatches and elapsed < 1.0
    report(1, ok, f"{len(grid)} tuples, {len(mismatches)} discrepancies, {elapsed:.2f}s")
    assert not mismatches, mismatches[:5]
    assert elapsed < 1.0


# ---------------------------------------------------------------------------
# 2. pruned enumeration == naive enumeration, < 2 min
# ---------------------------------------------------------------------------

def test_criterion_2_search_oracle_equivalence():
    start = time.perf_counter()
    mismatches = 0
    total = 0
    for m, n in ((2, 1), (2, 2), (3, 1), (3, 2)):
        psi = ApproximatingFunction.power(0.8, m / n)
        rng = np.random.default_rng(1000 + 10 * m + n)
        for _ in range(100):
            X = MatrixPoint(rng.random((m, n)) - 0.5)
            total += 1
            fast = min_form(X, 30, pruned=True)
            slow = min_form(X, 30, pruned=False)
            lf = witnesses(X, psi, SearchBudget(30, pruning=True))
            ls = witnesses(X, psi, SearchBudget(30, pruning=False))
            if fast != slow or [w.q for w in lf] != [w.q for w in ls]:
                mismatches += 1
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 120
    report(2, ok, f"{total} instances, {mismatches} mismatches, {elapsed:.1f}s")
    assert mismatches == 0
    assert elapsed < 120


# ---------------------------------------------------------------------------
# 3. pigeonhole witness totality, < 5 min
# ---------------------------------------------------------------------------

def test_criterion_3_dirichlet_totality():
    start = time.perf_counter()
    failures = 0
    total = 0
    for m, n in ((2, 1), (3, 1), (3, 2)):
        rng = np.random.default_rng(2000 + 10 * m + n)
        for i in range(10_000):
            t = (i % 10) + 1
            X = MatrixPoint(rng.random((m, n)) - 0.5)
            total += 1
            w = dirichlet_witness(X, t)
            if not (w.height <= 2 ** t and w.value < dirichlet_bound(m, n, t)):
                failures += 1
    elapsed = time.perf_counter() - start
    ok = failures == 0 and elapsed < 300
    report(3, ok, f"{total} instances, {failures} failures, {elapsed:.1f}s")
    assert failures == 0
    assert elapsed < 300


# ---------------------------------------------------------------------------
# 4. height obstruction soundness
# ---------------------------------------------------------------------------

def _no_witness_above(X, psi, lo, hi):
    """Exhaustive scan of heights (lo, hi] in memory-bounded sub-bands."""
    h = lo + 1
    while h <= hi:
        h_top = min(hi, h + 511)
        vecs, heights = band_vectors(X.m, h, h_top)
        values = np.max(np.abs(vecs.astype(float) @ X.entries), axis=1)
        if np.any(values < psi(heights.astype(float))):
            return False
        h = h_top + 1
    return True


def test_criterion_4_obstruction_soundness():
    psi = psi_pow(2.0)
    rng = np.random.default_rng(3000)
    sound = 0
    checked = 0
    worst_q_star = 0
    while checked < 1000:
        X = MatrixPoint(rng.random((2, 2)) - 0.5)
        if abs(np.linalg.det(X.entries)) <= 1e-12:
            continue
        checked += 1
        q_star = height_obstruction(X, psi)
        worst_q_star = max(worst_q_star, q_star)
        if _no_witness_above(X, psi, q_star, 4 * q_star + 8):
            sound += 1
    ok = sound == checked == 1000
    report(4, ok, f"{sound}/{checked} sound (largest obstruction {worst_q_star})")
    assert sound == checked == 1000


# ---------------------------------------------------------------------------
# 5. box-dimension reproduction, each run < 10 min
# ---------------------------------------------------------------------------

def test_criterion_5_boxdim_independent_case():
    start = time.perf_counter()
    rep = boxdim_estimate(2, 1, 2.0, coupled_schedule(2, 1, 2.0, range(4, 11)))
    elapsed = time.perf_counter() - start
    ok = 1.52 <= rep.slope <= 1.82 and elapsed < 600
    report(5, ok, f"(2,1,tau=2) slope {rep.slope:.3f} target {rep.target:.3f}, {elapsed:.0f}s")
    assert 1.52 <= rep.slope <= 1.82
    assert elapsed < 600


def test_criterion_5_boxdim_full_dimension_case():
    start = time.perf_counter()
    rep = boxdim_estimate(3, 1, 1.5, coupled_schedule(3, 1, 1.5, range(4, 9)))
    elapsed = time.perf_counter() - start
    ok = rep.slope >= 2.8 and elapsed < 600
    report(5, ok, f"(3,1,tau=1.5) slope {rep.slope:.3f} target {rep.target:.3f}, {elapsed:.0f}s")
    assert rep.slope >= 2.8
    assert elapsed < 600


def test_criterion_5_boxdim_variety_case():
    start = time.perf_counter()
    rep = boxdim_estimate(2, 2, 3.0, coupled_schedule(2, 2, 3.0, range(3, 7)))
    elapsed = time.perf_counter() - start
    ok = 2.25 <= rep.slope <= 2.75 and elapsed < 600
    report(5, ok, f"(2,2,tau=3) slope {rep.slope:.3f} target {rep.target:.3f}, {elapsed:.0f}s")
    assert 2.25 <= rep.slope <= 2.75
    assert elapsed < 600


# ---------------------------------------------------------------------------
# 6. measure dichotomy bands
# ---------------------------------------------------------------------------

TAIL_SEED = 4242
TAIL_SCHEDULE = (2, 4, 8, 16)
TAIL_Q = 128


def _tail_reports(tau):
    return tail_dichotomy(3, 1, psi_pow(tau), TAIL_SCHEDULE, TAIL_Q,
                          samples=10_000, seed=TAIL_SEED)


def test_criterion_6_independent_convergent_band():
    reps = _tail_reports(2.5)
    at_16 = next(r for r in reps if r.parameter_value == 16.0)
    ok = at_16.estimate <= 0.35
    report(6, ok, f"m=3 convergent tail at N=16: {at_16.estimate:.4f} (band <= 0.35)")
    assert at_16.estimate <= 0.35, (
        "the convergent-side fraction saturates near 1 at this truncation: "
        f"measured {at_16.estimate:.4f}; the per-height vector count "
        "(~12 h^2 canonical q at height h) makes the union measure roughly "
        "an order of magnitude above the bare tail sum, so the 0.35 band "
        "is unreachable for any correct implementation at N=16, Q=128"
    )


def test_criterion_6_independent_oracle_agreement():
    reps = _tail_reports(2.5)
    at_16 = next(r for r in reps if r.parameter_value == 16.0)
    quad = tail_quadrature(3, 1, psi_pow(2.5), 16, TAIL_Q, points=1 << 14)
    diff = abs(at_16.estimate - quad.estimate)
    band = 3 * math.hypot(at_16.stderr, quad.stderr)
    ok = diff <= band
    report(6, ok, f"m=3 MC vs quadrature at N=16: |diff| {diff:.5f} <= {band:.5f}")
    assert diff <= band


def test_criterion_6_independent_divergent_band():
    reps = _tail_reports(1.5)
    worst = min(r.estimate for r in reps)
    ok = worst >= 0.9
    report(6, ok, f"m=3 divergent tails: min fraction {worst:.4f} (band >= 0.9)")
    assert worst >= 0.9


GAMMA_SEED = 777
GAMMA_SCHEDULE = (2, 4, 8)
GAMMA_Q = 64


def test_criterion_6_variety_divergent_band():
    reps = gamma_dichotomy(2, 2, psi_pow(0.5), GAMMA_SCHEDULE, GAMMA_Q,
                           samples=3000, seed=GAMMA_SEED)
    worst = min(r.estimate for r in reps)
    ok = worst >= 0.9
    report(6, ok, f"variety divergent tails: min fraction {worst:.4f} (band >= 0.9)")
    assert worst >= 0.9


def test_criterion_6_variety_convergent_band():
    reps = gamma_dichotomy(2, 2, psi_pow(3.0), GAMMA_SCHEDULE, GAMMA_Q,
                           samples=3000, seed=GAMMA_SEED)
    failures = []
    for r in reps:
        n_min = int(r.parameter_value)
        tail_sum = float(np.sum(np.arange(n_min, 10_000_000) ** -3.0, dtype=float))
        bound = tail_sum + 3 * r.stderr
        if r.estimate > bound:
            failures.append((n_min, r.estimate, bound))
    ok = not failures
    report(6, ok, f"variety convergent tails vs bare tail sums: {len(failures)} over bound")
    assert not failures, (
        "the fraction exceeds tail_sum + 3 sigma at every cutoff "
        f"({failures}); with ~4h canonical vectors at height h the union "
        "measure sits several times above the bare tail sum, so this bound "
        "cannot be met by any correct implementation at these cutoffs"
    )


# ---------------------------------------------------------------------------
# 7. neighborhood density and the excess-height set
# ---------------------------------------------------------------------------

def test_criterion_7_density_and_excess_height():
    omega = OmegaFunction.power(1.0)
    cfg = UbiquityConfig(3, 1, omega)
    center = (0.125, 0.125, 0.125)
    densities = []
    for t in (4, 6, 8):
        rep = ubiquity_density(3, 1, cfg, t, samples=10_000, seed=555,
                               ball_center=center, ball_radius=0.125)
        densities.append(rep.estimate)
    monotone = all(a <= b + 1e-12 for a, b in zip(densities, densities[1:]))
    final_ok = densities[-1] >= 0.9

    # the small-t excess-height sets sit in the saturated regime, so the
    # decay exponent is fitted over stages where the bound is informative
    points = []
    for t, samples in ((6, 20_000), (8, 20_000), (10, 8_000), (12, 2_000)):
        rep = estimate_E_t(3, 1, omega, t, samples=samples, seed=556)
        points.append((math.log(float(omega(t))), math.log(max(rep.estimate, 1e-12))))
    slope = float(np.polyfit([p[0] for p in points], [p[1] for p in points], 1)[0])
    slope_ok = slope <= 1 - 3 + 0.5

    ok = monotone and final_ok and slope_ok
    report(
        7,
        ok,
        f"density {['%.3f' % d for d in densities]} (>=0.9 at t=8: {final_ok}), "
        f"excess-height exponent {slope:.2f} <= -1.5: {slope_ok}",
    )
    assert monotone and final_ok
    assert slope_ok


# ---------------------------------------------------------------------------
# 8. variety constructions
# ---------------------------------------------------------------------------

def test_criterion_8_manifold_properties():
    psi = psi_pow(1.5)
    points = sample_gamma_points(2, 2, 100, seed=888)
    defects_ok = sum(gp.defect <= 1e-12 for gp in points)
    certified = 0
    for gp in points:
        cert = certify_A_membership(gp, psi, 24)
        if cert.certified and cert.c == absorption_constant(2):
            certified += 1
    absorb = constant_absorption_check(2, 2, DimensionFunction.power(3), psi_pow(1.0), 2.0)
    ok = defects_ok == 100 and certified == 100 and absorb.ok
    report(
        8,
        ok,
        f"{defects_ok}/100 defects <= 1e-12, {certified}/100 certified, "
        f"absorption ratio in [{absorb.ratio_min:.2f}, {absorb.ratio_max:.2f}] ok={absorb.ok}",
    )
    assert defects_ok == 100
    assert certified == 100
    assert absorb.ok


# ---------------------------------------------------------------------------
# 9. bit-identical reproducibility across thread counts
# ---------------------------------------------------------------------------

def test_criterion_9_reproducibility():
    psi = psi_pow(2.5)
    omega = OmegaFunction.power(1.0)
    cfg = UbiquityConfig(3, 1, omega)
    checks = []

    a = tail_dichotomy(3, 1, psi, (2, 8), 32, samples=4000, seed=99, threads=1)
    b = tail_dichotomy(3, 1, psi, (2, 8), 32, samples=4000, seed=99, threads=4)
    checks.append([r.hits for r in a] == [r.hits for r in b])

    a = gamma_dichotomy(2, 2, psi_pow(3.0), (2, 4), 32, samples=2000, seed=99, threads=1)
    b = gamma_dichotomy(2, 2, psi_pow(3.0), (2, 4), 32, samples=2000, seed=99, threads=4)
    checks.append([r.hits for r in a] == [r.hits for r in b])

    a = estimate_E_t(3, 1, omega, 6, samples=5000, seed=99, threads=1)
    b = estimate_E_t(3, 1, omega, 6, samples=5000, seed=99, threads=4)
    checks.append(a.hits == b.hits)

    a = ubiquity_density(3, 1, cfg, 4, samples=5000, seed=99, threads=1)
    b = ubiquity_density(3, 1, cfg, 4, samples=5000, seed=99, threads=4)
    checks.append(a.hits == b.hits)

    from smallforms import estimate_delta_t

    a = estimate_delta_t(2, 1, psi_pow(1.0), 4, samples=5000, seed=99, threads=1)
    b = estimate_delta_t(2, 1, psi_pow(1.0), 4, samples=5000, seed=99, threads=4)
    checks.append(a.hits == b.hits)

    ok = all(checks)
    report(9, ok, f"{sum(checks)}/{len(checks)} experiments bit-identical across thread counts")
    assert all(checks)
