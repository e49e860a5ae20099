"""Convergence criteria, measure-class verdicts, dimension formulas, and the
step-weight construction used on the divergence side.

Everything revolves around the criterion sum with general term

    u(r) = f(Psi(r)) * Psi(r)**(-(m-1)n) * r**(m-1),      Psi(r) = psi(r)/r.

For the power or power-log families the term collapses to r**E * (log r)**K
with exactly computable rational exponents, so convergence is decided in
closed form; explicit tables only get a clearly-flagged partial-sum
heuristic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import HorizonTooSmallError, PreconditionError
from .functions import ApproximatingFunction, DimensionFunction, StepOmega

__all__ = [
    "SeriesBehavior",
    "Verdict",
    "classify_series",
    "criterion_terms",
    "verdict",
    "dimension_formula",
    "build_omega",
    "sum_equivalence_check",
    "SumEquivalenceReport",
]


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def _check_mn(m, n):
    if m < 1 or n < 1:
        raise PreconditionError("need m >= 1 and n >= 1")


# ---------------------------------------------------------------------------
# series classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeriesBehavior:
    """Convergence record for the criterion sum.

    ``r_exponent`` / ``log_exponent`` are the exact exponents E and K of the
    asymptotic term r**E (log r)**K when the closed form applies.  The
    partial-sum path sets ``non_rigorous`` and leaves the exponents None.
    """

    convergent: bool
    method: str                      # "closed-form" | "partial-sum"
    r_exponent: Fraction | None = None
    log_exponent: Fraction | None = None
    non_rigorous: bool = False
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def divergent(self) -> bool:
        return not self.convergent

    def describe(self) -> str:
        tag = "convergent" if self.convergent else "divergent"
        if self.method == "closed-form":
            return f"{tag} (term ~ r^{self.r_exponent} log(r)^{self.log_exponent})"
        return f"{tag} (partial-sum heuristic, non-rigorous)"


def criterion_terms(m, n, f: DimensionFunction, psi: ApproximatingFunction, r):
    """General term f(Psi(r)) Psi(r)^(-(m-1)n) r^(m-1), vectorized over r."""
    _check_mn(m, n)
    r_arr = np.asarray(r, dtype=float)
    big_psi = psi.big_psi(r_arr)
    gamma = (m - 1) * n
    if f.family == "power":
        fpsi = big_psi ** f.s
    else:
        if np.any(big_psi >= 1):
            raise PreconditionError(
                "power-log f undefined at Psi(r) >= 1; start the sum at larger r"
            )
        fpsi = big_psi ** f.s * np.log(1.0 / big_psi) ** f.kappa
    out = fpsi * big_psi ** (-gamma) * r_arr ** (m - 1)
    return float(out) if np.ndim(r) == 0 else out


def _first_valid_r(f, psi, limit=1 << 12):
    """Smallest integer height at which the term is defined (Psi < 1 for
    power-log f)."""
    if f.family == "power":
        return 1
    r = 1
    while r <= limit and psi.big_psi(float(r)) >= 1:
        r += 1
    if r > limit:
        raise PreconditionError("Psi(r) never drops below 1 on the probe range")
    return r


def classify_series(m, n, f: DimensionFunction, psi: ApproximatingFunction,
                    horizon=1 << 20) -> SeriesBehavior:
    """Decide convergence of  sum_r f(Psi(r)) Psi(r)^(-(m-1)n) r^(m-1).

    Closed form for power/power-log psi: with gamma = (m-1)n the term is
    asymptotically r**E (log r)**K where

        E = (m-1) - (tau+1) (s - gamma),    K = kappa_f - kappa_psi (s - gamma),

    convergent iff E < -1, or E = -1 and K < -1.  The E = -1, K = -1
    boundary (term ~ 1/(r log r)) is classified divergent.  Table psi falls
    back to a partial-sum growth heuristic flagged non-rigorous.
    """
    _check_mn(m, n)
    gamma = (m - 1) * n
    if psi.closed_form:
        s = _frac(f.s)
        kf = _frac(f.kappa)
        tau = _frac(psi.tau)
        kp = _frac(psi.kappa) if psi.family == "powerlog" else Fraction(0)
        excess = s - gamma
        e_exp = (m - 1) - (tau + 1) * excess
        k_exp = kf - kp * excess
        convergent = e_exp < -1 or (e_exp == -1 and k_exp < -1)
        return SeriesBehavior(convergent, "closed-form", e_exp, k_exp)

    # table psi: compare partial-sum increments on doubling windows
    r0 = _first_valid_r(f, psi)
    r_vals = np.arange(r0, horizon + 1, dtype=float)
    partial = np.cumsum(criterion_terms(m, n, f, psi, r_vals))
    checkpoints = [partial[min(len(partial), (horizon >> k)) - 1] for k in (2, 1, 0)]
    inc_old = checkpoints[1] - checkpoints[0]
    inc_new = checkpoints[2] - checkpoints[1]
    decaying = inc_new < 0.5 * inc_old or inc_new < 1e-12 * max(partial[-1], 1.0)
    return SeriesBehavior(
        bool(decaying),
        "partial-sum",
        non_rigorous=True,
        diagnostics={"partial_sum": float(partial[-1]), "increments": (float(inc_old), float(inc_new))},
    )


# ---------------------------------------------------------------------------
# verdicts
# ---------------------------------------------------------------------------

_TAGS = ("zero", "full-lebesgue", "infinite-hf", "hf-of-gamma", "singleton")


@dataclass(frozen=True)
class Verdict:
    """Measure class of the approximable set plus the reasoning trail."""

    tag: str
    justification: str
    series: SeriesBehavior | None = None
    side_conditions: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.tag not in _TAGS:
            raise PreconditionError(f"unknown verdict tag {self.tag!r}")


def verdict(m, n, f: DimensionFunction, psi: ApproximatingFunction) -> Verdict:
    """Measure-class verdict for the psi-approximable set under the gauge f.

    m = 1 collapses to a singleton.  For m > n the independent-case dichotomy
    applies (zero vs full ambient f-content); for 2 <= m <= n the set lives on
    the rank-deficient variety and the divergence side splits on the limit of
    r^(-(m-1)(n+1)) f(r): infinite f-content vs the f-content of the variety.
    Side-condition violations raise :class:`PreconditionError` naming the
    failing condition.
    """
    _check_mn(m, n)
    if m == 1:
        return Verdict(
            "singleton",
            "m = 1: |q x_j| < psi(|q|) infinitely often forces x = 0; "
            "the set is a single point with zero measure and dimension",
        )
    gamma = (m - 1) * n
    ambient = m * n
    sheet = (m - 1) * (n + 1)

    checks = {}
    if m > n:
        checks["r^-mn f monotone near 0"] = f.scaled_monotone(ambient)
        checks["r^-(m-1)n f increasing"] = f.scaled_increasing(gamma)
        if not checks["r^-(m-1)n f increasing"]:
            raise PreconditionError("side condition failed: r^(-(m-1)n) f(r) must be increasing")
        behavior = classify_series(m, n, f, psi)
        if behavior.convergent:
            return Verdict("zero", "independent case, criterion sum converges", behavior, checks)
        limit = f.scaled_limit(ambient)
        checks["limit of r^-mn f"] = limit
        if limit == "infinity":
            return Verdict(
                "infinite-hf",
                "independent case, criterion sum diverges and the ambient f-content is infinite",
                behavior,
                checks,
            )
        if limit == "constant":
            return Verdict(
                "full-lebesgue",
                "independent case, criterion sum diverges; f is the ambient volume gauge "
                "so the set has full Lebesgue measure",
                behavior,
                checks,
            )
        return Verdict(
            "zero",
            "independent case, criterion sum diverges but the ambient f-content itself vanishes",
            behavior,
            checks,
        )

    # 2 <= m <= n: the set lies on the rank <= m-1 variety
    checks["r^-(m-1)(n+1) f monotone near 0"] = f.scaled_monotone(sheet)
    checks["r^-(m-1)n f increasing"] = f.scaled_increasing(gamma)
    if not checks["r^-(m-1)n f increasing"]:
        raise PreconditionError("side condition failed: r^(-(m-1)n) f(r) must be increasing")
    try:
        f.scaled((n - m + 1) * (m - 1))
    except PreconditionError as exc:
        raise PreconditionError(
            "side condition failed: r^(-(n-m+1)(m-1)) f(r) must itself be a dimension function"
        ) from exc
    behavior = classify_series(m, n, f, psi)
    if behavior.convergent:
        return Verdict("zero", "dependent case, criterion sum converges", behavior, checks)
    limit = f.scaled_limit(sheet)
    checks["limit of r^-(m-1)(n+1) f"] = limit
    if limit == "infinity":
        return Verdict(
            "infinite-hf",
            "dependent case, criterion sum diverges and r^(-(m-1)(n+1)) f(r) -> infinity",
            behavior,
            checks,
        )
    if limit == "constant":
        return Verdict(
            "hf-of-gamma",
            "dependent case, criterion sum diverges and f is comparable to the variety's "
            "volume gauge; the set fills the rank-deficient variety",
            behavior,
            checks,
        )
    raise PreconditionError(
        "side condition failed: r^(-(m-1)(n+1)) f(r) -> 0 is outside the dichotomy"
    )


def dimension_formula_exact(m, n, tau) -> Fraction:
    """Exact rational form of :func:`dimension_formula` (tau rational)."""
    _check_mn(m, n)
    tau = _frac(tau)
    if tau <= 0:
        raise PreconditionError("tau must be positive")
    if m == 1:
        return Fraction(0)
    sloped = Fraction((m - 1) * n) + Fraction(m) / (tau + 1)
    if m > n:
        return sloped if tau > Fraction(m, n) - 1 else Fraction(m * n)
    return sloped if tau > Fraction(1, m - 1) else Fraction((m - 1) * (n + 1))


def dimension_formula(m, n, tau) -> float:
    """Hausdorff dimension of the tau-approximable set, piecewise in tau.

    m = 1 gives 0.  For m > n the critical threshold is tau = m/n - 1; for
    2 <= m <= n it is tau = m/(m-1) - 1 = 1/(m-1), with the full value being
    the variety dimension (m-1)(n+1) instead of mn.
    """
    return float(dimension_formula_exact(m, n, tau))


# ---------------------------------------------------------------------------
# the step weight of the divergence proof
# ---------------------------------------------------------------------------

def build_omega(m, n, f: DimensionFunction, psi: ApproximatingFunction,
                horizon) -> StepOmega:
    """Break a divergent criterion sum into blocks and return the step weight.

    Produces breakpoints 1 = r_0 < r_1 < ... <= horizon with inclusive block
    sums over [r_{i-1}, r_i] each exceeding 1 and r_i > 2 r_{i-1}; the weight
    is omega(r) = i**(1/n) on block i.  The weighted term u(r) omega(r)^(-n)
    then still diverges: block i keeps a contribution above 1/i.
    """
    behavior = classify_series(m, n, f, psi)
    if behavior.convergent:
        raise PreconditionError("block construction needs a divergent criterion sum")
    if horizon < 8:
        raise HorizonTooSmallError("horizon too small to build blocks")
    r0 = _first_valid_r(f, psi)
    r_vals = np.arange(1, horizon + 1, dtype=float)
    terms = np.zeros(horizon)
    terms[r0 - 1 :] = criterion_terms(m, n, f, psi, r_vals[r0 - 1 :])
    cum = np.concatenate([[0.0], np.cumsum(terms)])  # cum[r] = sum_{1..r}

    breakpoints = [1]
    while True:
        prev = breakpoints[-1]
        target = cum[prev - 1] + 1.0  # inclusive sum over [prev, r] must exceed 1
        idx = int(np.searchsorted(cum, target, side="right"))
        # stretching to satisfy the doubling constraint only grows the sum
        r_next = max(idx, 2 * prev + 1)
        if idx > horizon or r_next > horizon:
            break
        breakpoints.append(r_next)
    if len(breakpoints) < 3:
        raise HorizonTooSmallError(
            f"only {len(breakpoints) - 1} block(s) fit below horizon {horizon}"
        )
    return StepOmega(tuple(breakpoints), n)


# ---------------------------------------------------------------------------
# dyadic vs linear partial sums
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SumEquivalenceReport:
    equivalent: bool
    band: float                  # observed C with ratios inside [1/C, C]
    ratios: tuple

    def __bool__(self):
        return self.equivalent


def sum_equivalence_check(alpha, beta, psi: ApproximatingFunction,
                          f: DimensionFunction, k, horizon=1 << 20) -> SumEquivalenceReport:
    """Compare sum_t k^(t alpha) f(psi(k^t)) psi(k^t)^beta against
    sum_r r^(alpha-1) f(psi(r)) psi(r)^beta.

    Both partial-sum sequences are evaluated at the matched checkpoints
    r = k^t; the report carries the observed ratio band C and whether the
    ratio drift over the tail is flat enough to call the sums equivalent
    (a condensation sanity check, not a proof).
    """
    if k <= 1:
        raise PreconditionError("k must exceed 1")
    t_max = int(math.floor(math.log(horizon, k)))
    if t_max < 4:
        raise HorizonTooSmallError("horizon admits fewer than 4 dyadic checkpoints")

    r0 = 1 if f.family == "power" else _first_valid_r_for(psi, f)
    r_vals = np.arange(r0, horizon + 1, dtype=float)
    linear_terms = r_vals ** (alpha - 1) * f(psi(r_vals)) * psi(r_vals) ** beta
    linear_cum = np.cumsum(linear_terms)

    t_vals = np.arange(1, t_max + 1, dtype=float)
    kt = float(k) ** t_vals
    keep = kt >= r0
    kt = kt[keep]
    dyadic_terms = kt ** alpha * f(psi(kt)) * psi(kt) ** beta
    dyadic_cum = np.cumsum(dyadic_terms)

    ratios = []
    for i, r_ck in enumerate(kt):
        idx = min(int(r_ck) - r0, len(linear_cum) - 1)
        denom = linear_cum[idx]
        ratios.append(dyadic_cum[i] / denom if denom > 0 else math.inf)
    ratios = np.asarray(ratios)
    finite = np.isfinite(ratios) & (ratios > 0)
    if not np.all(finite[len(finite) // 2 :]):
        return SumEquivalenceReport(False, math.inf, tuple(ratios))
    band = float(np.max(np.maximum(ratios[finite], 1.0 / ratios[finite])))
    # drift test: slope of log ratio against t over the tail half
    tail = np.log(ratios[len(ratios) // 2 :])
    ts = np.arange(len(tail), dtype=float)
    slope = float(np.polyfit(ts, tail, 1)[0]) if len(tail) >= 2 else 0.0
    return SumEquivalenceReport(abs(slope) < 0.02, band, tuple(float(x) for x in ratios))


def _first_valid_r_for(psi, f, limit=1 << 12):
    """Smallest r with psi(r) < 1 (needed when f is power-log)."""
    r = 1
    while r <= limit and psi(float(r)) >= 1:
        r += 1
    if r > limit:
        raise PreconditionError("psi(r) never drops below 1 on the probe range")
    return r
