"""Integer witness search: exact minimization of |qX|_inf up to a height
bound, witness enumeration, the pigeonhole (Dirichlet-type) guarantee, and
the inverse-matrix height obstruction.

Two engines back the public operations:

* the *enumeration engine* walks canonical height shells (one representative
  per +-q pair, heights ascending, lexicographic within a shell) either as a
  cached vectorized array or as a pruned depth-first search;
* the *interval engine* fixes the trailing m-1 coordinates ("tail") and
  solves for the admissible leading coordinate analytically, which turns the
  per-vector scan into a per-tail scan.  It is what makes desk-scale heights
  like 2^10 affordable.

The interval engine is validated against the enumeration engine in the test
suite; every public result (Witness values in particular) is recomputed
through :func:`smallforms.forms.form_value` before being returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import (
    BudgetExceededError,
    PreconditionError,
    SingularMatrixError,
    TheoremViolationError,
)
from .forms import MatrixPoint, Witness
from .functions import ApproximatingFunction

__all__ = [
    "SearchBudget",
    "WitnessSearchResult",
    "min_form",
    "witnesses",
    "dirichlet_witness",
    "dirichlet_bound",
    "height_obstruction",
    "band_vectors",
]

# hard caps keeping cached enumeration arrays at desk scale
_BOX_CELL_CAP = 40_000_000


@dataclass(frozen=True)
class SearchBudget:
    """Truncation of the witness search.

    ``q_max`` is the height bound, ``max_witnesses`` an optional output cap,
    ``pruning`` selects the branch-and-bound path (the naive path is the
    oracle the pruned one is tested against).
    """

    q_max: int
    max_witnesses: int | None = None
    pruning: bool = True

    def __post_init__(self):
        if self.q_max < 1:
            raise PreconditionError("height bound must be >= 1")
        if self.max_witnesses is not None and self.max_witnesses < 1:
            raise PreconditionError("witness cap must be >= 1 when present")


@dataclass(frozen=True)
class WitnessSearchResult:
    witnesses: tuple
    truncated: bool

    def __iter__(self):
        return iter(self.witnesses)

    def __len__(self):
        return len(self.witnesses)


# ---------------------------------------------------------------------------
# canonical shells
# ---------------------------------------------------------------------------

def _canonical_rows(box):
    """Rows whose first nonzero coordinate is positive (rows must be nonzero)."""
    nz = box != 0
    first = np.argmax(nz, axis=1)
    lead = box[np.arange(box.shape[0]), first]
    return lead > 0


@lru_cache(maxsize=512)
def _shell(m, h):
    """Canonical vectors with |q|_inf == h, lexicographically ascending."""
    if (2 * h + 1) ** m > _BOX_CELL_CAP:
        raise BudgetExceededError(f"shell |q|={h} in dimension {m} is over budget")
    rng = np.arange(-h, h + 1, dtype=np.int64)
    grids = np.meshgrid(*([rng] * m), indexing="ij")
    box = np.stack([g.ravel() for g in grids], axis=1)
    heights = np.max(np.abs(box), axis=1)
    box = box[heights == h]
    box = box[_canonical_rows(box)]
    box.flags.writeable = False
    return box


def band_vectors(m, h_lo, h_hi):
    """Canonical vectors with h_lo <= |q|_inf <= h_hi in (height, lex) order.

    Returns (vectors, heights).  Raises :class:`BudgetExceededError` when the
    band is too large to materialize.
    """
    if h_lo < 1 or h_hi < h_lo:
        raise PreconditionError("need 1 <= h_lo <= h_hi")
    est = (2 * h_hi + 1) ** m - (2 * h_lo - 1) ** m
    if est > _BOX_CELL_CAP:
        raise BudgetExceededError(
            f"band [{h_lo}, {h_hi}] in dimension {m} has ~{est:.2e} vectors, over budget"
        )
    shells = [_shell(m, h) for h in range(h_lo, h_hi + 1)]
    vecs = np.concatenate(shells, axis=0)
    heights = np.concatenate(
        [np.full(len(s), h, dtype=np.int64) for s, h in zip(shells, range(h_lo, h_hi + 1))]
    )
    return vecs, heights


@lru_cache(maxsize=64)
def _tails(m, h_max):
    """Canonical nonzero tails (q_2 .. q_m) with height <= h_max, sorted by
    height so height blocks are contiguous slices; returns (tails, heights)."""
    if m < 2:
        return np.zeros((0, 0), dtype=np.int64), np.zeros(0, dtype=np.int64)
    if (2 * h_max + 1) ** (m - 1) > _BOX_CELL_CAP:
        raise BudgetExceededError(f"tail box of height {h_max} in dimension {m} is over budget")
    rng = np.arange(-h_max, h_max + 1, dtype=np.int64)
    grids = np.meshgrid(*([rng] * (m - 1)), indexing="ij")
    box = np.stack([g.ravel() for g in grids], axis=1)
    heights = np.max(np.abs(box), axis=1)
    keep = heights > 0
    box, heights = box[keep], heights[keep]
    canon = _canonical_rows(box)
    box, heights = box[canon], heights[canon]
    order = np.argsort(heights, kind="stable")
    box, heights = np.ascontiguousarray(box[order]), heights[order]
    box.flags.writeable = False
    heights.flags.writeable = False
    return box, heights


# ---------------------------------------------------------------------------
# enumeration engine (naive oracle + pruned DFS)
# ---------------------------------------------------------------------------

def _values_for_band(X: MatrixPoint, vecs):
    """|qX|_inf for every row q of ``vecs``."""
    prods = vecs.astype(float) @ X.entries
    return np.max(np.abs(prods), axis=1)


def _min_form_naive(X: MatrixPoint, q_max):
    vecs, heights = band_vectors(X.m, 1, q_max)
    values = _values_for_band(X, vecs)
    idx = int(np.argmin(values))  # first occurrence = (height, lex) minimum
    return tuple(int(v) for v in vecs[idx])


def _leaf_values(partial, last_col, q_lo, q_max):
    """max_j |partial_j + q_m x_mj| for q_m = q_lo .. q_max, vectorized."""
    qs = np.arange(q_lo, q_max + 1, dtype=float)
    vals = np.abs(partial[0] + qs * last_col[0])
    for j in range(1, len(last_col)):
        np.maximum(vals, np.abs(partial[j] + qs * last_col[j]), out=vals)
    return qs.astype(np.int64), vals


def _min_form_pruned(X: MatrixPoint, q_max):
    """Branch-and-bound over canonical vectors: per-column partial-sum lower
    bounds prune inner nodes, the final coordinate is swept vectorized."""
    m, n = X.m, X.n
    cols = [tuple(float(v) for v in row) for row in X.entries]  # row i = coefficients of q_i
    rest = np.abs(X.entries)[::-1].cumsum(axis=0)[::-1]
    suffix = (np.vstack([rest[1:], np.zeros((1, n))]) * q_max).tolist()
    last_col = np.asarray(cols[-1], dtype=float)

    best_val = math.inf
    best_key = None

    def take_leaf(prefix, partial, seen_nonzero, cur_height):
        nonlocal best_val, best_key
        q_lo = 1 if not seen_nonzero else -q_max
        qs, vals = _leaf_values(np.asarray(partial), last_col, q_lo, q_max)
        low = float(vals.min())
        if low > best_val:
            return
        for idx in np.nonzero(vals == low)[0]:
            q_m = int(qs[idx])
            key = (max(cur_height, abs(q_m)), prefix + (q_m,))
            if low < best_val or (low == best_val and key < best_key):
                best_val = low
                best_key = key

    def descend(i, prefix, partial, seen_nonzero, cur_height):
        if i == m - 1:
            take_leaf(prefix, partial, seen_nonzero, cur_height)
            return
        lo = 0 if not seen_nonzero else -q_max
        row = cols[i]
        bound_row = suffix[i]
        for qi in range(lo, q_max + 1):
            new_partial = [p + qi * c for p, c in zip(partial, row)]
            bound = max(max(0.0, abs(p) - s) for p, s in zip(new_partial, bound_row))
            if bound > best_val:
                continue
            descend(i + 1, prefix + (qi,), new_partial,
                    seen_nonzero or qi != 0, max(cur_height, abs(qi)))

    descend(0, (), [0.0] * n, False, 0)
    return tuple(best_key[1])


def min_form(X: MatrixPoint, q_max, pruned=True) -> Witness:
    """Minimize |qX|_inf over 0 < |q|_inf <= q_max.

    Returns the canonical witness (one representative per +-q pair); among
    minimizers the one that height-then-lex ordered enumeration reaches first.
    """
    if q_max < 1:
        raise PreconditionError("height bound must be >= 1")
    q = _min_form_pruned(X, q_max) if pruned else _min_form_naive(X, q_max)
    return Witness.of(q, X)


def _witnesses_naive(X, psi, q_max):
    vecs, heights = band_vectors(X.m, 1, q_max)
    values = _values_for_band(X, vecs)
    thresholds = psi(heights.astype(float))
    mask = values < thresholds
    return [tuple(int(v) for v in row) for row in vecs[mask]]


def _witnesses_pruned(X, psi, q_max):
    m, n = X.m, X.n
    cols = [tuple(float(v) for v in row) for row in X.entries]
    rest = np.abs(X.entries)[::-1].cumsum(axis=0)[::-1]
    suffix = (np.vstack([rest[1:], np.zeros((1, n))]) * q_max).tolist()
    last_col = np.asarray(cols[-1], dtype=float)
    # largest threshold reachable from a node: psi at the smallest reachable height
    psi_by_height = psi(np.arange(1, q_max + 1, dtype=float))
    found = []

    def take_leaf(prefix, partial, seen_nonzero, cur_height):
        q_lo = 1 if not seen_nonzero else -q_max
        qs, vals = _leaf_values(np.asarray(partial), last_col, q_lo, q_max)
        heights = np.maximum(np.abs(qs), max(cur_height, 1))
        hits = vals < psi_by_height[heights - 1]
        for idx in np.nonzero(hits)[0]:
            found.append(prefix + (int(qs[idx]),))

    def descend(i, prefix, partial, seen_nonzero, cur_height):
        if i == m - 1:
            take_leaf(prefix, partial, seen_nonzero, cur_height)
            return
        lo = 0 if not seen_nonzero else -q_max
        row = cols[i]
        bound_row = suffix[i]
        for qi in range(lo, q_max + 1):
            new_partial = [p + qi * c for p, c in zip(partial, row)]
            bound = max(max(0.0, abs(p) - s) for p, s in zip(new_partial, bound_row))
            h_min = max(cur_height, abs(qi), 1)
            if bound >= psi_by_height[h_min - 1]:
                continue
            descend(i + 1, prefix + (qi,), new_partial,
                    seen_nonzero or qi != 0, max(cur_height, abs(qi)))

    descend(0, (), [0.0] * n, False, 0)
    found.sort(key=lambda q: (max(abs(v) for v in q), q))
    return found


def witnesses(X: MatrixPoint, psi: ApproximatingFunction, budget: SearchBudget) -> WitnessSearchResult:
    """All canonical q with 0 < |q| <= Q and |qX|_inf < psi(|q|).

    Output is sorted by height then lexicographically; ``truncated`` reports
    whether the optional cap cut the list short.
    """
    raw = (
        _witnesses_pruned(X, psi, budget.q_max)
        if budget.pruning
        else _witnesses_naive(X, psi, budget.q_max)
    )
    truncated = budget.max_witnesses is not None and len(raw) > budget.max_witnesses
    if truncated:
        raw = raw[: budget.max_witnesses]
    return WitnessSearchResult(tuple(Witness.of(q, X) for q in raw), truncated)


# ---------------------------------------------------------------------------
# interval engine
# ---------------------------------------------------------------------------

def _interval_bounds(p, lead, bound):
    """Open interval (lo, hi) of real q_1 with |q_1 * lead_j + p_j| < bound, all j.

    ``p`` has shape (..., n); ``lead`` (n,) is the first row of X.  Columns
    with lead 0 constrain nothing when |p_j| < bound and kill the tail
    otherwise; the dead case is signalled by an empty interval.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        centers = -p / lead
        widths = bound / np.abs(lead)
    lo = centers - widths
    hi = centers + widths
    unconstrained = lead == 0.0
    if np.any(unconstrained):
        dead = unconstrained & ~(np.abs(p) < bound)
        lo = np.where(unconstrained, -np.inf, lo)
        hi = np.where(unconstrained, np.inf, hi)
        hi = np.where(dead, -np.inf, hi)  # empty interval
    return np.max(lo, axis=-1), np.min(hi, axis=-1)


def dirichlet_bound(m, n, t) -> float:
    """The pigeonhole bound m * (2^t)^(1 - m/n) on the minimal form value."""
    return m * (2.0 ** t) ** (1.0 - m / n)


def _k_range(lo, hi, cap):
    """Integer endpoints of the open interval (lo, hi) clipped to [-cap, cap].

    Infinities and the fallout of 0/0 columns are sanitized before the floor
    and ceil; an empty range is signalled by k_lo > k_hi.
    """
    pad = float(cap + 2)
    lo = np.clip(np.nan_to_num(lo, nan=pad, posinf=pad, neginf=-pad), -pad, pad)
    hi = np.clip(np.nan_to_num(hi, nan=-pad, posinf=pad, neginf=-pad), -pad, pad)
    k_lo = np.maximum(np.floor(lo).astype(np.int64) + 1, -cap)
    k_hi = np.minimum(np.ceil(hi).astype(np.int64) - 1, cap)
    return k_lo, k_hi


def _dyadic_tail_blocks(tail_heights, cap):
    """(th_min, slice) pairs cutting a height-sorted tail array dyadically."""
    bounds = [0]
    h = 1
    while h < cap:
        bounds.append(h)
        h *= 2
    bounds.append(cap)
    out = []
    for lo, hi in zip(bounds, bounds[1:]):
        a = int(np.searchsorted(tail_heights, lo, side="right"))
        b = int(np.searchsorted(tail_heights, hi, side="right"))
        if b > a:
            out.append((lo + 1, slice(a, b)))
    return out


def _dirichlet_scan(X: MatrixPoint, height_cap, bound):
    """Per-tail minimum witness heights, scanned in ascending height blocks.

    Returns (tail_best, h_star): tail_best[i] is the smallest achievable
    |q|_inf through tail i (int64 max when none, or when the block scan
    stopped early because heights there could no longer beat h_star).
    Candidate leading coordinates are the nearest-to-zero admissible integers
    with +-1 padding, verified directly against the strict inequality.
    """
    tails, tail_heights = _tails(X.m, height_cap)
    lead = X.entries[0]
    rest = X.entries[1:]
    n = X.n
    sentinel = np.iinfo(np.int64).max
    tail_best = np.full(len(tails), sentinel, dtype=np.int64)
    h_star = sentinel
    for th_min, block in _dyadic_tail_blocks(tail_heights, height_cap):
        if th_min > h_star:
            break  # every q through later tails is strictly taller
        p = tails[block].astype(float) @ rest  # (k, n)
        lo, hi = _interval_bounds(p, lead, bound)
        k_lo, k_hi = _k_range(lo, hi, height_cap)
        minabs = np.where(k_lo > 0, k_lo, np.where(k_hi < 0, k_hi, 0))
        best = np.full(len(minabs), sentinel, dtype=np.int64)
        for shift in (-1, 0, 1):
            cand = np.clip(minabs + shift, -height_cap, height_cap)
            vals = np.abs(cand * lead[0] + p[:, 0])
            for j in range(1, n):
                np.maximum(vals, np.abs(cand * lead[j] + p[:, j]), out=vals)
            heights = np.maximum(np.abs(cand), tail_heights[block])
            good = vals < bound
            np.minimum(best, np.where(good, heights, sentinel), out=best)
        tail_best[block] = best
        if best.size:
            h_star = min(h_star, int(best.min()))
    return tails, tail_heights, tail_best, h_star


def _dirichlet_first(X: MatrixPoint, height_cap, bound):
    """First (height, lex) canonical q with |q| <= cap and |qX|_inf < bound.

    Per-tail interval solve; returns None when no vector qualifies.
    """
    m = X.m
    lead = X.entries[0]
    rest = X.entries[1:] if m > 1 else None
    sentinel = np.iinfo(np.int64).max

    # tail = 0: vectors q_1 * e_1; |q_1| * |lead| is increasing, so only the
    # smallest height can qualify
    zero_tail_q1 = 1 if bool(np.all(np.abs(lead) < bound)) else None
    if m == 1:
        return None if zero_tail_q1 is None else (1,)

    tails, tail_heights, tail_best, h_star = _dirichlet_scan(X, height_cap, bound)
    if zero_tail_q1 is not None and zero_tail_q1 < h_star:
        return (zero_tail_q1,) + (0,) * (m - 1)
    if h_star == sentinel:
        return None

    rows = np.nonzero(tail_best == h_star)[0]
    keys = []
    for r in rows:
        th = int(tail_heights[r])
        tail = tuple(int(v) for v in tails[r])
        p_row = tails[r].astype(float) @ rest
        lo, hi = _interval_bounds(p_row, lead, bound)
        k_lo_arr, k_hi_arr = _k_range(np.asarray([lo]), np.asarray([hi]), height_cap)
        k_lo, k_hi = int(k_lo_arr[0]), int(k_hi_arr[0])
        if th < h_star:
            k_opts = (-h_star, h_star)
        else:
            pos = max(k_lo, 1)
            neg = min(k_hi, -1)
            k_opts = (0, pos, pos + 1, neg, neg - 1)
        for k in k_opts:
            if not (k_lo - 1 <= k <= k_hi + 1 and abs(k) <= h_star):
                continue
            if max(abs(k), th) != h_star:
                continue
            val = float(np.max(np.abs(k * lead + p_row)))
            if val < bound:
                keys.append(_canonical_key(k, tail))
    if zero_tail_q1 is not None and zero_tail_q1 == h_star:
        keys.append((zero_tail_q1,) + (0,) * (m - 1))
    if not keys:
        return None
    return min(keys)


def _canonical_key(k, tail):
    q = (int(k),) + tuple(int(v) for v in tail)
    for v in q:
        if v > 0:
            return q
        if v < 0:
            return tuple(-w for w in q)
    return q


def dirichlet_witness(X: MatrixPoint, t) -> Witness:
    """A nonzero q with |q| <= 2^t and |qX|_inf < m (2^t)^(1 - m/n).

    The pigeonhole principle guarantees existence; exhaustion raises
    :class:`TheoremViolationError` and is treated as a bug.  The returned
    witness is the first hit in height-then-lex canonical order.
    """
    if t < 1:
        raise PreconditionError("t must be >= 1")
    height_cap = 2 ** int(t)
    bound = dirichlet_bound(X.m, X.n, t)
    q = _dirichlet_first(X, height_cap, bound)
    if q is None:
        raise TheoremViolationError(
            f"no q with |q| <= 2^{t} and |qX| < {bound}; this contradicts the pigeonhole bound"
        )
    w = Witness.of(q, X)
    if not (w.value < bound and w.height <= height_cap):
        raise TheoremViolationError("interval engine returned a non-witness")
    return w


# ---------------------------------------------------------------------------
# height obstruction for invertible square X
# ---------------------------------------------------------------------------

def height_obstruction(X: MatrixPoint, psi: ApproximatingFunction, det_floor=1e-12) -> int:
    """Largest height Q* that any psi-witness of an invertible X can have.

    Uses |q|_inf = |q X X^-1|_inf <= C2(X) |qX|_inf with C2 the maximum
    column absolute sum of X^-1: a witness of height h forces
    h <= C2 psi(h), impossible once C2 psi(h) < 1.  Returns the largest h
    with psi(h) >= 1/C2, or 0 when even psi(1) < 1/C2.
    """
    if X.m != X.n:
        raise PreconditionError("height obstruction needs a square matrix")
    det = float(np.linalg.det(X.entries))
    if abs(det) <= det_floor:
        raise SingularMatrixError(f"|det X| = {abs(det):.2e} below the {det_floor} floor")
    inv = np.linalg.inv(X.entries)
    c2 = float(np.max(np.abs(inv).sum(axis=0)))
    level = 1.0 / c2
    if psi(1.0) < level:
        return 0
    # psi is non-increasing: exponential search then bisection
    hi = 1
    while psi(float(2 * hi)) >= level:
        hi *= 2
        if hi > 2 ** 62:
            raise PreconditionError("psi does not drop below 1/C2 at representable heights")
    lo = hi  # psi(lo) >= level
    hi = 2 * hi  # psi(hi) < level
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if psi(float(mid)) >= level:
            lo = mid
        else:
            hi = mid
    return lo
