"""Singular values of ``G^q |D|^-beta``, partial-sum trace estimates and renewal constants.

Each gap ``I_n`` contributes two singular values, one per endpoint.  In the
symmetric mode both equal ``mu(I_n^a)**q |I_n|**beta``; the one-sided modes
use the mass just left of ``b_n^-`` or just right of ``b_n^+`` and drop the
other endpoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy import stats

from .errors import CapacityError, InsufficientScalesError, NonConvergedError, TooFewValuesError
from .ifs import DEFAULT_CAPACITY, IfsSystem, gap_count_profile, gap_table
from .measure import DEFAULT_TOL, SelfSimilarMeasure, interval_measure_array, log_sum_exp
from .multifractal import beta_closed_form

MODES = ("symmetric", "one-sided-left", "one-sided-right")
LEFT, RIGHT = 0, 1
MIN_TRACE_VALUES = 100


@dataclass(frozen=True)
class SingularValue:
    log_sigma: float
    gap_id: int
    endpoint: str  # "left" or "right"


@dataclass(frozen=True)
class SingularValues:
    """Singular values sorted by ``log_sigma`` descending, ties by gap id then endpoint.

    ``complete_above`` is a log threshold: values at or above it are the
    full top of the infinite sequence, not just of the enumerated gaps.
    """

    log_sigma: np.ndarray
    gap_id: np.ndarray
    endpoint: np.ndarray  # LEFT / RIGHT
    position: np.ndarray  # b_n^- or b_n^+
    complete_above: float = -math.inf
    dropped_sides: int = 0

    def __len__(self) -> int:
        return int(self.log_sigma.size)

    def __iter__(self) -> Iterator[SingularValue]:
        for ls, g, e in zip(self.log_sigma, self.gap_id, self.endpoint):
            yield SingularValue(float(ls), int(g), "left" if e == LEFT else "right")

    @property
    def n_complete(self) -> int:
        return int(np.count_nonzero(self.log_sigma >= self.complete_above))


@dataclass(frozen=True)
class _Level:
    parent: np.ndarray
    letter: np.ndarray
    ratio: np.ndarray
    offset: np.ndarray
    logp: np.ndarray


def _local_window(ifs: IfsSystem, a: float, mode: str):
    """Per first-level gap: the neighbourhood used for ``g`` in cell coordinates."""
    eps = ifs.gap_lengths
    left = ifs.gap_lefts
    h = 0.5 * a * eps
    if mode == "one-sided-left":
        return left - h, left
    if mode == "one-sided-right":
        return left + eps, left + eps + h
    return left - h, left + eps + h


def _overhang(mu, levels, depth, slot, logp_w, h, right_side, tol):
    """Mass beyond one end of the cells ``psi_w[0, 1]``, relative to ``p_w``.

    The overhang, of width ``h`` in cell units, is carried up the word one
    letter at a time; it only picks up mass once it leaves an extreme child,
    and everything stays in coordinates of order one.
    """
    ifs = mu.system
    r = np.asarray(ifs.ratios)
    t = np.asarray(ifs.translations)
    extreme = ifs.m - 1 if right_side else 0
    out = np.zeros(h.size)
    d = depth.copy()
    s = slot.copy()
    h = h.copy()
    live = h > 0
    for lev in range(int(d.max(initial=0)), 0, -1):
        sel = np.nonzero(live & (d == lev))[0]
        if sel.size == 0:
            continue
        parent = levels[lev].parent[s[sel]]
        j = levels[lev].letter[s[sel]]
        rj, tj, hh = r[j], t[j], h[sel]
        if right_side:
            x0 = tj + rj
            x1 = x0 + rj * hh
            lo, hi, spill = x0, np.minimum(x1, 1.0), np.maximum(0.0, x1 - 1.0)
        else:
            x0 = tj - rj * hh
            lo, hi, spill = np.maximum(x0, 0.0), tj, np.maximum(0.0, -x0)
        edge = j == extreme
        inner = ~edge & (hi > lo)
        if inner.any():
            k = sel[inner]
            mass = interval_measure_array(mu, lo[inner], hi[inner], tol)
            out[k] += mass * np.exp(levels[lev - 1].logp[parent[inner]] - logp_w[k])
        h[sel] = np.where(edge, rj * hh, spill)
        d[sel] = lev - 1
        s[sel] = parent
        live[sel] = h[sel] > 0
    return out


def _gap_columns(mu, levels, depth, slot, gidx, a, mode, tol):
    """``log mu`` of the neighbourhood of each gap ``psi_w(E_i)``."""
    ifs = mu.system
    lo, hi = _local_window(ifs, a, mode)
    inner = interval_measure_array(mu, np.maximum(lo, 0.0), np.minimum(hi, 1.0), tol)[gidx]
    logp_w = _per_gap(levels, depth, slot, "logp")
    rel = inner.copy()
    if mode != "one-sided-right":
        rel += _overhang(mu, levels, depth, slot, logp_w, np.maximum(0.0, -lo)[gidx], False, tol)
    if mode != "one-sided-left":
        rel += _overhang(mu, levels, depth, slot, logp_w, np.maximum(0.0, hi - 1.0)[gidx], True, tol)
    with np.errstate(divide="ignore"):
        return logp_w + np.log(rel)


def _per_gap(levels, depth, slot, name):
    out = np.empty(depth.size)
    for lev in np.unique(depth):
        k = depth == lev
        out[k] = getattr(levels[lev], name)[slot[k]]
    return out


def _scan(mu, q, beta, a, mode, tol, capacity, gap_ok, word_ok):
    """Breadth-first walk over words, evaluating the gaps of every kept word.

    ``gap_ok(log_length, log_sigma)`` selects gaps to return; ``word_ok(ratio,
    logp)`` decides which children to explore.  Returns the kept gap columns
    and the largest ``log_sigma - log W_w`` seen, where ``W_w = p_w**q r_w**beta``.
    """
    ifs = mu.system
    r = np.asarray(ifs.ratios)
    t = np.asarray(ifs.translations)
    logp_i = np.log(np.asarray(mu.weights))
    eps = ifs.gap_lengths
    e_left = ifs.gap_lefts
    ng = eps.size
    empty = np.zeros(0, dtype=np.int64)
    levels = [_Level(empty, empty, np.array([1.0]), np.array([0.0]), np.array([0.0]))]
    kept = []
    top_excess = -math.inf
    total = 0
    while levels[-1].ratio.size:
        lev = len(levels) - 1
        cur = levels[-1]
        n = cur.ratio.size
        slot = np.repeat(np.arange(n), ng)
        gidx = np.tile(np.arange(ng), n)
        depth = np.full(slot.size, lev)
        length = cur.ratio[slot] * eps[gidx]
        loglen = np.log(length)
        if q == 0:
            ls = beta * loglen
        else:
            ls = q * _gap_columns(mu, levels, depth, slot, gidx, a, mode, tol) + beta * loglen
        logw = q * cur.logp[slot] + beta * np.log(cur.ratio[slot])
        with np.errstate(invalid="ignore"):
            ex = ls - logw
        if ex.size and np.isfinite(ex).any():
            top_excess = max(top_excess, float(np.nanmax(ex[np.isfinite(ex)])))
        ok = gap_ok(loglen, ls)
        total += int(ok.sum())
        if total > capacity:
            raise CapacityError(f"more than {capacity} gaps selected")
        left = cur.offset[slot] + cur.ratio[slot] * e_left[gidx]
        kept.append((ls[ok], length[ok], left[ok], gidx[ok], depth[ok], slot[ok]))

        child = cur.ratio[:, None] * r[None, :]
        clogp = cur.logp[:, None] + logp_i[None, :]
        pw, j = np.nonzero(word_ok(child, clogp))
        if pw.size > capacity:
            raise CapacityError(f"more than {capacity} live words")
        levels.append(_Level(pw, j, child[pw, j], cur.offset[pw] + cur.ratio[pw] * t[j], clogp[pw, j]))
    cols = [np.concatenate([c[k] for c in kept]) for k in range(6)]
    return cols, top_excess


def _assemble(cols, mode, complete_above, keep=None):
    ls, length, left, gidx, depth, slot = cols
    if keep is not None:
        ls, length, left = ls[keep], length[keep], left[keep]
    # gap ids follow the enumeration order: longest first, then leftmost
    order = np.lexsort((left, -length))
    ls, length, left = ls[order], length[order], left[order]
    n = ls.size
    if mode == "symmetric":
        sides = [LEFT, RIGHT]
    else:
        sides = [LEFT] if mode == "one-sided-left" else [RIGHT]
    lsv = np.concatenate([ls] * len(sides))
    gid = np.concatenate([np.arange(n)] * len(sides))
    end = np.concatenate([np.full(n, s) for s in sides])
    pos = np.concatenate([left + (length if s == RIGHT else 0.0) for s in sides])
    finite = np.isfinite(lsv)
    dropped = int((~finite).sum())
    lsv, gid, end, pos = lsv[finite], gid[finite], end[finite], pos[finite]
    order = np.lexsort((end, gid, -lsv))
    return SingularValues(lsv[order], gid[order], end[order], pos[order], complete_above, dropped)


def _check_args(mode, a):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if not a > 0:
        raise ValueError("gap enlargement a must be positive")


def singular_values(
    mu: SelfSimilarMeasure,
    q: float,
    beta: float,
    a: float,
    delta: float,
    mode: str = "symmetric",
    tol: float = DEFAULT_TOL,
    capacity: int = DEFAULT_CAPACITY,
) -> SingularValues:
    """Singular values from every gap of length ``>= delta``.

    Gaps a little shorter than ``delta`` (one generation past the cutoff) are
    evaluated only to set ``complete_above``.  For ``q != 0`` the ordering by
    singular value differs from the ordering by length, so the complete
    prefix can be short; :func:`singular_values_above` selects by value.
    """
    _check_args(mode, a)
    if not delta > 0:
        raise ValueError("delta must be positive")
    ifs = mu.system
    frontier = delta * ifs.min_ratio * ifs.min_gap / ifs.max_gap
    log_frontier = math.log(frontier)
    cols, _ = _scan(
        mu, q, beta, a, mode, tol, capacity,
        lambda loglen, ls: loglen >= log_frontier,
        lambda ratio, logp: ratio * ifs.max_gap >= frontier,
    )
    main = cols[1] >= delta
    tail = cols[0][~main]
    tail = tail[np.isfinite(tail)]
    complete = float(tail.max()) if tail.size else -math.inf
    return _assemble(cols, mode, complete, keep=main)


def singular_values_above(
    mu: SelfSimilarMeasure,
    q: float,
    beta: float,
    a: float,
    tau: float,
    mode: str = "symmetric",
    tol: float = DEFAULT_TOL,
    capacity: int = DEFAULT_CAPACITY,
) -> SingularValues:
    """Every singular value ``>= tau``, complete and sorted.

    A word ``w`` is explored while ``K W_w >= tau`` with ``W_w = p_w**q r_w**beta``
    and ``K`` a bound on ``sigma / W_w`` over its gaps.  ``K`` is measured on
    the gaps actually visited and the walk is repeated if it was too small.
    """
    _check_args(mode, a)
    if not tau > 0:
        raise ValueError("tau must be positive")
    ifs = mu.system
    log_tau = math.log(tau)
    logr_i = np.log(ifs.ratios)
    logp_i = np.log(mu.weights)
    if np.any(q * logp_i + beta * logr_i >= 0):
        raise ValueError("every p_i**q r_i**beta must be below 1 for a finite enumeration")
    log_k = float(np.max(beta * np.log(ifs.gap_lengths)))
    while True:
        bound = log_k

        def word_ok(ratio, logp, bound=bound):
            return q * logp + beta * np.log(ratio) + bound >= log_tau

        cols, seen = _scan(mu, q, beta, a, mode, tol, capacity, lambda loglen, ls: ls >= log_tau, word_ok)
        if seen <= bound + 1e-12:
            return _assemble(cols, mode, log_tau)
        log_k = seen + 0.1


def scale_threshold(ifs: IfsSystem, delta: float) -> float:
    """Singular-value threshold ``delta**s`` matching the length cutoff ``delta`` at ``q = 0``."""
    return float(delta ** ifs.similarity_dimension())


@dataclass(frozen=True)
class TraceEstimate:
    """``S_N / log N`` at geometric checkpoints, with its spread over the last decade of ``N``.

    ``tail_slope`` is ``(S_N - S_M) / log(N / M)`` over that last decade; it
    ignores any finite set of leading values and carries no ``1/log N`` bias.
    """

    checkpoints: tuple[int, ...]
    ratios: tuple[float, ...]
    band: tuple[float, float]
    point: float
    tail_slope: float
    n_values: int

    @property
    def measurable_consistent(self) -> bool:
        lo, hi = self.band
        return self.point > 0 and (hi - lo) / self.point < 0.05

    @classmethod
    def zero(cls) -> "TraceEstimate":
        return cls((), (), (0.0, 0.0), 0.0, 0.0, 0)


def _checkpoints(n: int) -> np.ndarray:
    j_max = int(math.floor(math.log(n) / math.log(1.5))) + 1
    cps = np.unique(np.ceil(1.5 ** np.arange(j_max + 1)).astype(np.int64))
    cps = cps[(cps >= 2) & (cps < n)]
    return np.append(cps, n)


def trace_from_logs(log_sigma: np.ndarray, min_count: int = MIN_TRACE_VALUES) -> TraceEstimate:
    """Partial-sum trace estimate of a descending sequence given by its logs."""
    ls = np.asarray(log_sigma, dtype=float)
    n = ls.size
    if n < min_count:
        raise TooFewValuesError(f"{n} singular values; need at least {min_count}")
    top = ls[0]
    partial = np.exp(top) * np.cumsum(np.exp(ls - top))
    cps = _checkpoints(n)
    ratios = partial[cps - 1] / np.log(cps)
    final = cps >= n / 10.0
    band = (float(ratios[final].min()), float(ratios[final].max()))
    m = max(1, int(math.ceil(n / 10.0)))
    tail = (partial[-1] - partial[m - 1]) / math.log(n / m) if n > m else float("nan")
    return TraceEstimate(
        tuple(int(c) for c in cps),
        tuple(float(v) for v in ratios),
        band,
        float(ratios[-1]),
        float(tail),
        n,
    )


def partial_sum_trace(svs, min_count: int = MIN_TRACE_VALUES) -> TraceEstimate:
    """Trace estimate from sorted singular values.

    ``svs`` is a :class:`SingularValues` (truncated at its completeness
    threshold) or a descending array of nonnegative values.
    """
    if isinstance(svs, SingularValues):
        ls = svs.log_sigma[: svs.n_complete]
    else:
        vals = np.asarray(svs, dtype=float)
        if np.any(vals < 0):
            raise ValueError("singular values are nonnegative")
        if np.any(np.diff(vals) > 0):
            raise ValueError("singular values must be sorted descending")
        with np.errstate(divide="ignore"):
            ls = np.log(vals[vals > 0])
    return trace_from_logs(ls, min_count)


def spectral_dimension_estimate(ifs: IfsSystem, deltas: Sequence[float], capacity: int = DEFAULT_CAPACITY):
    """Slope of ``log N(delta)`` against ``-log delta``; returns ``(slope, stderr)``."""
    prof = [(d, n) for d, n in gap_count_profile(ifs, deltas, capacity) if n > 0]
    if len(prof) < 4:
        raise InsufficientScalesError("need at least 4 cutoffs with a nonzero gap count")
    d = np.array([p[0] for p in prof])
    if d.max() / d.min() < 1e3:
        raise InsufficientScalesError("cutoffs must span at least 3 decades")
    fit = stats.linregress(-np.log(d), np.log([p[1] for p in prof]))
    return float(fit.slope), float(fit.stderr)


def tube_length(ifs: IfsSystem, r: float, capacity: int = DEFAULT_CAPACITY) -> float:
    """Lebesgue measure of the ``r``-neighbourhood of the attractor."""
    total = 1.0 + 2.0 * r
    if 2.0 * r >= ifs.max_gap:
        return total
    tab = gap_table(ifs, 2.0 * r, capacity)
    return total - math.fsum(tab.length - 2.0 * r)


def minkowski_profile(
    ifs: IfsSystem, rs: Sequence[float], s: float | None = None, capacity: int = DEFAULT_CAPACITY
) -> list[tuple[float, float]]:
    """``(r, L(F_r) / r**(1 - s))`` for each radius; bounded above and below iff almost Minkowski measurable."""
    r = np.asarray(rs, dtype=float)
    if np.any(r <= 0) or np.any(np.diff(r) >= 0):
        raise ValueError("radii must be positive and strictly decreasing")
    if s is None:
        s = ifs.similarity_dimension()
    return [(float(x), tube_length(ifs, float(x), capacity) / float(x) ** (1.0 - s)) for x in r]


def set_trace_constant(ifs: IfsSystem, s: float | None = None) -> float:
    """``2 sum eps_i**s / sum r_i**s log(1/r_i)`` for the attractor alone."""
    if s is None:
        s = ifs.similarity_dimension()
    eps = ifs.gap_lengths
    r = np.asarray(ifs.ratios)
    return float(2.0 * np.sum(eps**s) / np.sum(r**s * np.log(1.0 / r)))


def minkowski_trace_constant(s: float, content: float) -> float:
    """Trace of ``|D|^-s`` for a Minkowski measurable set with content ``content``."""
    return 2.0**s * (1.0 - s) * content


@dataclass(frozen=True)
class RenewalConstants:
    q: float
    a: float
    beta: float
    r0: float
    c: float
    entropy_denominator: float
    n_terms: int


@dataclass(frozen=True)
class _RenewalTerms:
    length: np.ndarray
    summand: np.ndarray
    top: np.ndarray


def _renewal_terms(mu, q, beta, a, cutoff, tol, capacity) -> _RenewalTerms:
    """Per-gap summands of the renewal residue, for every gap of length ``>= cutoff``.

    Gaps inside ``psi_i[0, 1]`` contribute ``|I|**beta (mu(I^a)**q - p_i**q mu(psi_i^-1 I^a)**q)``;
    the first-level gaps contribute ``|E_i|**beta mu(E_i^a)**q``.
    """
    ifs = mu.system
    tab = gap_table(ifs, cutoff, capacity)
    h = 0.5 * a * tab.length
    lo = tab.left - h
    hi = tab.left + tab.length + h
    with np.errstate(divide="ignore"):
        here = np.log(interval_measure_array(mu, lo, hi, tol))
    top = tab.first < 0
    i = np.where(top, 0, tab.first)
    t = np.asarray(ifs.translations)[i]
    r = np.asarray(ifs.ratios)[i]
    logp = np.log(np.asarray(mu.weights))[i]
    with np.errstate(divide="ignore"):
        pulled = np.log(interval_measure_array(mu, (lo - t) / r, (hi - t) / r, tol))
    if q == 0:
        diff = np.where(top, 1.0, 0.0)
    else:
        a_term = np.exp(q * here)
        b_term = np.exp(q * (logp + pulled))
        diff = np.where(top, a_term, a_term - b_term)
    return _RenewalTerms(tab.length, np.exp(beta * np.log(tab.length)) * diff, top)


def renewal_constants(
    mu: SelfSimilarMeasure,
    q: float,
    a: float,
    beta: float | None = None,
    tol: float = DEFAULT_TOL,
    capacity: int = DEFAULT_CAPACITY,
    guard_tol: float = 1e-9,
) -> RenewalConstants:
    """Renewal residue ``r0`` and the trace constant ``c = 2 r0 / h``.

    ``h = sum w_i log(1/w_i)`` with ``w_i = p_i**q r_i**beta``.  Summands
    vanish once ``a |I_n|`` drops below the smallest first-level gap; one
    further generation is evaluated as a guard and must be zero to
    ``guard_tol`` (relative), otherwise the cutoff is lowered.
    """
    if not a > 0:
        raise ValueError("gap enlargement a must be positive")
    ifs = mu.system
    if beta is None:
        beta = beta_closed_form(mu.weights, ifs.ratios, q)
    logw = q * np.log(mu.weights) + beta * np.log(ifs.ratios)
    w = np.exp(logw)
    denom = float(-np.sum(w * logw))

    stop = ifs.min_gap / a
    while True:
        guard = stop * ifs.min_ratio
        try:
            terms = _renewal_terms(mu, q, beta, a, guard, tol, capacity)
        except CapacityError as exc:
            raise NonConvergedError("renewal residue summands did not vanish before the capacity limit") from exc
        body = (terms.length >= stop) | terms.top
        r0 = math.fsum(terms.summand[body])
        residue = np.abs(terms.summand[~body])
        if residue.size == 0 or residue.max() <= guard_tol * max(1.0, abs(r0)):
            break
        if len(terms.length) * ifs.m > capacity:
            raise NonConvergedError("renewal residue summands did not vanish before the capacity limit")
        stop = guard
    return RenewalConstants(q, a, beta, r0, 2.0 * r0 / denom, denom, int(body.sum()))


@dataclass
class RenewalReport:
    taus: np.ndarray
    s_over_log: np.ndarray  # S(tau) / -log(tau)
    tau_count: np.ndarray  # tau * S_1(tau)
    r_tau: np.ndarray
    constants: RenewalConstants

    @property
    def limit(self) -> float:
        """Predicted limit of ``S(tau) / -log(tau)``, equal to ``c / 2``."""
        return self.constants.r0 / self.constants.entropy_denominator

    @property
    def r_stabilized(self) -> bool:
        r0 = self.constants.r0
        return bool(abs(self.r_tau[-1] - r0) <= 1e-9 * max(1.0, abs(r0)))

    @property
    def count_band(self) -> tuple[float, float]:
        """Range of ``tau * S_1(tau)`` over the thresholds that admit any value."""
        live = self.tau_count[self.tau_count > 0]
        if live.size == 0:
            return 0.0, 0.0
        return float(live.min()), float(live.max())


def renewal_diagnostic(
    mu: SelfSimilarMeasure,
    q: float,
    a: float,
    taus: Sequence[float],
    beta: float | None = None,
    tol: float = DEFAULT_TOL,
    capacity: int = DEFAULT_CAPACITY,
) -> RenewalReport:
    """Threshold sums ``S(tau)``, counts ``S_1(tau)`` and the residue ``r(tau)``.

    ``S`` and ``S_1`` count one value per gap.  ``r(tau)`` is the partial
    residue sum over gaps of length ``>= tau``; its summands vanish below
    ``min(eps) / a``, so it is constant from there on.
    """
    tau = np.asarray(taus, dtype=float)
    if np.any(tau <= 0) or np.any(np.diff(tau) >= 0):
        raise ValueError("thresholds must be positive and strictly decreasing")
    ifs = mu.system
    consts = renewal_constants(mu, q, a, beta, tol, capacity)
    beta = consts.beta
    svs = singular_values_above(mu, q, beta, a, float(tau.min()), "symmetric", tol, capacity)
    # one value per gap
    single = np.sort(svs.log_sigma[svs.endpoint == LEFT])[::-1]
    s_tau = np.empty_like(tau)
    s1 = np.empty_like(tau)
    for k, t in enumerate(tau):
        sel = single[single >= math.log(t)]
        s_tau[k] = math.exp(log_sum_exp(sel)) if sel.size else 0.0
        s1[k] = sel.size
    terms = _renewal_terms(mu, q, beta, a, max(float(tau.min()), ifs.min_gap / a * ifs.min_ratio), tol, capacity)
    r_tau = np.array([math.fsum(terms.summand[terms.length >= t]) for t in tau])
    # S(tau) / log(1/tau) is only meaningful below tau = 1
    s_over = np.full_like(tau, np.nan)
    small = tau < 1.0
    s_over[small] = s_tau[small] / -np.log(tau[small])
    return RenewalReport(tau, s_over, tau * s1, r_tau, consts)
