"""Moment exponents beta(q) by three routes, the coarse spectrum, and sandwich checks.

``beta_grid_estimate`` regresses enlarged grid moment sums against scale,
``beta_interval_estimate`` locates the critical exponent of gap moment sums,
and ``beta_closed_form`` solves ``sum p_i**q r_i**beta = 1``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats
from scipy.optimize import brentq

from .errors import BracketError, InsufficientScalesError, LacunarityWarning, NonConvexWarning
from .ifs import DEFAULT_CAPACITY, IfsSystem, gap_table, net_cells
from .measure import (
    DEFAULT_TOL,
    SelfSimilarMeasure,
    gap_enlarged_logs,
    grid_moment_logs,
    grid_moment_sum,
    log_sum_exp,
)

BETA_RANGE = (-50.0, 50.0)
DEFAULT_Q_GRID = tuple(np.arange(-5.0, 5.0001, 0.5))


@dataclass(frozen=True)
class BetaEstimate:
    q: float
    value: float
    method: str  # "grid-regression", "interval-slope" or "closed-form"
    residuals: tuple[float, ...] = ()
    stderr: float = 0.0
    bracket_width: float = 0.0


@dataclass(frozen=True)
class SpectrumPoint:
    alpha: float
    f: float
    q: float


def beta_closed_form(p: Sequence[float], r: Sequence[float], q: float, tol: float = 1e-14) -> float:
    """Unique root of ``sum p_i**q * r_i**beta = 1``.

    The left side is strictly decreasing in ``beta`` because every ratio is
    below one; the root is bracketed by doubling and polished by Brent's
    method on the log of the sum.
    """
    logp = np.log(np.asarray(p, dtype=float))
    logr = np.log(np.asarray(r, dtype=float))
    if q == 1:
        return 0.0

    def phi(beta: float) -> float:
        return log_sum_exp(q * logp + beta * logr)

    lo, hi = -1.0, 1.0
    while phi(lo) < 0:
        lo *= 2
    while phi(hi) > 0:
        hi *= 2
    return float(brentq(phi, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500))


def _regress(x: np.ndarray, y: np.ndarray):
    fit = stats.linregress(x, y)
    resid = y - (fit.intercept + fit.slope * x)
    return float(fit.slope), float(fit.stderr), tuple(float(v) for v in resid)


def beta_grid_estimate(
    mu: SelfSimilarMeasure,
    q: float,
    b: float,
    scales: Sequence[float],
    tol: float = DEFAULT_TOL,
) -> BetaEstimate:
    """Least-squares slope of ``log sum mu(B^b)**q`` against ``-log r``."""
    r = np.asarray(scales, dtype=float)
    if r.size < 4:
        raise InsufficientScalesError("need at least 4 grid scales")
    if np.any(np.diff(r) >= 0):
        raise ValueError("scales must be strictly decreasing")
    y = np.array([grid_moment_sum(mu, float(s), q, b, tol).log for s in r])
    slope, err, resid = _regress(-np.log(r), y)
    return BetaEstimate(q, slope, "grid-regression", resid, err)


def default_grid_scales(ifs: IfsSystem, smallest: float = 1e-6) -> np.ndarray:
    """Powers of the smallest ratio from one level down to ``smallest``."""
    rho = ifs.min_ratio
    k = np.arange(1, int(math.floor(math.log(smallest) / math.log(rho))) + 1)
    return rho**k


def default_interval_cutoffs(ifs: IfsSystem, smallest: float = 1e-7) -> np.ndarray:
    """Geometric cutoffs with ratio ``min r_i``, offset half a step from the gap lengths.

    The half-step offset keeps lattice gap lengths away from shell
    boundaries, so each shell of a lattice system holds whole generations.
    """
    rho = ifs.min_ratio
    top = ifs.max_gap * math.sqrt(rho)
    n = int(math.floor(math.log(smallest / top) / math.log(rho))) + 1
    return top * rho ** np.arange(n)


class _ShellSums:
    """Gap moment terms grouped into shells ``deltas[j+1] <= |I| < deltas[j]``."""

    def __init__(self, mu, q, a, deltas, tol, capacity):
        d = np.asarray(deltas, dtype=float)
        if d.size < 4:
            raise InsufficientScalesError("need at least 4 cutoffs")
        if np.any(np.diff(d) >= 0):
            raise ValueError("cutoffs must be strictly decreasing")
        tab = gap_table(mu.system, float(d[-1]), capacity)
        keep = tab.length < d[0]
        length = tab.length[keep]
        left = tab.left[keep]
        # lengths are sorted descending, so each shell is a contiguous block
        shell = np.searchsorted(-d, -length, side="left") - 1
        starts = np.searchsorted(shell, np.arange(d.size - 1), side="left")
        ends = np.searchsorted(shell, np.arange(d.size - 1), side="right")
        nonempty = ends > starts
        if nonempty.sum() < 3:
            raise InsufficientScalesError("fewer than 3 nonempty cutoff shells")
        self.starts = starts[nonempty]
        self.x = -np.log(d[1:][nonempty])
        self.base = q * gap_enlarged_logs(mu, left, length, a, tol)
        self.loglen = np.log(length)

    def logs(self, beta: float) -> np.ndarray:
        v = self.base + beta * self.loglen
        top = np.maximum.reduceat(v, self.starts)
        expanded = np.repeat(top, np.diff(np.append(self.starts, v.size)))
        return top + np.log(np.add.reduceat(np.exp(v - expanded), self.starts))

    def slope(self, beta: float) -> float:
        return _regress(self.x, self.logs(beta))[0]


def beta_interval_estimate(
    mu: SelfSimilarMeasure,
    q: float,
    a: float | None = None,
    deltas: Sequence[float] | None = None,
    tol: float = DEFAULT_TOL,
    beta_range: tuple[float, float] = BETA_RANGE,
    width: float = 1e-8,
    capacity: int = DEFAULT_CAPACITY,
) -> BetaEstimate:
    """Critical exponent of ``sum mu(I^a)**q |I|**beta`` over gaps, by bisection.

    For a trial ``beta`` the gaps are split into shells between consecutive
    cutoffs and the log shell sums are regressed against ``-log delta``.  The
    slope is positive while the full series grows faster than logarithmically,
    zero where the partial sums grow like ``-log delta``, and negative once the
    series converges; the sign change is the estimate.
    """
    if a is None:
        a = default_enlargement(mu.system)
    if not a > 0:
        raise ValueError("gap enlargement a must be positive")
    if deltas is None:
        deltas = default_interval_cutoffs(mu.system)
    shells = _ShellSums(mu, q, a, deltas, tol, capacity)
    lo, hi = beta_range
    if not (shells.slope(lo) > 0 > shells.slope(hi)):
        raise BracketError(f"no sign change of the shell slope on [{lo}, {hi}]")
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if shells.slope(mid) > 0:
            lo = mid
        else:
            hi = mid
    beta = 0.5 * (lo + hi)
    _, err, resid = _regress(shells.x, shells.logs(beta))
    return BetaEstimate(q, beta, "interval-slope", resid, err, hi - lo)


def legendre_spectrum(betas: Sequence, tol: float = 1e-9) -> list[SpectrumPoint]:
    """Discrete Legendre transform ``f(alpha) = min_q (beta(q) + q alpha)``.

    ``betas`` holds :class:`BetaEstimate` objects or ``(q, beta)`` pairs.
    Each sample contributes ``alpha = -dbeta/dq`` from central differences
    (one-sided at the ends); coincident alphas are merged.  A non-convex
    sample raises :class:`NonConvexWarning` and is left as is.
    """
    pairs = sorted(
        (float(b.q), float(b.value)) if isinstance(b, BetaEstimate) else (float(b[0]), float(b[1]))
        for b in betas
    )
    q = np.array([p[0] for p in pairs])
    beta = np.array([p[1] for p in pairs])
    if q.size < 5:
        raise ValueError("need at least 5 samples of beta(q)")
    if not (q.min() < 0 < q.max()):
        raise ValueError("q samples must include negative and positive values")
    if np.any(np.diff(q) <= 0):
        raise ValueError("duplicate q samples")
    slopes = np.diff(beta) / np.diff(q)
    if np.any(np.diff(slopes) < -tol * np.maximum(1.0, np.abs(slopes[1:]))):
        warnings.warn("sampled beta(q) is not convex", NonConvexWarning, stacklevel=2)
    alpha = np.empty_like(q)
    alpha[0] = -slopes[0]
    alpha[-1] = -slopes[-1]
    alpha[1:-1] = -(beta[2:] - beta[:-2]) / (q[2:] - q[:-2])
    points: list[SpectrumPoint] = []
    for j, al in enumerate(alpha):
        if points and abs(points[-1].alpha - al) <= tol * max(1.0, abs(al)):
            continue
        f = float(np.min(beta + q * al))
        points.append(SpectrumPoint(float(al), f, float(q[j])))
    return points


def _range_max_table(values: np.ndarray) -> list[np.ndarray]:
    table = [values]
    span = 1
    while 2 * span <= values.size:
        prev = table[-1]
        table.append(np.maximum(prev[:-span], prev[span:]))
        span *= 2
    return table


def _range_max(table: list[np.ndarray], i0: np.ndarray, i1: np.ndarray) -> np.ndarray:
    """Max over ``values[i0:i1]`` per query; empty ranges give 0."""
    n = i1 - i0
    out = np.zeros(i0.shape)
    ok = n > 0
    k = np.zeros_like(n)
    k[ok] = np.floor(np.log2(n[ok])).astype(np.int64)
    for level in np.unique(k[ok]):
        sel = ok & (k == level)
        row = table[level]
        out[sel] = np.maximum(row[i0[sel]], row[i1[sel] - (1 << level)])
    return out


def lacunarity_estimate(ifs: IfsSystem, sample_depth: int = 8, capacity: int = DEFAULT_CAPACITY) -> float:
    """Sampled lower estimate of the lacunarity constant.

    Minimises ``(longest gap inside [x - r, x + r]) / r`` over the endpoints
    ``x`` of all cells of depth ``sample_depth`` and dyadic radii down to the
    smallest such cell.  Both sample sets grow with the depth, so the estimate
    can only decrease as the depth increases.
    """
    if sample_depth < 3:
        raise ValueError("sample_depth must be at least 3")
    offset, ratio = net_cells(ifs, sample_depth)
    xs = np.unique(np.concatenate([offset, offset + ratio]))
    j_max = int(math.floor(sample_depth * math.log2(1.0 / ifs.min_ratio)))
    radii = 2.0 ** -np.arange(j_max + 1)
    # every ball B(x, r) holds a cell of length >= r * min_ratio, hence a gap
    # of length >= r * min_ratio * max_gap; shorter gaps never win
    tab = gap_table(ifs, radii[-1] * ifs.min_ratio * ifs.max_gap, capacity)
    order = np.argsort(tab.left, kind="stable")
    left = tab.left[order]
    right = left + tab.length[order]
    table = _range_max_table(tab.length[order])
    lam = 1.0
    for r in radii:
        i0 = np.searchsorted(left, xs - r, side="left")
        i1 = np.searchsorted(right, xs + r, side="right")
        longest = _range_max(table, i0, i1)
        lam = min(lam, float(longest.min()) / r)
    return lam


def default_enlargement(ifs: IfsSystem, sample_depth: int = 8) -> float:
    """``max(6, ceil(2 / lambda))`` with the sampled lacunarity constant."""
    lam = lacunarity_estimate(ifs, sample_depth)
    return float(max(6, math.ceil(2.0 / lam)))


@dataclass
class SandwichReport:
    q: float
    a: float
    b: float
    lam: float
    scales: np.ndarray
    grid_logs: np.ndarray
    lower_band_logs: np.ndarray
    upper_band_logs: np.ndarray
    eta: tuple[float, float]
    lacunarity_ok: bool
    notes: list = field(default_factory=list)

    @property
    def lower_ratios(self) -> np.ndarray:
        """Grid sum over lower band sum; bounded below by ``c_1``."""
        return np.exp(self.grid_logs - self.lower_band_logs)

    @property
    def upper_ratios(self) -> np.ndarray:
        """Grid sum over upper band sum; bounded above by ``c_2``."""
        return np.exp(self.grid_logs - self.upper_band_logs)

    @property
    def c1(self) -> float:
        return float(self.lower_ratios.min())

    @property
    def c2(self) -> float:
        return float(self.upper_ratios.max())

    @property
    def passed(self) -> bool:
        vals = np.concatenate([self.lower_ratios, self.upper_ratios])
        return bool(np.all(np.isfinite(vals)) and np.all(vals > 0))


def sandwich_bands(q: float, a: float, b: float, lam: float) -> tuple[float, float]:
    """Band parameters ``(eta_1, eta_2)`` so the gap bands are ``[lam eta r, eta r]``."""
    if q >= 0:
        eta1 = b / (2.0 + a)
        eta2 = (2.0 + b) / max(2.0 + a - 2.0 / lam, 2.0)
    else:
        eta1 = (2.0 + b) / (a * lam)
        eta2 = b / (2.0 + a)
    return eta1, eta2


def sandwich_check(
    mu: SelfSimilarMeasure,
    q: float,
    a: float,
    b: float,
    scales: Sequence[float],
    lam: float | None = None,
    tol: float = DEFAULT_TOL,
    capacity: int = DEFAULT_CAPACITY,
) -> SandwichReport:
    """Compare grid sums with gap sums over the two length bands at every scale."""
    if not b > 0:
        raise ValueError("grid enlargement b must be positive")
    if lam is None:
        lam = lacunarity_estimate(mu.system)
    ok = a >= 2.0 / lam
    notes = []
    if not ok:
        msg = f"a={a} is below 2/lambda={2.0 / lam:.4g}; gap sums may miss part of the support"
        warnings.warn(msg, LacunarityWarning, stacklevel=2)
        notes.append(msg)
    r = np.asarray(scales, dtype=float)
    eta1, eta2 = sandwich_bands(q, a, b, lam)
    smallest = lam * min(eta1, eta2) * r.min()
    tab = gap_table(mu.system, smallest, capacity)
    gap_logs = q * gap_enlarged_logs(mu, tab.left, tab.length, a, tol)

    def band(eta: float, scale: float) -> float:
        sel = (tab.length >= lam * eta * scale) & (tab.length <= eta * scale)
        return log_sum_exp(gap_logs[sel])

    grid = np.array([grid_moment_sum(mu, float(s), q, b, tol).log for s in r])
    lower = np.array([band(eta1, float(s)) for s in r])
    upper = np.array([band(eta2, float(s)) for s in r])
    return SandwichReport(q, a, b, lam, r, grid, lower, upper, (eta1, eta2), ok, notes)


@dataclass
class EnlargementReport:
    """Grid sums at two enlargements ``a <= b`` on each scale."""

    q: float
    a: float
    b: float
    scales: np.ndarray
    logs_a: np.ndarray
    logs_b: np.ndarray
    logs_b_fine: np.ndarray | None  # at scale r a / (2 + b), negative q only

    @property
    def inclusion_holds(self) -> bool:
        """Sum at ``b`` >= sum at ``a`` for ``q >= 0``; reversed for ``q < 0``."""
        if self.q >= 0:
            return bool(np.all(self.logs_b >= self.logs_a))
        return bool(np.all(self.logs_b <= self.logs_a))

    @property
    def ratios(self) -> np.ndarray:
        """``c_1`` witnesses for ``q >= 0``, ``c_2`` witnesses for ``q < 0``."""
        if self.q >= 0:
            return np.exp(self.logs_a - self.logs_b)
        return np.exp(self.logs_a - self.logs_b_fine)


def enlargement_check(
    mu: SelfSimilarMeasure, q: float, a: float, b: float, scales: Sequence[float], tol: float = DEFAULT_TOL
) -> EnlargementReport:
    """Evaluate both sides of the enlargement-independence inequalities."""
    if not 0 <= a <= b:
        raise ValueError("need 0 <= a <= b")
    if q < 0 and a <= 0:
        raise ValueError("negative q needs a > 0")
    r = np.asarray(scales, dtype=float)

    def logs(enl: float, s: float) -> np.ndarray:
        return q * grid_moment_logs(mu, s, enl, tol)

    la, lb, lf = [], [], []
    for s in r:
        # same cell set and order for both enlargements, so the comparison is termwise
        va, vb = logs(a, float(s)), logs(b, float(s))
        la.append(log_sum_exp(va))
        lb.append(log_sum_exp(vb))
        if q < 0:
            lf.append(log_sum_exp(logs(b, float(s) * a / (2.0 + b))))
    return EnlargementReport(q, a, b, r, np.array(la), np.array(lb), np.array(lf) if q < 0 else None)
