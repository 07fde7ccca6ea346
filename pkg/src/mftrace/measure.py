"""Self-similar measures: distribution function, interval masses and moment sums.

All q-th powers are taken in the log domain; moment sums come back as
:class:`LogValue` so that large negative ``q`` on tiny masses cannot
overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyIntervalError, NegativeQUnenlargedError, WeightError
from .ifs import DEFAULT_CAPACITY, IfsSystem, gap_table

DEFAULT_TOL = 1e-13


@dataclass(frozen=True)
class SelfSimilarMeasure:
    system: IfsSystem
    weights: tuple[float, ...]

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        object.__setattr__(self, "weights", w)
        if len(w) != self.system.m:
            raise WeightError(f"{len(w)} weights for {self.system.m} maps")
        if any(not x > 0 for x in w):
            raise WeightError("weights must be strictly positive")
        if abs(math.fsum(w) - 1.0) > 1e-12:
            raise WeightError(f"weights sum to {math.fsum(w)}, not 1")


@dataclass(frozen=True)
class LogValue:
    """Nonnegative number stored as its natural log (``-inf`` for zero)."""

    log: float

    @property
    def sign(self) -> int:
        return 0 if self.log == -math.inf else 1

    @property
    def value(self) -> float:
        return math.exp(self.log)

    def __float__(self) -> float:
        return self.value

    @classmethod
    def of(cls, x: float) -> "LogValue":
        if x < 0:
            raise ValueError("LogValue holds nonnegative numbers only")
        return cls(math.log(x) if x > 0 else -math.inf)


@dataclass(frozen=True)
class EnlargedInterval:
    base: tuple[float, float]
    factor: float

    @property
    def extent(self) -> tuple[float, float]:
        s, t = self.base
        h = 0.5 * self.factor * (t - s)
        return s - h, t + h


@dataclass(frozen=True)
class GridCell:
    scale: float
    index: int

    @property
    def interval(self) -> tuple[float, float]:
        return self.index * self.scale, (self.index + 1) * self.scale


def log_sum_exp(logs: np.ndarray) -> float:
    """``log(sum(exp(logs)))`` summed in array order."""
    logs = np.asarray(logs, dtype=float)
    if logs.size == 0:
        return -math.inf
    top = logs.max()
    if top == -math.inf:
        return -math.inf
    if top == math.inf:
        return math.inf
    return float(top + math.log(np.exp(logs - top).sum()))


def _depth_cap(mu: SelfSimilarMeasure, tol: float) -> int:
    per = math.log(1.0 / tol) / math.log(1.0 / mu.system.max_ratio)
    return 64 * max(1, math.ceil(per))


def cdf_array(mu: SelfSimilarMeasure, x, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Vectorised ``F(x) = mu([0, x])``.

    Each point descends the cell tree: cells left of it add their full
    weight, the cell containing it is entered, and the descent stops once the
    point sits in a gap, on a cell endpoint, or in a cell of weight below
    ``tol``.  The stopping cells form a fixed partition, so the truncated
    result is still nondecreasing in ``x``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    ifs = mu.system
    r = np.asarray(ifs.ratios)
    t = np.asarray(ifs.translations)
    right = t + r
    p = np.asarray(mu.weights)
    below = np.concatenate(([0.0], np.cumsum(p)[:-1]))

    y = np.array(x, dtype=float, copy=True)
    shape = y.shape
    y = y.ravel()
    out = np.zeros_like(y)
    out[y >= 1.0] = 1.0
    idx = np.nonzero((y > 0.0) & (y < 1.0))[0]
    y = y[idx]
    acc = np.zeros_like(y)
    w = np.ones_like(y)
    # a point within a few ulps of a cell end is taken to be on it, so that
    # aligned grids and gap endpoints are resolved exactly
    res = np.full_like(y, 16 * np.finfo(float).eps)

    for _ in range(_depth_cap(mu, tol)):
        if idx.size == 0:
            break
        c = np.searchsorted(t, y, side="right") - 1
        in_gap = y > right[c]
        stepped = acc + w * below[c]
        acc = np.where(in_gap, stepped + w * p[c], stepped)
        w = w * p[c]
        y = (y - t[c]) / r[c]
        res = res / r[c]
        blur = np.minimum(res, 0.5)
        at_top = ~in_gap & (y >= 1.0 - blur)
        acc = np.where(at_top, acc + w, acc)
        done = in_gap | at_top | (y <= blur) | (w < tol)
        if done.any():
            out[idx[done]] = acc[done]
            keep = ~done
            idx, y, acc, w, res = idx[keep], y[keep], acc[keep], w[keep], res[keep]
    if idx.size:
        out[idx] = acc
    return out.reshape(shape)


def cdf(mu: SelfSimilarMeasure, x: float, tol: float = DEFAULT_TOL) -> float:
    """``mu([0, x])``; 0 left of the support and 1 right of it."""
    return float(cdf_array(mu, np.array([x]), tol)[0])


def interval_measure_array(mu: SelfSimilarMeasure, lo, hi, tol: float = DEFAULT_TOL) -> np.ndarray:
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(hi < lo):
        raise EmptyIntervalError("interval with right endpoint left of the left endpoint")
    both = cdf_array(mu, np.concatenate([lo.ravel(), hi.ravel()]), tol)
    n = lo.size
    return np.clip(both[n:] - both[:n], 0.0, 1.0).reshape(lo.shape)


def interval_measure(mu: SelfSimilarMeasure, iv: Sequence[float], tol: float = DEFAULT_TOL) -> float:
    s, t = iv
    if t < s:
        raise EmptyIntervalError(f"[{s}, {t}] is empty")
    return float(interval_measure_array(mu, np.array([s]), np.array([t]), tol)[0])


def enlarge(iv: Sequence[float], a: float) -> EnlargedInterval:
    s, t = iv
    if t < s:
        raise EmptyIntervalError(f"[{s}, {t}] is empty")
    if a < 0:
        raise ValueError("enlargement factor must be nonnegative")
    return EnlargedInterval((float(s), float(t)), float(a))


def star_indices(mu: SelfSimilarMeasure, r: float, capacity: int = DEFAULT_CAPACITY) -> np.ndarray:
    """Indices ``m`` of grid cells ``[m r, (m+1) r]`` whose interior meets the support.

    A cell misses the support exactly when it lies inside the closure of a
    gap, and only gaps of length ``>= r`` can hold a whole cell.
    """
    if not 0 < r <= 1:
        raise ValueError("grid scale must lie in (0, 1]")
    # slack absorbs rounding in endpoints computed along different paths
    slack = 1e-9 + 64 * np.finfo(float).eps / r
    n = max(1, math.ceil(1.0 / r - slack))
    cover = np.zeros(n + 1, dtype=np.int64)
    # a hair below r so gaps of length exactly r are not lost to rounding
    tab = gap_table(mu.system, r * (1.0 - 1e-9), capacity)
    if len(tab):
        lo = np.ceil(tab.left / r - slack).astype(np.int64)
        hi = np.floor(tab.right / r + slack).astype(np.int64) - 1
        ok = hi >= lo
        lo, hi = np.clip(lo[ok], 0, n), np.clip(hi[ok] + 1, 0, n)
        np.add.at(cover, lo, 1)
        np.add.at(cover, hi, -1)
    empty = np.cumsum(cover)[:n] > 0
    return np.nonzero(~empty)[0]


def grid_cells_star(mu: SelfSimilarMeasure, r: float, tol: float = DEFAULT_TOL) -> list[GridCell]:
    """Grid cells of scale ``r`` carrying positive mass.

    ``tol`` is accepted for interface symmetry; positivity is decided from
    the gap structure, not from rounded masses.
    """
    return [GridCell(r, int(m)) for m in star_indices(mu, r)]


def grid_moment_logs(mu: SelfSimilarMeasure, r: float, b: float, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Per-cell ``log mu(B^b)`` over the starred cells, in index order."""
    m = star_indices(mu, r).astype(float)
    lo = m * r - 0.5 * b * r
    hi = (m + 1) * r + 0.5 * b * r
    with np.errstate(divide="ignore"):
        return np.log(interval_measure_array(mu, lo, hi, tol))


def grid_moment_sum(mu: SelfSimilarMeasure, r: float, q: float, b: float = 0.0, tol: float = DEFAULT_TOL) -> LogValue:
    """``sum over starred cells B of mu(B enlarged by b)**q`` in the log domain."""
    if q < 0 and b <= 0:
        raise NegativeQUnenlargedError("negative moments need an enlargement b > 0")
    if b < 0:
        raise ValueError("enlargement must be nonnegative")
    logs = grid_moment_logs(mu, r, b, tol)
    if q == 0:
        return LogValue(math.log(logs.size) if logs.size else -math.inf)
    return LogValue(log_sum_exp(q * logs))


def gap_enlarged_logs(mu: SelfSimilarMeasure, left: np.ndarray, length: np.ndarray, a: float, tol: float = DEFAULT_TOL) -> np.ndarray:
    """``log mu`` of each gap enlarged by the factor ``1 + a`` about its centre."""
    h = 0.5 * a * length
    with np.errstate(divide="ignore"):
        return np.log(interval_measure_array(mu, left - h, left + length + h, tol))


def interval_moment_sum(
    mu: SelfSimilarMeasure,
    delta: float,
    q: float,
    beta: float,
    a: float,
    tol: float = DEFAULT_TOL,
    capacity: int = DEFAULT_CAPACITY,
) -> LogValue:
    """``sum over gaps |I| >= delta of mu(I^a)**q * |I|**beta`` in the log domain."""
    if not a > 0:
        raise ValueError("gap enlargement a must be positive")
    if not delta > 0:
        raise ValueError("delta must be positive")
    tab = gap_table(mu.system, delta, capacity)
    if len(tab) == 0:
        return LogValue(-math.inf)
    logs = q * gap_enlarged_logs(mu, tab.left, tab.length, a, tol) + beta * np.log(tab.length)
    return LogValue(log_sum_exp(logs))
