"""Weighted traces ``tau(xi(f) G^q |D|^-beta)`` against ``c * int f dnu``.

``nu`` is the self-similar probability measure with weights
``p_i**q r_i**beta(q)``.  The left side weights each endpoint's singular
value by ``f`` at that endpoint; the right side integrates ``f`` against
``nu`` by midpoint quadrature on cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .ifs import DEFAULT_CAPACITY, IfsSystem, Word, net_cells
from .measure import DEFAULT_TOL, SelfSimilarMeasure
from .multifractal import beta_closed_form
from .spectral import (
    TraceEstimate,
    renewal_constants,
    scale_threshold,
    singular_values_above,
    trace_from_logs,
)

NORMALIZATION_TOL = 1e-10


@dataclass(frozen=True)
class AuxiliaryMeasure:
    system: IfsSystem | None
    weights: tuple[float, ...]

    @property
    def normalized(self) -> bool:
        return abs(math.fsum(self.weights) - 1.0) <= NORMALIZATION_TOL

    def cell_weight(self, word: Word | Sequence[int]) -> float:
        """``nu(psi_w[0, 1])``, the product of the weights along the word."""
        letters = word.letters if isinstance(word, Word) else tuple(word)
        return math.prod(self.weights[i] for i in letters)


def nu_weights(
    p: Sequence[float], r: Sequence[float], q: float, beta: float, system: IfsSystem | None = None
) -> AuxiliaryMeasure:
    """Weights ``p_i**q * r_i**beta``; ``normalized`` is false unless ``beta = beta(q)``."""
    p = np.asarray(p, dtype=float)
    r = np.asarray(r, dtype=float)
    if p.shape != r.shape:
        raise ValueError("need one weight per ratio")
    w = np.exp(q * np.log(p) + beta * np.log(r))
    return AuxiliaryMeasure(system, tuple(float(x) for x in w))


@dataclass(frozen=True)
class TestFunction:
    """Vectorised ``f`` on [0, 1] with a Lipschitz bound for the quadrature error.

    ``exact_depth`` marks functions constant on every cell of that depth
    (cell indicators); quadrature at or beyond it carries no error.
    """

    __test__ = False  # not a pytest class

    name: str
    evaluator: Callable[[np.ndarray], np.ndarray]
    modulus: float
    exact_depth: int | None = None
    params: dict = field(default_factory=dict, compare=False)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self.evaluator(x), dtype=float), x.shape).copy()


def constant(value: float = 1.0) -> TestFunction:
    return TestFunction("constant", lambda x: np.full(np.shape(x), float(value)), 0.0, 0, {"value": value})


def identity() -> TestFunction:
    return TestFunction("identity", lambda x: x, 1.0)


def cell_indicator(ifs: IfsSystem, word: Word | Sequence[int]) -> TestFunction:
    """Indicator of the closed cell ``psi_w[0, 1]``.

    Gap endpoints on the cell boundary belong to the cell; points outside
    lie at least a gap length away, so a relative slack of ``1e-9`` absorbs
    rounding without misclassifying anything.
    """
    w = word if isinstance(word, Word) else Word(tuple(int(i) for i in word))
    lo, hi = w.cell(ifs)
    slack = 1e-9 * (hi - lo)
    return TestFunction(
        "indicator",
        lambda x: ((x >= lo - slack) & (x <= hi + slack)).astype(float),
        math.inf,
        len(w),
        {"word": w.letters},
    )


def hat(center: float, width: float, height: float = 1.0) -> TestFunction:
    """Piecewise-linear bump of the given half-width."""
    if not width > 0:
        raise ValueError("hat width must be positive")
    return TestFunction(
        "hat",
        lambda x: height * np.maximum(0.0, 1.0 - np.abs(x - center) / width),
        abs(height) / width,
        None,
        {"center": center, "width": width, "height": height},
    )


def integrate_nu(f: TestFunction, nu: AuxiliaryMeasure, depth: int) -> tuple[float, float]:
    """``sum over |w| = depth of nu_w f(midpoint of psi_w[0, 1])`` and its error bound."""
    if nu.system is None:
        raise ValueError("quadrature needs the geometry of nu")
    if not nu.normalized:
        raise ValueError("nu is not a probability measure; use beta = beta(q)")
    if depth < 1:
        raise ValueError("depth must be at least 1")
    offset, ratio, weight = net_cells(nu.system, depth, nu.weights)
    value = math.fsum(weight * f(offset + 0.5 * ratio))
    if f.exact_depth is not None and depth >= f.exact_depth:
        return value, 0.0
    return value, f.modulus * float(ratio.max())


def _part_trace(log_sigma: np.ndarray, weights: np.ndarray, cutoff: float) -> TraceEstimate:
    """Trace estimate of the values ``weights * sigma`` that are complete above ``cutoff``."""
    nz = weights > 0
    if not nz.any():
        return TraceEstimate.zero()
    logs = log_sigma[nz] + np.log(weights[nz])
    logs = np.sort(logs[logs >= cutoff])[::-1]
    return trace_from_logs(logs)


def weighted_trace(
    f: TestFunction,
    mu: SelfSimilarMeasure,
    q: float,
    a: float,
    delta: float,
    beta: float | None = None,
    mode: str = "symmetric",
    tol: float = DEFAULT_TOL,
    capacity: int = DEFAULT_CAPACITY,
) -> TraceEstimate:
    """Partial-sum trace of ``xi(f) G^q |D|^-beta`` with each endpoint weighted by its own ``f``.

    Weighting reorders the values, so they are re-sorted and only those
    above the completeness threshold times ``sup |f|`` are kept.  Signed
    ``f`` is split as ``f+ - f-``; the band of the difference is the
    interval difference of the two bands.
    """
    ifs = mu.system
    if beta is None:
        beta = beta_closed_form(mu.weights, ifs.ratios, q)
    svs = singular_values_above(mu, q, beta, a, scale_threshold(ifs, delta), mode, tol, capacity)
    fx = f(svs.position)
    top = float(np.max(np.abs(fx))) if fx.size else 0.0
    if top == 0.0:
        return TraceEstimate.zero()
    cutoff = svs.complete_above + math.log(top)
    pos = _part_trace(svs.log_sigma, np.maximum(fx, 0.0), cutoff)
    if not (fx < 0).any():
        return pos
    neg = _part_trace(svs.log_sigma, np.maximum(-fx, 0.0), cutoff)
    if pos.n_values == 0:
        pos = TraceEstimate.zero()
    return TraceEstimate(
        (),
        (),
        (pos.band[0] - neg.band[1], pos.band[1] - neg.band[0]),
        pos.point - neg.point,
        pos.tail_slope - neg.tail_slope,
        pos.n_values + neg.n_values,
    )


@dataclass(frozen=True)
class IntegralReport:
    lhs: float
    band: tuple[float, float]
    tail_slope: float
    c: float
    integral: float
    integral_error: float
    rhs: float
    rel_discrepancy: float
    budget: float


def verify_integral(
    f: TestFunction,
    mu: SelfSimilarMeasure,
    q: float,
    a: float,
    delta: float,
    depth: int,
    tol: float = DEFAULT_TOL,
    capacity: int = DEFAULT_CAPACITY,
) -> IntegralReport:
    """Both sides of ``tau(xi(f) G^q |D|^-beta(q)) = c int f dnu``.

    ``budget`` is the relative error allowance: the width of the trace band
    plus ``|c|`` times the quadrature bound, both over ``|rhs|``.
    """
    ifs = mu.system
    beta = beta_closed_form(mu.weights, ifs.ratios, q)
    consts = renewal_constants(mu, q, a, beta, tol, capacity)
    nu = nu_weights(mu.weights, ifs.ratios, q, beta, ifs)
    integral, err = integrate_nu(f, nu, depth)
    rhs = consts.c * integral
    est = weighted_trace(f, mu, q, a, delta, beta, "symmetric", tol, capacity)
    lhs = est.point
    scale = abs(rhs)
    if scale == 0.0:
        rel = 0.0 if lhs == 0.0 else math.inf
        budget = 0.0 if lhs == 0.0 else math.inf
    else:
        rel = abs(lhs - rhs) / scale
        budget = (est.band[1] - est.band[0] + abs(consts.c) * err) / scale
    return IntegralReport(lhs, est.band, est.tail_slope, consts.c, integral, err, rhs, rel, budget)
