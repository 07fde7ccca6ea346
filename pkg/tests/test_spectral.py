import math

import numpy as np
import pytest

from mftrace import (
    InsufficientScalesError,
    NonConvergedError,
    SingularValue,
    TooFewValuesError,
    beta_closed_form,
    enumerate_gaps,
    minkowski_profile,
    partial_sum_trace,
    renewal_constants,
    renewal_diagnostic,
    scale_threshold,
    set_trace_constant,
    singular_values,
    singular_values_above,
    spectral_dimension_estimate,
)
from mftrace.spectral import LEFT, minkowski_trace_constant, trace_from_logs

from oracles import CANTOR, P_B, P_C, SYS_C, brute_measure, dimension_root, harmonic

LOG23 = math.log(2) / math.log(3)


def test_zero_moment_values_are_doubled_lengths(mu_c, sys_c):
    s = sys_c.similarity_dimension()
    svs = singular_values(mu_c, 0, s, 6, 1e-3)
    gaps = enumerate_gaps(sys_c, 1e-3)
    assert len(svs) == 2 * len(gaps)
    want = np.repeat([g.length**s for g in gaps], 2)
    np.testing.assert_allclose(np.exp(svs.log_sigma), want, rtol=1e-12)
    assert list(svs.gap_id) == list(np.repeat(np.arange(len(gaps)), 2))


def test_second_moment_cantor_by_oracle(mu_a, cantor):
    beta = beta_closed_form((0.5, 0.5), cantor.ratios, 2)
    svs = singular_values(mu_a, 2, beta, 4, 1 / 9)
    assert len(svs) == 6
    want = []
    for g in enumerate_gaps(cantor, 1 / 9):
        m = brute_measure(CANTOR, (0.5, 0.5), g.left - 2 * g.length, g.right + 2 * g.length, depth=30)
        want += [m**2 * g.length**beta] * 2
    np.testing.assert_allclose(np.exp(svs.log_sigma), sorted(want, reverse=True), rtol=1e-7)


def test_symmetric_values_come_in_pairs(mu_b):
    svs = singular_values(mu_b, 2.5, -0.7, 6, 1e-4)
    vals, counts = np.unique(svs.log_sigma, return_counts=True)
    assert np.all(counts % 2 == 0)
    items = list(svs)
    assert isinstance(items[0], SingularValue)
    assert {v.endpoint for v in items} == {"left", "right"}


def test_sorted_descending_with_id_ties(mu_c):
    svs = singular_values(mu_c, -1.5, 2.0, 6, 1e-4)
    keys = list(zip(-svs.log_sigma, svs.gap_id, svs.endpoint))
    assert keys == sorted(keys)


@pytest.mark.parametrize("mode", ["one-sided-left", "one-sided-right"])
def test_one_sided_values_by_oracle(mu_c, sys_c, mode):
    a, q, beta = 3.0, 1.5, 0.2
    svs = singular_values(mu_c, q, beta, a, 1e-2, mode)
    gaps = enumerate_gaps(sys_c, 1e-2)
    assert len(svs) == len(gaps)
    assert svs.dropped_sides == 0
    got = dict(zip(svs.gap_id, np.exp(svs.log_sigma)))
    for k, g in enumerate(gaps):
        h = 0.5 * a * g.length
        lo, hi = (g.left - h, g.left) if mode == "one-sided-left" else (g.right, g.right + h)
        want = brute_measure(SYS_C, P_C, lo, hi, depth=40) ** q * g.length**beta
        assert got[k] == pytest.approx(want, rel=1e-6)


def test_mode_and_arguments_checked(mu_a):
    with pytest.raises(ValueError):
        singular_values(mu_a, 1, 0, 6, 1e-3, mode="sideways")
    with pytest.raises(ValueError):
        singular_values(mu_a, 1, 0, 0, 1e-3)
    with pytest.raises(ValueError):
        singular_values(mu_a, 1, 0, 6, 0)


@pytest.mark.parametrize("q", [-2.0, 1.5, 3.0])
def test_threshold_selection_is_complete(mu_c, sys_c, q):
    beta = beta_closed_form(P_C, sys_c.ratios, q)
    by_length = singular_values(mu_c, q, beta, 6, 1e-7)
    tau = math.exp(by_length.log_sigma[0] - 5.0)
    by_value = singular_values_above(mu_c, q, beta, 6, tau)
    # the length cutoff only certifies values above its own frontier; the
    # margin keeps values within rounding of the cut out of the comparison
    cut = max(math.log(tau), by_length.complete_above) + 1e-6
    want = by_length.log_sigma[by_length.log_sigma >= cut]
    got = by_value.log_sigma[by_value.log_sigma >= cut]
    assert len(want) > 20
    np.testing.assert_allclose(got, want, atol=1e-9)


def test_threshold_matches_length_cutoff_at_zero_moment(mu_a, cantor):
    s = cantor.similarity_dimension()
    delta = 3.0**-9 * (1 - 1e-9)
    a = singular_values_above(mu_a, 0, s, 6, scale_threshold(cantor, delta))
    b = singular_values(mu_a, 0, s, 6, delta)
    np.testing.assert_array_equal(a.log_sigma, b.log_sigma)


def test_far_corner_masses_resolved(mu_b, cantor):
    # gaps next to x = 1 at depth 60 are far below double resolution in
    # absolute coordinates; their masses must still scale exactly
    beta = beta_closed_form(P_B, cantor.ratios, 2)
    svs = singular_values_above(mu_b, 2, beta, 6, 1e-4)
    deep = svs.log_sigma[svs.position > 1 - 1e-15]
    assert deep.size > 0 and np.all(np.isfinite(deep))


def test_harmonic_sequence_against_harmonic_sum():
    n = 10**5
    est = partial_sum_trace(1.0 / np.arange(1, n + 1))
    assert est.point == pytest.approx(harmonic(n) / math.log(n), rel=1e-10)
    # the limit is 1; at this N the gamma/log N bias is still 5 percent
    assert abs(est.point - 1) < 0.06
    assert est.tail_slope == pytest.approx(1.0, abs=2e-5)
    assert est.band[0] <= est.point <= est.band[1]
    assert all(r >= 0 and math.isfinite(r) for r in est.ratios)


def test_checkpoints_are_geometric():
    est = partial_sum_trace(1.0 / np.arange(1, 1001))
    cps = est.checkpoints
    assert cps[0] == 2 and cps[-1] == 1000
    assert all(b > a for a, b in zip(cps, cps[1:]))
    assert list(cps[:6]) == [2, 3, 4, 6, 8, 12]


def test_finite_rank_change_leaves_tail_slope():
    n = 10**5
    base = 1.0 / np.arange(1, n + 1)
    bumped = np.concatenate([np.full(10, 1e3), base[10:]])
    a, b = partial_sum_trace(base), partial_sum_trace(bumped)
    assert b.tail_slope == pytest.approx(a.tail_slope, abs=1e-6)


def test_too_few_values():
    with pytest.raises(TooFewValuesError):
        partial_sum_trace(np.ones(99))


def test_unsorted_values_rejected():
    with pytest.raises(ValueError):
        partial_sum_trace(np.arange(200.0))


def test_doubling_bookkeeping(mu_b, cantor):
    beta = beta_closed_form(P_B, cantor.ratios, 2)
    svs = singular_values_above(mu_b, 2, beta, 6, 1e-4)
    single = svs.log_sigma[svs.endpoint == LEFT]
    doubled, one = trace_from_logs(svs.log_sigma), trace_from_logs(single)
    assert doubled.tail_slope == pytest.approx(2 * one.tail_slope, rel=0.01)
    # at a common threshold the partial sums double exactly
    cut = np.median(single)
    s1 = math.fsum(np.exp(single[single >= cut]))
    s2 = math.fsum(np.exp(svs.log_sigma[svs.log_sigma >= cut]))
    assert s2 == pytest.approx(2 * s1, rel=1e-12)


def test_threshold_and_count_truncations_agree(mu_c):
    svs = singular_values_above(mu_c, 1.5, 0.3, 6, 1e-3)
    vals = np.exp(svs.log_sigma)
    for tau in (0.5, 0.05, 0.005):
        n = int(np.sum(vals >= tau))
        assert math.fsum(vals[vals >= tau]) == math.fsum(vals[:n])


def test_spectral_dimension_cantor(cantor):
    slope, err = spectral_dimension_estimate(cantor, np.geomspace(1e-2, 1e-10, 41))
    assert slope == pytest.approx(LOG23, abs=0.01)
    assert err >= 0


def test_spectral_dimension_three_maps(sys_c):
    slope, _ = spectral_dimension_estimate(sys_c, np.geomspace(1e-2, 1e-10, 41))
    assert slope == pytest.approx(dimension_root(sys_c.ratios), abs=0.02)


def test_spectral_dimension_needs_counts(cantor):
    with pytest.raises(InsufficientScalesError):
        spectral_dimension_estimate(cantor, [0.9, 0.8, 0.7, 0.6, 0.5])
    with pytest.raises(InsufficientScalesError):
        spectral_dimension_estimate(cantor, [0.1, 0.05, 0.02, 0.01])


def test_tube_length_single_wide_gap(cantor):
    s = cantor.similarity_dimension()
    (r, val), = minkowski_profile(cantor, [1 / 18], s)
    assert val * r ** (1 - s) == pytest.approx(8 / 9, rel=1e-12)


def test_tube_length_large_radius(sys_c):
    s = sys_c.similarity_dimension()
    for r, val in minkowski_profile(sys_c, [2.0, 0.75, 0.5], s):
        assert val * r ** (1 - s) == pytest.approx(1 + 2 * r)


def test_cantor_profile_bounded_and_oscillating(cantor):
    rs = 3.0 ** -np.arange(2, 13) / 2
    vals = np.array([v for _, v in minkowski_profile(cantor, rs)])
    assert vals.max() / vals.min() <= 3
    between = np.array([v for _, v in minkowski_profile(cantor, rs * 0.6)])
    assert np.ptp(np.concatenate([vals, between])) > 0.01


def test_profile_rejects_increasing_radii(cantor):
    with pytest.raises(ValueError):
        minkowski_profile(cantor, [0.01, 0.1])


def test_renewal_cantor_zero_moment(mu_a):
    rc = renewal_constants(mu_a, 0, 6)
    assert rc.r0 == pytest.approx(0.5, abs=1e-14)
    assert rc.entropy_denominator == pytest.approx(math.log(2), rel=1e-14)
    assert rc.c == pytest.approx(1 / math.log(2), rel=1e-12)


def test_set_formula_differs_by_dimension(cantor, sys_c, mu_a, mu_c):
    assert set_trace_constant(cantor) == pytest.approx(1 / math.log(3), rel=1e-12)
    for ifs, mu in ((cantor, mu_a), (sys_c, mu_c)):
        s = ifs.similarity_dimension()
        assert renewal_constants(mu, 0, 6).c * s == pytest.approx(set_trace_constant(ifs, s), rel=1e-10)


def test_renewal_constant_matches_trace_growth(mu_a, cantor):
    s = cantor.similarity_dimension()
    est = partial_sum_trace(singular_values(mu_a, 0, s, 6, 1e-7))
    # lattice ripple keeps the slope a few percent off its mean
    assert est.tail_slope == pytest.approx(renewal_constants(mu_a, 0, 6).c, rel=0.03)


def test_renewal_constant_matches_minkowski_content(sys_c, mu_c):
    s = sys_c.similarity_dimension()
    prof = minkowski_profile(sys_c, np.geomspace(1e-6, 1e-8, 5), s)
    content = np.mean([v for _, v in prof])
    c = renewal_constants(mu_c, 0, 6).c
    assert minkowski_trace_constant(s, content) == pytest.approx(c, rel=0.01)


def _r0_oracle(raw, p, q, beta, a, cutoff):
    """Direct evaluation of the residue sum over gaps of length >= cutoff."""
    from oracles import brute_gaps, gaps_of

    total = 0.0
    top = {(round(x, 12), round(b - x, 12)) for x, b in gaps_of(raw)}
    for left, length in brute_gaps(raw, cutoff):
        h = 0.5 * a * length
        lo, hi = left - h, left + length + h
        here = brute_measure(raw, p, lo, hi, depth=45) ** q
        if (round(left, 12), round(length, 12)) in top:
            total += length**beta * here
            continue
        i = max(k for k, (_, t) in enumerate(raw) if t <= left)
        r, t = raw[i]
        pulled = brute_measure(raw, p, (lo - t) / r, (hi - t) / r, depth=45) ** q
        total += length**beta * (here - p[i] ** q * pulled)
    return total


def test_renewal_residue_weighted_cantor(mu_b, cantor):
    rc = renewal_constants(mu_b, 2, 6)
    beta = beta_closed_form(P_B, cantor.ratios, 2)
    want = _r0_oracle(CANTOR, P_B, 2, beta, 6, 1e-3)
    assert rc.r0 > 0
    assert rc.r0 == pytest.approx(want, rel=1e-6)
    w = np.array([0.09, 0.49]) * 3.0**-beta
    assert rc.entropy_denominator == pytest.approx(-np.sum(w * np.log(w)), rel=1e-12)


def test_renewal_residue_three_maps(mu_c, sys_c):
    for q, a in ((-1.0, 4.0), (2.0, 9.0)):
        rc = renewal_constants(mu_c, q, a)
        want = _r0_oracle(SYS_C, P_C, q, rc.beta, a, 1e-3)
        assert rc.r0 == pytest.approx(want, rel=1e-6)


def test_renewal_capacity(mu_c):
    with pytest.raises(NonConvergedError):
        renewal_constants(mu_c, 2, 1e5, capacity=50)


def test_renewal_diagnostic_cantor(mu_a):
    ks = np.arange(4, 15)
    taus = np.concatenate([[4.0, 1.0], 2.0**-ks * (1 - 1e-9)])
    rep = renewal_diagnostic(mu_a, 0, 6, taus)
    assert rep.r_tau[0] == 0.0 and rep.r_tau[1] == 0.0
    assert rep.r_stabilized
    np.testing.assert_allclose(rep.s_over_log[2:], 1 / (2 * math.log(2)), rtol=1e-8)
    assert rep.limit == pytest.approx(rep.constants.c / 2)


def test_renewal_diagnostic_counts_bounded(mu_b):
    taus = np.geomspace(1e-1, 1e-4, 13)
    rep = renewal_diagnostic(mu_b, 2, 6, taus)
    lo, hi = rep.count_band
    assert lo > 0 and hi / lo < 4
    assert rep.r_stabilized


def test_gap_counts_without_positions(sys_c):
    from mftrace import gap_count_profile

    deltas = np.geomspace(1e-1, 1e-5, 9)
    counts = [n for _, n in gap_count_profile(sys_c, deltas)]
    assert counts == [len(enumerate_gaps(sys_c, d)) for d in deltas]


# ratio bands S_n / log n at delta = 1e-6, a = 6, beta = beta(q); regression-locked
RATIO_BANDS = {
    ("mu_a", 0.0): (1.0820212806667229, 1.4426950408889638),
    ("mu_a", 2.0): (4.32808512266689, 5.7707801635558535),
    ("mu_b", -1.0): (0.5116085154000443, 0.6248821218614432),
    ("mu_b", 2.0): (4.464609761992515, 7.335162067290877),
    ("mu_c", -1.0): (0.1345358310225772, 0.21133316179459424),
    ("mu_c", 0.0): (0.5376183294107738, 0.8079921119423481),
}


@pytest.mark.parametrize("name,q", list(RATIO_BANDS))
def test_ratio_band_locked(request, name, q):
    mu = request.getfixturevalue(name)
    beta = beta_closed_form(mu.weights, mu.system.ratios, q)
    est = partial_sum_trace(singular_values_above(mu, q, beta, 6.0, scale_threshold(mu.system, 1e-6)))
    lo, hi = RATIO_BANDS[(name, q)]
    assert 0 < min(est.ratios) and max(est.ratios) < math.inf
    assert min(est.ratios) == pytest.approx(lo, rel=1e-9)
    assert max(est.ratios) == pytest.approx(hi, rel=1e-9)
