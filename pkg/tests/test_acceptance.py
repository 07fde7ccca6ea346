"""Acceptance gate: one check per criterion at its stated tolerance.

Run under pytest (a PASS/FAIL line per criterion is printed in the terminal
summary) or directly with ``python tests/test_acceptance.py``.
"""

import math
import sys
import time
from pathlib import Path

import numpy as np
import yaml

sys.path.insert(0, str(Path(__file__).parent))

from mftrace import (  # noqa: E402
    SelfSimilarMeasure,
    beta_closed_form,
    beta_grid_estimate,
    beta_interval_estimate,
    cell_indicator,
    constant,
    enlargement_check,
    identity,
    minkowski_profile,
    nu_weights,
    partial_sum_trace,
    renewal_constants,
    renewal_diagnostic,
    sandwich_check,
    scale_threshold,
    set_trace_constant,
    singular_values,
    singular_values_above,
    spectral_dimension_estimate,
    validate_ifs,
    verify_integral,
)
from mftrace.cli import main  # noqa: E402
from mftrace.multifractal import default_enlargement, default_grid_scales, default_interval_cutoffs  # noqa: E402

from oracles import CANTOR, P_A, P_B, P_C, SYS_C, beta_root, dimension_root  # noqa: E402

RESULTS: dict[int, tuple[bool, str]] = {}

CANTOR_IFS = validate_ifs(CANTOR)
SYS_C_IFS = validate_ifs(SYS_C)
MU = {
    "SYS-A": SelfSimilarMeasure(CANTOR_IFS, P_A),
    "SYS-B": SelfSimilarMeasure(CANTOR_IFS, P_B),
    "SYS-C": SelfSimilarMeasure(SYS_C_IFS, P_C),
}
DELTA = 1e-7


def record(n: int, ok: bool, detail: str) -> bool:
    RESULTS[n] = (bool(ok), detail)
    return bool(ok)


def criterion_1() -> bool:
    worst, slowest = 0.0, 0.0
    for q in range(-4, 5):
        t0 = time.perf_counter()
        got = beta_closed_form(P_A, CANTOR_IFS.ratios, q)
        slowest = max(slowest, time.perf_counter() - t0)
        want = (1 - q) * math.log(2) / math.log(3)
        worst = max(worst, abs(got - want), abs(got - beta_root(P_A, CANTOR_IFS.ratios, q)))
    ok = worst <= 1e-10 and slowest < 1e-3
    return record(1, ok, f"max error {worst:.2e}, slowest {slowest * 1e3:.3f} ms per q")


def criterion_2() -> bool:
    t0 = time.perf_counter()
    worst_grid, worst_int = 0.0, 0.0
    for name in ("SYS-A", "SYS-B"):
        mu = MU[name]
        ifs = mu.system
        scales = default_grid_scales(ifs, DELTA)
        cutoffs = default_interval_cutoffs(ifs, DELTA)
        a = default_enlargement(ifs)
        for q in (-4, -2, -1, 0, 0.5, 1, 2, 4):
            closed = beta_closed_form(mu.weights, ifs.ratios, q)
            worst_grid = max(worst_grid, abs(beta_grid_estimate(mu, q, 1.0, scales).value - closed))
            worst_int = max(worst_int, abs(beta_interval_estimate(mu, q, a, cutoffs).value - closed))
    took = time.perf_counter() - t0
    ok = worst_grid <= 0.03 and worst_int <= 0.02 and took < 60
    return record(2, ok, f"grid {worst_grid:.2e} <= 0.03, interval {worst_int:.2e} <= 0.02, {took:.1f} s")


def criterion_3() -> bool:
    closed, empirical = 0.0, 0.0
    for mu in MU.values():
        ifs = mu.system
        closed = max(closed, abs(beta_closed_form(mu.weights, ifs.ratios, 1.0)))
        grid = beta_grid_estimate(mu, 1.0, 1.0, default_grid_scales(ifs, DELTA)).value
        interval = beta_interval_estimate(mu, 1.0, default_enlargement(ifs), default_interval_cutoffs(ifs, DELTA)).value
        empirical = max(empirical, abs(grid), abs(interval))
    ok = closed == 0.0 and empirical <= 2e-2
    return record(3, ok, f"closed form {closed:.1e}, empirical {empirical:.4f} <= 0.02")


def criterion_4() -> bool:
    deltas = np.geomspace(1e-2, 1e-10, 41)
    errs = []
    for ifs in (CANTOR_IFS, SYS_C_IFS):
        slope, _ = spectral_dimension_estimate(ifs, deltas)
        errs.append(abs(slope - dimension_root(ifs.ratios)))
    # SYS-A and SYS-B share their geometry
    ok = max(errs) <= 0.02
    return record(4, ok, f"slope errors {errs[0]:.4f} (SYS-A/B), {errs[1]:.4f} (SYS-C) <= 0.02")


def criterion_5() -> bool:
    target = 1 / math.log(3)
    t0 = time.perf_counter()
    mu = MU["SYS-A"]
    s = CANTOR_IFS.similarity_dimension()
    c_renewal = renewal_constants(mu, 0.0, 6.0).c
    c_set = set_trace_constant(CANTOR_IFS, s)
    est = partial_sum_trace(singular_values(mu, 0.0, s, 6.0, DELTA))
    took = time.perf_counter() - t0
    lo, hi = est.band
    width = (hi - lo) / est.point
    ok = (
        abs(c_renewal - target) <= 1e-10
        and abs(c_set - target) <= 1e-10
        and lo <= target <= hi
        and width <= 0.10
        and took < 30
    )
    return record(
        5,
        ok,
        f"renewal c {c_renewal:.6f}, set formula {c_set:.6f}, target {target:.6f}; "
        f"band [{lo:.4f}, {hi:.4f}] width {width:.1%}, {took:.1f} s",
    )


def criterion_6() -> bool:
    mu = MU["SYS-B"]
    q, a = 2.0, 6.0
    beta = beta_closed_form(P_B, CANTOR_IFS.ratios, q)
    c = renewal_constants(mu, q, a, beta).c
    svs = singular_values_above(mu, q, beta, a, scale_threshold(CANTOR_IFS, DELTA))
    est = partial_sum_trace(svs)
    rel = abs(est.point - c) / c
    rep = renewal_diagnostic(mu, q, a, np.geomspace(1e-1, 1e-4, 13))
    lo, hi = rep.count_band
    bounded = lo > 0 and hi / lo < 10
    ok = rel <= 0.10 and rep.r_stabilized and bounded
    return record(
        6,
        ok,
        f"point {est.point:.4f} vs c {c:.4f} ({rel:.1%} <= 10%), r stabilized {rep.r_stabilized}, "
        f"tau S_1 in [{lo:.3f}, {hi:.3f}]",
    )


def criterion_7() -> bool:
    lines, ok = [], True
    for name, q in (("SYS-A", 0.0), ("SYS-B", 2.0)):
        mu = MU[name]
        ifs = mu.system
        beta = beta_closed_form(mu.weights, ifs.ratios, q)
        nu = nu_weights(mu.weights, ifs.ratios, q, beta, ifs)
        fs = [("1", constant()), ("x", identity())] + [
            (f"1_{i + 1}", cell_indicator(ifs, (i,))) for i in range(ifs.m)
        ]
        for label, f in fs:
            rep = verify_integral(f, mu, q, 6.0, DELTA, depth=12)
            ok &= rep.rel_discrepancy <= 0.10
            if label.startswith("1_"):
                # closed-form right side c * p_i**q * r_i**beta
                w = nu.cell_weight((int(label[2:]) - 1,))
                ok &= abs(rep.integral - w) <= 1e-10
                ok &= abs(rep.lhs - rep.c * w) <= 0.10 * rep.c * w
            lines.append(f"{name} {label} {rep.rel_discrepancy:.1%}")
    return record(7, ok, "; ".join(lines))


def criterion_8() -> bool:
    scales = 2.0 ** -np.arange(4, 15)
    lo_seen, hi_seen, inclusion = math.inf, 0.0, True
    import warnings

    from mftrace import LacunarityWarning

    for mu in MU.values():
        a = default_enlargement(mu.system)
        for q in (-2.0, -1.0, 0.5, 1.0, 2.0):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", LacunarityWarning)
                rep = sandwich_check(mu, q, a, 1.0, scales)
            vals = np.concatenate([rep.lower_ratios, rep.upper_ratios])
            lo_seen = min(lo_seen, float(vals.min()))
            hi_seen = max(hi_seen, float(vals.max()))
            inclusion &= enlargement_check(mu, q, 0.5, 1.0, scales).inclusion_holds
    ok = lo_seen >= 1e-6 and hi_seen <= 1e6 and inclusion
    return record(8, ok, f"ratios in [{lo_seen:.3g}, {hi_seen:.3g}], inclusion holds {inclusion}")


def criterion_9() -> bool:
    rs = 3.0 ** -np.arange(2, 13) / 2
    vals = np.array([v for _, v in minkowski_profile(CANTOR_IFS, rs)])
    ratio = vals.max() / vals.min()
    ok = vals.min() > 0 and ratio <= 3
    return record(9, ok, f"band [{vals.min():.4f}, {vals.max():.4f}], max/min {ratio:.3f} <= 3")


def criterion_10(workdir: Path) -> bool:
    cfg = workdir / "sys_b.yaml"
    cfg.write_text(
        yaml.safe_dump(
            {
                "ifs": [list(m) for m in CANTOR],
                "weights": list(P_B),
                "q_grid": [-4, -2, -1, 0, 0.5, 1, 2, 4],
                "enlargement": 6,
                "cutoffs": {"start": 0.01, "factor": 1 / 3, "count": 11},
            }
        )
    )
    same = True
    for command, name in (("beta", "beta.csv"), ("trace", "trace.csv")):
        blobs = []
        for threads in ("1", "8"):
            out = workdir / f"{command}-{threads}"
            if main(["--config", str(cfg), "--command", command, "--out", str(out), "--threads", threads]) != 0:
                return record(10, False, f"{command} run failed")
            blobs.append((out / name).read_bytes())
        same &= blobs[0] == blobs[1]
    return record(10, same, f"beta.csv and trace.csv byte-identical across 1 and 8 threads: {same}")


def test_criterion_1_closed_form_beta():
    assert criterion_1(), RESULTS[1][1]


def test_criterion_2_beta_cross_method():
    assert criterion_2(), RESULTS[2][1]


def test_criterion_3_beta_at_one():
    assert criterion_3(), RESULTS[3][1]


def test_criterion_4_spectral_dimension():
    assert criterion_4(), RESULTS[4][1]


def test_criterion_5_trace_constant_zero_moment():
    assert criterion_5(), RESULTS[5][1]


def test_criterion_6_multifractal_trace():
    assert criterion_6(), RESULTS[6][1]


def test_criterion_7_noncommutative_integral():
    assert criterion_7(), RESULTS[7][1]


def test_criterion_8_sandwich_suites():
    assert criterion_8(), RESULTS[8][1]


def test_criterion_9_minkowski_profile():
    assert criterion_9(), RESULTS[9][1]


def test_criterion_10_determinism(tmp_path):
    assert criterion_10(tmp_path), RESULTS[10][1]


def report_lines() -> list[str]:
    return [f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}" for n, (ok, detail) in sorted(RESULTS.items())]


if __name__ == "__main__":
    import tempfile

    checks = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8, criterion_9]
    for check in checks:
        check()
    with tempfile.TemporaryDirectory() as tmp:
        criterion_10(Path(tmp))
    print("\n".join(report_lines()))
    sys.exit(0 if all(ok for ok, _ in RESULTS.values()) else 1)
