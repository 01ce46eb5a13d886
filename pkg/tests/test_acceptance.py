"""Acceptance gate: one test per calibrated criterion, one printed line each.

Statistical criteria run at master seed 0, committed before any outcome
was observed.  Lines print through pytest's capture so the final report
always carries the measured values.
"""

import math
import time

import numpy as np
import pytest

from ellipsoid_lab.cli import main
from ellipsoid_lab.construct import identity_perturbation_fit, least_norm_fit
from ellipsoid_lab.diagnostics import (
    e2_threshold,
    e3_threshold,
    norm_certificates,
    quad_form_check,
)
from ellipsoid_lab.experiment import (
    ExperimentConfig,
    estimate_transition,
    run_phase_sweep,
)
from ellipsoid_lab.gram import (
    a_prime_direct,
    a_star_gram_check,
    build_A,
    split_A,
    trace_moment,
)
from ellipsoid_lab.sampling import (
    SampleSet,
    decompose,
    draw_sample_set,
    sphere_moment_estimate,
)
from ellipsoid_lab.seeding import mix64

MASTER_SEED = 0


@pytest.fixture()
def report(capsys):
    def _report(line):
        with capsys.disabled():
            print(line)
    return _report


@pytest.fixture(scope="module")
def corpus_200x1000():
    """Per-seed certificates at (d, m) = (200, 1000) over 50 seeds.

    Shared by the operator-norm and cover-event criteria; quadratic-form
    probes run on the first 20 seeds with 100 unit probes each.
    """
    d, m = 200, 1000
    rows = []
    t0 = time.perf_counter()
    for k in range(50):
        s = draw_sample_set(d, m, mix64(MASTER_SEED, d, m, k))
        a_norm, a_prime_norm, a_star_norm = norm_certificates(s)
        fit = identity_perturbation_fit(s)
        row = {
            "a": a_norm, "a_prime": a_prime_norm, "a_star": a_star_norm,
            "eps_max": float(np.abs(s.eps).max()),
            "delta_max": float(np.abs(fit.delta).max()),
            "quad_max": None,
        }
        if k < 20:
            rng = np.random.Generator(np.random.PCG64(mix64(MASTER_SEED, 8, k)))
            qmax = 0.0
            for _ in range(100):
                u = rng.standard_normal(d)
                u /= np.linalg.norm(u)
                qmax = max(qmax, quad_form_check(s, fit, u))
            row["quad_max"] = qmax
        rows.append(row)
    return rows, time.perf_counter() - t0


def test_criterion_1_exact_fit_identity(report):
    rng = np.random.Generator(np.random.PCG64(2026))
    t0 = time.perf_counter()
    worst = 0.0
    solved = 0
    for k in range(200):
        d = int(rng.integers(5, 101))
        m = int(rng.integers(1, d * d // 8 + 1))
        fit = identity_perturbation_fit(draw_sample_set(d, m, k))
        if fit.solve_ok:
            solved += 1
            worst = max(worst, fit.max_residual)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-8 and elapsed < 60.0
    report(f"criterion 1 exact fit: {'PASS' if ok else 'FAIL'} "
           f"(max_residual={worst:.3e} over {solved}/200 solved instances, "
           f"elapsed={elapsed:.1f}s)")
    assert worst <= 1e-8
    assert solved > 0
    assert elapsed < 60.0


def test_criterion_2_hermite_split_identity(report):
    rng = np.random.Generator(np.random.PCG64(2027))
    t0 = time.perf_counter()
    worst_direct = worst_split = worst_star = 0.0
    for k in range(100):
        d = int(rng.integers(2, 21))
        m = int(rng.integers(1, 11))
        s = draw_sample_set(d, m, 1000 + k)
        a = build_A(s)
        v = s.directions
        direct = (v @ v.T) ** 2 - 1.0 / d
        np.fill_diagonal(direct, 0.0)
        worst_direct = max(worst_direct, float(np.abs(a - direct).max()))
        a_prime, a_star = split_A(s)
        worst_split = max(
            worst_split,
            float(np.abs(a - (a_prime + a_star)).max()),
            float(np.abs(a_prime - a_prime_direct(s)).max()))
        worst_star = max(worst_star, a_star_gram_check(s))
    elapsed = time.perf_counter() - t0
    ok = max(worst_direct, worst_split, worst_star) <= 1e-10
    report(f"criterion 2 hermite split: {'PASS' if ok else 'FAIL'} "
           f"(entry_dev={worst_direct:.2e}, split_dev={worst_split:.2e}, "
           f"star_gram_dev={worst_star:.2e}, elapsed={elapsed:.1f}s)")
    assert worst_direct <= 1e-10
    assert worst_split <= 1e-10
    assert worst_star <= 1e-10


def test_criterion_3_analytic_oracles(report):
    v, e = decompose(np.array([2.0, 0.0, 0.0]))
    s1 = SampleSet(d=3, m=1, directions=v[None, :], eps=np.array([e]))
    fit = identity_perturbation_fit(s1)
    hand_dev = max(abs(fit.delta[0] + 0.75), abs(fit.N_min_eig - 0.25))
    ln = least_norm_fit(s1)
    x = s1.points()
    n_ln = (x.T * ln.delta) @ x
    hand_dev = max(hand_dev,
                   float(np.abs(n_ln - np.diag([0.25, 0.0, 0.0])).max()))

    worst_pair = 0.0
    for seed in range(30):
        s = draw_sample_set(3, 2, seed)
        q = float(s.directions[0] @ s.directions[1]) ** 2
        e1, e2 = s.eps
        det = 1.0 - q * q
        oracle = np.array([(e1 - q * e2) / det, (e2 - q * e1) / det])
        dev = np.abs(identity_perturbation_fit(s).delta - oracle).max()
        worst_pair = max(worst_pair, float(dev))
    ok = hand_dev <= 1e-12 and worst_pair <= 1e-9
    report(f"criterion 3 analytic oracles: {'PASS' if ok else 'FAIL'} "
           f"(hand_dev={hand_dev:.2e}, two_point_dev={worst_pair:.2e})")
    assert hand_dev <= 1e-12
    assert worst_pair <= 1e-9


def test_criterion_4_operator_norm_events(corpus_200x1000, report):
    rows, elapsed = corpus_200x1000
    n = len(rows)
    a_rate = sum(1 for r in rows if r["a"] < 0.5) / n
    prime_rate = sum(1 for r in rows if r["a_prime"] <= 0.25) / n
    star_rate = sum(1 for r in rows if r["a_star"] <= 0.25) / n
    ok = a_rate >= 0.95 and prime_rate >= 0.90 and star_rate >= 0.90 \
        and elapsed < 600.0
    report(f"criterion 4 operator norm events: {'PASS' if ok else 'FAIL'} "
           f"(|A|<1/2 rate={a_rate:.2f} [need 0.95], "
           f"|A'|<=1/4 rate={prime_rate:.2f} [need 0.90], "
           f"|A*|<=1/4 rate={star_rate:.2f} [need 0.90], "
           f"elapsed={elapsed:.0f}s)")
    assert elapsed < 600.0
    assert a_rate >= 0.95, f"|A| < 1/2 held in {a_rate:.0%} of {n} seeds"
    assert prime_rate >= 0.90, f"|A'| <= 1/4 held in {prime_rate:.0%} of {n} seeds"
    assert star_rate >= 0.90, f"|A*| <= 1/4 held in {star_rate:.0%} of {n} seeds"


def test_criterion_5_trace_moment_bound(report):
    t0 = time.perf_counter()
    ratios = {}
    for t in (2, 4):
        mean, bound = trace_moment(100, 50, t, trials=200, seed=MASTER_SEED)
        ratios[t] = (mean, bound)
    elapsed = time.perf_counter() - t0
    ok = all(mean <= bound for mean, bound in ratios.values()) \
        and elapsed < 120.0
    detail = ", ".join(f"t={t}: mean={mean:.3e} bound={bound:.3e}"
                       for t, (mean, bound) in ratios.items())
    report(f"criterion 5 trace moments: {'PASS' if ok else 'FAIL'} "
           f"({detail}, elapsed={elapsed:.1f}s)")
    for t, (mean, bound) in ratios.items():
        assert mean <= bound, f"t={t}"
    assert elapsed < 120.0


def test_criterion_6_sphere_moments(report):
    details = []
    ok = True
    for d in (10, 100):
        m1, se1 = sphere_moment_estimate(d, 1, 100_000, seed=MASTER_SEED)
        m2, se2 = sphere_moment_estimate(d, 2, 100_000, seed=MASTER_SEED)
        z1 = abs(m1) / se1
        z2 = abs(m2 - 1.0 / d) / se2
        ok = ok and z1 <= 3.0 and z2 <= 3.0
        details.append(f"d={d}: |z1|={z1:.2f} |z2|={z2:.2f}")
        assert z1 <= 3.0, f"first moment off at d={d}"
        assert z2 <= 3.0, f"second moment off at d={d}"
    report(f"criterion 6 sphere moments: {'PASS' if ok else 'FAIL'} "
           f"({', '.join(details)})")


def _non_increasing_up_to_overlap(cells):
    for a, b in zip(cells, cells[1:]):
        if b.rate > a.rate and b.wilson_lo > a.wilson_hi:
            return False
    return True


def test_criterion_7_phase_behavior(report):
    t0 = time.perf_counter()
    cfg = ExperimentConfig(d_values=(50,), trials=100, master_seed=MASTER_SEED)
    table = run_phase_sweep(cfg)
    elapsed = time.perf_counter() - t0
    by_m = {c.m: c for c in table.cells}
    monotone = _non_increasing_up_to_overlap(table.cells)
    m_star = estimate_transition(table, 50)
    ratio = m_star / (50 * 50 / 4) if m_star is not None else float("nan")
    rates = " ".join(f"m={c.m}:{c.rate:.2f}" for c in table.cells)
    ok = (by_m[62].rate >= 0.95 and by_m[1250].rate <= 0.05 and monotone
          and m_star is not None and 0.3 <= ratio <= 1.3)
    report(f"criterion 7 phase behavior: {'PASS' if ok else 'FAIL'} "
           f"({rates}, m_star={m_star}, ratio={ratio:.2f}, "
           f"elapsed={elapsed:.0f}s single worker)")
    assert by_m[62].rate >= 0.95
    assert by_m[1250].rate <= 0.05
    assert monotone, "rates increased beyond Wilson overlap"
    assert m_star is not None
    assert 0.3 <= ratio <= 1.3


def test_criterion_8_cover_events(corpus_200x1000, report):
    rows, _ = corpus_200x1000
    n = len(rows)
    e2_bound = e2_threshold(200)
    e3_bound = e3_threshold(200)
    e2_rate = sum(1 for r in rows if r["eps_max"] < e2_bound) / n
    e3_rate = sum(1 for r in rows if r["delta_max"] < e3_bound) / n
    probed = [r["quad_max"] for r in rows if r["quad_max"] is not None]
    quad_rate = sum(1 for q in probed if q < 0.5) / len(probed)
    ok = e2_rate >= 0.90 and e3_rate >= 0.90 and quad_rate >= 0.90
    report(f"criterion 8 cover events: {'PASS' if ok else 'FAIL'} "
           f"(e2_rate={e2_rate:.2f}, e3_rate={e3_rate:.2f}, "
           f"quad_rate={quad_rate:.2f} over {len(probed)} seeds)")
    assert e2_rate >= 0.90
    assert e3_rate >= 0.90
    assert quad_rate >= 0.90


def test_criterion_9_worker_determinism(tmp_path, monkeypatch, report):
    monkeypatch.delenv("ELLIPSOID_LAB_THREADS", raising=False)
    base = ["phase", "--d", "8", "--m", "4", "--m", "16", "--trials", "5",
            "--master-seed", "3"]
    for workers, sub in ((1, "w1"), (2, "w2")):
        code = main(base + ["--workers", str(workers),
                            "--out-dir", str(tmp_path / sub)])
        assert code == 0
    same = True
    sizes = []
    for name in ("phase_records.csv", "phase_summary.csv"):
        b1 = (tmp_path / "w1" / name).read_bytes()
        b2 = (tmp_path / "w2" / name).read_bytes()
        same = same and b1 == b2
        sizes.append(len(b1))
    report(f"criterion 9 worker determinism: {'PASS' if same else 'FAIL'} "
           f"(records={sizes[0]}B, summary={sizes[1]}B, workers 1 vs 2)")
    assert same
