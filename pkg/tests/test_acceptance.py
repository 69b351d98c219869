"""Acceptance criteria, each run at its stated tolerance.

Every test records one PASS/FAIL line, collected in the terminal summary.
The Monte Carlo runs take several minutes in total.
"""

import itertools
import time

import numpy as np
import pytest

from ergodic_spde.ergodic import (PHI1, ergodic_time_average, fit_order, invariant_law_error_spatial,
                                  invariant_law_error_temporal, steps_for, weak_error_temporal)
from ergodic_spde.integrators import EE, LIE, SchemeConfig, propagate, stationary_variance
from ergodic_spde.models import heat_sin_model, linear_model
from ergodic_spde.verification import run_all

NOISES = ["white", "trace"]
MC_SAMPLES = 100
LADDER = [2.0**-j for j in range(5, 10)]
SCHEME_LADDER = LADDER[:4]
TAU_REF = 2.0**-12
T_FIG = 20


def test_c1_stationary_variance_oracle(record_criterion):
    p = linear_model(8, "white")
    lam, q = p.spectrum.eigenvalues, p.noise.q
    tau, steps = 1 / 64, 2**20
    t0 = time.perf_counter()
    worst = {}
    for scheme in (EE, LIE):
        acc = np.zeros(8)

        def observe(m, y):
            acc[:] += y[0] * y[0]

        propagate(p, SchemeConfig.for_problem(p, scheme, tau, steps), 1, [0], observe)
        worst[scheme] = float(np.max(np.abs(acc / (steps + 1) / stationary_variance(scheme, lam, q, tau) - 1)))
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) < 0.05 and elapsed < 60
    record_criterion(1, ok, f"max rel. dev. EE {worst[EE]:.4f}, LIE {worst[LIE]:.4f} (< 0.05), {elapsed:.1f}s (< 60s)")
    assert ok


def _deterministic_temporal_slope(noise):
    p = linear_model(2**10, noise)
    rep = invariant_law_error_temporal(p, [2.0**-j for j in range(5, 11)], EE)
    return fit_order(rep).slope


def test_c2_temporal_order_white_deterministic(record_criterion):
    slope = _deterministic_temporal_slope("white")
    ok = 0.40 <= slope <= 0.60
    record_criterion(2, ok, f"white-noise invariant-law slope {slope:.4f} in [0.40, 0.60]")
    assert ok


def test_c3_temporal_order_trace_deterministic(record_criterion):
    slope = _deterministic_temporal_slope("trace")
    ok = 0.85 <= slope <= 1.05
    record_criterion(3, ok, f"trace-class invariant-law slope {slope:.4f} in [0.85, 1.05]")
    assert ok


def test_c4_spatial_order_deterministic(record_criterion):
    ns = [2**j for j in range(1, 8)]
    slopes = {}
    for noise in NOISES:
        rep = invariant_law_error_spatial(linear_model(2**10, noise), ns, 2**10)
        slopes[noise] = fit_order(rep, axis="n").slope
    ok = 0.90 <= slopes["white"] <= 1.10 and 1.85 <= slopes["trace"] <= 2.15
    record_criterion(4, ok, f"spatial slopes vs 1/n: white {slopes['white']:.4f} in [0.90, 1.10], "
                            f"trace {slopes['trace']:.4f} in [1.85, 2.15]")
    assert ok


@pytest.fixture(scope="module")
def coupled_runs():
    """EE on the full ladder and LIE on its first four levels, same reference stepsize and seed."""
    out = {}
    for noise in NOISES:
        p = heat_sin_model(100, noise)
        out[noise, EE] = weak_error_temporal(p, LADDER, TAU_REF, T_FIG, PHI1, MC_SAMPLES, seed=0, scheme=EE)
        out[noise, LIE] = weak_error_temporal(p, SCHEME_LADDER, TAU_REF, T_FIG, PHI1, MC_SAMPLES, seed=0,
                                              scheme=LIE)
    return out


def test_c5_monte_carlo_temporal_orders(coupled_runs, record_criterion):
    slopes = {noise: fit_order(coupled_runs[noise, EE]).slope for noise in NOISES}
    ok = abs(slopes["white"] - 0.5) <= 0.2 and abs(slopes["trace"] - 1.0) <= 0.2
    record_criterion(5, ok, f"MC slopes white {slopes['white']:.3f} (0.5 +- 0.2), "
                            f"trace {slopes['trace']:.3f} (1.0 +- 0.2)")
    assert ok


def test_c6_ergodic_averages(record_criterion):
    tau = 2.0**-6
    values = {}
    for noise in NOISES:
        p = heat_sin_model(100, noise)
        c = SchemeConfig.for_problem(p, EE, tau, steps_for(50, tau))
        values[noise] = ergodic_time_average(p, c, PHI1, MC_SAMPLES, seed=7).value
    long = {}
    for u0 in ("zero", "sine", "harmonic"):
        p = heat_sin_model(100, "white", u0=u0)
        c = SchemeConfig.for_problem(p, EE, tau, steps_for(500, tau))
        long[u0] = ergodic_time_average(p, c, PHI1, MC_SAMPLES, seed=7).value
    spread = max(abs(a - b) for a, b in itertools.combinations(long.values(), 2))
    ok = all(0.925 <= v <= 0.945 for v in values.values()) and spread <= 0.01
    record_criterion(6, ok, f"T=50 averages white {values['white']:.5f}, trace {values['trace']:.5f} in "
                            f"[0.925, 0.945]; T=500 initial-value spread {spread:.5f} <= 0.01")
    assert ok


def test_c7_weak_error_time_independence(record_criterion):
    ratios = {}
    for noise in NOISES:
        p = heat_sin_model(100, noise)
        errs = [weak_error_temporal(p, [2.0**-5], 2.0**-8, T, PHI1, MC_SAMPLES, seed=0).errors[0]
                for T in (10, 50, 200)]
        ratios[noise] = max(errs) / min(errs)
    ok = all(r < 2 for r in ratios.values())
    record_criterion(7, ok, f"max/min error over T in {{10, 50, 200}}: white {ratios['white']:.3f}, "
                            f"trace {ratios['trace']:.3f} (< 2)")
    assert ok


def test_c8_scheme_ordering(coupled_runs, record_criterion):
    rows = []
    ok = True
    for noise in NOISES:
        ee, lie = coupled_runs[noise, EE], coupled_runs[noise, LIE]
        for j, tau in enumerate(SCHEME_LADDER):
            gap = lie.errors[j] - ee.errors[j]
            se = float(np.hypot(ee.stderrs[j], lie.stderrs[j]))
            ok &= bool(gap > se)
            rows.append(f"{noise} 2^{int(np.log2(tau))}: EE {ee.errors[j]:.4f} LIE {lie.errors[j]:.4f} "
                        f"gap {gap:+.4f} vs se {se:.4f}")
    record_criterion(8, ok, "EE < LIE by > 1 combined se at every level; " + "; ".join(rows))
    assert ok


def test_c9_property_suite(record_criterion):
    results = run_all()
    total = sum(r.seconds for r in results)
    failed = [r.name for r in results if not r.passed]
    ok = not failed and total < 120
    record_criterion(9, ok, f"{len(results) - len(failed)}/{len(results)} properties pass in {total:.1f}s (< 120s)"
                            + (f"; failed: {failed}" if failed else ""))
    assert ok
