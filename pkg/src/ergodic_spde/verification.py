"""Property suite behind ``ergodic-spde verify``.

Each check returns a :class:`Check`; :func:`run_all` runs them in order.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .ergodic import moment_profile, trend_test
from .integrators import EE, LIE, SchemeConfig, propagate, simulate, stationary_variance
from .models import drift_apply, heat_sin_model, linear_model
from .spectral import (difference_bound_check, dirichlet_laplacian_spectrum, semigroup_apply,
                       smoothing_bound_check, to_grid, to_spectral)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def transform_round_trip(tol: float = 1e-12) -> Check:
    rng = np.random.default_rng(11)
    worst = 0.0
    for n_grid in (1, 2, 7, 64, 255, 1000, 2048, 4097):
        for n in sorted({1, max(1, n_grid // 2), n_grid}):
            x = rng.standard_normal((2, n))
            err = np.max(np.abs(to_spectral(to_grid(x, n_grid), n) - x))
            worst = max(worst, float(err))
    return Check("transform round trip", worst <= tol, f"max error {worst:.2e} (tol {tol:g})")


def semigroup_law(tol: float = 1e-14) -> Check:
    s = dirichlet_laplacian_spectrum(256)
    rng = np.random.default_rng(12)
    worst_law, contraction = 0.0, True
    for _ in range(20):
        x = rng.uniform(-1, 1, 256)
        t, u = rng.uniform(0, 0.1, 2)
        lhs = semigroup_apply(s, t, semigroup_apply(s, u, x))
        worst_law = max(worst_law, float(np.max(np.abs(lhs - semigroup_apply(s, t + u, x)))))
        contraction &= np.linalg.norm(semigroup_apply(s, t, x)) <= np.exp(-s.lambda1 * t) * np.linalg.norm(x) * (1 + 1e-14)
    ok = worst_law <= tol and contraction
    return Check("semigroup law", bool(ok), f"max |E(t)E(u)x - E(t+u)x| = {worst_law:.2e}, contraction {contraction}")


def smoothing_bounds() -> Check:
    s = dirichlet_laplacian_spectrum(4096)
    t_grid = np.logspace(-4, 1, 61)
    fails = [g for g in (0, 0.25, 0.5, 1, 2) if not smoothing_bound_check(s, g, t_grid).holds]
    pairs = [(a, a + d) for a in (0.0, 1e-3, 0.01, 0.1, 1.0) for d in (1e-4, 1e-3, 0.01, 0.1, 1.0, 10.0)]
    fails += [f"rho={r}" for r in (0, 0.5, 1) if not difference_bound_check(s, r, pairs).holds]
    return Check("semigroup smoothing bounds", not fails, "all hold" if not fails else f"violated: {fails}")


def thread_invariance() -> Check:
    p = heat_sin_model(16, "white")
    c = SchemeConfig.for_problem(p, EE, 2**-7, 256)
    outs = [simulate(p, c, seed=5, samples=60, threads=k).terminal.tobytes() for k in (1, 2, 8)]
    ok = outs[0] == outs[1] == outs[2]
    return Check("path stream thread invariance", ok, "bit-identical for 1, 2, 8 threads" if ok else "mismatch")


def drift_lipschitz(slack: float = 0.01) -> Check:
    p = heat_sin_model(64, "white")
    rng = np.random.default_rng(13)
    decay = np.arange(1, 65) ** -1.0
    worst = 0.0
    for _ in range(200):
        x = rng.standard_normal(64) * decay * rng.uniform(0.1, 5)
        y = x + rng.standard_normal(64) * decay * rng.uniform(1e-3, 3)
        ratio = np.linalg.norm(drift_apply(p, x) - drift_apply(p, y)) / np.linalg.norm(x - y)
        worst = max(worst, float(ratio))
    L = p.drift.lipschitz
    return Check("drift Lipschitz bound", worst <= L + slack, f"max ratio {worst:.4f} vs L + slack = {L + slack}")


def stationary_variance_oracle(steps: int = 2**20, rel: float = 0.05, seed: int = 1) -> Check:
    p = linear_model(8, "white")
    lam = p.spectrum.eigenvalues
    tau = 1 / 64
    worst = {}
    for scheme in (EE, LIE):
        acc = np.zeros(8)

        def observe(m, y):
            acc[:] += y[0] * y[0]

        propagate(p, SchemeConfig.for_problem(p, scheme, tau, steps), seed, [0], observe)
        v = acc / (steps + 1)
        worst[scheme] = float(np.max(np.abs(v / stationary_variance(scheme, lam, p.noise.q, tau) - 1)))
    ok = max(worst.values()) <= rel
    return Check("stationary variance oracle", ok,
                 f"max rel. deviation EE {worst[EE]:.4f}, LIE {worst[LIE]:.4f} (tol {rel})")


def moment_stationarity(steps: int = 100_000, samples: int = 25, seed: int = 2) -> Check:
    p = heat_sin_model(100, "white")
    c = SchemeConfig.for_problem(p, EE, 2**-6, steps)
    prof = moment_profile(p, c, samples, seed)
    slope, se = trend_test(prof, start=steps // 2)
    z = abs(slope) / se if se > 0 else np.inf
    return Check("moment bound stationarity", z < 3.0,
                 f"trailing slope {slope:.3e} +- {se:.1e} per step (|z| = {z:.2f} < 3)")


CHECKS: list[Callable[[], Check]] = [
    transform_round_trip, semigroup_law, smoothing_bounds, thread_invariance,
    drift_lipschitz, stationary_variance_oracle, moment_stationarity,
]


def run_all(checks=None, echo: Callable[[str], None] | None = None) -> list[Check]:
    results = []
    for fn in checks or CHECKS:
        t0 = time.perf_counter()
        chk = fn()
        chk = Check(chk.name, chk.passed, chk.detail, time.perf_counter() - t0)
        results.append(chk)
        if echo:
            echo(f"{'PASS' if chk.passed else 'FAIL'}  {chk.name}: {chk.detail} [{chk.seconds:.1f}s]")
    return results
