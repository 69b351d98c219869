"""Functionals, Monte Carlo / ergodic estimators, coupled weak errors and order fits.

All Monte Carlo reductions run over ascending sample index, block by block,
so estimates are bit-reproducible for a fixed seed whatever the thread count.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .integrators import (EE, SchemeConfig, _advance, map_blocks, noise_chunks, propagate,
                          sample_blocks, scheme_factor, stationary_variance)
from .models import ModelProblem, validate
from .noise import RNG_VERSION
from .spectral import h_norm


@dataclass(frozen=True)
class Functional:
    """Test function of the coefficient vector, vectorised over leading axes."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray]

    def __call__(self, y):
        return self.fn(np.asarray(y, dtype=float))


def _sqnorm(y):
    return np.sum(y * y, axis=-1)


PHI1 = Functional("phi1", lambda y: np.exp(-_sqnorm(y)))
PHI2 = Functional("phi2", lambda y: np.sin(np.sqrt(_sqnorm(y))))
PHI3 = Functional("phi3", lambda y: np.cos(np.sqrt(_sqnorm(y))))
FUNCTIONALS = {f.name: f for f in (PHI1, PHI2, PHI3)}


def get_functional(name: str | Functional) -> Functional:
    if isinstance(name, Functional):
        return name
    try:
        return FUNCTIONALS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown functional {name!r}; choose from {sorted(FUNCTIONALS)}") from None


def exact_gaussian_phi1(v, m=None) -> float:
    """``E exp(-|Y|^2)`` for independent modes ``Y_i ~ N(m_i, v_i)``."""
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise ValueError("variances must be non-negative")
    m = np.zeros_like(v) if m is None else np.asarray(m, dtype=float)
    d = 1.0 + 2.0 * v
    return float(np.exp(-0.5 * np.sum(np.log(d)) - np.sum(m * m / d)))


def steps_for(T, tau) -> int:
    """Exact integer ``T / tau``; rejects non-integral ratios."""
    r = Fraction(T) / Fraction(tau)
    if r.denominator != 1:
        raise ValueError(f"T = {T} is not an integer multiple of tau = {tau}")
    return int(r)


def _mean_stderr(x):
    x = np.asarray(x, dtype=float)
    mean = float(np.mean(x))
    se = float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else math.nan
    return mean, se


@dataclass(frozen=True)
class ErgodicAverageReport:
    model: str
    scheme: str
    noise: str
    n: int
    tau: float
    T: float
    functional: str
    samples: int
    value: float
    stderr: float
    seed: int
    rng: str = RNG_VERSION


@dataclass(frozen=True)
class WeakErrorReport:
    """Levelwise ``|E Phi(reference) - E Phi(level)|`` along a refinement ladder."""

    kind: str
    levels: tuple
    reference: float
    errors: np.ndarray
    stderrs: np.ndarray
    coupling: str
    samples: int
    scheme: str
    noise: str
    T: float
    seed: int | None = None
    lambdas: np.ndarray | None = None
    ref_mean: float | None = None
    level_means: np.ndarray | None = None
    rng: str = RNG_VERSION

    def h(self, axis: str | None = None) -> np.ndarray:
        levels = np.asarray(self.levels, dtype=float)
        if self.kind == "temporal":
            if axis not in (None, "tau"):
                raise ValueError("temporal reports only support the tau axis")
            return levels
        if axis in (None, "n"):
            return 1.0 / levels
        if axis == "lambda":
            return 1.0 / np.asarray(self.lambdas, dtype=float)
        raise ValueError(f"unknown axis {axis!r}")


@dataclass(frozen=True)
class OrderFit:
    """Least-squares line ``log error = slope log h + intercept``."""

    slope: float
    intercept: float
    residual: float
    levels: tuple
    axis: str = "h"
    excluded: tuple = field(default=())


def fit_order(report, h=None, axis: str | None = None) -> OrderFit:
    """Fit the convergence order from a report (or a raw error sequence plus ``h``)."""
    if isinstance(report, WeakErrorReport):
        errors = np.asarray(report.errors, dtype=float)
        hv = report.h(axis) if h is None else np.asarray(h, dtype=float)
        levels = tuple(report.levels)
        axis = axis or ("tau" if report.kind == "temporal" else "n")
    else:
        errors = np.asarray(report, dtype=float)
        if h is None:
            raise ValueError("h values are required for a raw error sequence")
        hv = np.asarray(h, dtype=float)
        levels = tuple(hv)
        axis = axis or "h"
    if errors.shape != hv.shape:
        raise ValueError("errors and h must have the same length")
    good = errors > 0
    excluded = tuple(lv for lv, g in zip(levels, good) if not g)
    if excluded:
        warnings.warn(f"excluding levels with non-positive error: {excluded}", RuntimeWarning, stacklevel=2)
    if good.sum() < 3:
        raise ValueError("need at least 3 levels with positive error to fit an order")
    x, y = np.log(hv[good]), np.log(errors[good])
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return OrderFit(float(slope), float(intercept), resid,
                    tuple(lv for lv, g in zip(levels, good) if g), axis, excluded)


def _checked_config(p: ModelProblem, config: SchemeConfig):
    tau0 = validate(p).tau0
    if config.scheme == EE and config.tau >= tau0 and not config.unsafe:
        raise ValueError(f"tau = {config.tau} violates tau < tau0 = {tau0}")


def mc_terminal_mean(p: ModelProblem, config: SchemeConfig, phi, samples: int, seed: int = 0,
                     threads: int = 1) -> tuple[float, float]:
    """Mean and standard error of ``Phi(Y_M)``; the standard error is NaN for one sample."""
    phi = get_functional(phi)
    _checked_config(p, config)
    parts = map_blocks(lambda b: phi(propagate(p, config, seed, b)), samples, threads)
    return _mean_stderr(np.concatenate(parts))


def time_average_samples(p: ModelProblem, config: SchemeConfig, phi, samples, seed: int = 0,
                         threads: int = 1) -> np.ndarray:
    """Per-sample ``(1/(M+1)) sum_{m=0}^{M} Phi(Y_m)``."""
    phi = get_functional(phi)
    _checked_config(p, config)

    def run(block):
        acc = np.zeros(len(block))

        def observe(m, y):
            acc[:] += phi(y)

        propagate(p, config, seed, block, observe)
        return acc / (config.steps + 1)

    return np.concatenate(map_blocks(run, samples, threads))


def ergodic_time_average(p: ModelProblem, config: SchemeConfig, phi, samples: int, seed: int = 0,
                         threads: int = 1) -> ErgodicAverageReport:
    phi = get_functional(phi)
    per = time_average_samples(p, config, phi, samples, seed, threads)
    value, se = _mean_stderr(per)
    return ErgodicAverageReport(p.name, config.scheme, p.noise.kind, p.n, config.tau, config.T,
                                phi.name, int(per.size), value, se, seed)


def moment_profile(p: ModelProblem, config: SchemeConfig, samples, seed: int = 0, gamma: float = 0.0,
                   threads: int = 1) -> np.ndarray:
    """Sample mean of ``|Y_m|_gamma^2`` for ``m = 0 .. M`` (blockwise, ascending samples)."""
    _checked_config(p, config)

    def run(block):
        out = np.empty(config.steps + 1)

        def observe(m, y):
            out[m] = np.sum(h_norm(p.spectrum, y, gamma) ** 2)

        propagate(p, config, seed, block, observe)
        return out

    parts = map_blocks(run, samples, threads)
    total = np.sum(np.stack(parts), axis=0) if len(parts) > 1 else parts[0]
    return total / sum(len(b) for b in sample_blocks(samples))


def trend_test(series, start: int = 0, n_batches: int = 50) -> tuple[float, float]:
    """Slope (per step) of batch means of ``series[start:]`` and its standard error."""
    x = np.asarray(series, dtype=float)[start:]
    size = x.size // n_batches
    if size < 1:
        raise ValueError("series too short for the requested batches")
    means = x[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    centres = (np.arange(n_batches) + 0.5) * size
    A = np.vstack([centres, np.ones_like(centres)]).T
    coef, res, *_ = np.linalg.lstsq(A, means, rcond=None)
    sigma2 = float(res[0]) / (n_batches - 2) if res.size else 0.0
    se = math.sqrt(sigma2 / np.sum((centres - centres.mean()) ** 2))
    return float(coef[0]), se


def _final_stats(ref, coarse):
    ref = np.concatenate(ref)
    coarse = np.concatenate(coarse, axis=1)
    ref_mean = float(np.mean(ref))
    means = np.mean(coarse, axis=1)
    errors = np.abs(ref_mean - means)
    if ref.size > 1:
        stderrs = np.std(ref[None, :] - coarse, axis=1, ddof=1) / math.sqrt(ref.size)
    else:
        stderrs = np.full(means.shape, math.nan)
    return ref_mean, means, errors, stderrs


def weak_error_temporal(p: ModelProblem, taus: Sequence[float], tau_ref: float, T: float, phi,
                        samples: int, seed: int = 0, scheme: str = EE, threads: int = 1) -> WeakErrorReport:
    """Coupled temporal weak errors: every level is driven by sums of reference increments."""
    phi = get_functional(phi)
    taus = [float(t) for t in taus]
    ks = [steps_for(t, tau_ref) for t in taus]
    if any(k < 1 for k in ks):
        raise ValueError("every ladder tau must be a positive multiple of tau_ref")
    m_ref = steps_for(T, tau_ref)
    tau_ref = float(tau_ref)
    for t in taus + [tau_ref]:
        SchemeConfig.for_problem(p, scheme, t, steps_for(T, t))
    fac_ref = scheme_factor(p, scheme, tau_ref)
    facs = [scheme_factor(p, scheme, t) for t in taus]
    scale = np.sqrt(p.noise.q * tau_ref)

    def run(block):
        y_ref = np.broadcast_to(p.x0, (len(block), p.n)).astype(float)
        ys = [y_ref.copy() for _ in ks]
        accs = [np.zeros_like(y_ref) for _ in ks]
        for first, xi in noise_chunks(seed, block, p.n, 0, m_ref):
            dws = xi * scale
            for j in range(dws.shape[0]):
                m = first + j
                dw = dws[j]
                y_ref = _advance(p, fac_ref, tau_ref, y_ref, dw, m + 1, block)
                for lv, k in enumerate(ks):
                    accs[lv] += dw
                    if (m + 1) % k == 0:
                        ys[lv] = _advance(p, facs[lv], taus[lv], ys[lv], accs[lv], (m + 1) // k, block)
                        accs[lv] = np.zeros_like(y_ref)
        return phi(y_ref), np.stack([phi(y) for y in ys])

    parts = map_blocks(run, samples, threads)
    ref_mean, means, errors, stderrs = _final_stats([a for a, _ in parts], [b for _, b in parts])
    return WeakErrorReport("temporal", tuple(taus), tau_ref, errors, stderrs, "aggregate",
                           int(sum(a.size for a, _ in parts)), scheme, p.noise.kind, float(T), seed,
                           ref_mean=ref_mean, level_means=means)


def weak_error_spatial(p: ModelProblem, ns: Sequence[int], n_ref: int, tau: float, T: float, phi,
                       samples: int, seed: int = 0, scheme: str = EE, threads: int = 1) -> WeakErrorReport:
    """Coupled spatial weak errors: a level with ``n`` modes uses modes ``1..n`` of the reference noise."""
    phi = get_functional(phi)
    ns = [int(n) for n in ns]
    if n_ref > p.n:
        raise ValueError(f"reference {n_ref} exceeds the model's {p.n} modes")
    if any(n < 1 or n > n_ref for n in ns):
        raise ValueError("spatial ladder must lie within 1 .. n_ref")
    ref = p.truncate(n_ref) if n_ref < p.n else p
    models = [ref.truncate(n) for n in ns]
    steps = steps_for(T, tau)
    tau = float(tau)
    SchemeConfig.for_problem(ref, scheme, tau, steps)
    for mdl in models:
        SchemeConfig.for_problem(mdl, scheme, tau, steps)
    fac_ref = scheme_factor(ref, scheme, tau)
    facs = [scheme_factor(mdl, scheme, tau) for mdl in models]
    scale = np.sqrt(ref.noise.q * tau)

    def run(block):
        y_ref = np.broadcast_to(ref.x0, (len(block), n_ref)).astype(float)
        ys = [y_ref[:, :n].copy() for n in ns]
        for first, xi in noise_chunks(seed, block, n_ref, 0, steps):
            dws = xi * scale
            for j in range(dws.shape[0]):
                m = first + j
                dw = dws[j]
                y_ref = _advance(ref, fac_ref, tau, y_ref, dw, m + 1, block)
                for lv, n in enumerate(ns):
                    ys[lv] = _advance(models[lv], facs[lv], tau, ys[lv], dw[:, :n], m + 1, block)
        return phi(y_ref), np.stack([phi(y) for y in ys])

    parts = map_blocks(run, samples, threads)
    ref_mean, means, errors, stderrs = _final_stats([a for a, _ in parts], [b for _, b in parts])
    lam = ref.spectrum.eigenvalues[np.array(ns) - 1]
    return WeakErrorReport("spatial", tuple(ns), n_ref, errors, stderrs, "projection",
                           int(sum(a.size for a, _ in parts)), scheme, p.noise.kind, float(T), seed,
                           lambdas=lam, ref_mean=ref_mean, level_means=means)


def invariant_law_error_temporal(p: ModelProblem, taus: Sequence[float], scheme: str = EE) -> WeakErrorReport:
    """Deterministic ``|Phi1(scheme invariant law) - Phi1(exact law)|`` for the linear system ``F = 0``.

    Uses the zero-mean Gaussian invariant laws mode by mode; no sampling.
    """
    lam, q = p.spectrum.eigenvalues, p.noise.q
    exact = exact_gaussian_phi1(stationary_variance(None, lam, q))
    errs = np.array([abs(exact_gaussian_phi1(stationary_variance(scheme, lam, q, t)) - exact) for t in taus])
    return WeakErrorReport("temporal", tuple(float(t) for t in taus), 0.0, errs, np.zeros_like(errs),
                           "deterministic", 0, scheme, p.noise.kind, math.inf, ref_mean=exact)


def invariant_law_error_spatial(p: ModelProblem, ns: Sequence[int], n_ref: int | None = None) -> WeakErrorReport:
    """Deterministic ``|Phi1(exact law on n modes) - Phi1(exact law on n_ref modes)|``."""
    n_ref = p.n if n_ref is None else n_ref
    v = stationary_variance(None, p.spectrum.eigenvalues[:n_ref], p.noise.q[:n_ref])
    ref = exact_gaussian_phi1(v)
    errs = np.array([abs(exact_gaussian_phi1(v[:n]) - ref) for n in ns])
    lam = p.spectrum.eigenvalues[np.asarray(ns) - 1]
    return WeakErrorReport("spatial", tuple(int(n) for n in ns), n_ref, errs, np.zeros_like(errs),
                           "deterministic", 0, "exact", p.noise.kind, math.inf, lambdas=lam, ref_mean=ref)
