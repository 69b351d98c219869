"""Time stepping of the spectral Galerkin system.

Both schemes share the update ``y' = G (y + tau F(y) + dW)`` with a diagonal
``G``: ``exp(-lambda_i tau)`` for exponential Euler and
``1 / (1 + lambda_i tau)`` for linear implicit Euler.  The drift is always
frozen at the left endpoint.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .models import DriftBlowUp, ModelProblem, drift_apply, validate
from .noise import standard_normals

EE = "ee"
LIE = "lie"
SCHEMES = (EE, LIE)

# fixed partition of sample indices; results never depend on the thread count
SAMPLE_BLOCK = 25
# bound on variates drawn per RNG call
_RNG_CHUNK = 1 << 19


class StepError(FloatingPointError):
    """Non-finite state, tagged with the step (and sample block) where it appeared."""

    def __init__(self, msg, step=None, samples=None):
        super().__init__(msg)
        self.step = step
        self.samples = samples


class StepsizeError(ValueError):
    pass


@dataclass(frozen=True)
class SchemeConfig:
    """Scheme, step ``tau`` and step count ``steps``; ``T = steps * tau``.

    ``tau0`` is the stepsize restriction from :func:`validate`; exponential
    Euler refuses ``tau >= tau0`` unless ``unsafe`` is set.
    """

    scheme: str
    tau: float
    steps: int
    tau0: float = math.inf
    unsafe: bool = False

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if int(self.steps) != self.steps or self.steps < 0:
            raise ValueError("step count must be a non-negative integer")
        if self.scheme == EE and self.tau >= self.tau0 and not self.unsafe:
            raise StepsizeError(f"tau = {self.tau} violates the restriction tau < tau0 = {self.tau0}")

    @property
    def T(self) -> float:
        return self.steps * self.tau

    @classmethod
    def for_problem(cls, p: ModelProblem, scheme: str, tau: float, steps: int, unsafe: bool = False):
        return cls(scheme, tau, int(steps), validate(p).tau0, unsafe)


def scheme_factor(p: ModelProblem, scheme: str, tau: float) -> np.ndarray:
    lam = p.spectrum.eigenvalues
    tau = float(tau)
    if scheme == EE:
        return np.exp(-lam * tau)
    if scheme == LIE:
        return 1.0 / (1.0 + lam * tau)
    raise ValueError(f"unknown scheme {scheme!r}")


def _step(p, factor, tau, y, dw):
    if p.drift.is_zero:
        return factor * (y + dw)
    return factor * (y + tau * drift_apply(p, y) + dw)


def _bad_samples(rows, samples):
    rows = np.atleast_1d(rows)
    return np.asarray(samples)[rows] if samples is not None else rows


def _checked(y, step, samples=None):
    if not np.all(np.isfinite(y)):
        rows = np.nonzero(~np.all(np.isfinite(np.atleast_2d(y)), axis=-1))[0]
        bad = _bad_samples(rows, samples)
        raise StepError(f"non-finite state after step {step} in samples {bad.tolist()}", step, bad)
    return y


def _advance(p, factor, tau, y, dw, step, samples=None):
    """``_step`` plus the finiteness check; failures carry (samples, step)."""
    try:
        y_new = _step(p, factor, tau, y, dw)
    except DriftBlowUp as exc:
        bad = _bad_samples(exc.rows, samples)
        raise StepError(f"drift blow-up in step {step} in samples {bad.tolist()}", step, bad) from exc
    return _checked(y_new, step, samples)


def ee_step(p: ModelProblem, tau: float, y, dw) -> np.ndarray:
    """One exponential Euler step; ``exp(tau A)`` multiplies state, drift and noise."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    return _checked(_step(p, scheme_factor(p, EE, tau), tau, np.asarray(y, float), np.asarray(dw, float)), 1)


def lie_step(p: ModelProblem, tau: float, y, dw) -> np.ndarray:
    """One linear implicit Euler step; the resolvent multiplies the whole bracket."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    return _checked(_step(p, scheme_factor(p, LIE, tau), tau, np.asarray(y, float), np.asarray(dw, float)), 1)


def stationary_variance(scheme: str | None, lam, q, tau: float | None = None) -> np.ndarray:
    """Per-mode invariant variance of the linear (``F = 0``) recursion.

    ``scheme=None`` gives the exact law ``q / (2 lambda)``.
    """
    lam = np.asarray(lam, dtype=float)
    q = np.asarray(q, dtype=float)
    if scheme is None:
        return q / (2 * lam)
    if scheme == EE:
        # q tau e^{-2 lambda tau} / (1 - e^{-2 lambda tau}); overflow correctly gives 0
        with np.errstate(over="ignore"):
            return q * tau / np.expm1(2 * lam * tau)
    if scheme == LIE:
        return q / (2 * lam + lam * lam * tau)
    raise ValueError(f"unknown scheme {scheme!r}")


def sample_blocks(samples) -> list[np.ndarray]:
    """Split sample indices into the fixed reduction blocks."""
    samples = np.asarray(samples, dtype=np.int64)
    if samples.ndim == 0:
        samples = np.arange(int(samples), dtype=np.int64)
    if samples.size == 0:
        raise ValueError("need at least one sample")
    return [samples[i:i + SAMPLE_BLOCK] for i in range(0, samples.size, SAMPLE_BLOCK)]


def map_blocks(fn: Callable, samples, threads: int = 1) -> list:
    """Run ``fn(block)`` over the fixed sample blocks, results in ascending order."""
    blocks = sample_blocks(samples)
    if threads <= 1 or len(blocks) == 1:
        return [fn(b) for b in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, blocks))


def noise_chunks(seed: int, block, n_modes: int, step0: int, steps: int):
    """Yield ``(first_step, normals)`` with normals shaped ``(chunk, len(block), n_modes)``."""
    chunk = max(1, _RNG_CHUNK // (len(block) * max(n_modes, 1)))
    m = step0
    while m < step0 + steps:
        c = min(chunk, step0 + steps - m)
        yield m, standard_normals(seed, block, m, c, n_modes)
        m += c


def propagate(p: ModelProblem, config: SchemeConfig, seed: int, block, observer: Callable | None = None,
              y0=None, step0: int = 0) -> np.ndarray:
    """Advance one sample block ``config.steps`` steps and return the terminal states.

    ``observer(m, Y)`` sees the states after every step ``m`` (and ``m = step0``
    before stepping).  Step ``m`` consumes the variates of step index ``m``.
    """
    block = np.asarray(block, dtype=np.int64)
    y = np.broadcast_to(p.x0 if y0 is None else y0, (len(block), p.n)).astype(float)
    factor = scheme_factor(p, config.scheme, config.tau)
    scale = np.sqrt(p.noise.q * config.tau)
    noisy = bool(np.any(p.noise.q > 0))
    tau = config.tau
    if observer is not None:
        observer(step0, y)
    if config.steps == 0:
        return y
    if not noisy:
        zeros = np.zeros_like(y)
        for m in range(step0, step0 + config.steps):
            y = _advance(p, factor, tau, y, zeros, m + 1, block)
            if observer is not None:
                observer(m + 1, y)
        return y
    for first, xi in noise_chunks(seed, block, p.n, step0, config.steps):
        dws = xi * scale
        for j in range(dws.shape[0]):
            m = first + j
            y = _advance(p, factor, tau, y, dws[j], m + 1, block)
            if observer is not None:
                observer(m + 1, y)
    return y


@dataclass
class Trajectory:
    """Streaming summary of a simulation: terminal states and optional snapshots."""

    samples: np.ndarray
    config: SchemeConfig
    terminal: np.ndarray
    steps: np.ndarray
    snapshots: np.ndarray | None = None


def simulate(p: ModelProblem, config: SchemeConfig, seed: int = 0, samples=1, *,
             record_every: int | None = None, threads: int = 1) -> Trajectory:
    """Run every sample path; keep snapshots only if ``record_every`` is given."""
    vr = validate(p)
    if config.scheme == EE and config.tau >= vr.tau0 and not config.unsafe:
        raise StepsizeError(f"tau = {config.tau} violates tau < tau0 = {vr.tau0}")
    blocks = sample_blocks(samples)
    rec_steps = np.arange(0, config.steps + 1, record_every) if record_every else np.array([], dtype=int)

    def run(block):
        snaps = []

        def observe(m, y):
            if record_every and m % record_every == 0:
                snaps.append(y.copy())

        y = propagate(p, config, seed, block, observe if record_every else None)
        return y, (np.stack(snaps, axis=0) if snaps else None)

    parts = map_blocks(run, np.concatenate(blocks), threads)
    terminal = np.concatenate([t for t, _ in parts], axis=0)
    snaps = np.concatenate([s for _, s in parts], axis=1) if record_every else None
    return Trajectory(np.concatenate(blocks), config, terminal, rec_steps, snaps)
