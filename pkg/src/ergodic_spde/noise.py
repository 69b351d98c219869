"""Q-Wiener increments in spectral coordinates.

Every standard normal variate is addressed by the tuple
``(master_seed, sample, step, mode)``.  The tuple is hashed with
Philox4x32-10 (counter = ``(mode, step_lo, step_hi, sample)``,
key = ``(seed_lo, seed_hi)``); the first two output words form a 53-bit
uniform on the open unit interval which is mapped through the inverse
normal CDF.  Results therefore never depend on evaluation order, batch
composition or thread count, and a coarse path is the exact partial-sum
skeleton of the fine one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.special import ndtri

from .spectral import Spectrum

RNG_VERSION = "philox4x32-10/u53/ndtri/v1"

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)


@numba.njit(cache=True, nogil=True, inline="always")
def _philox4x32_10(c0, c1, c2, c3, k0, k1):
    # all operands are uint64 holding 32-bit values
    for r in range(10):
        if r > 0:
            k0 = (k0 + _W0) & _MASK
            k1 = (k1 + _W1) & _MASK
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> np.uint64(32)
        lo0 = p0 & _MASK
        hi1 = p1 >> np.uint64(32)
        lo1 = p1 & _MASK
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


@numba.njit(cache=True, nogil=True)
def philox4x32(counter, key):
    """Raw Philox4x32-10 block for one counter; used for known-answer checks."""
    out = np.empty(4, dtype=np.uint64)
    a, b, c, d = _philox4x32_10(
        np.uint64(counter[0]), np.uint64(counter[1]), np.uint64(counter[2]),
        np.uint64(counter[3]), np.uint64(key[0]), np.uint64(key[1]))
    out[0] = a
    out[1] = b
    out[2] = c
    out[3] = d
    return out


@numba.njit(cache=True, nogil=True)
def _uniform_block(seed, samples, step0, n_steps, n_modes, out):
    k0 = np.uint64(seed) & _MASK
    k1 = np.uint64(seed) >> np.uint64(32)
    scale = 1.0 / 9007199254740992.0  # 2**-53
    for j in range(n_steps):
        step = np.uint64(step0 + j)
        s_lo = step & _MASK
        s_hi = step >> np.uint64(32)
        for b in range(samples.shape[0]):
            smp = np.uint64(samples[b])
            for i in range(n_modes):
                w0, w1, _, _ = _philox4x32_10(np.uint64(i), s_lo, s_hi, smp, k0, k1)
                bits = (w0 << np.uint64(21)) | (w1 >> np.uint64(11))
                out[j, b, i] = (np.float64(bits) + 0.5) * scale


def standard_normals(seed: int, samples, step0: int, n_steps: int, n_modes: int) -> np.ndarray:
    """Variates for steps ``step0 .. step0+n_steps-1``, shape ``(n_steps, len(samples), n_modes)``."""
    samples = np.ascontiguousarray(samples, dtype=np.int64)
    if np.any(samples < 0) or np.any(samples >= 2**32):
        raise ValueError("sample indices must lie in [0, 2**32)")
    if step0 < 0:
        raise ValueError("step indices must be non-negative")
    out = np.empty((n_steps, samples.shape[0], n_modes))
    _uniform_block(np.uint64(seed & 0xFFFFFFFFFFFFFFFF), samples, step0, n_steps, n_modes, out)
    return ndtri(out, out=out)


@dataclass(frozen=True)
class NoiseSpec:
    """Diagonal covariance ``Q e_i = q_i e_i`` with declared regularity ``beta``."""

    q: np.ndarray
    beta: float
    kind: str = "custom"

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.ndim != 1 or np.any(q < 0):
            raise ValueError("q must be a 1-D array of non-negative intensities")
        if not 0 < self.beta <= 1:
            raise ValueError("beta must lie in (0, 1]")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    def __len__(self):
        return self.q.shape[0]

    @classmethod
    def white(cls, n: int, beta: float = 0.4) -> NoiseSpec:
        return cls(np.ones(n), beta, "white")

    @classmethod
    def polynomial(cls, n: int, r: float, beta: float = 1.0) -> NoiseSpec:
        if r <= 0:
            raise ValueError("decay exponent r must be positive")
        return cls(np.arange(1, n + 1, dtype=float) ** -r, beta, f"poly({r:g})")

    @classmethod
    def zero(cls, n: int, beta: float = 1.0) -> NoiseSpec:
        return cls(np.zeros(n), beta, "zero")

    def truncate(self, m: int) -> NoiseSpec:
        if m > len(self):
            raise ValueError(f"cannot truncate {len(self)} modes to {m}")
        return NoiseSpec(self.q[:m], self.beta, self.kind)


@dataclass(frozen=True)
class PathStream:
    """Immutable address of one Brownian path: ``(master_seed, sample_index)``."""

    master_seed: int
    sample_index: int = 0
    version: str = field(default=RNG_VERSION, compare=False)

    def normals(self, step: int, n_modes: int) -> np.ndarray:
        return standard_normals(self.master_seed, [self.sample_index], step, 1, n_modes)[0, 0]


def increments(stream: PathStream, spec: NoiseSpec, m: int, tau: float, n: int) -> np.ndarray:
    """Spectral increment over ``[m tau, (m+1) tau)``: entries ``sqrt(q_i tau) xi_i``."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    if n > len(spec):
        raise ValueError(f"requested {n} modes from a {len(spec)}-mode noise")
    return np.sqrt(spec.q[:n] * tau) * stream.normals(m, n)


def aggregate(stream: PathStream, spec: NoiseSpec, m: int, tau_coarse: float, k: int, n: int) -> np.ndarray:
    """Sum of the ``k`` fine increments covering coarse step ``m``.

    Summation runs in ascending fine-step index starting from zero, which is
    the order the coupled estimators use, so both agree bit for bit.
    """
    if isinstance(k, (bool, np.bool_)) or int(k) != k or k < 1:
        raise ValueError(f"refinement must be a positive integer, got {k!r}")
    k = int(k)
    tau_fine = tau_coarse / k
    total = np.zeros(n)
    for j in range(m * k, (m + 1) * k):
        total += increments(stream, spec, j, tau_fine, n)
    return total


@dataclass(frozen=True)
class RegularityReport:
    """Partial sums of ``lambda_i**(beta-1) q_i`` on a doubling grid.

    The verdict is a truncation heuristic for an infinite sum, not a proof.
    """

    beta: float
    k: np.ndarray
    partial_sums: np.ndarray
    tail_increment: float
    threshold: float
    verdict: str

    @property
    def label(self) -> str:
        return f"{self.verdict} (heuristic: tail increment {self.tail_increment:.3g}, threshold {self.threshold:g})"


def check_regularity(spec: NoiseSpec, spectrum: Spectrum, beta: float | None = None,
                     threshold: float = 1e-3) -> RegularityReport:
    beta = spec.beta if beta is None else beta
    n = len(spec)
    if len(spectrum) < n:
        raise ValueError("spectrum has fewer modes than the noise")
    terms = spectrum.eigenvalues[:n] ** (beta - 1.0) * spec.q
    sums = np.cumsum(terms)
    ks = [1]
    while ks[-1] * 2 <= n:
        ks.append(ks[-1] * 2)
    if ks[-1] != n:
        ks.append(n)
    ks = np.array(ks)
    partial = sums[ks - 1]
    tail = float(sums[n - 1] - sums[n // 2 - 1]) if n >= 2 else float(sums[0])
    # per-doubling increments only; a trailing partial doubling is not comparable
    pow2 = ks[(ks & (ks - 1)) == 0]
    dbl = np.diff(sums[pow2 - 1])
    if dbl.size >= 2 and np.all(np.diff(dbl) >= 0):
        verdict = "diverging"
    elif tail < threshold:
        verdict = "converged"
    else:
        verdict = "converged-slowly"
    return RegularityReport(beta, ks, partial, tail, threshold, verdict)
