"""Diagonal linear operator, semigroup and sine transforms on (0, 1).

States are plain float arrays whose last axis indexes modes, so a batch of
Monte Carlo samples is an array of shape ``(samples, n)``.  Coefficient
``x[..., i]`` is the component along ``e_{i+1}(x) = sqrt(2) sin((i+1) pi x)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.fft import dst

DIRICHLET_SINE = "dirichlet-sine"
# above this many matrix entries the transforms switch to the FFT-based DST-I
_DENSE_LIMIT = 1 << 22


@dataclass(frozen=True)
class Spectrum:
    """Ascending positive eigenvalues of ``-A`` plus an eigenbasis tag."""

    eigenvalues: np.ndarray
    basis: str = DIRICHLET_SINE

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float)
        if lam.ndim != 1 or lam.size == 0:
            raise ValueError("eigenvalues must be a non-empty 1-D array")
        if lam[0] <= 0 or np.any(np.diff(lam) < 0):
            raise ValueError("eigenvalues must be positive and non-decreasing")
        lam.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)

    def __len__(self):
        return self.eigenvalues.shape[0]

    @property
    def lambda1(self) -> float:
        return float(self.eigenvalues[0])

    def truncate(self, m: int) -> Spectrum:
        if not 1 <= m <= len(self):
            raise ValueError(f"cannot truncate {len(self)} modes to {m}")
        return Spectrum(self.eigenvalues[:m], self.basis)


def dirichlet_laplacian_spectrum(n: int) -> Spectrum:
    """Eigenvalues ``i**2 pi**2`` of the Dirichlet Laplacian on (0, 1)."""
    if n < 1:
        raise ValueError("need at least one mode")
    i = np.arange(1, n + 1, dtype=float)
    return Spectrum(i * i * np.pi**2, DIRICHLET_SINE)


def _lam(s: Spectrum, x: np.ndarray) -> np.ndarray:
    n = np.shape(x)[-1]
    if n > len(s):
        raise ValueError(f"state has {n} modes but spectrum only {len(s)}")
    return s.eigenvalues[:n]


def semigroup_apply(s: Spectrum, t: float, x) -> np.ndarray:
    if t < 0:
        raise ValueError("semigroup time must be non-negative")
    x = np.asarray(x, dtype=float)
    return np.exp(-_lam(s, x) * t) * x


def fractional_power_apply(s: Spectrum, gamma: float, x) -> np.ndarray:
    """Apply ``(-A)**gamma``; any real exponent is allowed."""
    x = np.asarray(x, dtype=float)
    return _lam(s, x) ** gamma * x


def h_norm(s: Spectrum, x, gamma: float = 0.0) -> np.ndarray:
    """Norm in the scale ``Hdot^gamma``: ``sqrt(sum lambda_i**gamma x_i**2)``."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(np.sum(_lam(s, x) ** gamma * x * x, axis=-1))


def project(x, m: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if m < 1 or m > x.shape[-1]:
        raise ValueError(f"cannot project {x.shape[-1]} modes onto {m}")
    return x[..., :m].copy()


def grid_nodes(n_grid: int) -> np.ndarray:
    """Interior nodes ``j / (n_grid + 1)``, ``j = 1 .. n_grid``."""
    return np.arange(1, n_grid + 1) / (n_grid + 1)


@lru_cache(maxsize=64)
def sine_matrix(n: int, n_grid: int) -> np.ndarray:
    """``S[i, j] = sqrt(2) sin((i+1) pi x_j)``, shape ``(n, n_grid)``; read-only."""
    i = np.arange(1, n + 1)[:, None]
    j = np.arange(1, n_grid + 1)[None, :]
    # reduce i*j mod 2(N+1) so the sine argument stays in [0, 2 pi)
    k = (i * j) % (2 * (n_grid + 1))
    S = np.sqrt(2.0) * np.sin(np.pi * k / (n_grid + 1))
    S.setflags(write=False)
    return S


def to_grid(x, n_grid: int) -> np.ndarray:
    """Evaluate ``sum_i x_i sqrt(2) sin(i pi x_j)`` at the interior nodes."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if n_grid < n:
        raise ValueError(f"grid of {n_grid} nodes aliases {n} modes")
    if n * n_grid > _DENSE_LIMIT:
        return dst(x, type=1, n=n_grid, axis=-1) * (np.sqrt(2.0) / 2.0)
    return x @ sine_matrix(n, n_grid)


def to_spectral(g, n: int) -> np.ndarray:
    """Discrete sine coefficients ``sqrt(2)/(N+1) sum_j g_j sin(i pi x_j)``, ``i <= n``."""
    g = np.asarray(g, dtype=float)
    n_grid = g.shape[-1]
    if n > n_grid:
        raise ValueError(f"cannot resolve {n} modes from {n_grid} nodes")
    if n * n_grid > _DENSE_LIMIT:
        return dst(g, type=1, axis=-1)[..., :n] / (np.sqrt(2.0) * (n_grid + 1))
    return (g @ sine_matrix(n, n_grid).T) / (n_grid + 1)


def constant_coefficients(n: int) -> np.ndarray:
    """Exact ``<1, e_i>`` = ``sqrt(2) (1 - cos i pi) / (i pi)``."""
    i = np.arange(1, n + 1)
    return np.where(i % 2 == 1, 2.0 * np.sqrt(2.0) / (i * np.pi), 0.0)


@dataclass(frozen=True)
class BoundReport:
    """Rows of ``(t, measured, bound)`` and whether ``measured <= bound`` everywhere."""

    rows: list
    holds: bool


def _sup_power_exp(gamma: float) -> float:
    # sup_{x>=0} x**gamma e**-x
    return 1.0 if gamma == 0 else (gamma / np.e) ** gamma


def smoothing_bound_check(s: Spectrum, gamma: float, t_grid, rtol: float = 1e-12) -> BoundReport:
    """Check ``max_i lambda_i^g e^{-lambda_i t} <= 2^g (g/e)^g t^-g e^{-lambda_1 t/2}``."""
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    lam = s.eigenvalues
    c = 2.0**gamma * _sup_power_exp(gamma)
    rows = []
    ok = True
    for t in t_grid:
        if t <= 0:
            raise ValueError("times must be positive")
        measured = float(np.max(lam**gamma * np.exp(-lam * t)))
        bound = c * t**-gamma * np.exp(-s.lambda1 * t / 2)
        rows.append((float(t), measured, float(bound)))
        ok &= measured <= bound * (1 + rtol)
    return BoundReport(rows, bool(ok))


def difference_bound_check(s: Spectrum, rho: float, pairs, rtol: float = 1e-12) -> BoundReport:
    """Check ``max_i lambda_i^-rho (1 - e^{-lambda_i (t-s)}) e^{-lambda_i s} <= (t-s)^rho e^{-lambda_1 s/2}``.

    Rows carry ``((s, t), measured, bound)``.
    """
    if not 0 <= rho <= 1:
        raise ValueError("rho must lie in [0, 1]")
    lam = s.eigenvalues
    rows = []
    ok = True
    for s0, t in pairs:
        if not 0 <= s0 < t:
            raise ValueError("need 0 <= s < t")
        measured = float(np.max(lam**-rho * -np.expm1(-lam * (t - s0)) * np.exp(-lam * s0)))
        bound = (t - s0) ** rho * np.exp(-s.lambda1 * s0 / 2)
        rows.append(((float(s0), float(t)), measured, float(bound)))
        ok &= measured <= bound * (1 + rtol)
    return BoundReport(rows, bool(ok))
