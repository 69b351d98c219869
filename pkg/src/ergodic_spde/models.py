"""Problem definitions: Nemytskii drifts, the heat/sine example, validation."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .noise import NoiseSpec, check_regularity
from .spectral import (Spectrum, constant_coefficients, dirichlet_laplacian_spectrum,
                       grid_nodes, h_norm, to_grid, to_spectral)


class ValidationError(ValueError):
    """A standing assumption of the model is violated."""


class DriftBlowUp(FloatingPointError):
    """Drift evaluation produced non-finite grid values; ``rows`` indexes the offending states."""

    def __init__(self, msg, rows=()):
        super().__init__(msg)
        self.rows = np.asarray(rows, dtype=int)


@dataclass(frozen=True)
class NemytskiiDrift:
    """Pointwise drift ``F(u)(x) = f(u(x))`` (or ``f(x, u(x))`` when ``x_dependent``).

    ``lipschitz`` bounds ``|f'|`` and ``one_sided`` bounds ``f'`` from above.
    The value at ``u = 0`` is projected separately: exactly when ``f`` does
    not depend on ``x``, by quadrature otherwise.  The remainder vanishes at
    the boundary and goes through the sine transform on
    ``dealias_factor * n`` nodes.
    """

    f: Callable | None
    lipschitz: float
    one_sided: float
    dealias_factor: int = 2
    x_dependent: bool = False
    name: str = "custom"

    def __post_init__(self):
        if self.lipschitz < 0:
            raise ValueError("Lipschitz constant must be non-negative")
        if self.one_sided > self.lipschitz:
            raise ValueError("one-sided constant cannot exceed the Lipschitz constant")
        if int(self.dealias_factor) != self.dealias_factor or self.dealias_factor < 1:
            raise ValueError("dealias_factor must be a positive integer")

    @property
    def is_zero(self) -> bool:
        return self.f is None

    @classmethod
    def zero(cls) -> NemytskiiDrift:
        return cls(None, 0.0, 0.0, name="zero")

    @classmethod
    def linear(cls, b: float, dealias_factor: int = 2) -> NemytskiiDrift:
        return cls(lambda z: b * z, abs(b), b, dealias_factor, name=f"linear({b:g})")

    @classmethod
    def heat_sin(cls, dealias_factor: int = 2) -> NemytskiiDrift:
        # f' = 1 + cos z ranges over [0, 2]
        return cls(lambda z: 1.0 + z + np.sin(z), 2.0, 2.0, dealias_factor, name="1+u+sin(u)")

    def _eval(self, nodes, u):
        return self.f(nodes, u) if self.x_dependent else self.f(u)


@dataclass(frozen=True)
class ModelProblem:
    spectrum: Spectrum
    noise: NoiseSpec
    drift: NemytskiiDrift
    x0: np.ndarray
    name: str = "custom"
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float)
        n = len(self.spectrum)
        if len(self.noise) != n or x0.shape != (n,):
            raise ValueError(f"spectrum, noise and x0 must all have {n} modes")
        x0.setflags(write=False)
        object.__setattr__(self, "x0", x0)

    @property
    def n(self) -> int:
        return len(self.spectrum)

    @property
    def beta(self) -> float:
        return self.noise.beta

    @property
    def n_grid(self) -> int:
        return self.drift.dealias_factor * self.n

    def truncate(self, m: int) -> ModelProblem:
        """Spectral Galerkin problem on the first ``m`` modes."""
        return ModelProblem(self.spectrum.truncate(m), self.noise.truncate(m), self.drift,
                            self.x0[:m], self.name)

    def with_x0(self, x0) -> ModelProblem:
        return replace(self, x0=np.asarray(x0, dtype=float), _cache={})

    def _boundary_part(self) -> tuple[np.ndarray, np.ndarray]:
        # grid nodes and the coefficients of f(., 0)
        if "boundary" not in self._cache:
            nodes = grid_nodes(self.n_grid)
            if self.drift.x_dependent:
                coeffs = to_spectral(self.drift.f(nodes, np.zeros_like(nodes)), self.n)
            else:
                f0 = float(np.asarray(self.drift.f(np.zeros(1)), dtype=float).ravel()[0])
                self._cache["f0"] = f0
                coeffs = f0 * constant_coefficients(self.n)
            self._cache["boundary"] = (nodes, coeffs)
        return self._cache["boundary"]


def drift_apply(p: ModelProblem, x) -> np.ndarray:
    """Projected drift ``P_n F(x)`` for a state or a batch of states."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != p.n:
        raise ValueError(f"state has {x.shape[-1]} modes, model has {p.n}")
    if p.drift.is_zero:
        return np.zeros_like(x)
    nodes, c0 = p._boundary_part()
    u = to_grid(x, p.n_grid)
    vals = p.drift._eval(nodes, u)
    if not np.all(np.isfinite(vals)):
        rows = np.nonzero(~np.all(np.isfinite(np.atleast_2d(vals)), axis=-1))[0]
        raise DriftBlowUp("drift produced non-finite grid values", rows)
    if p.drift.x_dependent:
        vals = vals - p.drift.f(nodes, np.zeros_like(u))
    else:
        vals = vals - p._cache["f0"]
    return to_spectral(vals, p.n) + c0


def initial_state(kind: str, n: int) -> np.ndarray:
    """Coefficients of the initial values: ``zero``, ``sine`` = sqrt(2) sin(pi x), ``harmonic`` = sum sin(i pi x)/i."""
    if kind == "zero":
        return np.zeros(n)
    if kind == "sine":
        x0 = np.zeros(n)
        x0[0] = 1.0
        return x0
    if kind == "harmonic":
        return 1.0 / (np.sqrt(2.0) * np.arange(1, n + 1))
    raise ValueError(f"unknown initial value {kind!r}")


def make_noise(kind: str, n: int, beta: float | None = None) -> NoiseSpec:
    """Noise by config name: ``white``, ``trace`` (= ``poly(1.005)``), ``poly(r)`` or ``zero``."""
    kind = kind.strip()
    if kind == "white":
        return NoiseSpec.white(n, 0.4 if beta is None else beta)
    if kind == "zero":
        return NoiseSpec.zero(n, 1.0 if beta is None else beta)
    if kind == "trace":
        kind = "poly(1.005)"
    if kind.startswith("poly(") and kind.endswith(")"):
        r = float(kind[5:-1])
        return NoiseSpec.polynomial(n, r, 1.0 if beta is None else beta)
    raise ValueError(f"unknown noise kind {kind!r}")


def heat_sin_model(n: int, noise="white", beta: float | None = None, dealias_factor: int = 2,
                   u0: str = "sine") -> ModelProblem:
    """Stochastic heat equation with drift ``1 + u + sin(u)`` and Dirichlet conditions."""
    if n < 1:
        raise ValueError("need at least one mode")
    spec = noise if isinstance(noise, NoiseSpec) else make_noise(noise, n, beta)
    return ModelProblem(dirichlet_laplacian_spectrum(n), spec, NemytskiiDrift.heat_sin(dealias_factor),
                        initial_state(u0, n), "heat_sin")


def linear_model(n: int, noise="white", b: float = 0.0, beta: float | None = None,
                 u0: str = "sine") -> ModelProblem:
    """Linear problem ``F(u) = b u`` (``b = 0`` gives the pure Ornstein-Uhlenbeck system)."""
    spec = noise if isinstance(noise, NoiseSpec) else make_noise(noise, n, beta)
    drift = NemytskiiDrift.zero() if b == 0 else NemytskiiDrift.linear(b)
    return ModelProblem(dirichlet_laplacian_spectrum(n), spec, drift, initial_state(u0, n),
                        "linear" if b else "ou")


@dataclass(frozen=True)
class ValidationReport:
    lambda1: float
    lipschitz: float
    one_sided: float
    tau0: float
    x0_norm: float
    x0_norm_order: float
    regularity: str


def validate(p: ModelProblem) -> ValidationReport:
    lam1 = p.spectrum.lambda1
    L, LF = p.drift.lipschitz, p.drift.one_sided
    if LF >= lam1:
        raise ValidationError(f"one-sided Lipschitz constant {LF} must be below lambda_1 = {lam1}")
    tau0 = np.inf if L == 0 else (lam1 - LF) / (4 * L * L)
    order = max(2 * p.beta, 1.0)
    x0_norm = float(h_norm(p.spectrum, p.x0, order))
    if not np.isfinite(x0_norm):
        raise ValidationError("initial data has infinite truncated norm")
    reg = check_regularity(p.noise, p.spectrum).label
    return ValidationReport(lam1, L, LF, float(tau0), x0_norm, order, reg)
