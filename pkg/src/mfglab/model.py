"""Linear-quadratic mean field scenario and its analytic health checks.

The model: a continuum of identical players with one-dimensional state
dX_t = alpha_t dt + sigma dW_t started at the deterministic point x0,
running cost (x^2 + alpha^2)/2 and terminal cost (X_T - q * mean)^2 / 2,
where ``mean`` is the population average state at the horizon T. The
single coupling constant q may take either sign; q <= 0 makes the
terminal interaction monotone (crowd-aversion), q > 0 makes imitation
profitable and opens the free-rider regime studied by the cost module.

This module only defines the scenario and the cheap analytic predicates
(singular parameter combinations, monotonicity, contraction constant of
the best-response map) that gate the solvers downstream.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    InvalidGridError,
    InvalidParameterError,
    NonFiniteError,
)

#: exact-zero tolerance for the singular parameter tests
SINGULAR_ATOL = 1e-12
#: distance below which a nearly singular scenario triggers a warning
NEAR_SINGULAR_ATOL = 1e-6


@dataclass(frozen=True)
class ModelParams:
    """Scenario constants: coupling q, horizon T, start x0, noise sigma.

    sigma is carried even though the closed-form solvers insist on
    sigma = 1; the numeric path accepts any sigma > 0.
    """

    q: float
    T: float
    x0: float
    sigma: float = 1.0

    def __post_init__(self):
        for name in ("q", "T", "x0", "sigma"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise NonFiniteError(f"{name} must be finite, got {value!r}")
        if self.T <= 0:
            raise InvalidParameterError(f"T must be positive, got {self.T}")
        if self.sigma <= 0:
            raise InvalidParameterError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_k = k * T / n_steps covering [0, T] inclusively."""

    n_steps: int
    T: float

    def __post_init__(self):
        if self.n_steps < 2:
            raise InvalidGridError(f"n_steps must be >= 2, got {self.n_steps}")
        if not math.isfinite(self.T) or self.T <= 0:
            raise InvalidGridError(f"grid horizon must be positive and finite, got {self.T}")

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    @cached_property
    def times(self) -> np.ndarray:
        t = np.linspace(0.0, self.T, self.n_steps + 1)
        t.flags.writeable = False
        return t

    @cached_property
    def times_half(self) -> np.ndarray:
        """Grid refined once; solvers store coefficient paths here so that
        RK4 stages at the midpoints need no interpolation."""
        t = np.linspace(0.0, self.T, 2 * self.n_steps + 1)
        t.flags.writeable = False
        return t

    def matches(self, other: "TimeGrid") -> bool:
        return self.n_steps == other.n_steps and math.isclose(self.T, other.T, rel_tol=1e-12)


def default_grid(params: ModelParams, n_steps: int = 2000) -> TimeGrid:
    return TimeGrid(n_steps=n_steps, T=params.T)


@dataclass(frozen=True)
class ModelDiagnostics:
    """Analytic predicates of a scenario.

    mfg_singular / mfc_singular flag the parameter combinations qT = 1
    and (2q - q^2)T = 1 at which the respective equilibrium systems lose
    their guaranteed uniqueness. ``contraction_constant`` is
    |q (1 - exp(-2T)) / 2|, the Lipschitz factor of the best-response
    map on terminal means; iterative deviation schemes converge whenever
    it is below one.
    """

    mfg_singular: bool
    mfc_singular: bool
    monotone: bool
    contraction_constant: float


def contraction_constant(params: ModelParams) -> float:
    return abs(params.q * (1.0 - math.exp(-2.0 * params.T)) / 2.0)


def validate(params: ModelParams, grid: TimeGrid) -> ModelDiagnostics:
    """Check a scenario and return its diagnostics.

    Pure and idempotent. Raises NonFiniteError / InvalidGridError on
    malformed input; emits a warning when a singularity is approached
    within 1e-6 without being hit exactly.
    """
    for name in ("q", "T", "x0", "sigma"):
        if not math.isfinite(getattr(params, name)):
            raise NonFiniteError(f"{name} is not finite")
    if grid.n_steps < 2:
        raise InvalidGridError(f"n_steps must be >= 2, got {grid.n_steps}")
    if not math.isclose(grid.T, params.T, rel_tol=1e-12):
        raise InvalidGridError(
            f"grid covers [0, {grid.T}] but the model horizon is {params.T}"
        )

    q, T = params.q, params.T
    mfg_gap = q * T - 1.0
    mfc_gap = (2.0 * q - q * q) * T - 1.0
    mfg_singular = abs(mfg_gap) <= SINGULAR_ATOL
    mfc_singular = abs(mfc_gap) <= SINGULAR_ATOL
    for label, gap, hit in (("qT = 1", mfg_gap, mfg_singular),
                            ("(2q - q^2)T = 1", mfc_gap, mfc_singular)):
        if not hit and abs(gap) <= NEAR_SINGULAR_ATOL:
            warnings.warn(
                f"scenario is within {abs(gap):.2e} of the singular set {label}",
                stacklevel=2,
            )

    return ModelDiagnostics(
        mfg_singular=mfg_singular,
        mfc_singular=mfc_singular,
        monotone=monotonicity_flag(q),
        contraction_constant=contraction_constant(params),
    )


def monotonicity_flag(q: float) -> bool:
    """Whether the terminal cost is monotone in the Lasry-Lions sense.

    For g(x, m) = (x - q * mean(m))^2 / 2 the monotonicity integral
    of g between two measures reduces to -q * (mean(m') - mean(m))^2,
    so the condition holds exactly when q <= 0.
    """
    if not math.isfinite(q):
        raise NonFiniteError(f"q is not finite: {q!r}")
    return q <= 0.0
