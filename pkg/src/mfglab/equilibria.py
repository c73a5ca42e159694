"""Game solvers: Nash equilibrium, social optimum, and the mixtures between.

Each solver assembles the terminal data of the quadratic-ansatz system for
one solution concept and hands it to the fbode module:

* ``solve_mfg``     - non-cooperative equilibrium, r_T = -q xbar_T;
* ``solve_mfc``     - social optimum, r_T = -(2q - q^2) xbar_T (the extra
  q^2 term is the planner's internalization of the crowd externality);
* ``solve_p_partial`` - a proportion p of players best-responds while the
  rest keep the planner's control, so the deviators see the frozen planner
  mean with weight (1 - p) and their own mean with weight p;
* ``solve_lambda_interpolated`` - every player minimizes the blend
  (1 - lambda) * individual + lambda * planner cost, which tilts the
  terminal slope to -q (1 + lambda (1 - q));
* ``best_response`` - one player against a frozen environment mean.

Costs are exact ansatz evaluations where a closed formula exists and
moment-propagation integrals (``evaluate_cost``) where the player's control
and the environment are decoupled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import fbode
from .errors import (
    GridMismatchError,
    NonFiniteError,
    OutOfRangeError,
    SingularSystemError,
)
from .fbode import DEFAULT_MAX_ITER, DEFAULT_TOL, FbodeSolution, FbodeSystem
from .incentives import build_lambda_costs
from .model import SINGULAR_ATOL, ModelParams, TimeGrid


@dataclass(frozen=True)
class FeedbackControl:
    """Affine feedback alpha(t, x) = -(eta_t x + r_t) sampled on a grid."""

    grid: TimeGrid
    eta: np.ndarray
    r: np.ndarray
    eta_half: np.ndarray
    r_half: np.ndarray

    @classmethod
    def from_solution(cls, sol: FbodeSolution) -> "FeedbackControl":
        return cls(grid=sol.grid, eta=sol.eta, r=sol.r,
                   eta_half=sol.eta_half, r_half=sol.r_half)

    def alpha(self, x: float, k: int) -> float:
        """Control value at grid node k for a player in state x."""
        return -(self.eta[k] * x + self.r[k])


@dataclass(frozen=True)
class EnvironmentMean:
    """Frozen population terminal mean seen by a best responder."""

    xbar_env_T: float

    def __post_init__(self):
        if not math.isfinite(self.xbar_env_T):
            raise NonFiniteError(f"environment mean is not finite: {self.xbar_env_T!r}")


@dataclass(frozen=True)
class Equilibrium:
    """A solved game: concept tag, ansatz solution, feedback and scalar cost."""

    kind: str  # mfg | mfc | lambda | p_partial_deviator | best_response
    solution: FbodeSolution
    control: FeedbackControl
    cost: float
    xbar_T: float
    kind_param: float | None = None


@dataclass(frozen=True)
class PPartialEquilibrium:
    """Mixed population: proportion p of deviators, 1 - p planner followers."""

    p: float
    deviator: Equilibrium
    xbar_mfc_T: float
    population_xbar_T: float
    hat_J_p: float
    star_J_p: float


def _ansatz_value(sol: FbodeSolution, x0: float) -> float:
    """u(0, x0) = eta_0 x0^2 / 2 + r_0 x0 + s_0."""
    return 0.5 * sol.eta[0] * x0 * x0 + sol.r[0] * x0 + sol.s[0]


def _solve(system: FbodeSystem, grid: TimeGrid, method: str,
           tol: float, max_iter: int) -> FbodeSolution:
    if method == "auto":
        return fbode.solve(system, grid, tol=tol, max_iter=max_iter)
    if method == "closed_form":
        return fbode.solve_closed_form(system, grid)
    if method == "numeric":
        return fbode.solve_numeric(system, grid, tol=tol, max_iter=max_iter)
    raise ValueError(f"unknown method {method!r}")


def mfg_system(params: ModelParams) -> FbodeSystem:
    q = params.q
    return FbodeSystem(eta_T=1.0, r_a=0.0, r_b=-q,
                       s_c0=0.0, s_c1=0.0, s_c2=0.5 * q * q,
                       x0=params.x0, sigma=params.sigma, T=params.T)


def mfc_system(params: ModelParams) -> FbodeSystem:
    q = params.q
    return FbodeSystem(eta_T=1.0, r_a=0.0, r_b=-(2.0 * q - q * q),
                       s_c0=0.0, s_c1=0.0, s_c2=0.5 * q * q,
                       x0=params.x0, sigma=params.sigma, T=params.T)


def p_partial_system(params: ModelParams, p: float, xbar_mfc_T: float) -> FbodeSystem:
    q = params.q
    # terminal cost (x - q (p xbar_T + (1-p) M))^2 / 2 with M the planner mean
    a = -q * (1.0 - p) * xbar_mfc_T
    b = -q * p
    return FbodeSystem(eta_T=1.0, r_a=a, r_b=b,
                       s_c0=0.5 * (q * (1.0 - p) * xbar_mfc_T) ** 2,
                       s_c1=(q * p) * (q * (1.0 - p) * xbar_mfc_T),
                       s_c2=0.5 * (q * p) ** 2,
                       x0=params.x0, sigma=params.sigma, T=params.T)


def lambda_system(params: ModelParams, lam: float) -> FbodeSystem:
    q = params.q
    costs = build_lambda_costs(params, lam)
    # d/dx of the interpolated terminal cost is x + c_x_mean * mean, so the
    # backward slope coefficient is the incentive coupling itself.
    return FbodeSystem(eta_T=1.0, r_a=0.0, r_b=costs.c_x_mean,
                       s_c0=0.0, s_c1=0.0, s_c2=0.5 * q * q,
                       x0=params.x0, sigma=params.sigma, T=params.T)


def best_response_system(params: ModelParams, env: EnvironmentMean) -> FbodeSystem:
    q = params.q
    mu = env.xbar_env_T
    return FbodeSystem(eta_T=1.0, r_a=-q * mu, r_b=0.0,
                       s_c0=0.5 * (q * mu) ** 2, s_c1=0.0, s_c2=0.0,
                       x0=params.x0, sigma=params.sigma, T=params.T)


def solve_mfg(params: ModelParams, grid: TimeGrid, method: str = "auto",
              tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> Equilibrium:
    """Non-cooperative equilibrium. Refuses the singular combination qT = 1."""
    if abs(params.q * params.T - 1.0) <= SINGULAR_ATOL:
        raise SingularSystemError(f"qT = 1 (q={params.q}, T={params.T}): equilibrium not unique")
    sol = _solve(mfg_system(params), grid, method, tol, max_iter)
    cost = _ansatz_value(sol, params.x0)
    return Equilibrium(kind="mfg", solution=sol,
                       control=FeedbackControl.from_solution(sol),
                       cost=cost, xbar_T=sol.xbar_T)


def solve_mfc(params: ModelParams, grid: TimeGrid, method: str = "auto",
              tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> Equilibrium:
    """Social optimum. Refuses the singular combination (2q - q^2) T = 1."""
    q = params.q
    if abs((2.0 * q - q * q) * params.T - 1.0) <= SINGULAR_ATOL:
        raise SingularSystemError(
            f"(2q - q^2) T = 1 (q={q}, T={params.T}): optimum system is singular"
        )
    sol = _solve(mfc_system(params), grid, method, tol, max_iter)
    # ansatz value omits the planner's internalization term, add it back
    cost = _ansatz_value(sol, params.x0) + (1.0 - q) * q * sol.xbar_T ** 2
    return Equilibrium(kind="mfc", solution=sol,
                       control=FeedbackControl.from_solution(sol),
                       cost=cost, xbar_T=sol.xbar_T)


def solve_p_partial(params: ModelParams, p: float, grid: TimeGrid,
                    method: str = "auto", tol: float = DEFAULT_TOL,
                    max_iter: int = DEFAULT_MAX_ITER) -> PPartialEquilibrium:
    """Equilibrium of the mixed population with deviating proportion p.

    The deviator's cost hat_J_p is the ansatz value of her own system; the
    followers' cost star_J_p re-evaluates the planner control inside the
    mixed population flow.
    """
    if not 0.0 <= p <= 1.0:
        raise OutOfRangeError(f"p must lie in [0, 1], got {p}")
    mfc = solve_mfc(params, grid, method=method, tol=tol, max_iter=max_iter)
    sol = _solve(p_partial_system(params, p, mfc.xbar_T), grid, method, tol, max_iter)
    deviator = Equilibrium(kind="p_partial_deviator", solution=sol,
                           control=FeedbackControl.from_solution(sol),
                           cost=_ansatz_value(sol, params.x0),
                           xbar_T=sol.xbar_T, kind_param=p)
    population = p * sol.xbar_T + (1.0 - p) * mfc.xbar_T
    star = evaluate_cost(mfc.control, population, params, grid)
    return PPartialEquilibrium(p=p, deviator=deviator, xbar_mfc_T=mfc.xbar_T,
                               population_xbar_T=population,
                               hat_J_p=deviator.cost, star_J_p=star)


def solve_lambda_interpolated(params: ModelParams, lam: float, grid: TimeGrid,
                              method: str = "auto", tol: float = DEFAULT_TOL,
                              max_iter: int = DEFAULT_MAX_ITER) -> Equilibrium:
    """Equilibrium of the lambda-blended game.

    The reported cost is the planner-type cost of the equilibrium control
    evaluated along its own flow, which is what the blended criterion
    collapses to at a fixed point.
    """
    if not 0.0 <= lam <= 1.0:
        raise OutOfRangeError(f"lambda must lie in [0, 1], got {lam}")
    q = params.q
    sol = _solve(lambda_system(params, lam), grid, method, tol, max_iter)
    cost = _ansatz_value(sol, params.x0) + lam * q * (1.0 - q) * sol.xbar_T ** 2
    return Equilibrium(kind="lambda", solution=sol,
                       control=FeedbackControl.from_solution(sol),
                       cost=cost, xbar_T=sol.xbar_T, kind_param=lam)


def best_response(params: ModelParams, env: EnvironmentMean, grid: TimeGrid,
                  method: str = "auto", tol: float = DEFAULT_TOL,
                  max_iter: int = DEFAULT_MAX_ITER) -> Equilibrium:
    """Single player's optimal control against a frozen environment mean."""
    sol = _solve(best_response_system(params, env), grid, method, tol, max_iter)
    cost = evaluate_cost(FeedbackControl.from_solution(sol), env.xbar_env_T,
                         params, grid)
    return Equilibrium(kind="best_response", solution=sol,
                       control=FeedbackControl.from_solution(sol),
                       cost=cost, xbar_T=sol.xbar_T, kind_param=env.xbar_env_T)


def evaluate_cost(control: FeedbackControl, env_terminal_mean: float,
                  params: ModelParams, grid: TimeGrid) -> float:
    """Expected cost of a player using ``control`` while the population
    terminal mean is frozen at ``env_terminal_mean``.

    No sampling: the state stays Gaussian under affine feedback, so the mean
    m and variance v close the expectation,

        m' = -(eta m + r),  v' = -2 eta v + sigma^2,  m_0 = x0,  v_0 = 0,
        cost = int [ (m^2 + v) + ((eta m + r)^2 + eta^2 v) ] / 2 dt
               + ((m_T - q env)^2 + v_T) / 2.
    """
    if not control.grid.matches(grid):
        raise GridMismatchError("control grid differs from the evaluation grid")
    eta_h = control.eta_half.tolist()
    r_h = control.r_half.tolist()
    sig2 = params.sigma ** 2
    dt = grid.dt
    dt2, dt6 = 0.5 * dt, dt / 6.0

    def rates(j: int, m: float, v: float):
        eta, r = eta_h[j], r_h[j]
        drift = eta * m + r
        running = 0.5 * (m * m + v) + 0.5 * (drift * drift + eta * eta * v)
        return -drift, -2.0 * eta * v + sig2, running

    m, v, acc = params.x0, 0.0, 0.0
    for kk in range(grid.n_steps):
        j = 2 * kk
        dm1, dv1, da1 = rates(j, m, v)
        dm2, dv2, da2 = rates(j + 1, m + dt2 * dm1, v + dt2 * dv1)
        dm3, dv3, da3 = rates(j + 1, m + dt2 * dm2, v + dt2 * dv2)
        dm4, dv4, da4 = rates(j + 2, m + dt * dm3, v + dt * dv3)
        m += dt6 * (dm1 + 2.0 * (dm2 + dm3) + dm4)
        v += dt6 * (dv1 + 2.0 * (dv2 + dv3) + dv4)
        acc += dt6 * (da1 + 2.0 * (da2 + da3) + da4)
    return acc + 0.5 * ((m - params.q * env_terminal_mean) ** 2 + v)
