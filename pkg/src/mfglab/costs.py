"""Scalar economics of a scenario: instability, anarchy, free riding.

The Price of Instability PoI = J* - hat_J_0 measures how much a single
player gains by unilaterally dropping the planner's control while the
crowd keeps it; it is nonnegative by construction and vanishes only when
the planner's control is already a best response. The Price of Anarchy
PoA = hat_J_1 / J* compares the fully non-cooperative equilibrium cost to
the social optimum. Between the two sits the free-rider threshold p*: the
smallest deviating proportion at which a deviator's cost climbs back to
the original social optimum.

An adjoint diagnostic accompanies PoI: the process obtained by averaging
the measure derivative of the terminal cost along the planner flow, whose
squared time integral lower-bounds PoI up to a model constant (the
constant itself is not estimated here).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import equilibria
from .equilibria import EnvironmentMean
from .errors import MfgLabError, OutOfRangeError
from .model import ModelParams, TimeGrid


@dataclass(frozen=True)
class CostReport:
    """Cost bundle of one scenario at deviating proportion p.

    Invariants: PoI = J_star - hat_J_0, PoA = hat_J_1 / J_star (NaN when
    J_star is not strictly positive), PoI >= 0 up to numerics.
    """

    p: float
    hat_J_p: float
    star_J_p: float
    J_star: float
    hat_J_0: float
    hat_J_1: float
    PoI: float
    PoA: float


def _deviator_cost(params: ModelParams, p: float, grid: TimeGrid,
                   xbar_mfc_T: float) -> float:
    """hat_J_p without the follower-side evaluation (used by scans)."""
    from . import fbode
    sol = fbode.solve(equilibria.p_partial_system(params, p, xbar_mfc_T), grid)
    return 0.5 * sol.eta[0] * params.x0 ** 2 + sol.r[0] * params.x0 + sol.s[0]


def cost_report(params: ModelParams, p: float, grid: TimeGrid) -> CostReport:
    """Solve the planner, the equilibrium and the p-mixture and bundle costs."""
    if not 0.0 <= p <= 1.0:
        raise OutOfRangeError(f"p must lie in [0, 1], got {p}")
    mfc = equilibria.solve_mfc(params, grid)
    partial = equilibria.solve_p_partial(params, p, grid)
    hat_0 = _deviator_cost(params, 0.0, grid, mfc.xbar_T)
    hat_1 = equilibria.solve_mfg(params, grid).cost
    j_star = mfc.cost
    poa = hat_1 / j_star if j_star > 0.0 else math.nan
    return CostReport(p=p, hat_J_p=partial.hat_J_p, star_J_p=partial.star_J_p,
                      J_star=j_star, hat_J_0=hat_0, hat_J_1=hat_1,
                      PoI=j_star - hat_0, PoA=poa)


@dataclass(frozen=True)
class AdjointDiagnostic:
    """Averaged measure-derivative process along the planner flow.

    In this model the process is constant in time and equal to
    -q (1 - q) xbar_T; ``cancellation`` flags the q = 1 case where it
    vanishes by algebraic cancellation although the coupling is active.
    """

    Y_path: np.ndarray
    integral_Y_sq: float
    cancellation: bool


def poi_adjoint(params: ModelParams, grid: TimeGrid) -> AdjointDiagnostic:
    """Build the adjoint diagnostic underneath the PoI lower bound.

    The running cost carries no measure dependence, so only the terminal
    cost contributes: averaging its measure derivative over the population
    gives -q (1 - q) xbar_T, a deterministic constant; the reported
    integral is T times its square. The multiplicative model constant of
    the actual lower bound is deliberately not estimated.
    """
    mfc = equilibria.solve_mfc(params, grid)
    q = params.q
    y = -q * (1.0 - q) * mfc.xbar_T
    path = np.full(grid.n_steps + 1, y)
    path.flags.writeable = False
    cancellation = (q != 0.0) and (y == 0.0)
    return AdjointDiagnostic(Y_path=path, integral_Y_sq=params.T * y * y,
                             cancellation=cancellation)


@dataclass(frozen=True)
class PStarResult:
    """Free-rider threshold report.

    status is one of:
    * ``root``             - a genuine crossing was bracketed and bisected;
    * ``identically_equal``- deviator cost coincides with the optimum for all
      p (q = 0); the smallest valid threshold 0 is returned by convention;
    * ``no_sign_change``   - no crossing on [0, 1]; ``value`` then reports the
      boundary point with the smallest residual instead of a fabricated root.
    """

    value: float
    status: str
    residual: float
    J_star: float
    hat_at_value: float


def p_star(params: ModelParams, grid: TimeGrid, tol: float = 1e-8,
           scan_points: int = 101) -> PStarResult:
    """Smallest p with hat_J_p = J*: left-to-right scan plus bisection.

    The scan walks a uniform grid of ``scan_points`` values of p and
    bisects inside the first cell where hat_J_p - J* changes sign, down to
    |hat_J_{p*} - J*| <= tol * max(1, |J*|).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    mfc = equilibria.solve_mfc(params, grid)
    j_star = mfc.cost
    scale = max(1.0, abs(j_star))

    def gap(p: float) -> float:
        return _deviator_cost(params, p, grid, mfc.xbar_T) - j_star

    g0, g1 = gap(0.0), gap(1.0)
    if abs(g0) <= 1e-12 * scale and abs(g1) <= 1e-12 * scale:
        return PStarResult(value=0.0, status="identically_equal", residual=abs(g0),
                           J_star=j_star, hat_at_value=j_star + g0)
    if g0 > 1e-9 * scale or g1 < -1e-9 * scale:
        raise MfgLabError(
            f"cost chain violated: hat_J_0 - J* = {g0:.3e}, hat_J_1 - J* = {g1:.3e}"
        )

    ps = np.linspace(0.0, 1.0, scan_points)
    gaps = [g0] + [gap(p) for p in ps[1:-1]] + [g1]
    bracket = None
    for i in range(scan_points - 1):
        if gaps[i] == 0.0:
            return PStarResult(value=float(ps[i]), status="root", residual=0.0,
                               J_star=j_star, hat_at_value=j_star)
        if gaps[i] < 0.0 <= gaps[i + 1]:
            bracket = (ps[i], ps[i + 1], gaps[i], gaps[i + 1])
            break
    if bracket is None:
        side = 0 if abs(g0) <= abs(g1) else -1
        return PStarResult(value=float(ps[side]), status="no_sign_change",
                           residual=abs(gaps[side]), J_star=j_star,
                           hat_at_value=j_star + gaps[side])

    lo, hi, glo, ghi = bracket
    mid, gmid = lo, glo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gmid = gap(mid)
        if abs(gmid) <= tol * scale:
            break
        if gmid < 0.0:
            lo, glo = mid, gmid
        else:
            hi, ghi = mid, gmid
    return PStarResult(value=float(mid), status="root", residual=abs(gmid),
                       J_star=j_star, hat_at_value=j_star + gmid)


@dataclass(frozen=True)
class OrderingReport:
    """Truth values of the cost inequalities at proportion p.

    ``concavity_hypothesis`` records whether the displacement-concavity
    assumption behind the mixture lower bound actually holds here; the
    terminal cost is displacement convex in the measure for q != 0, so the
    corresponding inequalities are diagnostic only in that regime.
    """

    p: float
    hat0_le_star: bool
    star_le_hat1: bool
    mixture_le_hat_p: bool
    hat_p_le_star_p: bool
    concavity_hypothesis: bool


def ordering_diagnostics(params: ModelParams, p: float, grid: TimeGrid,
                         slack: float = 1e-9) -> OrderingReport:
    if not 0.0 <= p <= 1.0:
        raise OutOfRangeError(f"p must lie in [0, 1], got {p}")
    report = cost_report(params, p, grid)
    mixture = (1.0 - p) * report.hat_J_0 + p * report.J_star
    return OrderingReport(
        p=p,
        hat0_le_star=report.hat_J_0 <= report.J_star + slack,
        star_le_hat1=report.J_star <= report.hat_J_1 + slack,
        mixture_le_hat_p=mixture <= report.hat_J_p + slack,
        hat_p_le_star_p=report.hat_J_p <= report.star_J_p + slack,
        concavity_hypothesis=params.q == 0.0,
    )


def best_response_cost_to_planner(params: ModelParams, grid: TimeGrid) -> float:
    """hat_J_0: the unilateral deviator's cost inside the planner flow."""
    mfc = equilibria.solve_mfc(params, grid)
    br = equilibria.best_response(params, EnvironmentMean(mfc.xbar_T), grid)
    return br.cost
