"""Iterative deviation from the social optimum by myopic players.

A population starts on the planner's control. At each round some players
best-respond to the population they currently observe, without knowing
what proportion has already defected. Because the interaction enters only
through the terminal mean, each past policy is summarized by one number
and the whole process runs on scalars:

    best response to environment e:  m = C0 + C2 * e,
    C0 = exp(-T) x0,   C2 = q (1 - exp(-2T)) / 2.

The generic driver mixes all past policies with caller-supplied weight
rows. Two canonical schedules are provided: ``fixed_point`` (a cumulative
proportion of deviators all playing the newest best response, the rest
staying with the planner) and ``fictitious`` (the deviating mass spreads
uniformly over the previously generated policies). With |C2| < 1 the
fixed-point iterates converge, and the limit is the mixture mean of the
p-partial equilibrium at the cumulative deviation proportion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import equilibria
from .errors import InvalidScheduleError, OutOfRangeError
from .model import ModelParams, TimeGrid

ROW_SUM_ATOL = 1e-12


@dataclass(frozen=True)
class WeightSchedule:
    """Per-iteration weight rows over the policies generated so far.

    ``row(n)`` returns the weights (q_{n,0}, ..., q_{n,n}) applied after the
    n-th best response has been computed; entry j weights the j-th policy,
    with index 0 the initial (planner) control.
    """

    mode: str
    p_sequence: tuple[float, ...] | None = None
    constant_p: float | None = None
    q_tilde: float | None = None
    custom_rows: tuple[tuple[float, ...], ...] | None = None

    @classmethod
    def fixed_point(cls, p_sequence: float | Sequence[float]) -> "WeightSchedule":
        if isinstance(p_sequence, (int, float)):
            p = float(p_sequence)
            if not 0.0 <= p <= 1.0:
                raise InvalidScheduleError(f"p must lie in [0, 1], got {p}")
            return cls(mode="fixed_point", constant_p=p)
        seq = tuple(float(p) for p in p_sequence)
        if any(not 0.0 <= p <= 1.0 for p in seq):
            raise InvalidScheduleError("every p_i must lie in [0, 1]")
        return cls(mode="fixed_point", p_sequence=seq)

    @classmethod
    def fictitious(cls, q_tilde: float) -> "WeightSchedule":
        if not 0.0 < q_tilde < 1.0:
            raise InvalidScheduleError(f"q_tilde must lie in (0, 1), got {q_tilde}")
        return cls(mode="fictitious", q_tilde=q_tilde)

    @classmethod
    def custom(cls, rows: Sequence[Sequence[float]]) -> "WeightSchedule":
        frozen = tuple(tuple(float(w) for w in row) for row in rows)
        for n, row in enumerate(frozen, start=1):
            if len(row) != n + 1:
                raise InvalidScheduleError(
                    f"row {n} has {len(row)} entries, expected {n + 1}"
                )
            if any(w < 0.0 for w in row):
                raise InvalidScheduleError(f"row {n} has a negative weight")
            if abs(sum(row) - 1.0) > ROW_SUM_ATOL:
                raise InvalidScheduleError(f"row {n} sums to {sum(row)!r}, not 1")
        return cls(mode="custom", custom_rows=frozen)

    def _p_at(self, i: int) -> float:
        if self.constant_p is not None:
            return self.constant_p
        assert self.p_sequence is not None
        return self.p_sequence[i] if i < len(self.p_sequence) else 0.0

    def survivor_fraction(self, n: int) -> float:
        """Q_{n-1} = prod_{i<n} (1 - p_i): mass still on the planner control
        when the n-th best response is folded in."""
        out = 1.0
        for i in range(n):
            out *= 1.0 - self._p_at(i)
        return out

    def row(self, n: int) -> np.ndarray:
        if n < 1:
            raise InvalidScheduleError("rows are defined for iterations n >= 1")
        if self.mode == "fixed_point":
            q_surv = self.survivor_fraction(n)
            row = np.zeros(n + 1)
            row[0] = q_surv
            row[n] = 1.0 - q_surv
            return row
        if self.mode == "fictitious":
            qt = self.q_tilde
            row = np.zeros(n + 1)
            # deviating mass spreads evenly over the n policies generated
            # before this round (planner control included, newest excluded)
            row[0] = 1.0 - (n - 1) / n * qt
            if n > 1:
                row[1:n] = qt / n
            return row
        assert self.custom_rows is not None
        if n > len(self.custom_rows):
            raise InvalidScheduleError(f"custom schedule has no row for iteration {n}")
        return np.asarray(self.custom_rows[n - 1], dtype=float)

    def p_star_inf(self) -> float:
        """Limiting deviation proportion 1 - prod (1 - p_i)."""
        if self.mode == "fixed_point":
            if self.constant_p is not None:
                return 1.0 if self.constant_p > 0.0 else 0.0
            out = 1.0
            for p in self.p_sequence:
                out *= 1.0 - p
            return 1.0 - out
        if self.mode == "fictitious":
            return self.q_tilde
        return math.nan


@dataclass(frozen=True)
class ConvergenceCondition:
    constant: float
    satisfied: bool


def check_convergence_condition(params: ModelParams) -> ConvergenceCondition:
    """Contraction constant |q (1 - e^{-2T}) / 2| and whether it is < 1."""
    c = abs(params.q * (1.0 - math.exp(-2.0 * params.T)) / 2.0)
    return ConvergenceCondition(constant=c, satisfied=c < 1.0)


@dataclass(frozen=True)
class IterationTrace:
    """Record of one deviation run.

    Arrays are indexed by iteration (1-based ``ns``). ``Q`` stores the
    weight kept on the initial policy at each iteration; ``limit`` is the
    final population terminal mean; ``p_star_inf`` the cumulative deviation
    proportion implied by the schedule. ``distance_to_partial`` is filled
    by the fictitious-play runner only.
    """

    ns: np.ndarray
    Q: np.ndarray
    population_xbar_T: np.ndarray
    best_response_xbar_T: np.ndarray
    residuals: np.ndarray
    converged: bool
    limit: float
    p_star_inf: float
    distance_to_partial: float | None = None


def _map_constants(params: ModelParams, grid: TimeGrid) -> tuple[float, float, float]:
    """(C0, C2, planner terminal mean M)."""
    c0 = math.exp(-params.T) * params.x0
    c2 = params.q * (1.0 - math.exp(-2.0 * params.T)) / 2.0
    m = equilibria.solve_mfc(params, grid).xbar_T
    return c0, c2, m


def iterate_bound(params: ModelParams, grid: TimeGrid) -> float:
    """A-priori bound (|C0| + |C1|) / (1 - |C2|) on every iterate, finite
    whenever the contraction condition holds."""
    c0, c2, m = _map_constants(params, grid)
    c1 = m - c0
    if abs(c2) >= 1.0:
        return math.inf
    return (abs(c0) + abs(c1)) / (1.0 - abs(c2))


def run_generic(params: ModelParams, schedule: WeightSchedule, N: int,
                grid: TimeGrid, tol: float = 1e-10) -> IterationTrace:
    """Run myopic deviation rounds with arbitrary weight rows.

    Keeps only the terminal means of past policies (the sufficient
    statistic here). Runs exactly N iterations; ``converged`` reports
    whether the last residual fell below ``tol``.
    """
    if N < 1:
        raise InvalidScheduleError(f"N must be >= 1, got {N}")
    c0, c2, _m = _map_constants(params, grid)
    means = [_m]                     # policy 0 is the planner control
    pop = _m
    ns = np.arange(1, N + 1)
    qs = np.empty(N)
    pops = np.empty(N)
    brs = np.empty(N)
    residuals = np.empty(N)
    for n in range(1, N + 1):
        br = c0 + c2 * pop
        means.append(br)
        row = schedule.row(n)
        if row.shape != (n + 1,):
            raise InvalidScheduleError(f"row {n} has shape {row.shape}")
        if np.any(row < 0.0) or abs(row.sum() - 1.0) > ROW_SUM_ATOL:
            raise InvalidScheduleError(f"row {n} is not a probability vector")
        new_pop = float(row @ np.asarray(means))
        qs[n - 1] = row[0]
        pops[n - 1] = new_pop
        brs[n - 1] = br
        residuals[n - 1] = abs(new_pop - pop)
        pop = new_pop
    return IterationTrace(ns=ns, Q=qs, population_xbar_T=pops,
                          best_response_xbar_T=brs, residuals=residuals,
                          converged=bool(residuals[-1] <= tol), limit=pop,
                          p_star_inf=schedule.p_star_inf())


def run_fixed_point(params: ModelParams, p_sequence: float | Sequence[float],
                    N: int, tol: float, grid: TimeGrid) -> IterationTrace:
    """Cumulative-deviation recursion
    pop_{n} = Q_{n-1} M + (1 - Q_{n-1}) (C0 + C2 pop_{n-1}).

    Stops early once both the population residual and the survivor
    fraction Q have settled within ``tol``; the ``converged`` flag also
    requires the contraction condition to hold.
    """
    schedule = WeightSchedule.fixed_point(p_sequence)
    if N < 1:
        raise InvalidScheduleError(f"N must be >= 1, got {N}")
    c0, c2, m = _map_constants(params, grid)
    condition = check_convergence_condition(params)

    pop = m
    prev_q = 1.0
    ns, qs, pops, brs, residuals = [], [], [], [], []
    settled = False
    for n in range(1, N + 1):
        q_surv = schedule.survivor_fraction(n)
        br = c0 + c2 * pop
        new_pop = q_surv * m + (1.0 - q_surv) * br
        ns.append(n)
        qs.append(q_surv)
        pops.append(new_pop)
        brs.append(br)
        residuals.append(abs(new_pop - pop))
        pop = new_pop
        if residuals[-1] <= tol and abs(q_surv - prev_q) <= tol:
            settled = True
            break
        prev_q = q_surv
    return IterationTrace(
        ns=np.array(ns), Q=np.array(qs), population_xbar_T=np.array(pops),
        best_response_xbar_T=np.array(brs), residuals=np.array(residuals),
        converged=bool(condition.satisfied and (settled or residuals[-1] <= tol)),
        limit=pop, p_star_inf=schedule.p_star_inf(),
    )


def run_fictitious_play(params: ModelParams, q_tilde: float, N: int,
                        grid: TimeGrid) -> IterationTrace:
    """Fictitious-play rounds plus a soft convergence report.

    ``distance_to_partial`` compares the final population mean with the
    mixture mean of the q_tilde-partial equilibrium; convergence toward it
    is expected (Cesaro averaging) but not guaranteed by a theorem, so the
    flag is informational: it is set when the distance is below 1e-3.
    """
    if N < 2:
        raise InvalidScheduleError(f"fictitious play needs N >= 2, got {N}")
    schedule = WeightSchedule.fictitious(q_tilde)
    trace = run_generic(params, schedule, N, grid)
    partial = equilibria.solve_p_partial(params, q_tilde, grid)
    distance = abs(trace.limit - partial.population_xbar_T)
    return IterationTrace(
        ns=trace.ns, Q=trace.Q, population_xbar_T=trace.population_xbar_T,
        best_response_xbar_T=trace.best_response_xbar_T,
        residuals=trace.residuals, converged=bool(distance <= 1e-3),
        limit=trace.limit, p_star_inf=q_tilde, distance_to_partial=distance,
    )


def identify_limit(params: ModelParams, p_star: float, grid: TimeGrid) -> float:
    """Predicted limit of the fixed-point process with cumulative deviation
    proportion p_star: the p_star-partial population mixture mean."""
    if not 0.0 <= p_star <= 1.0:
        raise OutOfRangeError(f"p_star must lie in [0, 1], got {p_star}")
    partial = equilibria.solve_p_partial(params, p_star, grid)
    return (1.0 - p_star) * partial.xbar_mfc_T + p_star * partial.deviator.xbar_T
