"""Cost transforms that make non-cooperative play reproduce the planner.

Two mechanisms are implemented for the linear-quadratic model.

Control matching. Adding lambda times the averaged measure-derivative of
the terminal cost tilts each player's first-order condition toward the
planner's. For g(x, mu) = (x - q mean)^2 / 2 the (unnormalized) flat
derivative with respect to the measure at test point y is
-q (x - q mean) y, and averaging over the population replaces x by the
mean, so the transform adds lambda * (-q (1 - q)) * mean * x to the
terminal cost. At lambda = 1 the tilted game's equilibrium coincides
with the social optimum; intermediate lambdas define the interpolated
games solved by the equilibria module.

Value matching. The planner's conditional value function
V(t, x, mean) = eta_t x^2 / 2 + rho_t x mean + kappa_t mean^2 / 2 + c_t
satisfies four coefficient ODEs obtained by substituting the ansatz into
the planner's master equation. A running-cost correction built from the
measure derivative of V,

    f0 + A_t mean^2 + B_t mean x,
    A_t = (rho+kappa)^2 / 2 - (rho+kappa) kappa,  B_t = -(rho+kappa) rho,

turns the game's equilibrium value into V itself, while leaving the
equilibrium dynamics different from the planner's in general. The two
``verify_*`` entry points check those claims numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    NoConvergenceError,
    OutOfRangeError,
    SingularSystemError,
)
from .model import SINGULAR_ATOL, ModelParams, TimeGrid


def terminal_flat_derivative(q: float, x_tilde: float, mean: float, y: float) -> float:
    """Unnormalized flat derivative of the terminal cost at test point y.

    The additive normalization constant is dropped deliberately: it does not
    move d/dx of the transformed cost, hence no equilibrium quantity.
    """
    return -q * (x_tilde - q * mean) * y


@dataclass(frozen=True)
class LambdaCosts:
    """Terminal cost of the lambda-tilted game,
    g_lambda(x, mean) = x^2 / 2 + c_x_mean * mean * x + c_mean_sq * mean^2."""

    lam: float
    c_x_mean: float
    c_mean_sq: float

    def g_lambda(self, x: float, mean: float) -> float:
        return 0.5 * x * x + self.c_x_mean * mean * x + self.c_mean_sq * mean * mean

    def dg_dx(self, x: float, mean: float) -> float:
        return x + self.c_x_mean * mean


def build_lambda_costs(params: ModelParams, lam: float) -> LambdaCosts:
    """Tilted terminal cost g + lambda * E[flat derivative at the population].

    Averaging ``terminal_flat_derivative`` over x_tilde ~ population gives
    -q (1 - q) mean * y, so the x-mean coupling moves from -q to
    -q (1 + lambda (1 - q)); the mean^2 constant is untouched.
    """
    if not 0.0 <= lam <= 1.0:
        raise OutOfRangeError(f"lambda must lie in [0, 1], got {lam}")
    q = params.q
    return LambdaCosts(lam=lam,
                       c_x_mean=-q * (1.0 + lam * (1.0 - q)),
                       c_mean_sq=0.5 * q * q)


@dataclass(frozen=True)
class ValueCoeffs:
    """Quadratic coefficients of the planner's conditional value function,
    sampled on the grid (and its midpoint refinement)."""

    grid: TimeGrid
    eta: np.ndarray
    rho: np.ndarray
    kappa: np.ndarray
    c: np.ndarray
    eta_half: np.ndarray
    rho_half: np.ndarray
    kappa_half: np.ndarray
    c_half: np.ndarray

    def value(self, k: int, x: float, mean: float) -> float:
        """V(t_k, x, mean)."""
        return (0.5 * self.eta[k] * x * x + self.rho[k] * x * mean
                + 0.5 * self.kappa[k] * mean * mean + self.c[k])

    def measure_derivative(self, k: int, x_prime: float, mean: float) -> float:
        """Derivative of V(t_k, x', .) with respect to the measure, evaluated
        anywhere (the quadratic ansatz makes it constant in the test point)."""
        return self.rho[k] * x_prime + self.kappa[k] * mean


def mfc_value_coeffs(params: ModelParams, grid: TimeGrid) -> ValueCoeffs:
    """Backward-integrate the four coefficient ODEs

        eta'   = eta^2 - 1
        rho'   = rho   (2 eta + 2 rho + kappa)
        kappa' = kappa (2 eta + 2 rho + kappa)
        c'     = -sigma^2 eta / 2

    with terminal slice (1, -q, q^2, 0). The rho and kappa equations share
    their logarithmic derivative, so kappa = -q rho along the whole path.
    """
    q = params.q
    if abs((2.0 * q - q * q) * params.T - 1.0) <= SINGULAR_ATOL:
        raise SingularSystemError(
            f"(2q - q^2) T = 1 (q={q}, T={params.T}): planner problem is singular"
        )
    sig2 = params.sigma ** 2

    def rhs(y):
        eta, rho, kappa, _ = y
        shared = 2.0 * eta + 2.0 * rho + kappa
        return np.array([eta * eta - 1.0, rho * shared, kappa * shared,
                         -0.5 * sig2 * eta])

    m = 2 * grid.n_steps
    h = -grid.T / m
    path = np.empty((m + 1, 4))
    y = np.array([1.0, -q, q * q, 0.0])
    path[m] = y
    for j in range(m, 0, -1):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        path[j - 1] = y

    return ValueCoeffs(
        grid=grid,
        eta=path[::2, 0].copy(), rho=path[::2, 1].copy(),
        kappa=path[::2, 2].copy(), c=path[::2, 3].copy(),
        eta_half=path[:, 0].copy(), rho_half=path[:, 1].copy(),
        kappa_half=path[:, 2].copy(), c_half=path[:, 3].copy(),
    )


@dataclass(frozen=True)
class ValueMatchingIncentive:
    """Running-cost correction f0 + A_t mean^2 + B_t mean x."""

    grid: TimeGrid
    A: np.ndarray
    B: np.ndarray
    A_half: np.ndarray
    B_half: np.ndarray

    def extra_running_cost(self, k: int, x: float, mean: float) -> float:
        return self.A[k] * mean * mean + self.B[k] * mean * x


def value_matching_incentive(params: ModelParams, grid: TimeGrid,
                             coeffs: ValueCoeffs | None = None) -> ValueMatchingIncentive:
    """Assemble (A_t, B_t) from the value-function coefficients.

    The correction is quadratic in the measure derivative of V: its
    self-product contributes (rho+kappa)^2 / 2 to the mean^2 coefficient and
    its cross product with the state removes (rho+kappa) kappa mean^2 and
    (rho+kappa) rho mean x.
    """
    if coeffs is None:
        coeffs = mfc_value_coeffs(params, grid)

    def build(rho, kappa):
        agg = rho + kappa
        return 0.5 * agg * agg - agg * kappa, -agg * rho

    A, B = build(coeffs.rho, coeffs.kappa)
    A_half, B_half = build(coeffs.rho_half, coeffs.kappa_half)
    return ValueMatchingIncentive(grid=grid, A=A, B=B, A_half=A_half, B_half=B_half)


@dataclass(frozen=True)
class LambdaOneReport:
    equal: bool
    max_path_deviation: float
    cost_deviation: float


def verify_lambda1_equals_mfc(params: ModelParams, grid: TimeGrid,
                              tol: float = 1e-8) -> LambdaOneReport:
    """Solve the fully tilted game (lambda = 1) and compare against the
    planner's optimum, path by path and in cost."""
    from . import equilibria

    tilted = equilibria.solve_lambda_interpolated(params, 1.0, grid)
    planner = equilibria.solve_mfc(params, grid)
    devs = [np.max(np.abs(getattr(tilted.solution, name) - getattr(planner.solution, name)))
            for name in ("eta", "r", "s", "xbar")]
    max_dev = float(max(devs))
    cost_dev = abs(tilted.cost - planner.cost)
    return LambdaOneReport(equal=bool(max_dev <= tol and cost_dev <= tol),
                           max_path_deviation=max_dev, cost_deviation=cost_dev)


def cubic_midpoints(arr: np.ndarray) -> np.ndarray:
    """Midpoint values of a uniformly sampled smooth path, 4-point cubic."""
    n = len(arr) - 1
    if n < 3:
        raise ValueError("need at least 4 samples for cubic midpoints")
    mid = np.empty(n)
    mid[1:-1] = (-arr[:-3] + 9.0 * arr[1:-2] + 9.0 * arr[2:-1] - arr[3:]) / 16.0
    mid[0] = (5.0 * arr[0] + 15.0 * arr[1] - 5.0 * arr[2] + arr[3]) / 16.0
    mid[-1] = (arr[-4] - 5.0 * arr[-3] + 15.0 * arr[-2] + 5.0 * arr[-1]) / 16.0
    return mid


@dataclass(frozen=True)
class ValueMatchingReport:
    """Outcome of solving the value-matched game.

    value_gap compares the game's equilibrium value at (0, x0) with
    V(0, x0, x0); control_gap is the sup distance between the equilibrium
    feedback intercept and the planner's. ``conditional_value_gap`` extends
    the value comparison to any starting state.
    """

    value_gap: float
    control_gap: float
    iterations: int
    fixed_point_residual: float
    r_tilde: np.ndarray
    s0_tilde: float
    mean_path: np.ndarray
    coeffs: ValueCoeffs
    x0: float

    def equilibrium_value(self, x: float) -> float:
        return 0.5 * x * x + self.r_tilde[0] * x + self.s0_tilde

    def conditional_value_gap(self, x: float) -> float:
        return abs(self.equilibrium_value(x) - self.coeffs.value(0, x, self.x0))


def verify_value_matching(params: ModelParams, grid: TimeGrid,
                          fp_tol: float = 1e-13, max_iter: int = 500) -> ValueMatchingReport:
    """Solve the game with corrected running cost f0 + A mean^2 + B mean x.

    Under the quadratic ansatz the backward intercept picks up a linear
    source, r' = eta r - B_t mean_t, while s' gains -A_t mean_t^2; the
    equilibrium mean path is found by Picard iteration of the resulting
    affine forward-backward loop on the midpoint-refined grid.
    """
    from . import equilibria

    q = params.q
    coeffs = mfc_value_coeffs(params, grid)
    incentive = value_matching_incentive(params, grid, coeffs)
    sig2 = params.sigma ** 2

    n2 = 2 * grid.n_steps          # number of half-grid steps
    h = grid.dt / 2.0
    t_half = grid.times_half
    B = incentive.B_half
    A = incentive.A_half

    mean = params.x0 * np.exp(-t_half)  # uncoupled start
    r = np.empty(n2 + 1)
    iterations = 0
    residual = math.inf
    for iterations in range(1, max_iter + 1):
        w = B * mean
        w_mid = cubic_midpoints(w)
        # backward r' = r - w(t), r_T = -q mean_T
        r[n2] = -q * mean[n2]
        y = r[n2]
        for j in range(n2, 0, -1):
            w1, wm, w0 = w[j], w_mid[j - 1], w[j - 1]
            k1 = y - w1
            k2 = (y - 0.5 * h * k1) - wm
            k3 = (y - 0.5 * h * k2) - wm
            k4 = (y - h * k3) - w0
            y = y - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            r[j - 1] = y
        r_mid = cubic_midpoints(r)
        # forward mean' = -(mean + r)
        new_mean = np.empty(n2 + 1)
        y = params.x0
        new_mean[0] = y
        for j in range(n2):
            r0, rm, r1 = r[j], r_mid[j], r[j + 1]
            k1 = -(y + r0)
            k2 = -((y + 0.5 * h * k1) + rm)
            k3 = -((y + 0.5 * h * k2) + rm)
            k4 = -((y + h * k3) + r1)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            new_mean[j + 1] = y
        residual = float(np.max(np.abs(new_mean - mean)))
        mean = new_mean
        if residual <= fp_tol:
            break
    else:
        raise NoConvergenceError(
            f"value-matched game fixed point stalled at residual {residual:.3e}"
        )

    # s' = (r^2 - sigma^2)/2 - A mean^2 backward from s_T = q^2 mean_T^2 / 2
    src = 0.5 * (r * r - sig2) - A * mean * mean
    src_mid = cubic_midpoints(src)
    s = 0.5 * (q * mean[n2]) ** 2
    for j in range(n2, 0, -1):
        s = s - (h / 6.0) * (src[j] + 4.0 * src_mid[j - 1] + src[j - 1])
    s0_tilde = float(s)

    planner = equilibria.solve_mfc(params, grid)
    r_full = r[::2].copy()
    control_gap = float(np.max(np.abs(r_full - planner.solution.r)))
    x0 = params.x0
    u0_at_x0 = 0.5 * x0 * x0 + r_full[0] * x0 + s0_tilde
    value_gap = abs(u0_at_x0 - coeffs.value(0, x0, x0))
    return ValueMatchingReport(
        value_gap=value_gap, control_gap=control_gap, iterations=iterations,
        fixed_point_residual=residual, r_tilde=r_full, s0_tilde=s0_tilde,
        mean_path=mean[::2].copy(), coeffs=coeffs, x0=x0,
    )
