"""Forward-backward ODE systems behind the quadratic value ansatz.

Every game solved in this package reduces, through the ansatz
u(t, x) = eta_t x^2 / 2 + r_t x + s_t, to the scalar system

    eta' = eta^2 - 1            eta_T given
    r'   = eta r                r_T  = a + b * xbar_T
    s'   = (r^2 - sigma^2 eta)/2,  s_T = c0 + c1 xbar_T + c2 xbar_T^2
    xbar' = -(eta xbar + r)     xbar_0 = x0

coupled only through the terminal mean xbar_T. Because the realized
terminal mean is an affine function of the guessed one, the shooting
problem is solved exactly from two probe integrations; no damped
iteration is ever needed.

Two solution paths are provided: an exact closed form for the class
eta_T = 1, sigma = 1 (all the equilibrium systems of the worked model)
and a generic RK4 shooting solver for everything else. Backward sweeps
run on a once-refined grid so that forward RK4 stages can read the
coefficients at interval midpoints without interpolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    GridMismatchError,
    NoConvergenceError,
    SingularRiccatiError,
    SingularSystemError,
    UnsupportedFormError,
)
from .model import TimeGrid

DEFAULT_N_STEPS = 2000
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 50


@dataclass(frozen=True)
class FbodeSystem:
    """Terminal data of one ansatz system.

    r_T and s_T are given as maps of the terminal mean:
    r_T = r_a + r_b * xbar_T and s_T = s_c0 + s_c1 * xbar_T + s_c2 * xbar_T^2.
    """

    eta_T: float
    r_a: float
    r_b: float
    s_c0: float
    s_c1: float
    s_c2: float
    x0: float
    sigma: float
    T: float


@dataclass(frozen=True)
class FbodeSolution:
    """Discretized solution paths on ``grid`` (plus half-grid copies of the
    backward coefficients, used by cost integrals downstream)."""

    grid: TimeGrid
    eta: np.ndarray
    r: np.ndarray
    s: np.ndarray
    xbar: np.ndarray
    xbar_T: float
    method: str
    eta_half: np.ndarray
    r_half: np.ndarray

    def __post_init__(self):
        n = self.grid.n_steps
        for name in ("eta", "r", "s", "xbar"):
            arr = getattr(self, name)
            if arr.shape != (n + 1,):
                raise GridMismatchError(f"{name} has length {arr.shape}, expected {n + 1}")
            arr.flags.writeable = False
        for name in ("eta_half", "r_half"):
            arr = getattr(self, name)
            if arr.shape != (2 * n + 1,):
                raise GridMismatchError(f"{name} has length {arr.shape}, expected {2 * n + 1}")
            arr.flags.writeable = False

    def terminal_residuals(self, system: FbodeSystem) -> tuple[float, float]:
        """Relative mismatch of the r and s terminal conditions."""
        r_T = system.r_a + system.r_b * self.xbar_T
        s_T = system.s_c0 + system.s_c1 * self.xbar_T + system.s_c2 * self.xbar_T ** 2
        r_err = abs(self.r[-1] - r_T) / max(1.0, abs(r_T))
        s_err = abs(self.s[-1] - s_T) / max(1.0, abs(s_T))
        return r_err, s_err


def mean_response_kernel(T: float) -> float:
    """Sensitivity (1 - exp(-2T)) / 2 of the terminal mean to -r_T when eta = 1."""
    return 0.5 * (1.0 - math.exp(-2.0 * T))


def riccati_closed_form(eta_T: float, T: float, grid: TimeGrid) -> np.ndarray:
    """Exact solution of eta' = eta^2 - 1 with eta(T) = eta_T, on the grid.

    Raises SingularRiccatiError when the closed-form denominator vanishes
    inside the horizon (possible only when eta_T < -1).
    """
    if not math.isclose(grid.T, T, rel_tol=1e-12):
        raise GridMismatchError(f"grid horizon {grid.T} differs from requested T={T}")
    u = np.exp(2.0 * (T - grid.times))
    # the denominator is linear in u = e^{2(T-t)}; its root u* must stay
    # outside [1, e^{2T}] (automatic for eta_T >= 0)
    if eta_T != -1.0:
        u_root = (eta_T - 1.0) / (eta_T + 1.0)
        if 1.0 - 1e-12 <= u_root <= math.exp(2.0 * T) + 1e-12:
            raise SingularRiccatiError(
                f"Riccati denominator vanishes inside [0, T] for eta_T={eta_T}, T={T}"
            )
    den = -(1.0 + u) - eta_T * (u - 1.0)
    if np.any(np.abs(den) < 1e-12 * np.max(np.abs(u))):
        raise SingularRiccatiError(f"Riccati denominator vanishes for eta_T={eta_T}, T={T}")
    num = -u + 1.0 - eta_T * (u + 1.0)
    eta = num / den
    return eta


def solve_closed_form(system: FbodeSystem, grid: TimeGrid) -> FbodeSolution:
    """Exact solution for the eta_T = 1, sigma = 1 class.

    With eta identically one, r_t = r_T e^{t-T}, the terminal mean solves
    the scalar affine equation
        xbar_T (1 + b k) = e^{-T} x0 - a k,   k = (1 - e^{-2T}) / 2,
    and s follows by exact quadrature of s' = (r^2 - 1)/2.
    """
    if not math.isclose(grid.T, system.T, rel_tol=1e-12):
        raise GridMismatchError("grid horizon differs from the system horizon")
    if system.eta_T != 1.0:
        raise UnsupportedFormError(f"closed form requires eta_T = 1, got {system.eta_T}")
    if system.sigma != 1.0:
        raise UnsupportedFormError(f"closed form requires sigma = 1, got {system.sigma}")

    T = system.T
    k = mean_response_kernel(T)
    coeff = 1.0 + system.r_b * k
    rhs = math.exp(-T) * system.x0 - system.r_a * k
    if abs(coeff) <= 1e-12:
        raise SingularSystemError(
            f"terminal-mean equation is degenerate: 1 + b*k = {coeff:.3e}"
        )
    xbar_T = rhs / coeff
    r_T = system.r_a + system.r_b * xbar_T
    s_T = system.s_c0 + system.s_c1 * xbar_T + system.s_c2 * xbar_T ** 2

    t = grid.times
    th = grid.times_half
    eta = np.ones_like(t)
    eta_half = np.ones_like(th)
    r = r_T * np.exp(t - T)
    r_half = r_T * np.exp(th - T)
    # s_t = s_T + (T - t)/2 - r_T^2 (1 - e^{2(t-T)}) / 4
    s = s_T + 0.5 * (T - t) - 0.25 * r_T ** 2 * (1.0 - np.exp(2.0 * (t - T)))
    # xbar_t = e^{-t} x0 - r_T (e^{t-T} - e^{-t-T}) / 2
    xbar = np.exp(-t) * system.x0 - 0.5 * r_T * (np.exp(t - T) - np.exp(-t - T))

    return FbodeSolution(
        grid=grid, eta=eta, r=r, s=s, xbar=xbar, xbar_T=xbar_T,
        method="closed_form", eta_half=eta_half, r_half=r_half,
    )


def _backward_sweep(system: FbodeSystem, r_T: float, s_T: float, grid: TimeGrid):
    """RK4 integration of (eta, r, s) from T down to 0 at half-grid resolution.

    The joint system is autonomous in (eta, r, s), so RK4 stages need no
    time lookups. Returns arrays of length 2 n_steps + 1 in ascending time.
    Scalar arithmetic keeps the per-step cost low; these sweeps sit inside
    parameter scans, so the constant matters.
    """
    sig2 = system.sigma ** 2
    m = 2 * grid.n_steps
    h = -grid.T / m
    h2, h6 = 0.5 * h, h / 6.0
    eta_p = np.empty(m + 1)
    r_p = np.empty(m + 1)
    s_p = np.empty(m + 1)
    eta, r, s = system.eta_T, float(r_T), float(s_T)
    eta_p[m], r_p[m], s_p[m] = eta, r, s
    for j in range(m, 0, -1):
        de1 = eta * eta - 1.0
        dr1 = eta * r
        ds1 = 0.5 * (r * r - sig2 * eta)
        e2, r2 = eta + h2 * de1, r + h2 * dr1
        de2 = e2 * e2 - 1.0
        dr2 = e2 * r2
        ds2 = 0.5 * (r2 * r2 - sig2 * e2)
        e3, r3 = eta + h2 * de2, r + h2 * dr2
        de3 = e3 * e3 - 1.0
        dr3 = e3 * r3
        ds3 = 0.5 * (r3 * r3 - sig2 * e3)
        e4, r4 = eta + h * de3, r + h * dr3
        de4 = e4 * e4 - 1.0
        dr4 = e4 * r4
        ds4 = 0.5 * (r4 * r4 - sig2 * e4)
        eta += h6 * (de1 + 2.0 * (de2 + de3) + de4)
        r += h6 * (dr1 + 2.0 * (dr2 + dr3) + dr4)
        s += h6 * (ds1 + 2.0 * (ds2 + ds3) + ds4)
        eta_p[j - 1], r_p[j - 1], s_p[j - 1] = eta, r, s
    return eta_p, r_p, s_p


def rk4_forward_linear(a_half: np.ndarray, b_half: np.ndarray, y0: float,
                       dt: float) -> np.ndarray:
    """Integrate y' = a(t) y + b(t) forward with RK4, coefficients sampled on
    the half grid (length 2n+1). Returns y on the full grid (length n+1)."""
    n = (len(a_half) - 1) // 2
    a = a_half.tolist()
    b = b_half.tolist()
    out = np.empty(n + 1)
    y = float(y0)
    out[0] = y
    dt2, dt6 = 0.5 * dt, dt / 6.0
    for kk in range(n):
        j = 2 * kk
        a0, am, a1 = a[j], a[j + 1], a[j + 2]
        b0, bm, b1 = b[j], b[j + 1], b[j + 2]
        k1 = a0 * y + b0
        k2 = am * (y + dt2 * k1) + bm
        k3 = am * (y + dt2 * k2) + bm
        k4 = a1 * (y + dt * k3) + b1
        y = y + dt6 * (k1 + 2.0 * (k2 + k3) + k4)
        out[kk + 1] = y
    return out


def _shoot(system: FbodeSystem, grid: TimeGrid, guess: float):
    """One shooting evaluation: integrate backward from terminal data built
    with the guessed terminal mean, then forward; return paths and the
    realized terminal mean."""
    r_T = system.r_a + system.r_b * guess
    s_T = system.s_c0 + system.s_c1 * guess + system.s_c2 * guess ** 2
    eta_h, r_h, s_h = _backward_sweep(system, r_T, s_T, grid)
    xbar = rk4_forward_linear(-eta_h, -r_h, system.x0, grid.dt)
    return eta_h, r_h, s_h, xbar, xbar[-1]


def realized_terminal_mean(system: FbodeSystem, grid: TimeGrid, guess: float) -> float:
    """Terminal mean realized by the shooting map for a guessed terminal mean.

    The map is affine in the guess; exposing it lets tests check collinearity
    of probe points directly.
    """
    return _shoot(system, grid, guess)[4]


def solve_numeric(system: FbodeSystem, grid: TimeGrid, tol: float = DEFAULT_TOL,
                  max_iter: int = DEFAULT_MAX_ITER) -> FbodeSolution:
    """Shooting solve of an arbitrary ansatz system.

    Two probe integrations identify the affine map guess -> realized
    terminal mean; its fixed point is computed exactly and polished until
    the shooting residual drops below ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if not math.isclose(grid.T, system.T, rel_tol=1e-12):
        raise GridMismatchError("grid horizon differs from the system horizon")

    f0 = realized_terminal_mean(system, grid, 0.0)
    f1 = realized_terminal_mean(system, grid, 1.0)
    slope = f1 - f0
    if abs(1.0 - slope) <= tol:
        raise SingularSystemError(
            f"shooting map has unit slope ({slope!r}); no isolated fixed point"
        )
    guess = f0 / (1.0 - slope)

    prev_guess, prev_realized = 0.0, f0
    prev_residual = math.inf
    residual = math.inf
    for _ in range(max_iter):
        eta_h, r_h, s_h, xbar, realized = _shoot(system, grid, guess)
        residual = abs(realized - guess)
        if residual <= tol:
            return FbodeSolution(
                grid=grid,
                eta=eta_h[::2].copy(),
                r=r_h[::2].copy(),
                s=s_h[::2].copy(),
                xbar=xbar,
                xbar_T=xbar[-1],
                method="numeric",
                eta_half=eta_h,
                r_half=r_h,
            )
        # the map is affine, so the residual must collapse immediately;
        # a stall means tol sits below the attainable rounding floor
        if residual >= 0.5 * prev_residual:
            raise NoConvergenceError(
                f"shooting residual stalled at {residual:.3e} above tol={tol}"
            )
        denom = guess - prev_guess
        if denom == 0.0:
            raise NoConvergenceError(
                f"shooting residual floor {residual:.3e} is above tol={tol}"
            )
        slope = (realized - prev_realized) / denom
        if abs(1.0 - slope) <= tol:
            raise SingularSystemError("shooting map has unit slope")
        prev_guess, prev_realized = guess, realized
        prev_residual = residual
        guess = (realized - slope * guess) / (1.0 - slope)
    raise NoConvergenceError(
        f"shooting did not reach tol={tol} in {max_iter} iterations "
        f"(last residual {residual:.3e})"
    )


def solve(system: FbodeSystem, grid: TimeGrid, tol: float = DEFAULT_TOL,
          max_iter: int = DEFAULT_MAX_ITER) -> FbodeSolution:
    """Closed form when available (eta_T = 1, sigma = 1), shooting otherwise."""
    if system.eta_T == 1.0 and system.sigma == 1.0:
        return solve_closed_form(system, grid)
    return solve_numeric(system, grid, tol=tol, max_iter=max_iter)
