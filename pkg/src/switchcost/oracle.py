"""Discretized value-function-iteration check of the linear equilibrium.

Nothing here uses the linear-policy algebra. Shares live on a uniform grid,
policies and values are linearly interpolated, each state's price is a
golden-section best response to the rival's current policy, and the young
consumer's cutoff is found by bisection on the full indifference condition
with next-period prices read off the current policy iterate. Both firms use
the same (symmetric) policy; iteration stops at a joint fixed point.

Pointwise best responses are projected onto a low-degree polynomial in the
share before being fed back. Raw grid iterates develop kinks that give the
young consumer's indifference condition several roots, and undamped slope
updates overshoot by a factor of about two, so the projection and damping
are what make the iteration contract. A cubic still leaves room for curvature,
so linearity is not imposed.

Grid size and interpolation are harness constants, not model behavior.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelParams

N_STATES = 201
GOLDEN_ITERS = 45
BISECT_ITERS = 40
PROJECTION_DEGREE = 3
BRACKET_WIDTH = 0.5
_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass
class OracleResult:
    grid: np.ndarray
    price: np.ndarray
    value: np.ndarray
    iterations: int
    converged: bool
    max_change: float

    def price_at(self, sigma) -> np.ndarray:
        return np.interp(sigma, self.grid, self.price)

    def markup(self, c: float) -> float:
        return float(self.price_at(0.5)) - c


def _relocated_cost(K, s, attached_to_A: bool):
    """Expected old-period cost of a relocated consumer, relative to paying P_A'.

    Integrates the cheaper of staying and switching over a uniform new
    position, splitting at the indifference point. The split point is not
    clipped to [0, 1], matching the linear demand system.
    """
    if attached_to_A:
        a = K / 2.0  # stay: z, switch: K - z
        return a**2 / 2.0 + K * (1.0 - a) - (1.0 - a**2) / 2.0
    c = (K - s) / 2.0  # switch to A: s + z, stay with B: K - z
    return s * c + c**2 / 2.0 + K * (1.0 - c) - (1.0 - c**2) / 2.0


def _young_gain(x, P_A, P_B, policy, grid, p: ModelParams):
    """Utility from buying A minus buying B for a young consumer at ``x``."""
    fut_A = np.interp(x, grid, policy)
    fut_B = np.interp(1.0 - x, grid, policy)
    gap = fut_B - fut_A  # next-period P_B' - P_A'
    # old-period costs measured relative to paying P_A'
    cost_if_A = _relocated_cost(gap + p.s + 1.0, p.s, True)
    cost_if_B = _relocated_cost(gap + 1.0, p.s, False)
    # unrelocated consumers repurchase from the same firm
    loyal_if_A = x
    loyal_if_B = gap + 1.0 - x
    future = p.mu * (cost_if_B - cost_if_A) + (1.0 - p.mu) * (loyal_if_B - loyal_if_A)
    return (P_B - P_A) + (1.0 - 2.0 * x) + p.delta_C * p.survive * future


def young_cutoff(P_A, P_B, policy, grid, p: ModelParams):
    lo = np.zeros_like(P_A)
    hi = np.ones_like(P_A)
    f_lo = _young_gain(lo, P_A, P_B, policy, grid, p)
    f_hi = _young_gain(hi, P_A, P_B, policy, grid, p)
    for _ in range(BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        f_mid = _young_gain(mid, P_A, P_B, policy, grid, p)
        right = f_mid > 0.0
        lo = np.where(right, mid, lo)
        hi = np.where(right, hi, mid)
    x = 0.5 * (lo + hi)
    x = np.where(f_lo <= 0.0, 0.0, x)
    return np.where(f_hi >= 0.0, 1.0, x)


def _objective(P_A, P_B, sigma, policy, value, grid, p: ModelParams):
    x_A = young_cutoff(P_A, P_B, policy, grid, p)
    gap = P_B - P_A
    x_AB = (gap + 1.0 + p.s) / 2.0
    x_BA = (gap + 1.0 - p.s) / 2.0
    demand = x_A + p.q * (sigma * x_AB + (1.0 - sigma) * x_BA) + p.loyal * sigma
    return (P_A - p.c) * demand + p.delta_F * np.interp(x_A, grid, value)


def best_response(policy, value, grid, p: ModelParams, width: float = BRACKET_WIDTH):
    """Golden-section best response at every state, bracketed around the current price."""
    sigma = grid
    P_B = np.interp(1.0 - sigma, grid, policy)
    a = policy - width
    b = policy + width
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc = _objective(c, P_B, sigma, policy, value, grid, p)
    fd = _objective(d, P_B, sigma, policy, value, grid, p)
    for _ in range(GOLDEN_ITERS):
        left = fc > fd
        # left: keep [a, d], old c becomes new d; else keep [c, b], old d becomes new c
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        keep = np.where(left, c, d)
        keep_f = np.where(left, fc, fd)
        probe = np.where(left, b - _INVPHI * (b - a), a + _INVPHI * (b - a))
        probe_f = _objective(probe, P_B, sigma, policy, value, grid, p)
        c = np.where(left, probe, keep)
        fc = np.where(left, probe_f, keep_f)
        d = np.where(left, keep, probe)
        fd = np.where(left, keep_f, probe_f)
    price = 0.5 * (a + b)
    return price, _objective(price, P_B, sigma, policy, value, grid, p)


def solve_oracle(params: ModelParams, n_states: int = N_STATES, tol: float = 1e-5,
                 max_iter: int = 300, damping: float = 0.5,
                 degree: int = PROJECTION_DEGREE) -> OracleResult:
    """Iterate both firms' policies and values to a joint fixed point.

    ``tol`` bounds the sup-norm change of price and value between sweeps. The
    inner searches have a noise floor near 1e-6, so tighter tolerances will
    not be met.
    """
    poly = np.polynomial.polynomial
    grid = np.linspace(0.0, 1.0, n_states)
    policy = np.full(n_states, params.c + 1.0)
    value = np.zeros(n_states)
    change = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        raw, new_value = best_response(policy, value, grid, params)
        new_policy = poly.polyval(grid, poly.polyfit(grid, raw, degree))
        change = max(np.max(np.abs(new_policy - policy)), np.max(np.abs(new_value - value)))
        policy = damping * new_policy + (1.0 - damping) * policy
        value = new_value
        if change < tol:
            break
    return OracleResult(grid, policy, value, it, bool(change < tol), float(change))
