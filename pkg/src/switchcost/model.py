"""Closed-form pieces of the linear Markov switching-cost duopoly.

Firm A's price and value functions are affine/quadratic in its share of
last period's customers ``sigma``::

    P(sigma)  = d + e * sigma
    pi(sigma) = k + l * sigma + m * sigma**2

Everything in this module is a pure function of its arguments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

CUTOFF_TOL = 1e-12


class ModelError(ValueError):
    """Invalid primitives or a singular closed-form expression."""


@dataclass(frozen=True)
class ModelParams:
    """Primitives of the duopoly.

    Attributes
    ----------
    delta_C, delta_F : float
        Consumer and firm discount factors, both in (0, 1).
    rho : float
        Probability a young consumer exits before becoming old.
    mu : float
        Probability a surviving consumer's taste position is redrawn.
    s : float
        Switching cost, in units of the (unit) differentiation cost.
    c : float
        Marginal cost.
    r : float or None
        Reservation value. ``None`` means "pick one that covers the market"
        once the steady-state price is known (see :func:`default_reservation`).
    """

    delta_C: float
    delta_F: float
    rho: float
    mu: float
    s: float
    c: float = 0.0
    r: float | None = None

    def __post_init__(self):
        checks = [
            (0.0 < self.delta_C < 1.0, "delta_C must lie in (0, 1)"),
            (0.0 < self.delta_F < 1.0, "delta_F must lie in (0, 1)"),
            (0.0 <= self.rho < 1.0, "rho must lie in [0, 1)"),
            (0.0 <= self.mu <= 1.0, "mu must lie in [0, 1]"),
            (self.s >= 0.0, "s must be nonnegative"),
            (self.c >= 0.0, "c must be nonnegative"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ModelError(f"{msg}: {self}")
        values = [self.delta_C, self.delta_F, self.rho, self.mu, self.s, self.c]
        if self.r is not None:
            values.append(self.r)
        if not all(math.isfinite(v) for v in values):
            raise ModelError(f"non-finite parameter: {self}")

    @property
    def survive(self) -> float:
        return 1.0 - self.rho

    @property
    def q(self) -> float:
        """Mass of relocated old consumers, mu * (1 - rho)."""
        return self.mu * (1.0 - self.rho)

    @property
    def loyal(self) -> float:
        """Mass of non-relocated old consumers, (1 - mu) * (1 - rho)."""
        return (1.0 - self.mu) * (1.0 - self.rho)

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class PolicyCoefficients:
    d: float
    e: float


@dataclass(frozen=True)
class ValueCoefficients:
    k: float
    l: float
    m: float


@dataclass(frozen=True)
class DynamicsCoefficients:
    b: float
    eta: float
    theta: float


@dataclass(frozen=True)
class Diagnostics:
    bellman_max: float
    foc: float
    soc: float
    lock_in: bool
    lock_in_path: bool
    coverage: bool
    young_rationality: bool
    cutoffs_interior: bool
    profit: float

    @property
    def valid(self) -> bool:
        return (
            self.soc < 0
            and self.lock_in
            and self.coverage
            and self.young_rationality
            and self.cutoffs_interior
        )


@dataclass(frozen=True)
class Equilibrium:
    params: ModelParams
    policy: PolicyCoefficients
    value: ValueCoefficients
    dynamics: DynamicsCoefficients
    diagnostics: Diagnostics | None = field(default=None, compare=False)

    @property
    def stable(self) -> bool:
        return abs(self.dynamics.theta) <= 1.0

    @property
    def markup(self) -> float:
        return steady_state_markup(self)

    @property
    def reservation(self) -> float:
        if self.params.r is not None:
            return self.params.r
        return default_reservation(self)


class Cutoffs(NamedTuple):
    x_A: float
    x_AB: float
    x_BA: float

    @property
    def inside(self) -> bool:
        return all(-CUTOFF_TOL <= x <= 1.0 + CUTOFF_TOL for x in self)


@dataclass(frozen=True)
class CohortDemand:
    x_A: float
    x_AB: float
    x_BA: float
    young: float
    relocated_from_A: float
    relocated_from_B: float
    loyal_A: float
    loyal_B: float

    @property
    def total(self) -> float:
        return (
            self.young
            + self.relocated_from_A
            + self.relocated_from_B
            + self.loyal_A
            + self.loyal_B
        )

    @property
    def nonnegative(self) -> bool:
        return min(
            self.young,
            self.relocated_from_A,
            self.relocated_from_B,
            self.loyal_A,
            self.loyal_B,
        ) >= -CUTOFF_TOL

    @property
    def cutoffs_inside(self) -> bool:
        return Cutoffs(self.x_A, self.x_AB, self.x_BA).inside


def _check_share(sigma: float) -> None:
    if not 0.0 <= sigma <= 1.0:
        raise ModelError(f"share must lie in [0, 1], got {sigma}")


def evaluate_policy(eq: Equilibrium, sigma: float) -> tuple[float, float]:
    """Return ``(price, value)`` of firm A at own prior share ``sigma``."""
    _check_share(sigma)
    d, e = eq.policy.d, eq.policy.e
    v = eq.value
    return d + e * sigma, v.k + v.l * sigma + v.m * sigma**2


def young_slope(e: float, params: ModelParams) -> float:
    """Slope b of the young cutoff ``x_A = 1/2 + b (P_B - P_A)``."""
    p = params
    inner = 1.0 - p.mu + p.mu * p.s * e + (1.0 - p.mu) * e
    denom = 2.0 * (1.0 + p.delta_C * p.survive * inner)
    if denom == 0.0 or not math.isfinite(denom):
        raise ModelError(f"singular young-demand slope at e={e}")
    return 1.0 / denom


def dynamics_coefficients(e: float, params: ModelParams) -> DynamicsCoefficients:
    b = young_slope(e, params)
    return DynamicsCoefficients(b=b, eta=0.5 + b * e, theta=2.0 * b * e)


def demand_cutoffs(
    eq: Equilibrium,
    sigma_A: float,
    P_A: float | None = None,
    P_B: float | None = None,
) -> Cutoffs:
    """Young and relocated-old indifference positions.

    With prices omitted they follow the equilibrium policy, in which case
    ``P_B - P_A = e (1 - 2 sigma_A)``. Values outside [0, 1] are returned
    as-is; check ``.inside``.
    """
    _check_share(sigma_A)
    if P_A is None:
        P_A = eq.policy.d + eq.policy.e * sigma_A
    if P_B is None:
        P_B = eq.policy.d + eq.policy.e * (1.0 - sigma_A)
    gap = P_B - P_A
    s = eq.params.s
    return Cutoffs(
        x_A=0.5 + eq.dynamics.b * gap,
        x_AB=(gap + 1.0 + s) / 2.0,
        x_BA=(gap + 1.0 - s) / 2.0,
    )


def cohort_demand(sigma_A: float, eq: Equilibrium) -> CohortDemand:
    """Firm A's demand from the five consumer cohorts along the equilibrium."""
    p = eq.params
    x = demand_cutoffs(eq, sigma_A)
    return CohortDemand(
        x_A=x.x_A,
        x_AB=x.x_AB,
        x_BA=x.x_BA,
        young=x.x_A,
        relocated_from_A=p.q * sigma_A * x.x_AB,
        relocated_from_B=p.q * (1.0 - sigma_A) * x.x_BA,
        loyal_A=p.loyal * sigma_A,
        loyal_B=0.0,
    )


def _demand_terms(e: float, theta: float, eta: float, params: ModelParams):
    """Intercept and slope of A's equilibrium demand as a function of sigma."""
    p = params
    level = eta + p.q * (1.0 - p.s + e) / 2.0
    slope = -theta + p.q * (p.s - e) + p.loyal
    return level, slope


def m_from(e: float, theta: float, params: ModelParams) -> float:
    """Quadratic value coefficient implied by the sigma**2 Bellman match."""
    denom = 1.0 - params.delta_F * theta**2
    if denom == 0.0:
        raise ModelError(f"theta**2 == 1/delta_F at theta={theta}")
    _, slope = _demand_terms(e, theta, 0.0, params)
    return e * slope / denom


def l_from(d: float, e: float, m: float, dyn: DynamicsCoefficients,
           params: ModelParams) -> float:
    p = params
    level, slope = _demand_terms(e, dyn.theta, dyn.eta, p)
    num = (d - p.c) * slope + e * level - 2.0 * p.delta_F * m * dyn.eta * dyn.theta
    denom = 1.0 + p.delta_F * dyn.theta
    if denom == 0.0:
        raise ModelError("1 + delta_F * theta == 0")
    return num / denom


def d_from(e: float, l: float, m: float, dyn: DynamicsCoefficients,
           params: ModelParams) -> float:
    p = params
    level, _ = _demand_terms(e, dyn.theta, dyn.eta, p)
    num = level - p.delta_F * dyn.b * (l + 2.0 * m * dyn.eta)
    return p.c + num / (dyn.b + p.q / 2.0)


def k_from(d: float, l: float, m: float, e: float, dyn: DynamicsCoefficients,
           params: ModelParams) -> float:
    p = params
    level, _ = _demand_terms(e, dyn.theta, dyn.eta, p)
    cont = l * dyn.eta + m * dyn.eta**2
    return ((d - p.c) * level + p.delta_F * cont) / (1.0 - p.delta_F)


def bellman_residuals(eq: Equilibrium) -> tuple[float, float, float]:
    """Right-hand side minus left-hand side of the three coefficient matches.

    The sigma-coefficient carries the continuation term
    ``delta_F * (-l theta - 2 m eta theta)`` obtained by expanding
    ``pi(eta - theta sigma)``.
    """
    p = eq.params
    d, e = eq.policy.d, eq.policy.e
    k, l, m = eq.value.k, eq.value.l, eq.value.m
    eta, theta = eq.dynamics.eta, eq.dynamics.theta
    level, slope = _demand_terms(e, theta, eta, p)
    res_k = (d - p.c) * level + p.delta_F * (k + l * eta + m * eta**2) - k
    res_l = (
        (d - p.c) * slope
        + e * level
        + p.delta_F * (-l * theta - 2.0 * m * eta * theta)
        - l
    )
    res_m = e * slope + p.delta_F * m * theta**2 - m
    return res_k, res_l, res_m


def optimality_diagnostics(eq: Equilibrium, sigma: float = 0.5) -> tuple[float, float]:
    """First-order residual and second-order value of A's pricing problem."""
    _check_share(sigma)
    p = eq.params
    d, e = eq.policy.d, eq.policy.e
    b, eta, theta = eq.dynamics.b, eq.dynamics.eta, eq.dynamics.theta
    l, m = eq.value.l, eq.value.m
    price = d + e * sigma
    young = eta - theta * sigma
    old = p.q * (sigma * p.s + (1.0 - p.s + e) / 2.0 - e * sigma) + p.loyal * sigma
    foc = (
        (price - p.c) * (-b - p.q / 2.0)
        + young
        + old
        - p.delta_F * (l + 2.0 * m * young) * b
    )
    soc = 2.0 * (-b - p.q / 2.0) + 2.0 * p.delta_F * m * b**2
    return foc, soc


def steady_state_markup(eq: Equilibrium) -> float:
    return eq.policy.d + eq.policy.e / 2.0 - eq.params.c


def steady_state_profit(eq: Equilibrium) -> float:
    v = eq.value
    return v.k + v.l / 2.0 + v.m / 4.0


def default_reservation(eq: Equilibrium) -> float:
    """Steady-state price plus the worst travel cost, the switching cost and one unit of slack."""
    price = eq.policy.d + eq.policy.e / 2.0
    return price + 1.0 + eq.params.s + 1.0


def _relocated_attached_cost(gap: float, s: float) -> float:
    """Expected travel+switching cost of a relocated old A-customer.

    ``gap`` is P_B - P_A; prices themselves are excluded except through the
    cutoff, and the switching branch is charged ``gap`` relative to A.
    """
    a = min(max((gap + 1.0 + s) / 2.0, 0.0), 1.0)
    # stay with A on [0, a], switch to B on [a, 1] paying gap + s + (1 - z)
    return a**2 / 2.0 + (1.0 - a) * (gap + s + 1.0) - (1.0 - a**2) / 2.0


def validity_checks(eq: Equilibrium) -> dict[str, bool]:
    """Lock-in, coverage, young rationality and cutoff-range flags.

    ``lock_in`` is evaluated at the symmetric steady state. ``lock_in_path``
    additionally requires it over the whole set of shares reachable in one
    step, ``[eta - theta, eta]``, and is reported but not required.
    """
    p = eq.params
    r = eq.reservation
    price = eq.policy.d + eq.policy.e / 2.0

    def locked(sigma: float) -> bool:
        x = demand_cutoffs(eq, sigma)
        return x.x_BA - CUTOFF_TOL <= sigma <= x.x_AB + CUTOFF_TOL

    eta, theta = eq.dynamics.eta, eq.dynamics.theta
    lo, hi = sorted((eta - theta, eta))
    path_points = [sg for sg in (lo, hi, 0.5) if 0.0 <= sg <= 1.0]
    lock_in = locked(0.5)
    lock_in_path = lock_in and all(locked(sg) for sg in path_points)

    coverage = r - price - 1.0 >= 0.0

    # marginal young consumer at 1/2: buy now vs wait and buy unattached when old
    attached = _relocated_attached_cost(0.0, p.s)
    unattached = 0.25
    buy_now = (r - price - 0.5) - p.delta_C * p.q * (attached - unattached)
    young_rationality = buy_now >= 0.0

    cutoffs_interior = demand_cutoffs(eq, 0.5).inside
    return {
        "lock_in": lock_in,
        "lock_in_path": lock_in_path,
        "coverage": coverage,
        "young_rationality": young_rationality,
        "cutoffs_interior": cutoffs_interior,
    }


def diagnose(eq: Equilibrium) -> Equilibrium:
    """Return ``eq`` with every diagnostic populated."""
    res = bellman_residuals(eq)
    foc, soc = optimality_diagnostics(eq, 0.5)
    flags = validity_checks(eq)
    diag = Diagnostics(
        bellman_max=max(abs(x) for x in res),
        foc=foc,
        soc=soc,
        profit=steady_state_profit(eq),
        **flags,
    )
    return replace(eq, diagnostics=diag)
