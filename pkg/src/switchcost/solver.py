"""Enumerate and select linear Markov equilibria.

The two defining conditions are the sigma-slope match of the optimal price
(``R1``) and the share-transition slope ``theta = 2 b(e) e`` (``R2``).
Because ``b(e) * e = theta / 2`` on ``R2``, eliminating ``e`` through

    e = theta (1 + a0) / (1 - a1 theta),
    a0 = delta_C (1 - rho)(1 - mu),  a1 = delta_C (1 - rho)(mu s + 1 - mu)

turns ``R1 * (1 - delta_F theta**2) * (1 - a1 theta)`` into a quartic in
``theta``. Its real roots are polished by Newton on the original pair and
back-substituted before being reported.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from numpy.polynomial import polynomial as P

from .model import (
    Equilibrium,
    ModelError,
    ModelParams,
    PolicyCoefficients,
    ValueCoefficients,
    d_from,
    diagnose,
    dynamics_coefficients,
    k_from,
    l_from,
    m_from,
    steady_state_markup,
    young_slope,
)

ROOT_TOL = 1e-10
DEDUPE_TOL = 1e-8
TIE_TOL = 1e-10
MAX_ROOTS = 6


class DegenerateCase(ModelError):
    """mu == 0: switching costs drop out and the system is not enumerated."""


class CompleteLockIn(ModelError):
    """s > 1: relocated cutoffs leave [0, 1]; corner demand is not modeled."""


class NoEquilibrium(RuntimeError):
    """No stable candidate passed the validity checks."""

    def __init__(self, report: "SolveReport"):
        self.report = report
        super().__init__(report.failure or "no stable valid equilibrium")


@dataclass(frozen=True)
class CandidateRoot:
    e: float
    theta: float
    branch: int
    residuals: tuple[float, float]

    @property
    def max_residual(self) -> float:
        return max(abs(r) for r in self.residuals)


@dataclass
class Candidate:
    root: CandidateRoot
    equilibrium: Equilibrium | None
    status: str  # accepted | rejected-unstable | rejected-invalid | rejected-build | candidate

    @property
    def reason(self) -> str:
        return self.status


@dataclass
class SolveReport:
    params: ModelParams
    candidates: list[Candidate] = field(default_factory=list)
    accepted: Equilibrium | None = None
    failure: str | None = None

    @property
    def n_stable(self) -> int:
        return sum(
            1 for c in self.candidates
            if c.equilibrium is not None and c.equilibrium.stable
        )

    @property
    def ok(self) -> bool:
        return self.accepted is not None


def residual_system(e: float, theta: float, params: ModelParams) -> tuple[float, float]:
    """``(R1, R2)``; both vanish exactly at an equilibrium slope pair."""
    p = params
    b = young_slope(e, p)
    m = m_from(e, theta, p)
    slope = -theta + p.q * (p.s - e) + p.loyal
    r1 = e * (b + p.q / 2.0) - (slope + 2.0 * p.delta_F * m * theta * b)
    r2 = theta - 2.0 * b * e
    return r1, r2


def _elimination_constants(p: ModelParams) -> tuple[float, float]:
    a0 = p.delta_C * p.survive * (1.0 - p.mu)
    a1 = p.delta_C * p.survive * (p.mu * p.s + 1.0 - p.mu)
    return a0, a1


def e_of_theta(theta: float, params: ModelParams) -> float:
    a0, a1 = _elimination_constants(params)
    denom = 1.0 - a1 * theta
    if denom == 0.0:
        raise ModelError("a1 * theta == 1")
    return theta * (1.0 + a0) / denom


def theta_polynomial(params: ModelParams) -> np.ndarray:
    """Coefficients (ascending powers) of the quartic whose roots are the theta candidates."""
    p = params
    a0, a1 = _elimination_constants(p)
    q = p.q
    # theta (1 - a1 theta) + q theta (1 + a0)
    lin = np.array([0.0, 1.0 + q * (1.0 + a0), -a1])
    disc = np.array([1.0, 0.0, -p.delta_F])
    first = P.polymul(lin, disc) / 2.0
    # (theta - q s - loyal)(1 - a1 theta) + q theta (1 + a0)
    second = P.polymul(np.array([-q * p.s - p.loyal, 1.0]), np.array([1.0, -a1]))
    second = P.polyadd(second, np.array([0.0, q * (1.0 + a0)]))
    return P.polyadd(first, second)


def _newton_polish(e: float, theta: float, params: ModelParams,
                   iters: int = 50) -> tuple[float, float]:
    x = np.array([e, theta], dtype=float)
    for _ in range(iters):
        f = np.array(residual_system(x[0], x[1], params))
        if np.max(np.abs(f)) < 1e-15:
            break
        J = np.empty((2, 2))
        for j in range(2):
            h = 1e-7 * max(1.0, abs(x[j]))
            xp, xm = x.copy(), x.copy()
            xp[j] += h
            xm[j] -= h
            J[:, j] = (np.array(residual_system(*xp, params))
                       - np.array(residual_system(*xm, params))) / (2 * h)
        try:
            step = np.linalg.solve(J, f)
        except np.linalg.LinAlgError:
            break
        x = x - step
        if np.max(np.abs(step)) < 1e-16 * max(1.0, np.max(np.abs(x))):
            break
    return float(x[0]), float(x[1])


def _dedupe(roots: Iterable[CandidateRoot]) -> list[CandidateRoot]:
    kept: list[CandidateRoot] = []
    for r in sorted(roots, key=lambda r: (r.theta, r.e)):
        if any(abs(r.theta - k.theta) < DEDUPE_TOL and abs(r.e - k.e) < DEDUPE_TOL
               for k in kept):
            continue
        kept.append(r)
    return kept


def _require_nondegenerate(params: ModelParams) -> None:
    if params.mu == 0.0:
        raise DegenerateCase(
            "mu = 0 is the degenerate no-relocation case; s does not affect prices"
        )


def find_candidates(params: ModelParams) -> list[CandidateRoot]:
    """Every real ``(e, theta)`` root of :func:`residual_system`.

    Returned sorted by ``(theta, e)``; may be empty.
    """
    _require_nondegenerate(params)
    coeffs = np.trim_zeros(theta_polynomial(params), "b")
    raw = np.roots(coeffs[::-1]) if len(coeffs) > 1 else np.array([])
    roots = []
    for branch, z in enumerate(sorted(raw, key=lambda z: (z.real, z.imag))):
        if abs(z.imag) > 1e-7 * max(1.0, abs(z)):
            continue
        theta0 = float(z.real)
        try:
            e0 = e_of_theta(theta0, params)
            e, theta = _newton_polish(e0, theta0, params)
            res = residual_system(e, theta, params)
        except (ModelError, ZeroDivisionError, FloatingPointError):
            continue
        if not all(math.isfinite(x) for x in (e, theta, *res)):
            continue
        cand = CandidateRoot(e=e, theta=theta, branch=branch, residuals=res)
        if cand.max_residual < ROOT_TOL:
            roots.append(cand)
    roots = _dedupe(roots)
    assert len(roots) <= MAX_ROOTS, f"root count audit failed: {len(roots)}"
    return roots


def lattice_candidates(params: ModelParams, n: int = 50,
                       e_range=(-2.0, 2.0), theta_range=(-1.5, 1.5)) -> list[CandidateRoot]:
    """Roots from damped Newton started on an ``n x n`` lattice.

    Independent of the polynomial elimination; used to audit completeness.
    """
    _require_nondegenerate(params)
    found = []
    for e0 in np.linspace(*e_range, n):
        for t0 in np.linspace(*theta_range, n):
            x = np.array([e0, t0])
            ok = False
            for _ in range(80):
                try:
                    f = np.array(residual_system(x[0], x[1], params))
                except ModelError:
                    break
                if not np.all(np.isfinite(f)):
                    break
                if np.max(np.abs(f)) < 1e-13:
                    ok = True
                    break
                J = np.empty((2, 2))
                try:
                    for j in range(2):
                        h = 1e-7
                        xp, xm = x.copy(), x.copy()
                        xp[j] += h
                        xm[j] -= h
                        J[:, j] = (np.array(residual_system(*xp, params))
                                   - np.array(residual_system(*xm, params))) / (2 * h)
                    step = np.linalg.solve(J, f)
                except (ModelError, np.linalg.LinAlgError):
                    break
                lam = 1.0
                norm0 = np.max(np.abs(f))
                while lam > 1e-4:
                    trial = x - lam * step
                    try:
                        ft = np.array(residual_system(*trial, params))
                    except ModelError:
                        ft = np.array([np.inf, np.inf])
                    if np.all(np.isfinite(ft)) and np.max(np.abs(ft)) < norm0:
                        break
                    lam /= 2.0
                x = x - lam * step
                if np.max(np.abs(x)) > 1e6:
                    break
            if ok:
                e, theta = _newton_polish(x[0], x[1], params)
                res = residual_system(e, theta, params)
                found.append(CandidateRoot(e, theta, -1, res))
    return _dedupe(r for r in found if r.max_residual < ROOT_TOL)


def build_equilibrium(root: CandidateRoot, params: ModelParams) -> Equilibrium:
    """Recover ``b, eta, m, l, d, k`` in that order and attach diagnostics."""
    e, theta = root.e, root.theta
    dyn = dynamics_coefficients(e, params)
    # theta from the root, not recomputed, so the stored pair is the solved one
    dyn = type(dyn)(b=dyn.b, eta=dyn.eta, theta=theta)
    m = m_from(e, theta, params)
    # l and d are jointly linear: l depends on d - c, d on l
    b, eta = dyn.b, dyn.eta
    p = params
    level = eta + p.q * (1.0 - p.s + e) / 2.0
    slope = -theta + p.q * (p.s - e) + p.loyal
    A = 1.0 + p.delta_F * theta
    B = b + p.q / 2.0
    # (d - c) = (level - dF b (l + 2 m eta)) / B
    # l A = (d - c) slope + e level - 2 dF m eta theta
    lhs = A + slope * p.delta_F * b / B
    rhs = slope * (level - 2.0 * p.delta_F * b * m * eta) / B + e * level \
        - 2.0 * p.delta_F * m * eta * theta
    if lhs == 0.0:
        raise ModelError("singular (l, d) system")
    l = rhs / lhs
    d = d_from(e, l, m, dyn, p)
    # one refinement against the closed form for l
    l = l_from(d, e, m, dyn, p)
    d = d_from(e, l, m, dyn, p)
    k = k_from(d, l, m, e, dyn, p)
    eq = Equilibrium(
        params=p,
        policy=PolicyCoefficients(d=d, e=e),
        value=ValueCoefficients(k=k, l=l, m=m),
        dynamics=dyn,
    )
    return diagnose(eq)


def solve(params: ModelParams) -> SolveReport:
    """Profit-maximal stable valid equilibrium, plus every rejected candidate."""
    _require_nondegenerate(params)
    report = SolveReport(params=params)
    if params.s > 1.0 + 1e-12:
        report.failure = "complete lock-in regime (s > 1)"
        return report
    roots = find_candidates(params)
    if not roots:
        report.failure = "no real roots"
        return report
    for root in roots:
        try:
            eq = build_equilibrium(root, params)
        except ModelError:
            report.candidates.append(Candidate(root, None, "rejected-build"))
            continue
        if not eq.stable:
            status = "rejected-unstable"
        elif not eq.diagnostics.valid:
            status = "rejected-invalid"
        else:
            status = "candidate"
        report.candidates.append(Candidate(root, eq, status))

    pool = [c for c in report.candidates if c.status == "candidate"]
    if not pool:
        report.failure = "no stable valid candidate"
        return report
    best_profit = max(c.equilibrium.diagnostics.profit for c in pool)
    top = [c for c in pool if c.equilibrium.diagnostics.profit >= best_profit - TIE_TOL]
    # ties go to the positive-theta branch
    best = max(top, key=lambda c: (c.root.theta > 0, c.equilibrium.diagnostics.profit))
    for c in pool:
        c.status = "accepted" if c is best else "rejected-dominated"
    report.accepted = best.equilibrium
    return report


def solve_equilibrium(params: ModelParams) -> Equilibrium:
    report = solve(params)
    if report.accepted is None:
        raise NoEquilibrium(report)
    return report.accepted


def steady_state_markup_of(params: ModelParams) -> float:
    return steady_state_markup(solve_equilibrium(params))


def simulate_path(eq: Equilibrium, sigma0: float, T: int) -> list[tuple[float, float]]:
    """Shares and prices for periods ``0..T`` from ``sigma0``.

    Uses ``sigma_t = 1/2 + (-theta)**t (sigma0 - 1/2)``, which is the
    transition ``sigma' = eta - theta sigma`` unrolled (``eta - theta/2 = 1/2``).
    """
    if not 0.0 <= sigma0 <= 1.0:
        raise ModelError(f"sigma0 must lie in [0, 1], got {sigma0}")
    if T < 0:
        raise ValueError("T must be nonnegative")
    theta = eq.dynamics.theta
    d, e = eq.policy.d, eq.policy.e
    # closed form of sigma' = eta - theta sigma around its fixed point 1/2
    path = []
    for t in range(T + 1):
        sigma = 0.5 + (-theta) ** t * (sigma0 - 0.5)
        path.append((sigma, d + e * sigma))
    return path
