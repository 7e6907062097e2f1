import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from switchcost.model import ModelParams
from switchcost.oracle import solve_oracle
from switchcost.solver import (
    DEDUPE_TOL,
    CompleteLockIn,
    DegenerateCase,
    NoEquilibrium,
    build_equilibrium,
    find_candidates,
    lattice_candidates,
    residual_system,
    simulate_path,
    solve,
    solve_equilibrium,
    theta_polynomial,
)

grid_params = st.builds(
    ModelParams,
    delta_C=st.sampled_from([0.3, 0.5, 0.7]),
    delta_F=st.sampled_from([0.3, 0.5, 0.7]),
    rho=st.sampled_from([0.0, 0.2, 0.4, 0.6, 0.8]),
    mu=st.sampled_from([0.1 * k for k in range(1, 10)]),
    s=st.sampled_from([0.1 * k for k in range(11)]),
)
hull_params = st.builds(
    ModelParams,
    delta_C=st.floats(0.3, 0.7), delta_F=st.floats(0.3, 0.7), rho=st.floats(0.0, 0.8),
    mu=st.floats(0.1, 0.9), s=st.floats(0.0, 1.0),
)


def test_base_point(base_params):
    report = solve(base_params)
    assert report.ok
    assert 1 <= len(report.candidates) <= 6
    assert report.n_stable >= 1
    eq = report.accepted
    assert eq.policy.e > 0 and 0 < eq.dynamics.theta <= 1
    assert max(map(abs, residual_system(eq.policy.e, eq.dynamics.theta, base_params))) < 1e-10


def test_degenerate_and_lock_in(base_params):
    with pytest.raises(DegenerateCase):
        solve(base_params.with_(mu=0.0))
    report = solve(base_params.with_(s=1.2))
    assert not report.ok and "complete lock-in" in report.failure
    with pytest.raises(NoEquilibrium):
        solve_equilibrium(base_params.with_(s=1.2))
    assert issubclass(CompleteLockIn, ValueError)


def test_zero_policy_not_a_root(base_params):
    assert abs(residual_system(0.0, 0.0, base_params)[0]) > 0


def test_theta_perturbation_breaks_r2(base_eq, base_params):
    e, th = base_eq.policy.e, base_eq.dynamics.theta
    assert abs(residual_system(e, th + 1e-3, base_params)[1]) > 1e-4


def test_polynomial_degree_at_most_four(base_params):
    assert len(np.trim_zeros(theta_polynomial(base_params), "b")) - 1 <= 4


def test_cost_shift(base_params):
    a = solve_equilibrium(base_params)
    b = solve_equilibrium(base_params.with_(c=0.5))
    assert b.policy.e == pytest.approx(a.policy.e, abs=1e-12)
    assert b.dynamics.theta == pytest.approx(a.dynamics.theta, abs=1e-12)
    assert b.markup == pytest.approx(a.markup, abs=1e-12)
    assert b.policy.d - a.policy.d == pytest.approx(0.5, abs=1e-12)


def test_unstable_root_is_built_and_flagged(base_params):
    roots = find_candidates(base_params)
    for r in roots:
        eq = build_equilibrium(r, base_params)
        assert eq.stable == (abs(r.theta) <= 1)
    report = solve(base_params)
    for c in report.candidates:
        if c.equilibrium is not None and not c.equilibrium.stable:
            assert c.status == "rejected-unstable"


@pytest.mark.slow
def test_markups_ordered_in_s_as_oracle(base_params):
    lin = [solve_equilibrium(base_params.with_(s=s)).markup for s in (0.1, 0.3)]
    orc = [solve_oracle(base_params.with_(s=s)).markup(0.0) for s in (0.1, 0.3)]
    assert lin[1] < lin[0]
    assert np.sign(orc[1] - orc[0]) == np.sign(lin[1] - lin[0])


@settings(max_examples=100, deadline=None)
@given(hull_params)
def test_roots_complete_and_distinct(p):
    roots = find_candidates(p)
    assert len(roots) <= 6
    for r in roots:
        assert r.max_residual < 1e-10
    for i, a in enumerate(roots):
        for b in roots[i + 1:]:
            assert max(abs(a.e - b.e), abs(a.theta - b.theta)) > DEDUPE_TOL
    # a dense independent search finds nothing new
    for extra in lattice_candidates(p, n=16):
        assert any(abs(extra.e - r.e) < 1e-6 and abs(extra.theta - r.theta) < 1e-6
                   for r in roots)


@settings(max_examples=60, deadline=None)
@given(grid_params)
def test_accepted_equilibria_are_valid(p):
    report = solve(p)
    if not report.ok:
        return
    eq = report.accepted
    d = eq.diagnostics
    assert d.bellman_max < 1e-8 and abs(d.foc) < 1e-8 and d.soc < 0
    assert eq.policy.e > 0 and 0 < eq.dynamics.theta <= 1


def test_simulate_fixed_point(base_eq):
    assert all(sig == 0.5 for sig, _ in simulate_path(base_eq, 0.5, 5))


def test_simulate_oscillates(base_eq):
    theta = base_eq.dynamics.theta
    path = simulate_path(base_eq, 0.7, 8)
    for t, (sig, price) in enumerate(path):
        assert abs(sig - 0.5) == pytest.approx(0.2 * theta**t, abs=1e-15)
        assert np.sign(sig - 0.5) == (-1) ** t
        assert price == pytest.approx(base_eq.policy.d + base_eq.policy.e * sig)
    eta = base_eq.dynamics.eta
    for (a, _), (b, _) in zip(path, path[1:]):
        assert b == pytest.approx(eta - theta * a, abs=1e-14)
