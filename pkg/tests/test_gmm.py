import numpy as np
import pytest
from hypothesis import given, strategies as st

from switchcost.gmm import (
    DEFAULT_INSTRUMENTS,
    PARAM_NAMES,
    EstimationConfig,
    EstimationError,
    StructuralParams,
    aggregate_share,
    counterfactual_margins,
    estimate,
    forward_b,
    horizon_weights,
    instrument_matrix,
    instrument_rank_ok,
    pct_change,
    predicted_price,
    recover_sigma,
    residuals,
    retention_rates,
    stack_moments,
    switching_cost,
    tport_margin_effect,
)
from switchcost.synth import NoiseSpec, synthesize_dataset

def obs(**kw):
    base = dict(h=np.array([1.0]), vremot=np.array([0.0]), dremot=np.array([0.0]),
                iremot=np.array([0.0]), tport=np.array([0.0]), tfrac=np.array([0.0]),
                dport=np.array([0.0]), sigma_prev=np.array([0.0]), c_norm=np.array([0.0]))
    base.update({k: np.atleast_1d(np.asarray(v, dtype=float)) for k, v in kw.items()})
    return base


def test_horizon_weights():
    g, w, v = horizon_weights(0.5, 0.2, 1)
    assert (g, w, v) == pytest.approx((0.4, 0.4, 1.0), abs=1e-15)
    g, w, _ = horizon_weights(0.5, 0.2, 2)
    assert (g, w) == pytest.approx((0.48, 0.16))
    g, w, _ = horizon_weights(0.0, 0.2, 3)
    assert g == 0 and w == pytest.approx(0.8**3)


def test_switching_cost_values():
    a = [0.808, 0.0519, -0.657, 0.579, -1.22]
    assert switching_cost(obs(), a)[0] == pytest.approx(0.808)
    pre = obs(vremot=0.168, dremot=0.636, iremot=0.00525, tfrac=0.404)
    assert switching_cost(pre, a)[0] == pytest.approx(0.808 - 0.110376 + 0.368244 - 0.006405)
    assert switching_cost(pre, a)[0] == pytest.approx(1.060, abs=1e-3)
    post = obs(vremot=0.168, dremot=0.636, iremot=0.00525, tfrac=0.404, dport=1)
    assert switching_cost(post, a)[0] - switching_cost(pre, a)[0] == \
        pytest.approx(0.0519 * 0.404)


def test_predicted_price():
    p = StructuralParams(d=0.7, e=0.347)
    assert predicted_price(obs(c_norm=0.5, h=0), p)[0] == pytest.approx(1.2)
    lo = predicted_price(obs(sigma_prev=0.0), p)[0]
    hi = predicted_price(obs(sigma_prev=1.0), p)[0]
    assert hi - lo == pytest.approx(0.347)
    q = StructuralParams(beta6=0.564)
    drop = (predicted_price(obs(tport=1, tfrac=0.5), q)[0]
            - predicted_price(obs(tport=0, tfrac=0.5), q)[0])
    assert drop == pytest.approx(0.282 + q.beta5)


def test_forward_b():
    p = StructuralParams.from_dict({"mu": 0.5, "rho": 0.2, "e": 0.3})
    assert forward_b(p, 1.0, h=1) == pytest.approx(0.3161, abs=5e-5)
    flat = StructuralParams.from_dict({"mu": 0.5, "rho": 0.2, "e": 0.0})
    g, w, v = horizon_weights(0.5, 0.2, 2, flat.delta_C)
    assert forward_b(flat, 1.0, h=2) == pytest.approx(1 / (2 * v * (1 + 0.909**2 * w)))


def test_retention_rates():
    p = StructuralParams.from_dict({"mu": 0.5, "rho": 0.2, "delta_C": 0.909})
    retain, steal = retention_rates(0.5, 0.5, p, 1)
    assert retain == pytest.approx(0.7) and steal == pytest.approx(0.1)


@given(sig=st.floats(0, 1), sp=st.floats(0, 1), s=st.floats(0.1, 2), g=st.floats(0.5, 3),
       h=st.integers(1, 5))
def test_share_recovery_inverts(sig, sp, s, g, h):
    p = StructuralParams()
    y = aggregate_share(sig, g, s, sp, p, h)
    assert recover_sigma(y, g, s, sp, p, h) == pytest.approx(sig, abs=1e-12)


def test_recover_sigma_rejects_zero_growth():
    with pytest.raises(ZeroDivisionError):
        recover_sigma(np.array([0.5]), np.array([0.0]), 1.0, 0.5, StructuralParams())


def test_config_parsing():
    assert EstimationConfig.from_dict({"instruments": "constant"}).instruments == ()
    assert EstimationConfig.from_dict({}).instruments == DEFAULT_INSTRUMENTS
    with pytest.raises(ValueError):
        EstimationConfig.from_dict({"bogus": 1})
    with pytest.raises(ValueError):
        StructuralParams.from_dict({"bogus": 1})
    assert StructuralParams.from_dict({"mu": 0.3}).mu == pytest.approx(0.3)


def test_moment_counts(noiseless_data, true_structural):
    assert stack_moments(noiseless_data, true_structural).shape == (36,)
    assert stack_moments(noiseless_data, true_structural, ()).shape == (4,)
    Z = instrument_matrix(noiseless_data, ("z_c1", "z_c1"))
    assert not instrument_rank_ok(Z)


def test_noiseless_residuals_vanish(noiseless_data, true_structural):
    for fam, r in residuals(noiseless_data, true_structural).items():
        assert np.nanmax(np.abs(r)) < 1e-10, fam
    assert np.max(np.abs(stack_moments(noiseless_data, true_structural))) < 1e-6


def test_price_perturbation_shifts_pricing_residual(noiseless_data, true_structural):
    cols = dict(noiseless_data.columns)
    cols["price"] = cols["price"] + 0.01
    r = residuals(cols, true_structural)["pricing"]
    assert r == pytest.approx(np.full(len(r), 0.01), abs=1e-12)


def test_noiseless_estimate(noiseless_fit, true_structural):
    fit = noiseless_fit
    assert np.max(np.abs(fit.estimates - true_structural.vector())) < 1e-4
    assert fit.J < 1e-6 and fit.p_value > 0.999
    assert fit.df == 21
    out = fit.to_dict()
    assert out["J"]["df"] == 21
    assert out["pricing"]["lagged_share"]["coef"] == fit.params.e


@pytest.fixture(scope="module")
def small_noisy():
    return synthesize_dataset(StructuralParams(), n=400, seed=3, noise=NoiseSpec.modest())


@pytest.fixture(scope="module")
def small_cfg():
    return EstimationConfig(starts=6, polish=2)


def test_permutation_invariance(small_noisy, small_cfg):
    a = estimate(small_noisy, small_cfg)
    perm = np.random.default_rng(0).permutation(len(small_noisy))
    b = estimate(small_noisy.take(perm), small_cfg)
    assert np.max(np.abs(a.estimates - b.estimates)) <= 1e-12
    assert abs(a.J - b.J) <= 1e-12
    assert np.all(np.isfinite(a.se)) and np.all(a.se > 0)
    assert a.weight.startswith("step-2")


def test_nonconvergence_is_typed(small_noisy):
    cfg = EstimationConfig(starts=1, polish=1, local_evals=1, max_nfev=1)
    with pytest.raises(EstimationError) as err:
        estimate(small_noisy, cfg)
    assert "objective" in err.value.diagnostics


def test_underidentified_rejected(small_noisy):
    with pytest.raises(ValueError):
        estimate(small_noisy, EstimationConfig(instruments=()))


def test_counterfactual_arithmetic():
    assert tport_margin_effect(StructuralParams(beta6=0.564), 0.5) == pytest.approx(0.282)
    assert pct_change(0.429, 0.324) == pytest.approx(-24.48, abs=0.01)
    flat = StructuralParams(beta5=0.0, beta6=0.0)
    point = dict(h=3.6, vremot=0.17, dremot=0.64, iremot=0.005, tport=2.0, tfrac=0.4)
    cf = counterfactual_margins(flat, "steady_state_average", point=point)
    assert cf.pct_change == 0
    with pytest.raises(ValueError):
        counterfactual_margins(flat, "all_contracts_no_transition")
    with pytest.raises(ValueError):
        counterfactual_margins(flat, "other", point=point)


def test_counterfactual_on_data(small_noisy):
    cf = counterfactual_margins(StructuralParams(), "all_contracts_no_transition",
                                data=small_noisy)
    assert cf.pct_change_average_of_ratios is not None
    ss = counterfactual_margins(StructuralParams(), "steady_state_average", data=small_noisy)
    assert np.isfinite(ss.pct_change)


def test_param_names_cover_vector():
    assert len(StructuralParams().vector()) == len(PARAM_NAMES) == 15
