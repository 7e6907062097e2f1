"""Structural GMM estimation from contract-level prices and market shares.

Four residual families are used as moment conditions: the pricing rule, the
firm's Euler equation between pricing dates t and t+h, and the retained and
stolen customer fractions. Each family is interacted with a constant and the
instrument columns.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy import optimize, stats

from .dataset import Dataset

DEFAULT_DISCOUNT = 0.909
DEFAULT_INSTRUMENTS = ("z_c1", "z_c3", "z_c4", "z_c5",
                       "z_c1_lag", "z_c3_lag", "z_c4_lag", "z_sigma_lag2")
FAMILIES = ("pricing", "euler", "retain", "steal")

PARAM_NAMES = ("alpha1", "alpha2", "alpha3", "alpha4", "alpha5",
               "beta1", "beta2", "beta3", "beta4", "beta5", "beta6",
               "m_logit", "r_logit", "d", "e")

FD_STEP = 1e-6
DEGENERATE_TRACE = 1e-20
RIDGE_SCALE = 1e-10
MAX_CONDITION = 1e12


class EstimationError(RuntimeError):
    """The optimizer found no converged minimum within the start budget."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


def logistic(x):
    return 1.0 / (1.0 + np.exp(-x))


def logit(p: float) -> float:
    return math.log(p / (1.0 - p))


@dataclass(frozen=True)
class StructuralParams:
    """Estimator parameters plus the fixed discount factors.

    ``h`` overrides the per-row pricing horizon (the contract duration column)
    when set.
    """

    alpha1: float = 0.8
    alpha2: float = 0.3
    alpha3: float = -0.4
    alpha4: float = 0.5
    alpha5: float = -1.0
    beta1: float = -0.05
    beta2: float = 0.1
    beta3: float = 0.2
    beta4: float = -0.5
    beta5: float = -0.1
    beta6: float = 0.3
    m_logit: float = -0.8472978603872037  # mu = 0.3
    r_logit: float = -2.9444389791664403  # rho = 0.05
    d: float = 1.5
    e: float = 0.35
    delta_F: float = DEFAULT_DISCOUNT
    delta_C: float = DEFAULT_DISCOUNT
    h: int | None = None

    @property
    def mu(self) -> float:
        return float(logistic(self.m_logit))

    @property
    def rho(self) -> float:
        return float(logistic(self.r_logit))

    @property
    def alphas(self) -> np.ndarray:
        return np.array([self.alpha1, self.alpha2, self.alpha3, self.alpha4, self.alpha5])

    @property
    def betas(self) -> np.ndarray:
        return np.array([self.beta1, self.beta2, self.beta3, self.beta4, self.beta5, self.beta6])

    def vector(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in PARAM_NAMES], dtype=float)

    def with_vector(self, x: Sequence[float]) -> "StructuralParams":
        return replace(self, **{n: float(v) for n, v in zip(PARAM_NAMES, x)})

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping) -> "StructuralParams":
        known = {f.name for f in fields(cls)}
        kw = dict(data)
        for alias, name in (("mu", "m_logit"), ("rho", "r_logit")):
            if alias in kw:
                kw[name] = logit(float(kw.pop(alias)))
        unknown = set(kw) - known
        if unknown:
            raise ValueError(f"unknown structural parameters: {sorted(unknown)}")
        return cls(**kw)

    @classmethod
    def load(cls, path: str | Path) -> "StructuralParams":
        return cls.from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# model pieces (vectorized over rows)


def horizon_weights(mu, rho, h, delta_C: float = DEFAULT_DISCOUNT):
    """Relocated and non-relocated survivor shares over ``h`` periods, and ``v``.

    Returns ``(gamma, varpi, v)`` with ``gamma = (1 - (1-mu)^h)(1-rho)^h``,
    ``varpi = (1-mu)^h (1-rho)^h`` and
    ``v = (1 - delta_C varpi) / (1 - delta_C (1-rho)(1-mu))``.
    """
    stay = (1.0 - mu) ** h
    survive = (1.0 - rho) ** h
    gamma = (1.0 - stay) * survive
    varpi = stay * survive
    v = (1.0 - delta_C * varpi) / (1.0 - delta_C * (1.0 - rho) * (1.0 - mu))
    return gamma, varpi, v


def _s_index(alphas, dport, tfrac, vremot, dremot, iremot):
    a = alphas
    return a[0] + a[1] * dport * tfrac + a[2] * vremot + a[3] * dremot + a[4] * iremot


def switching_cost(obs: Mapping, alphas: Sequence[float], dport=None):
    """Linear switching-cost index; ``dport`` defaults to the row's own."""
    dp = obs["dport"] if dport is None else dport
    return _s_index(np.asarray(alphas, dtype=float), dp, obs["tfrac"], obs["vremot"],
                    obs["dremot"], obs["iremot"])


def _horizon(obs: Mapping, params: StructuralParams):
    if params.h is not None:
        return np.full_like(np.asarray(obs["tfrac"], dtype=float), float(params.h))
    return np.asarray(obs["h"], dtype=float)


def predicted_price(obs: Mapping, params: StructuralParams, sigma_prev=None, tport=None,
                    c_norm=None):
    """Pricing rule: markup terms plus normalized cost."""
    p = params
    sp = obs["sigma_prev"] if sigma_prev is None else sigma_prev
    tp = obs["tport"] if tport is None else tport
    c = obs["c_norm"] if c_norm is None else c_norm
    return (p.d + p.e * sp + c + p.beta1 * obs["h"] + p.beta2 * obs["vremot"]
            + p.beta3 * obs["dremot"] + p.beta4 * obs["iremot"] + p.beta5 * tp
            + p.beta6 * tp * obs["tfrac"])


def forward_b(params: StructuralParams, s_future, h=1):
    """Young-demand slope at t+h given next-horizon switching cost."""
    p = params
    gamma, varpi, v = horizon_weights(p.mu, p.rho, h, p.delta_C)
    dh = p.delta_C ** h
    bracket = 2.0 * (v * (1.0 + dh * varpi) + p.e * dh * (gamma * s_future / v + varpi))
    if np.any(bracket == 0):
        raise ZeroDivisionError("singular forward demand slope")
    return 1.0 / bracket


def recover_sigma(y, g, s, sigma_prev, params: StructuralParams, h=1):
    """Young share at t from the aggregate share ``y`` (linear rearrangement)."""
    p = params
    gamma, varpi, v = horizon_weights(p.mu, p.rho, h, p.delta_C)
    g = np.asarray(g, dtype=float)
    if np.any(g == 0):
        raise ZeroDivisionError("market growth g = 0")
    old = sigma_prev * (gamma / v * (s - p.e) + varpi) + gamma / (2.0 * v) * (p.e - s + v)
    return (g * y - old) / g


def aggregate_share(sigma, g, s, sigma_prev, params: StructuralParams, h=1):
    """Inverse of :func:`recover_sigma`."""
    p = params
    gamma, varpi, v = horizon_weights(p.mu, p.rho, h, p.delta_C)
    old = sigma_prev * (gamma / v * (s - p.e) + varpi) + gamma / (2.0 * v) * (p.e - s + v)
    return (g * sigma + old) / g


def retention_rates(sigma_prev, s, params: StructuralParams, h=1):
    """Model ``(retain, steal)`` over one horizon."""
    p = params
    gamma, varpi, v = horizon_weights(p.mu, p.rho, h, p.delta_C)
    tilt = p.e * (1.0 - 2.0 * sigma_prev)
    retain = gamma / (2.0 * v) * (tilt + s + v) + varpi
    steal = gamma / (2.0 * v) * (tilt - s + v)
    return retain, steal


def euler_residual(params: StructuralParams, h, g, g_f, margin, margin_f,
                   sigma_prev, sigma, sigma_f, s, s_f, s_ff):
    """Left-hand side of the Euler equation between t and t+h (zero at the optimum)."""
    p = params
    gamma, varpi, v = horizon_weights(p.mu, p.rho, h, p.delta_C)
    b1 = forward_b(p, s_f, h)
    b2 = forward_b(p, s_ff, h)
    k = 2.0 * p.e * b1 * p.delta_F ** h  # dP^{t+h} / dP^t, discounted
    half = gamma / (2.0 * v)
    return (
        -(g * b1 + half) * margin
        + k * g * (g_f * b2 + half) * margin_f
        + g * (sigma - k * g_f * sigma_f)
        + half * ((p.e + v) * (1.0 - k * g) - (s - k * s_f * g))
        + sigma_prev * (gamma / v * (s - p.e) + varpi)
        - k * g * sigma * (gamma / v * (s_f - p.e) + varpi)
    )


def residuals(data: Mapping, params: StructuralParams) -> dict[str, np.ndarray]:
    """Per-row residuals of the four families; Euler is NaN where forward data is missing."""
    p = params
    h = _horizon(data, p)
    s = switching_cost(data, p.alphas)
    s_f = switching_cost(data, p.alphas, dport=data["dport_f"])
    s_ff = switching_cost(data, p.alphas, dport=data["dport_ff"])
    sigma_prev = data["sigma_prev"]
    sigma = recover_sigma(data["y"], data["g"], s, sigma_prev, p, h)
    with np.errstate(invalid="ignore"):
        sigma_f = recover_sigma(data["y_f"], data["g_f"], s_f, sigma, p, h)
        euler = euler_residual(
            p, h, data["g"], data["g_f"],
            data["price"] - data["c_norm"], data["price_f"] - data["c_norm_f"],
            sigma_prev, sigma, sigma_f, s, s_f, s_ff,
        )
    retain, steal = retention_rates(sigma_prev, s, p, h)
    return {
        "pricing": data["price"] - predicted_price(data, p),
        "euler": euler,
        "retain": data["retain"] - retain,
        "steal": data["steal"] - steal,
    }


# ---------------------------------------------------------------------------
# moments


def instrument_matrix(data: Mapping, instruments: Sequence[str] = DEFAULT_INSTRUMENTS,
                      standardize: bool = False) -> np.ndarray:
    n = len(data["price"])
    cols = [np.ones(n)]
    for name in instruments:
        z = np.asarray(data[name], dtype=float)
        if standardize:
            sd = z.std()
            z = (z - z.mean()) / sd if sd > 0 else z - z.mean()
        cols.append(z)
    return np.column_stack(cols)


def instrument_rank_ok(Z: np.ndarray) -> bool:
    return int(np.linalg.matrix_rank(Z)) == Z.shape[1]


@dataclass(frozen=True)
class Moments:
    gbar: np.ndarray
    contributions: np.ndarray  # n x k, averaged to gbar
    usable: dict


def moment_contributions(data: Mapping, params: StructuralParams, Z: np.ndarray,
                         families: Sequence[str] = FAMILIES) -> Moments:
    """Row contributions whose column means are the per-family sample moments.

    A family's rows without a residual contribute zero and the rest are
    scaled by ``n / n_usable``, so each family is averaged over its usable rows.
    """
    res = residuals(data, params)
    n = Z.shape[0]
    blocks, usable = [], {}
    for fam in families:
        u = res[fam]
        ok = np.isfinite(u)
        cnt = int(ok.sum())
        usable[fam] = cnt
        scale = n / cnt if cnt else 0.0
        blocks.append(np.where(ok, u, 0.0)[:, None] * Z * scale)
    f = np.hstack(blocks)
    return Moments(f.mean(axis=0), f, usable)


def stack_moments(data: Mapping, params: StructuralParams,
                  instruments: Sequence[str] | None = DEFAULT_INSTRUMENTS) -> np.ndarray:
    """Sample moment vector: each residual family times [constant, instruments]."""
    Z = instrument_matrix(data, instruments or ())
    if not instrument_rank_ok(Z):
        warnings.warn("instrument matrix is rank deficient", RuntimeWarning, stacklevel=2)
    return moment_contributions(data, params, Z).gbar


# ---------------------------------------------------------------------------
# estimation


@dataclass(frozen=True)
class EstimationConfig:
    instruments: tuple[str, ...] = DEFAULT_INSTRUMENTS
    starts: int = 32
    local_evals: int = 400
    polish: int = 3
    seed: int = 0
    delta_F: float = DEFAULT_DISCOUNT
    delta_C: float = DEFAULT_DISCOUNT
    h: int | None = None
    ftol: float = 1e-12
    xtol: float = 1e-9
    max_nfev: int = 2000

    @classmethod
    def from_dict(cls, data: Mapping) -> "EstimationConfig":
        kw = dict(data)
        inst = kw.get("instruments")
        if inst == "default" or inst is None:
            kw["instruments"] = DEFAULT_INSTRUMENTS
        elif inst == "constant":
            kw["instruments"] = ()
        else:
            kw["instruments"] = tuple(inst)
        known = {f.name for f in fields(cls)}
        unknown = set(kw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**kw)

    @classmethod
    def load(cls, path: str | Path) -> "EstimationConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class GMMResult:
    params: StructuralParams
    se: np.ndarray
    J: float
    df: int
    p_value: float
    n: int
    usable: dict
    weight: str
    converged: bool
    objective: float
    grad_norm: float
    starts: int
    rank_deficient: bool
    nonpositive_s: int
    mu_se: float
    rho_se: float
    moments: np.ndarray = field(repr=False)
    covariance: np.ndarray = field(repr=False)

    @property
    def estimates(self) -> np.ndarray:
        return self.params.vector()

    def se_of(self, name: str) -> float:
        return float(self.se[PARAM_NAMES.index(name)])

    def to_dict(self) -> dict:
        p = self.params

        def cell(name):
            return {"coef": getattr(p, name), "se": self.se_of(name)}

        return {
            "switching_cost": {
                "intercept": cell("alpha1"), "dport_x_tfrac": cell("alpha2"),
                "voice_remoteness": cell("alpha3"), "data_remoteness": cell("alpha4"),
                "international_fraction": cell("alpha5"),
            },
            "pricing": {
                "intercept": cell("d"), "lagged_share": cell("e"), "duration": cell("beta1"),
                "tport_x_tfrac": cell("beta6"), "tport": cell("beta5"),
                "voice_remoteness": cell("beta2"), "data_remoteness": cell("beta3"),
                "international_fraction": cell("beta4"),
            },
            "relocation": {"m": cell("m_logit"), "mu": {"coef": p.mu, "se": self.mu_se}},
            "exit": {"r": cell("r_logit"), "rho": {"coef": p.rho, "se": self.rho_se}},
            "observations": self.n,
            "usable_rows": dict(self.usable),
            "J": {"statistic": self.J, "df": self.df, "significance": self.p_value},
            "fixed": {"delta_F": p.delta_F, "delta_C": p.delta_C, "h": p.h},
            "optimizer": {
                "weight": self.weight, "converged": self.converged,
                "objective": self.objective, "grad_norm": self.grad_norm,
                "starts": self.starts, "rank_deficient": self.rank_deficient,
                "nonpositive_s": self.nonpositive_s,
            },
            "params": p.to_dict(),
        }


class _Problem:
    def __init__(self, data: Dataset, cfg: EstimationConfig, template: StructuralParams):
        self.data = data
        self.cfg = cfg
        self.template = template
        self.Z = instrument_matrix(data, cfg.instruments, standardize=True)
        self.n = len(data)
        self.k = self.Z.shape[1] * len(FAMILIES)

    def params(self, x) -> StructuralParams:
        return self.template.with_vector(x)

    def moments(self, x) -> Moments:
        return moment_contributions(self.data, self.params(x), self.Z)

    def gbar(self, x) -> np.ndarray:
        with np.errstate(all="ignore"):
            g = self.moments(x).gbar
        return np.where(np.isfinite(g), g, 1e6)

    def scaled(self, x, root: np.ndarray) -> np.ndarray:
        return root.T @ self.gbar(x)

    def objective(self, x, W) -> float:
        g = self.gbar(x)
        return float(g @ W @ g)


def _ols(y, X):
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return coef


def _start_points(prob: _Problem) -> list[np.ndarray]:
    """Closed-form starts: pricing by OLS, switching costs by OLS given (mu, rho)."""
    data, t = prob.data, prob.template
    n = prob.n
    h = _horizon(data, t)
    margin = data["price"] - data["c_norm"]
    tp, tf = data["tport"], data["tfrac"]
    Xp = np.column_stack([np.ones(n), data["sigma_prev"], data["h"], data["vremot"],
                          data["dremot"], data["iremot"], tp, tp * tf])
    d, e, *betas = _ols(margin, Xp)
    Xs = np.column_stack([np.ones(n), data["dport"] * tf, data["vremot"], data["dremot"],
                          data["iremot"]])
    points = []
    for m0 in np.linspace(-3.0, 3.0, 8):
        for r0 in np.linspace(-5.0, 0.0, 6):
            mu, rho = logistic(m0), logistic(r0)
            gamma, varpi, v = horizon_weights(mu, rho, h, t.delta_C)
            with np.errstate(all="ignore"):
                s_hat = (data["retain"] - data["steal"] - varpi) * v / gamma
            if not np.all(np.isfinite(s_hat)):
                continue
            alphas = _ols(s_hat, Xs)
            points.append(np.array([*alphas, *betas, m0, r0, d, e]))
    return points


def _local_search(prob: _Problem, x0, W, cfg: EstimationConfig):
    res = optimize.minimize(prob.objective, x0, args=(W,), method="Nelder-Mead",
                            options={"maxfev": cfg.local_evals, "xatol": 1e-10,
                                     "fatol": 1e-14, "adaptive": True})
    return res.x, float(res.fun)


def _polish(prob: _Problem, x0, W, cfg: EstimationConfig):
    root = np.linalg.cholesky(W)
    res = optimize.least_squares(prob.scaled, x0, args=(root,), method="trf",
                                 ftol=cfg.ftol, xtol=cfg.xtol, gtol=1e-15,
                                 max_nfev=cfg.max_nfev, x_scale="jac")
    obj = float(res.fun @ res.fun)
    grad = float(np.linalg.norm(res.grad))
    return res.x, obj, grad, res.status > 0


def _minimize(prob: _Problem, starts: list[np.ndarray], W, cfg: EstimationConfig):
    scored = sorted(((prob.objective(x, W), i, x) for i, x in enumerate(starts)),
                    key=lambda t: (t[0], t[1]))[: cfg.starts]
    searched = []
    for _, i, x in scored:
        xs, fs = _local_search(prob, x, W, cfg)
        searched.append((fs, i, xs))
    searched.sort(key=lambda t: (t[0], t[1]))
    best = None
    for fs, i, xs in searched[: cfg.polish]:
        xp, fp, grad, ok = _polish(prob, xs, W, cfg)
        if best is None or fp < best[1]:
            best = (xp, fp, grad, ok)
    return best


def _jacobian(prob: _Problem, x) -> np.ndarray:
    G = np.empty((prob.k, len(x)))
    for j in range(len(x)):
        step = FD_STEP * max(abs(x[j]), 1.0)
        xp, xm = x.copy(), x.copy()
        xp[j] += step
        xm[j] -= step
        G[:, j] = (prob.gbar(xp) - prob.gbar(xm)) / (2.0 * step)
    return G


def _weight_matrix(f: np.ndarray) -> tuple[np.ndarray, str]:
    k = f.shape[1]
    omega = np.cov(f, rowvar=False, bias=True)
    tr = float(np.trace(omega))
    if tr <= DEGENERATE_TRACE:
        return np.eye(k), "identity (degenerate moment covariance)"
    label = "step-2"
    if np.linalg.cond(omega) > MAX_CONDITION:
        omega = omega + RIDGE_SCALE * tr / k * np.eye(k)
        label = "step-2 (ridge)"
    W = np.linalg.inv(omega)
    return (W + W.T) / 2.0, label


def estimate(data: Dataset, config: EstimationConfig | None = None) -> GMMResult:
    """Two-step GMM with multi-start local search and a least-squares polish."""
    cfg = config or EstimationConfig()
    data = data.canonical()
    template = StructuralParams(delta_F=cfg.delta_F, delta_C=cfg.delta_C, h=cfg.h)
    prob = _Problem(data, cfg, template)
    p = len(PARAM_NAMES)
    df = prob.k - p
    if df <= 0:
        raise ValueError(f"{prob.k} moments cannot identify {p} parameters")
    if not instrument_rank_ok(prob.Z):
        raise ValueError("instrument matrix is rank deficient")

    starts = _start_points(prob)
    if not starts:
        raise EstimationError("no admissible starting values")
    W1 = np.eye(prob.k)
    x1, f1, g1, ok1 = _minimize(prob, starts, W1, cfg)

    W2, label = _weight_matrix(prob.moments(x1).contributions)
    if label.startswith("identity"):
        x2, f2, g2, ok2 = x1, f1, g1, ok1
    else:
        x2, f2, g2, ok2 = _polish(prob, x1, W2, cfg)
        # guard against the polish wandering off: retry from the other starts if needed
        if not ok2:
            x2, f2, g2, ok2 = _minimize(prob, [x1, *starts], W2, cfg)
    if not ok2:
        raise EstimationError("optimizer did not converge",
                              {"objective": f2, "grad_norm": g2, "x": x2.tolist()})

    est = prob.params(x2)
    mom = prob.moments(x2)
    gbar = mom.gbar
    G = _jacobian(prob, x2)
    omega = np.cov(mom.contributions, rowvar=False, bias=True)
    rank_deficient = int(np.linalg.matrix_rank(G)) < p
    if rank_deficient:
        cov = np.full((p, p), np.nan)
    else:
        bread = np.linalg.inv(G.T @ W2 @ G)
        meat = G.T @ W2 @ omega @ W2 @ G
        cov = bread @ meat @ bread / prob.n
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None)) if not rank_deficient else np.diag(cov)
    J = float(prob.n * gbar @ W2 @ gbar)
    p_value = float(stats.chi2.sf(J, df))
    s_all = np.concatenate([switching_cost(data, est.alphas),
                            switching_cost(data, est.alphas, dport=data["dport_f"])])
    nonpos = int(np.sum(np.isfinite(s_all) & (s_all <= 0)))
    if nonpos:
        warnings.warn(f"{nonpos} observations imply s <= 0", RuntimeWarning, stacklevel=2)
    i_m, i_r = PARAM_NAMES.index("m_logit"), PARAM_NAMES.index("r_logit")
    mu, rho = est.mu, est.rho
    return GMMResult(
        params=est,
        se=se,
        J=J,
        df=df,
        p_value=p_value,
        n=prob.n,
        usable=mom.usable,
        weight=label,
        converged=ok2,
        objective=f2,
        grad_norm=g2,
        starts=min(cfg.starts, len(starts)),
        rank_deficient=rank_deficient,
        nonpositive_s=nonpos,
        mu_se=float(mu * (1 - mu) * se[i_m]),
        rho_se=float(rho * (1 - rho) * se[i_r]),
        moments=gbar,
        covariance=cov,
    )


# ---------------------------------------------------------------------------
# counterfactuals


SCENARIOS = ("steady_state_average", "all_contracts_no_transition")


@dataclass(frozen=True)
class Counterfactual:
    scenario: str
    margin_base: float
    margin_counterfactual: float
    pct_change: float
    pct_change_average_of_ratios: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def pct_change(base: float, new: float) -> float:
    return 100.0 * (new - base) / base


def tport_margin_effect(params: StructuralParams, tfrac: float, relative: bool = True) -> float:
    """Margin change per 100 days of expected time to portability.

    With ``relative`` the effect is measured against a contract without
    toll-free usage, which removes the common ``beta5`` term.
    """
    return params.beta6 * tfrac + (0.0 if relative else params.beta5)


AVERAGE_FIELDS = ("h", "vremot", "dremot", "iremot", "tport", "tfrac")


def average_contract(data: Mapping) -> dict:
    return {k: float(np.mean(data[k])) for k in AVERAGE_FIELDS}


def steady_state_margin(params: StructuralParams, point: Mapping, tport: float | None = None) -> float:
    """Pricing-rule margin ``P - c`` at equal shares (lagged share one half)."""
    p = params
    tp = point["tport"] if tport is None else tport
    return float(p.d + p.e * 0.5 + p.beta1 * point["h"] + p.beta2 * point["vremot"]
                 + p.beta3 * point["dremot"] + p.beta4 * point["iremot"]
                 + p.beta5 * tp + p.beta6 * tp * point["tfrac"])


def counterfactual_margins(params: StructuralParams, scenario: str,
                           data: Mapping | None = None,
                           point: Mapping | None = None) -> Counterfactual:
    """Margins with the observed time to portability versus portability in place.

    ``steady_state_average`` evaluates the pricing rule at the average
    contract (``point``, or the column means of ``data``) with the lagged share
    at one half. ``all_contracts_no_transition`` recomputes each contract's
    margin with its own lagged share held fixed and reports the change of the
    average margin; the average of per-contract changes is reported alongside.
    """
    if scenario == "steady_state_average":
        if point is None:
            if data is None:
                raise ValueError("steady_state_average needs data or an average contract")
            point = average_contract(data)
        base = steady_state_margin(params, point)
        new = steady_state_margin(params, point, tport=0.0)
        return Counterfactual(scenario, base, new, pct_change(base, new))
    if scenario == "all_contracts_no_transition":
        if data is None:
            raise ValueError("all_contracts_no_transition needs data")
        base = predicted_price(data, params) - data["c_norm"]
        new = predicted_price(data, params, tport=np.zeros_like(base)) - data["c_norm"]
        avg_ratio = float(np.mean(100.0 * (new - base) / base))
        b, nw = float(np.mean(base)), float(np.mean(new))
        return Counterfactual(scenario, b, nw, pct_change(b, nw), avg_ratio)
    raise ValueError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
