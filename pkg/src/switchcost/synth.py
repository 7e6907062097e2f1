"""Synthetic contract panels generated from the estimator's own model.

Covariate distributions follow the sample summary statistics (toll-free
fraction mean 0.404, duration mean 3.63 years, remoteness means 0.168 and
0.636). The t+h young share is drawn, the t share is solved from the Euler
equation (it is affine in it, including through the t+h price), and
aggregate shares are produced by inverting the share
recovery, so with zero noise every residual family vanishes at the
generating parameters.

Each record draws from its own generator spawned from ``seed``, so record
``i`` does not depend on how many records are requested.
"""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from .contracts import MarketSeries, add_months, default_market_series, portability_vars
from .dataset import COLUMNS, Dataset
from .gmm import (
    StructuralParams,
    _horizon,
    aggregate_share,
    predicted_price,
    retention_rates,
    euler_residual,
    switching_cost,
)

PRE_START = dt.date(1990, 1, 1)
POST_START = dt.date(1993, 5, 1)
END = dt.date(1996, 12, 31)
P_POST = 0.738
DURATIONS = (3, 4, 5)
DURATION_PROBS = (0.55, 0.27, 0.18)


@dataclass(frozen=True)
class NoiseSpec:
    """Standard deviations of additive observation noise."""

    price: float = 0.0
    retain: float = 0.0
    steal: float = 0.0

    @classmethod
    def modest(cls) -> "NoiseSpec":
        return cls(price=0.02, retain=0.005, steal=0.005)

    @property
    def zero(self) -> bool:
        return self.price == 0 and self.retain == 0 and self.steal == 0


def _beta(rng, mean, sd):
    k = mean * (1 - mean) / sd**2 - 1
    return rng.beta(mean * k, (1 - mean) * k)


def _uniform_date(rng, lo: dt.date, hi: dt.date) -> dt.date:
    return lo + dt.timedelta(days=int(rng.integers(0, (hi - lo).days + 1)))


def _draw_record(rng: np.random.Generator) -> dict:
    post = rng.random() < P_POST
    date = _uniform_date(rng, POST_START, END) if post else _uniform_date(rng, PRE_START, POST_START - dt.timedelta(days=1))
    h = int(rng.choice(DURATIONS, p=DURATION_PROBS))
    tfrac = _beta(rng, 0.404, 0.148)
    vremot = _beta(rng, 0.168, 0.241)
    dremot = _beta(rng, 0.636, 0.188)
    iremot = rng.uniform(0.0, 0.21) if rng.random() < 0.05 else 0.0
    sigma_lag2 = rng.uniform(0.25, 0.55)
    sigma_prev = float(np.clip(0.4 + 0.6 * (sigma_lag2 - 0.4) + rng.normal(0, 0.04), 0.05, 0.95))
    sigma_f = float(np.clip(0.4 - 0.3 * (sigma_prev - 0.4) + rng.normal(0, 0.04), 0.05, 0.95))
    c_norm = rng.normal(0.55, 0.05)
    c_norm_f = c_norm - 0.02 + rng.normal(0, 0.01)
    z = rng.normal(0.0, 1.0, size=7)
    eps = rng.normal(0.0, 1.0, size=4)
    return dict(date=date, h=h, revis=int(rng.random() < 0.497), tfrac=tfrac, vremot=vremot,
                dremot=dremot, iremot=iremot, sigma_lag2=sigma_lag2, sigma_prev=sigma_prev,
                sigma_f=sigma_f, c_norm=c_norm, c_norm_f=c_norm_f, z=z, eps=eps)


def synthesize_dataset(structural: StructuralParams, series: MarketSeries | None = None,
                       n: int = 187, seed: int = 0, noise: NoiseSpec | None = None) -> Dataset:
    """Draw ``n`` contract observations consistent with ``structural``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    series = series or default_market_series()
    noise = noise or NoiseSpec()
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]
    recs = [_draw_record(r) for r in rngs]

    col: dict[str, np.ndarray] = {}
    for key in ("h", "revis", "tfrac", "vremot", "dremot", "iremot", "sigma_lag2",
                "sigma_prev", "sigma_f", "c_norm", "c_norm_f"):
        col[key] = np.array([r[key] for r in recs], dtype=float)
    z = np.array([r["z"] for r in recs])
    eps = np.array([r["eps"] for r in recs])
    dates = [r["date"] for r in recs]
    port = [portability_vars(d) for d in dates]
    fwd = [portability_vars(add_months(d, 12 * r["h"])) for d, r in zip(dates, recs)]
    fwd2 = [portability_vars(add_months(d, 24 * r["h"])) for d, r in zip(dates, recs)]
    col["tport"] = np.array([p.tport for p in port])
    col["dport"] = np.array([p.dport for p in port], dtype=float)
    col["tport_f"] = np.array([p.tport for p in fwd])
    col["dport_f"] = np.array([p.dport for p in fwd], dtype=float)
    col["dport_ff"] = np.array([p.dport for p in fwd2], dtype=float)
    t = np.array([d.year for d in dates])
    hs = col["h"].astype(int)

    def growth(year, h):
        if series.has(year) and series.has(year - h):
            return series.growth(year, h)
        return np.nan

    col["g"] = np.array([growth(a, b) for a, b in zip(t, hs)])
    col["g_f"] = np.array([growth(a + b, b) for a, b in zip(t, hs)])
    if np.any(~np.isfinite(col["g"])):
        raise ValueError("market series does not cover t - h for every contract")

    p = structural
    h = _horizon(col, p)
    s = switching_cost(col, p.alphas)
    s_f = switching_cost(col, p.alphas, dport=col["dport_f"])
    s_ff = switching_cost(col, p.alphas, dport=col["dport_ff"])
    if np.any(s <= 0) or np.any(s_f <= 0) or np.any(s_ff <= 0):
        raise ValueError("structural parameters imply nonpositive switching costs")

    price = predicted_price(col, p)
    margin = price - col["c_norm"]

    def euler_at(sig):
        price_f = predicted_price(col, p, sigma_prev=sig, tport=col["tport_f"],
                                  c_norm=col["c_norm_f"])
        return euler_residual(p, h, col["g"], col["g_f"], margin, price_f - col["c_norm_f"],
                              col["sigma_prev"], sig, col["sigma_f"], s, s_f, s_ff)

    r0, r1 = euler_at(np.zeros(n)), euler_at(np.ones(n))
    col["sigma"] = -r0 / (r1 - r0)
    price_f = predicted_price(col, p, sigma_prev=col["sigma"], tport=col["tport_f"],
                              c_norm=col["c_norm_f"])
    sigma_f = col["sigma_f"]
    if np.any((col["sigma"] < 0) | (col["sigma"] > 1)):
        raise ValueError("parameters imply young shares outside [0, 1]; raise d or lower e")
    y = aggregate_share(col["sigma"], col["g"], s, col["sigma_prev"], p, h)
    y_f = aggregate_share(sigma_f, col["g_f"], s_f, col["sigma"], p, h)
    retain, steal = retention_rates(col["sigma_prev"], s, p, h)

    tp, tf = col["tport"], col["tfrac"]
    instruments = {
        "z_c1": 0.037 - 0.002 * tp + 0.001 * z[:, 0],
        "z_c3": 0.081 - 0.003 * tp * tf + 0.001 * z[:, 1],
        "z_c4": 0.0485 + 0.004 * col["vremot"] + 0.001 * z[:, 2],
        "z_c5": 0.081 + 0.005 * col["dremot"] + 0.001 * z[:, 3],
        "z_c1_lag": 0.040 + 0.002 * col["h"] + 0.001 * z[:, 4],
        "z_c3_lag": 0.085 + 0.05 * col["iremot"] + 0.0005 * z[:, 5],
        "z_c4_lag": 0.05 + 0.004 * col["dport"] * tf + 0.001 * z[:, 6],
        "z_sigma_lag2": col["sigma_lag2"],
    }

    forward_ok = np.isfinite(col["g_f"])
    out = {
        "id": np.arange(n, dtype=float),
        "t": t.astype(float),
        "h": col["h"],
        "revis": col["revis"],
        "price": price + noise.price * eps[:, 0],
        "c_norm": col["c_norm"],
        "y": y,
        "g": col["g"],
        "retain": retain + noise.retain * eps[:, 2],
        "steal": steal + noise.steal * eps[:, 3],
        "vremot": col["vremot"],
        "dremot": col["dremot"],
        "iremot": col["iremot"],
        "tport": tp,
        "tfrac": tf,
        "dport": col["dport"],
        "sigma_prev": col["sigma_prev"],
        "price_f": np.where(forward_ok, price_f + noise.price * eps[:, 1], np.nan),
        "c_norm_f": np.where(forward_ok, col["c_norm_f"], np.nan),
        "y_f": np.where(forward_ok, y_f, np.nan),
        "g_f": col["g_f"],
        "tport_f": np.where(forward_ok, col["tport_f"], np.nan),
        "dport_f": np.where(forward_ok, col["dport_f"], np.nan),
        "dport_ff": np.where(forward_ok, col["dport_ff"], np.nan),
        **instruments,
    }
    return Dataset({c: out[c] for c in COLUMNS})
