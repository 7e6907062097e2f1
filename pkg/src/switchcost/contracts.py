"""Contract-level data construction: service weights, margins, portability timing.

Units: per-minute prices are in $/min, commitments, fees and line costs in
$/month, and cost tables in cents (converted to dollars on use).
"""
from __future__ import annotations

import calendar
import datetime as dt
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import serialize

N_SERVICES = 5
TOLL_FREE = (3, 4)  # zero-based indices of services 4 and 5
VOLUME_ASSUMPTION = 1.2  # users consume 120% of the minimum commitment

PORTABILITY_DATE = dt.date(1993, 5, 1)
FIRST_PLANNED = dt.date(1989, 3, 31)


class ContractError(ValueError):
    """Inputs that cannot produce a valid derived contract."""


# ---------------------------------------------------------------------------
# service weights


def solve_weights(m: float, r1: float, r2: float, form: str = "printed") -> np.ndarray:
    """Shares of the five voice services implied by a contract's port counts.

    With ``w2 = 3.25 w1``, ``w3 = 0.75 w1`` and ``w4 = w2``, the measured-port
    equation fixes ``w1`` and ``w5 = r2``; the result is normalized to sum to 1.

    Parameters
    ----------
    m, r1, r2 : float
        Measured ports, rate-option-1 remote ports and rate-option-2 remote ports.
    form : {"printed", "intended"}
        ``"printed"`` reads the measured-port equation as ``2(w1 + w1) + w4 = m + r1``;
        ``"intended"`` as ``2 w1 + w2 + w4 = m + r1``.
    """
    if min(m, r1, r2) < 0:
        raise ContractError(f"port counts must be nonnegative: m={m}, r1={r1}, r2={r2}")
    if form == "printed":
        lead = 4.0 + 3.25
    elif form == "intended":
        lead = 2.0 + 3.25 + 3.25
    else:
        raise ContractError(f"unknown weight form {form!r}")
    u1 = (m + r1) / lead
    u = np.array([u1, 3.25 * u1, 0.75 * u1, 3.25 * u1, float(r2)])
    total = u.sum()
    if total <= 0:
        raise ContractError("all port counts are zero")
    return u / total


def toll_free_fraction(weights: Sequence[float]) -> float:
    return float(sum(weights[j] for j in TOLL_FREE))


# ---------------------------------------------------------------------------
# portability timing


def add_months(day: dt.date, months: int) -> dt.date:
    """Calendar month arithmetic, clamping to the end of a shorter month."""
    idx = day.month - 1 + months
    year, month = day.year + idx // 12, idx % 12 + 1
    return dt.date(year, month, min(day.day, calendar.monthrange(year, month)[1]))


@dataclass(frozen=True)
class Regime:
    start: dt.date
    expected: dt.date | None = None
    months_ahead: int | None = None

    def expected_date(self, t: dt.date) -> dt.date:
        if self.expected is not None:
            return self.expected
        return add_months(t, self.months_ahead)


DEFAULT_TIMELINE: tuple[Regime, ...] = (
    Regime(dt.date(1989, 3, 31), expected=dt.date(1991, 6, 30)),
    Regime(dt.date(1990, 5, 22), months_ahead=15),
    Regime(dt.date(1991, 8, 2), expected=dt.date(1993, 3, 1)),
    Regime(dt.date(1992, 11, 21), expected=dt.date(1993, 5, 1)),
)


@dataclass(frozen=True)
class PortabilityVars:
    expected_date: dt.date
    tport: float
    dport: int


def portability_vars(t: dt.date, timeline: Sequence[Regime] = DEFAULT_TIMELINE,
                     implemented: dt.date = PORTABILITY_DATE) -> PortabilityVars:
    """Expected portability date, days remaining in hundreds, and the post-portability dummy."""
    if t < timeline[0].start:
        raise ContractError(f"no expected portability date before {timeline[0].start}: {t}")
    regime = [r for r in timeline if r.start <= t][-1]
    expected = regime.expected_date(t)
    days = max((expected - t).days, 0)
    dport = int(t >= implemented)
    tport = 0.0 if dport else days / 100.0
    return PortabilityVars(expected, tport, dport)


# ---------------------------------------------------------------------------
# costs


@dataclass(frozen=True)
class CostTable:
    """Per-service marginal cost inputs, in cents.

    ``access`` is a schedule of ``(start_date, fees)`` pairs; the latest entry
    starting on or before a contract's date applies. The default access fees
    are set so that operational plus access cost reproduces the sample-mean
    marginal cost of each service.
    """

    operational: tuple[float, ...] = (1.30, 1.01, 1.01, 1.29, 1.08)
    access: tuple[tuple[dt.date, tuple[float, ...]], ...] = (
        (dt.date(1984, 1, 1), (2.41, 3.99, 7.05, 3.56, 7.05)),
    )
    query_fee: float = 0.61
    call_minutes: float = 3.6
    allow_query_outside_range: bool = False

    def __post_init__(self):
        if len(self.operational) != N_SERVICES:
            raise ContractError("operational costs need five entries")
        if min(self.operational) < 0:
            raise ContractError("operational costs must be nonnegative")
        if not self.access:
            raise ContractError("access fee schedule is empty")
        for start, fees in self.access:
            if len(fees) != N_SERVICES or min(fees) < 0:
                raise ContractError(f"bad access fees at {start}: {fees}")
        if self.call_minutes <= 0:
            raise ContractError("call length must be positive")
        if not self.allow_query_outside_range and not 0.22 <= self.query_fee <= 1.0:
            raise ContractError(f"query fee {self.query_fee} outside [0.22, 1.0] cents")

    def access_at(self, t: dt.date) -> tuple[float, ...]:
        current = [fees for start, fees in sorted(self.access) if start <= t]
        if not current:
            raise ContractError(f"no access fees in effect on {t}")
        return current[-1]

    def unit_costs(self, t: dt.date, dport: int) -> np.ndarray:
        """Per-service marginal cost in $/min at date ``t``."""
        cents = np.asarray(self.operational) + np.asarray(self.access_at(t))
        if dport:
            surcharge = self.query_fee / self.call_minutes
            for j in TOLL_FREE:
                cents[j] += surcharge
        return cents / 100.0

    @classmethod
    def from_dict(cls, data: dict) -> "CostTable":
        kw = dict(data)
        if "operational" in kw:
            kw["operational"] = tuple(kw["operational"])
        if "access" in kw:
            kw["access"] = tuple((dt.date.fromisoformat(a["start"]), tuple(a["fees"]))
                                 for a in kw["access"])
        return cls(**kw)

    @classmethod
    def load(cls, path: str | Path) -> "CostTable":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except OSError as exc:
            raise OSError(f"cannot read cost table {path}: {exc.strerror or exc}") from exc


# ---------------------------------------------------------------------------
# contracts


@dataclass(frozen=True)
class TariffOption:
    id: str
    effective_date: dt.date
    revis: int
    prices: tuple[float | None, ...]
    r_i: float
    F_i: float
    h_i: float
    m: float
    r1: float
    r2: float
    c_v: float
    c_d: float
    vremot: float
    dremot: float
    iremot: float

    def __post_init__(self):
        if len(self.prices) != N_SERVICES:
            raise ContractError(f"{self.id}: need five price slots")
        if not self.r_i > self.F_i >= 0:
            raise ContractError(f"{self.id}: need r_i > F_i >= 0")
        if not 3 <= self.h_i <= 5:
            raise ContractError(f"{self.id}: duration {self.h_i} outside [3, 5] years")
        if any(p is not None and p <= 0 for p in self.prices):
            raise ContractError(f"{self.id}: prices must be positive")
        if min(self.m, self.r1, self.r2, self.c_v, self.c_d) < 0:
            raise ContractError(f"{self.id}: negative port count or cost")
        for name in ("vremot", "dremot", "iremot"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ContractError(f"{self.id}: {name} outside [0, 1]")
        if self.revis not in (0, 1):
            raise ContractError(f"{self.id}: revision flag must be 0 or 1")


@dataclass(frozen=True)
class MarginParts:
    price: float
    cost: float
    minutes: float
    c_norm: float
    margin: float


def contract_margin(weights: Sequence[float], prices: Sequence[float | None],
                    unit_costs: Sequence[float], r_i: float, F_i: float,
                    c_v: float, c_d: float) -> MarginParts:
    """Average price and cost, monthly minutes, normalized cost and margin."""
    w = np.asarray(weights, dtype=float)
    for j, (wj, pj) in enumerate(zip(w, prices)):
        if wj > 0 and pj is None:
            raise ContractError(f"service {j + 1} has weight {wj} but no price")
    p = np.array([0.0 if pj is None else pj for pj in prices])
    price = float(w @ p)
    cost = float(w @ np.asarray(unit_costs, dtype=float))
    if price <= 0:
        raise ContractError("average price must be positive")
    minutes = (r_i - F_i) / price
    if minutes <= 0:
        raise ContractError(f"monthly minutes {minutes} not positive (r_i - F_i <= 0)")
    c_norm = (c_d + c_v + minutes * cost) / r_i
    return MarginParts(price, cost, minutes, c_norm, 1.0 - c_norm)


@dataclass(frozen=True)
class DerivedContract:
    id: str
    effective_date: dt.date
    revis: int
    weights: tuple[float, ...]
    tfrac: float
    price: float
    cost: float
    minutes: float
    c_norm: float
    margin: float
    expected_date: dt.date
    tport: float
    dport: int
    h_i: float
    vremot: float
    dremot: float
    iremot: float
    unit_costs: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if not -1.0 < self.margin < 1.0:
            raise ContractError(f"{self.id}: margin {self.margin} outside (-1, 1)")


def derive_contract(option: TariffOption, costs: CostTable | None = None,
                    timeline: Sequence[Regime] = DEFAULT_TIMELINE,
                    weight_form: str = "printed") -> DerivedContract:
    costs = costs or CostTable()
    port = portability_vars(option.effective_date, timeline)
    w = solve_weights(option.m, option.r1, option.r2, weight_form)
    unit = costs.unit_costs(option.effective_date, port.dport)
    parts = contract_margin(w, option.prices, unit, option.r_i, option.F_i,
                            option.c_v, option.c_d)
    return DerivedContract(
        id=option.id,
        effective_date=option.effective_date,
        revis=option.revis,
        weights=tuple(float(x) for x in w),
        tfrac=toll_free_fraction(w),
        price=parts.price,
        cost=parts.cost,
        minutes=parts.minutes,
        c_norm=parts.c_norm,
        margin=parts.margin,
        expected_date=port.expected_date,
        tport=port.tport,
        dport=port.dport,
        h_i=option.h_i,
        vremot=option.vremot,
        dremot=option.dremot,
        iremot=option.iremot,
        unit_costs=tuple(float(x) for x in unit),
    )


CONTRACT_COLUMNS = ["id", "effective_date", "revis", "p1", "p2", "p3", "p4", "p5",
                    "r_i", "F_i", "h_i", "m", "r1", "r2", "c_v", "c_d",
                    "vremot", "dremot", "iremot"]


def load_contracts(path: str | Path) -> list[TariffOption]:
    header, rows = serialize.read_csv(path)
    if header != CONTRACT_COLUMNS:
        raise ContractError(f"{path}: expected columns {CONTRACT_COLUMNS}, got {header}")
    out = []
    for lineno, row in enumerate(rows, start=2):
        try:
            if len(row) != len(header):
                raise ValueError(f"expected {len(header)} fields, got {len(row)}")
            rec = dict(zip(header, row))
            num = {k: float(rec[k]) for k in CONTRACT_COLUMNS[8:]}
            out.append(TariffOption(
                id=rec["id"],
                effective_date=dt.date.fromisoformat(rec["effective_date"]),
                revis=int(rec["revis"]),
                prices=tuple(float(rec[f"p{j}"]) if rec[f"p{j}"] else None
                             for j in range(1, 6)),
                **num,
            ))
        except (ValueError, KeyError) as exc:
            raise ContractError(f"{path}:{lineno}: {exc}") from exc
    return out


DERIVED_COLUMNS = ["id", "effective_date", "revis", "w1", "w2", "w3", "w4", "w5", "tfrac",
                   "price", "cost", "minutes", "c_norm", "margin", "expected_date",
                   "tport", "dport", "h_i", "vremot", "dremot", "iremot"]


def derived_rows(contracts: Sequence[DerivedContract]):
    for c in contracts:
        yield [c.id, c.effective_date, c.revis, *c.weights, c.tfrac, c.price, c.cost,
               c.minutes, c.c_norm, c.margin, c.expected_date, c.tport, c.dport,
               c.h_i, c.vremot, c.dremot, c.iremot]


def derived_csv(contracts: Sequence[DerivedContract]) -> str:
    return serialize.csv_text(DERIVED_COLUMNS, derived_rows(contracts))


# ---------------------------------------------------------------------------
# market series


def default_retention(dport: int) -> tuple[float, float]:
    """Fallback ``(retain, steal)`` before and after portability."""
    return (0.95, 0.05) if dport else (0.99, 0.02)


def period_dport(year: int) -> int:
    """Portability regime of a yearly period, judged at mid-year."""
    return int(dt.date(year, 7, 1) >= PORTABILITY_DATE)


@dataclass(frozen=True)
class MarketSeries:
    """Yearly market size, incumbent share and switching rates."""

    t: tuple[int, ...]
    L: tuple[float, ...]
    y: tuple[float, ...]
    retain: tuple[float, ...]
    steal: tuple[float, ...]

    def __post_init__(self):
        n = len(self.t)
        if n == 0:
            raise ContractError("empty market series")
        if any(len(getattr(self, f)) != n for f in ("L", "y", "retain", "steal")):
            raise ContractError("market series columns differ in length")
        if list(self.t) != sorted(set(self.t)):
            raise ContractError("periods must be strictly increasing")
        if min(self.L) <= 0:
            raise ContractError("market size must be positive")
        for name in ("y", "retain", "steal"):
            vals = getattr(self, name)
            if not all(0.0 <= v <= 1.0 for v in vals):
                raise ContractError(f"{name} outside [0, 1]")

    def size(self, t: int) -> float:
        try:
            return self.L[self.t.index(t)]
        except ValueError:
            raise KeyError(f"period {t} not in market series") from None

    def has(self, t: int) -> bool:
        return t in self.t

    def growth(self, t: int, h: int) -> float:
        """``g^t = L^t / L^(t-h)``."""
        return self.size(t) / self.size(t - h)


MARKET_COLUMNS = ["t", "L", "y", "retain", "steal"]


def load_market_series(path: str | Path) -> MarketSeries:
    """Read ``t, L, y, retain, steal``; blank retention cells take the regime defaults."""
    header, rows = serialize.read_csv(path)
    if header != MARKET_COLUMNS:
        raise ContractError(f"{path}: expected columns {MARKET_COLUMNS}, got {header}")
    cols: dict[str, list] = {k: [] for k in MARKET_COLUMNS}
    for lineno, row in enumerate(rows, start=2):
        try:
            if len(row) != len(header):
                raise ValueError(f"expected {len(header)} fields, got {len(row)}")
            t = int(row[0])
            L, y = float(row[1]), float(row[2])
            keep, steal = default_retention(period_dport(t))
            keep = float(row[3]) if row[3] else keep
            steal = float(row[4]) if row[4] else steal
            if L <= 0:
                raise ValueError(f"L={L} must be positive")
            for name, v in (("y", y), ("retain", keep), ("steal", steal)):
                if not 0.0 <= v <= 1.0:
                    raise ValueError(f"{name}={v} outside [0, 1]")
        except ValueError as exc:
            raise ContractError(f"{path}:{lineno}: {exc}") from exc
        for k, v in zip(MARKET_COLUMNS, (t, L, y, keep, steal)):
            cols[k].append(v)
    return MarketSeries(**{k: tuple(v) for k, v in cols.items()})


def market_csv(series: MarketSeries) -> str:
    return serialize.csv_text(MARKET_COLUMNS, zip(series.t, series.L, series.y,
                                                  series.retain, series.steal))


def default_market_series(first: int = 1980, last: int = 2008, growth: float = 1.16,
                          share: float = 0.714) -> MarketSeries:
    """Smooth synthetic series whose four-year growth is close to the sample mean of 1.81."""
    t = tuple(range(first, last + 1))
    L = tuple(100.0 * growth ** (k - first) for k in t)
    ret = tuple(default_retention(period_dport(k)) for k in t)
    return MarketSeries(t, L, (share,) * len(t), tuple(r for r, _ in ret),
                        tuple(s for _, s in ret))

