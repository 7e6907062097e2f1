"""Parameter-grid sweeps and comparative statics of the steady-state markup."""
from __future__ import annotations

import dataclasses
import itertools
import json
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from . import serialize
from .model import ModelError, ModelParams
from .solver import solve

FLAT_TOL = 1e-9
PASS_SHARE = 0.99

GRID_AXES = ("delta_C", "delta_F", "rho", "mu", "s")
BASE_AXES = ("delta_C", "delta_F", "rho", "mu")

# direction in which the markup should move as each parameter rises
PREDICTED_MARKUP = {"mu": "decreasing", "delta_F": "decreasing", "delta_C": "increasing",
                    "rho": None}
# direction in which the share of decreasing-in-s combos should move
PREDICTED_REGIME = {"delta_C": "decreasing", "delta_F": "increasing",
                    "mu": "increasing", "rho": "increasing"}


@dataclass(frozen=True)
class GridSpec:
    delta_C: tuple[float, ...]
    delta_F: tuple[float, ...]
    rho: tuple[float, ...]
    mu: tuple[float, ...]
    s: tuple[float, ...]
    c: float = 0.0

    def __post_init__(self):
        for name in GRID_AXES:
            values = tuple(float(v) for v in getattr(self, name))
            if not values:
                raise ValueError(f"grid axis {name} is empty")
            object.__setattr__(self, name, tuple(sorted(values)))
        # every axis value must be admissible with the others at their first level
        first = {a: getattr(self, a)[0] for a in GRID_AXES}
        for name in GRID_AXES:
            for v in getattr(self, name):
                ModelParams(**{**first, name: v}, c=self.c)

    @property
    def size(self) -> int:
        n = 1
        for name in GRID_AXES:
            n *= len(getattr(self, name))
        return n

    def points(self) -> list[ModelParams]:
        """All grid points, lexicographic in ``(delta_C, delta_F, rho, mu, s)``."""
        return [ModelParams(*v, c=self.c)
                for v in itertools.product(*(getattr(self, a) for a in GRID_AXES))]

    @classmethod
    def default(cls) -> "GridSpec":
        text = resources.files("switchcost").joinpath("data/default_grid.json").read_text()
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_dict(cls, data: dict) -> "GridSpec":
        unknown = set(data) - set(GRID_AXES) - {"c"}
        if unknown:
            raise ValueError(f"unknown grid keys: {sorted(unknown)}")
        missing = set(GRID_AXES) - set(data)
        if missing:
            raise ValueError(f"missing grid keys: {sorted(missing)}")
        return cls(**{a: tuple(data[a]) for a in GRID_AXES}, c=float(data.get("c", 0.0)))

    @classmethod
    def load(cls, path: str | Path) -> "GridSpec":
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise OSError(f"cannot read grid {path}: {exc.strerror or exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {**{a: list(getattr(self, a)) for a in GRID_AXES}, "c": self.c}


@dataclass(frozen=True)
class SweepRecord:
    delta_C: float
    delta_F: float
    rho: float
    mu: float
    s: float
    c: float
    status: str
    markup: float | None = None
    d: float | None = None
    e: float | None = None
    theta: float | None = None
    n_roots: int = 0
    n_stable: int = 0
    bellman_max: float | None = None
    foc: float | None = None
    soc: float | None = None
    lock_in: bool | None = None
    lock_in_path: bool | None = None
    coverage: bool | None = None
    young_rationality: bool | None = None
    cutoffs_interior: bool | None = None

    @property
    def solved(self) -> bool:
        return self.status == "accepted"

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.delta_C, self.delta_F, self.rho, self.mu, self.s, c=self.c)

    @property
    def base(self) -> tuple[float, ...]:
        return (self.delta_C, self.delta_F, self.rho, self.mu, self.c)


FIELDS = [f.name for f in dataclasses.fields(SweepRecord)]
_FIELD_TYPES = {
    f.name: (str if f.name == "status" else int if f.name.startswith("n_")
             else bool if f.type.startswith("bool") else float)
    for f in dataclasses.fields(SweepRecord)
}


def solve_point(params: ModelParams) -> SweepRecord:
    """One grid point's record; failures are embedded, never raised."""
    base = dict(delta_C=params.delta_C, delta_F=params.delta_F, rho=params.rho,
                mu=params.mu, s=params.s, c=params.c)
    try:
        report = solve(params)
    except ModelError as exc:
        return SweepRecord(**base, status=f"failed: {exc}")
    eq = report.accepted
    n_roots = len(report.candidates)
    if eq is None:
        return SweepRecord(**base, status=f"failed: {report.failure}", n_roots=n_roots,
                           n_stable=report.n_stable)
    g = eq.diagnostics
    return SweepRecord(
        **base,
        status="accepted",
        markup=eq.markup,
        d=eq.policy.d,
        e=eq.policy.e,
        theta=eq.dynamics.theta,
        n_roots=n_roots,
        n_stable=report.n_stable,
        bellman_max=g.bellman_max,
        foc=g.foc,
        soc=g.soc,
        lock_in=g.lock_in,
        lock_in_path=g.lock_in_path,
        coverage=g.coverage,
        young_rationality=g.young_rationality,
        cutoffs_interior=g.cutoffs_interior,
    )


def run_sweep(grid: GridSpec, workers: int = 1) -> list[SweepRecord]:
    """Solve every grid point; output order is the grid order for any worker count."""
    points = grid.points()
    if workers <= 1:
        return [solve_point(p) for p in points]
    chunk = max(1, len(points) // (workers * 8))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(solve_point, points, chunksize=chunk))


# ---------------------------------------------------------------------------
# comparative statics


@dataclass(frozen=True)
class SEffect:
    """How the markup moves along s for one base combination."""

    base: tuple[float, ...]
    label: str  # increasing | decreasing | flat | non-monotone | incomplete
    s: tuple[float, ...]
    markups: tuple[float | None, ...]

    @property
    def amplitude(self) -> float:
        vals = [m for m in self.markups if m is not None]
        return max(vals) - min(vals) if vals else 0.0

    def as_dict(self) -> dict:
        return {**dict(zip(BASE_AXES + ("c",), self.base)), "label": self.label,
                "s": list(self.s), "markups": list(self.markups),
                "amplitude": self.amplitude}


def _sign(diff: float, tol: float) -> int:
    if diff > tol:
        return 1
    if diff < -tol:
        return -1
    return 0


def classify_effect_of_s(records: Iterable[SweepRecord], tol: float = FLAT_TOL) -> list[SEffect]:
    """Label each base combo by the sign pattern of successive markup differences.

    ``increasing``/``decreasing`` require every difference to be strictly
    beyond ``tol``. All differences inside the band gives ``flat``; any other
    mix is ``non-monotone``. A combo with an unsolved point, or fewer than two
    s values, is ``incomplete``.
    """
    groups: dict[tuple, list[SweepRecord]] = defaultdict(list)
    for r in records:
        groups[r.base].append(r)
    out = []
    for base in sorted(groups):
        recs = sorted(groups[base], key=lambda r: r.s)
        s_vals = tuple(r.s for r in recs)
        markups = tuple(r.markup if r.solved else None for r in recs)
        if len(recs) < 2 or any(m is None for m in markups):
            label = "incomplete"
        else:
            signs = {_sign(b - a, tol) for a, b in zip(markups, markups[1:])}
            if signs == {1}:
                label = "increasing"
            elif signs == {-1}:
                label = "decreasing"
            elif signs == {0}:
                label = "flat"
            else:
                label = "non-monotone"
        out.append(SEffect(base, label, s_vals, markups))
    return out


@dataclass(frozen=True)
class PairTally:
    parameter: str
    increasing: int
    decreasing: int
    flat: int
    predicted: str | None
    violations: tuple[dict, ...] = field(default=())

    @property
    def total(self) -> int:
        return self.increasing + self.decreasing + self.flat

    @property
    def share_predicted(self) -> float | None:
        """Share of pairs moving weakly in the predicted direction."""
        if self.predicted is None or self.total == 0:
            return None
        agree = self.decreasing if self.predicted == "decreasing" else self.increasing
        return (agree + self.flat) / self.total

    @property
    def passed(self) -> bool | None:
        share = self.share_predicted
        return None if share is None else share >= PASS_SHARE

    def as_dict(self) -> dict:
        return {"parameter": self.parameter, "predicted": self.predicted,
                "increasing": self.increasing, "decreasing": self.decreasing,
                "flat": self.flat, "total": self.total,
                "share_predicted": self.share_predicted, "passed": self.passed,
                "violations": list(self.violations)}


def _index(records: Iterable[SweepRecord]) -> dict[tuple, SweepRecord]:
    return {(r.delta_C, r.delta_F, r.rho, r.mu, r.s, r.c): r for r in records}


def adjacent_pairs(records: Sequence[SweepRecord], parameter: str):
    """Solved record pairs that differ only in ``parameter``, at adjacent levels."""
    pos = GRID_AXES.index(parameter)
    idx = _index(records)
    levels = sorted({getattr(r, parameter) for r in records})
    nxt = dict(zip(levels, levels[1:]))
    for key in sorted(idx):
        lo = idx[key]
        if key[pos] not in nxt:
            continue
        hi_key = key[:pos] + (nxt[key[pos]],) + key[pos + 1:]
        hi = idx.get(hi_key)
        if hi is not None and lo.solved and hi.solved:
            yield lo, hi


def monotonicity_report(records: Sequence[SweepRecord], tol: float = FLAT_TOL) -> dict[str, PairTally]:
    out = {}
    for name, predicted in PREDICTED_MARKUP.items():
        counts = {1: 0, -1: 0, 0: 0}
        bad = []
        for lo, hi in adjacent_pairs(records, name):
            sgn = _sign(hi.markup - lo.markup, tol)
            counts[sgn] += 1
            wrong = (predicted == "decreasing" and sgn > 0) or (predicted == "increasing" and sgn < 0)
            if wrong:
                bad.append({**{a: getattr(lo, a) for a in GRID_AXES},
                            f"{name}_high": getattr(hi, name),
                            "markup_low": lo.markup, "markup_high": hi.markup})
        out[name] = PairTally(name, counts[1], counts[-1], counts[0], predicted, tuple(bad))
    return out


@dataclass(frozen=True)
class RegimeTrend:
    parameter: str
    levels: tuple[float, ...]
    fractions: tuple[float, ...]
    counts: tuple[int, ...]
    predicted: str

    @property
    def passed(self) -> bool:
        pairs = list(zip(self.fractions, self.fractions[1:]))
        if self.predicted == "increasing":
            return all(b >= a for a, b in pairs)
        return all(b <= a for a, b in pairs)

    def as_dict(self) -> dict:
        return {"parameter": self.parameter, "predicted": self.predicted,
                "levels": list(self.levels), "fraction_decreasing": list(self.fractions),
                "combos": list(self.counts), "passed": self.passed}


def regime_width_report(effects: Sequence[SEffect]) -> dict[str, RegimeTrend]:
    """Share of complete combos whose markup falls in s, by parameter level."""
    complete = [eff for eff in effects if eff.label != "incomplete"]
    out = {}
    for name, predicted in PREDICTED_REGIME.items():
        pos = BASE_AXES.index(name)
        levels = sorted({eff.base[pos] for eff in complete})
        fracs, counts = [], []
        for lv in levels:
            at = [eff for eff in complete if eff.base[pos] == lv]
            counts.append(len(at))
            fracs.append(sum(eff.label == "decreasing" for eff in at) / len(at))
        out[name] = RegimeTrend(name, tuple(levels), tuple(fracs), tuple(counts), predicted)
    return out


def summary_report(records: Sequence[SweepRecord]) -> dict:
    """Result-style report: s-effect labels, markup directions, regime trends."""
    effects = classify_effect_of_s(records)
    labels = defaultdict(int)
    for eff in effects:
        labels[eff.label] += 1
    mono = monotonicity_report(records)
    regime = regime_width_report(effects)
    solved = sum(r.solved for r in records)
    rho = mono["rho"]
    return {
        "grid_size": len(records),
        "solved": solved,
        "failed": len(records) - solved,
        "max_stable_solutions": max((r.n_stable for r in records), default=0),
        "effect_of_s": {k: labels[k] for k in
                        ("increasing", "decreasing", "flat", "non-monotone", "incomplete")},
        "both_signs_present": labels["increasing"] > 0 and labels["decreasing"] > 0,
        "markup_directions": {k: v.as_dict() for k, v in mono.items()},
        "rho_reversal_observed": rho.increasing > 0 and rho.decreasing > 0,
        "regime_width": {k: v.as_dict() for k, v in regime.items()},
    }


# ---------------------------------------------------------------------------
# export / import


def _rows(records: Sequence[SweepRecord]):
    for r in records:
        yield [getattr(r, f) for f in FIELDS]


def export(records: Sequence[SweepRecord], fmt: str, path: str | Path) -> None:
    """Write records as CSV or JSON. Nothing is written for an empty list."""
    if not records:
        raise ValueError("no records to export")
    serialize.write_text(path, export_text(records, fmt))


def export_text(records: Sequence[SweepRecord], fmt: str) -> str:
    if fmt == "csv":
        return serialize.csv_text(FIELDS, _rows(records))
    if fmt == "json":
        return serialize.dumps([dataclasses.asdict(r) for r in records])
    raise ValueError(f"unknown format {fmt!r}; expected csv or json")


def _coerce(name: str, value):
    kind = _FIELD_TYPES[name]
    if value is None:
        return None
    if kind is float:
        return float(value)
    return value


def import_records(path: str | Path) -> list[SweepRecord]:
    """Read records written by :func:`export` (format from the file suffix)."""
    path = Path(path)
    if path.suffix == ".json":
        try:
            rows = json.loads(path.read_text())
        except OSError as exc:
            raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
        return [SweepRecord(**{k: _coerce(k, v) for k, v in row.items()}) for row in rows]
    header, rows = serialize.read_csv(path)
    if header != FIELDS:
        raise ValueError(f"{path}: unexpected header {header}")
    out = []
    for lineno, row in enumerate(rows, start=2):
        try:
            values = {h: serialize.parse_cell(v, _FIELD_TYPES[h]) for h, v in zip(header, row)}
            out.append(SweepRecord(**values))
        except (ValueError, TypeError) as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return out
