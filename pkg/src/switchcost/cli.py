"""Command-line entry point.

Structured single objects are written as JSON, row collections as CSV, floats
at 17 significant digits. ``-o -`` (the default) writes data to stdout;
diagnostics always go to stderr.

Exit codes: 0 success, 1 usage or input error, 2 computation failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, fields
from pathlib import Path
from typing import Sequence

from . import __version__, serialize
from .contracts import (
    ContractError,
    CostTable,
    default_market_series,
    derive_contract,
    derived_csv,
    load_contracts,
    load_market_series,
)
from .dataset import DataError, Dataset
from .gmm import (
    SCENARIOS,
    EstimationConfig,
    EstimationError,
    StructuralParams,
    counterfactual_margins,
    estimate,
)
from .model import ModelError, ModelParams
from .solver import NoEquilibrium, simulate_path, solve
from .sweep import GridSpec, export_text, run_sweep, summary_report
from .synth import NoiseSpec, synthesize_dataset

ENV_PREFIX = "SWITCHCOST_"
# flags that may be supplied through the environment instead
ENV_FLAGS = ("grid", "params", "contracts", "costs", "market", "config", "seed", "workers")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


SOLVE_HELP = """\
Solve one parameter point. Output JSON object:
  params          delta_C, delta_F, rho, mu, s, c, r (r null = default)
  policy          d, e          price P(sigma) = d + e sigma
  value           k, l, m       value pi(sigma) = k + l sigma + m sigma^2
  dynamics        b, eta, theta share transition sigma' = eta - theta sigma
  markup          steady-state price minus marginal cost
  reservation     reservation value used for the coverage check
  diagnostics     bellman_max, foc, soc, lock_in, lock_in_path, coverage,
                  young_rationality, cutoffs_interior, profit, valid
  candidates      list of {e, theta, status} for every real root found
Exit 2 when no stable valid equilibrium exists (the JSON is still written,
with "failure" set and "policy" null)."""

SIMULATE_HELP = """\
Solve a point and iterate the share transition from --sigma0 for --T periods.
Output CSV columns: t, sigma, price."""

SWEEP_HELP = """\
Solve every point of a grid. --grid is a JSON object with list-valued keys
delta_C, delta_F, rho, mu, s and optional c (default: the bundled grid,
4455 points). Output: one record per point, ordered lexicographically by
(delta_C, delta_F, rho, mu, s). CSV columns: delta_C, delta_F, rho, mu, s, c,
status, markup, d, e, theta, n_roots, n_stable, bellman_max, foc, soc,
lock_in, lock_in_path, coverage, young_rationality, cutoffs_interior.
--report writes a JSON summary: s-effect classes per (delta_C, delta_F, rho,
mu) combination, adjacent-pair direction tallies with every violating pair,
and the share of decreasing-in-s combinations by level of each parameter."""

DERIVE_HELP = """\
Turn tariff options into contract observations.
--contracts CSV columns: id, effective_date (ISO), revis, p1..p5 (price per
minute in dollars, blank when not offered), r_i, F_i, h_i, m, r1, r2, c_v, c_d,
vremot, dremot, iremot.
--costs JSON (optional): {"operational": [5 values in cents],
"access": [{"start": ISO date, "fees": [5 values in cents]}, ...],
"query_fee": cents, "call_minutes": minutes}.
Output CSV columns: id, effective_date, revis, w1..w5, tfrac, price, cost,
minutes, c_norm, margin, expected_date, tport, dport, h_i, vremot, dremot,
iremot."""

SYNTH_HELP = """\
Draw a synthetic estimation dataset from the structural model.
--params JSON: any of alpha1..alpha5, beta1..beta6, m_logit or mu, r_logit or
rho, d, e, delta_F, delta_C, h. Missing keys take the package defaults.
--market CSV (optional): columns t, L, y, retain, steal (yearly).
--seed is required. Output CSV columns: id, t, h, revis, price, c_norm, y, g,
retain, steal, vremot, dremot, iremot, tport, tfrac, dport, sigma_prev,
price_f, c_norm_f, y_f, g_f, tport_f, dport_f, dport_ff, z_c1, z_c3, z_c4,
z_c5, z_c1_lag, z_c3_lag, z_c4_lag, z_sigma_lag2 (forward fields blank when
the contract has no successor)."""

ESTIMATE_HELP = """\
Two-step GMM estimate from a dataset CSV (the synth output layout).
--config JSON (optional): instruments ("default", "constant" or a list of
column names), starts, local_evals, polish, seed, delta_F, delta_C, h, ftol,
xtol, max_nfev. Output JSON: coefficient/se blocks for switching_cost,
pricing, relocation and exit; observations; usable_rows; J {statistic, df,
significance}; fixed; optimizer diagnostics; params (the flat parameter set
accepted by synth --params and counterfactual --results)."""

COUNTERFACTUAL_HELP = """\
Margins with the observed time to portability versus tport = 0.
--results is an estimate output (or a flat parameter JSON). Scenarios:
steady_state_average         pricing rule at the average contract with the
                             lagged share at one half (needs --data or --point)
all_contracts_no_transition  every contract of --data re-priced at tport = 0
--point JSON: h, vremot, dremot, iremot, tport, tfrac.
Output JSON: scenario, margin_base, margin_counterfactual, pct_change,
pct_change_average_of_ratios."""


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(","))


def build_parser() -> argparse.ArgumentParser:
    env = ", ".join(ENV_PREFIX + f.upper() for f in ENV_FLAGS)
    parser = _Parser(
        prog="switchcost",
        description="Switching-cost duopoly: equilibrium, sweeps, contract data and GMM.",
        epilog=f"Environment fallbacks (used only when the flag is absent): {env}.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, text):
        p = sub.add_parser(name, help=text.splitlines()[0], description=text,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("-o", "--output", default="-", help="output path ('-' for stdout)")
        return p

    def point_flags(p):
        p.add_argument("--params", help="JSON object with model parameters")
        for name in ("delta_C", "delta_F", "rho", "mu", "s", "c", "r"):
            p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float)

    p = add("solve", SOLVE_HELP)
    point_flags(p)

    p = add("simulate", SIMULATE_HELP)
    point_flags(p)
    p.add_argument("--sigma0", type=float, required=True)
    p.add_argument("--T", dest="T", type=int, required=True)

    p = add("sweep", SWEEP_HELP)
    p.add_argument("--grid")
    p.add_argument("--workers", type=int)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--report", help="path for the JSON summary report")

    p = add("derive", DERIVE_HELP)
    p.add_argument("--contracts")
    p.add_argument("--costs")
    p.add_argument("--weight-form", choices=("printed", "intended"), default="printed")

    p = add("synth", SYNTH_HELP)
    p.add_argument("--params")
    p.add_argument("--market")
    p.add_argument("--n", type=int, default=187)
    p.add_argument("--seed", type=int)
    p.add_argument("--noise", type=_float_list, default=(0.0, 0.0, 0.0),
                   metavar="PRICE,RETAIN,STEAL", help="noise standard deviations")

    p = add("estimate", ESTIMATE_HELP)
    p.add_argument("--data", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--revis", type=int, choices=(0, 1))

    p = add("counterfactual", COUNTERFACTUAL_HELP)
    p.add_argument("--results", required=True)
    p.add_argument("--scenario", choices=SCENARIOS, required=True)
    p.add_argument("--data")
    p.add_argument("--point")
    return parser


def _apply_env(args: argparse.Namespace, environ) -> None:
    for name in ENV_FLAGS:
        if getattr(args, name, "absent") is None:
            value = environ.get(ENV_PREFIX + name.upper())
            if value:
                setattr(args, name, int(value) if name in ("seed", "workers") else value)


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON: {exc}") from exc


def _model_params(args) -> ModelParams:
    kw = _read_json(args.params) if args.params else {}
    known = {f.name for f in fields(ModelParams)}
    unknown = set(kw) - known
    if unknown:
        raise UsageError(f"unknown model parameters: {sorted(unknown)}")
    for name in known:
        if getattr(args, name, None) is not None:
            kw[name] = getattr(args, name)
    missing = {"delta_C", "delta_F", "rho", "mu", "s"} - set(kw)
    if missing:
        raise UsageError(f"missing model parameters: {sorted(missing)}")
    return ModelParams(**kw)


def _solve_payload(report) -> dict:
    eq = report.accepted
    out = {"params": asdict(report.params), "failure": report.failure,
           "policy": None, "value": None, "dynamics": None, "markup": None,
           "reservation": None, "diagnostics": None}
    if eq is not None:
        diag = asdict(eq.diagnostics)
        diag["valid"] = eq.diagnostics.valid
        out.update(policy=asdict(eq.policy), value=asdict(eq.value),
                   dynamics=asdict(eq.dynamics), markup=eq.markup,
                   reservation=eq.reservation, diagnostics=diag)
    out["candidates"] = [{"e": c.root.e, "theta": c.root.theta, "status": c.status}
                         for c in report.candidates]
    return out


def cmd_solve(args) -> int:
    report = solve(_model_params(args))
    serialize.write_text(args.output, serialize.dumps(_solve_payload(report)))
    if not report.ok:
        print(f"no equilibrium: {report.failure}", file=sys.stderr)
        return 2
    return 0


def cmd_simulate(args) -> int:
    report = solve(_model_params(args))
    if not report.ok:
        raise NoEquilibrium(report)
    path = simulate_path(report.accepted, args.sigma0, args.T)
    rows = ([t, sigma, price] for t, (sigma, price) in enumerate(path))
    serialize.write_text(args.output, serialize.csv_text(["t", "sigma", "price"], rows))
    return 0


def cmd_sweep(args) -> int:
    grid = GridSpec.load(args.grid) if args.grid else GridSpec.default()
    records = run_sweep(grid, workers=args.workers or 1)
    serialize.write_text(args.output, export_text(records, args.format))
    if args.report:
        serialize.write_text(args.report, serialize.dumps(summary_report(records)))
    failed = sum(not r.solved for r in records)
    print(f"{len(records)} points, {failed} without an accepted equilibrium", file=sys.stderr)
    return 0


def cmd_derive(args) -> int:
    if not args.contracts:
        raise UsageError("derive needs --contracts")
    costs = CostTable.load(args.costs) if args.costs else CostTable()
    options = load_contracts(args.contracts)
    derived = [derive_contract(o, costs, weight_form=args.weight_form) for o in options]
    serialize.write_text(args.output, derived_csv(derived))
    return 0


def cmd_synth(args) -> int:
    if args.seed is None:
        raise UsageError("synth needs --seed")
    if len(args.noise) != 3:
        raise UsageError("--noise takes three comma-separated values")
    params = StructuralParams.from_dict(_read_json(args.params)) if args.params else StructuralParams()
    series = load_market_series(args.market) if args.market else default_market_series()
    data = synthesize_dataset(params, series, n=args.n, seed=args.seed,
                              noise=NoiseSpec(*args.noise))
    serialize.write_text(args.output, data.to_csv_text())
    return 0


def cmd_estimate(args) -> int:
    cfg = EstimationConfig.load(args.config) if args.config else EstimationConfig()
    if args.seed is not None:
        cfg = EstimationConfig(**{**asdict(cfg), "seed": args.seed})
    data = Dataset.load(args.data).subset(args.revis)
    result = estimate(data, cfg)
    serialize.write_text(args.output, serialize.dumps(result.to_dict()))
    if not result.converged:
        print("optimizer did not report convergence", file=sys.stderr)
    return 0


def cmd_counterfactual(args) -> int:
    raw = _read_json(args.results)
    params = StructuralParams.from_dict(raw.get("params", raw))
    data = Dataset.load(args.data) if args.data else None
    point = _read_json(args.point) if args.point else None
    cf = counterfactual_margins(params, args.scenario, data=data, point=point)
    serialize.write_text(args.output, serialize.dumps(cf.to_dict()))
    return 0


COMMANDS = {
    "solve": cmd_solve, "simulate": cmd_simulate, "sweep": cmd_sweep,
    "derive": cmd_derive, "synth": cmd_synth, "estimate": cmd_estimate,
    "counterfactual": cmd_counterfactual,
}


def run(argv: Sequence[str] | None = None, environ=None) -> int:
    environ = os.environ if environ is None else environ
    try:
        args = build_parser().parse_args(argv)
        _apply_env(args, environ)
        return COMMANDS[args.command](args)
    except SystemExit as exc:  # --help and --version
        return int(exc.code or 0)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (ModelError, ContractError, DataError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NoEquilibrium, EstimationError, ZeroDivisionError, ArithmeticError) as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
