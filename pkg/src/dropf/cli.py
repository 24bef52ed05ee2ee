"""Command-line entry point: ``dropf {solve,scenario,study}``."""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import sys
from pathlib import Path

from . import __version__, datasets
from .case import NetworkCase, load_case
from .demand import load_elasticity_config, load_profile
from .opf import OpfOptions, solve_opf
from .prices import TariffConfig, load_tariff_config
from .report import MANIFEST_NAME, RunManifest, emit_report, planned_outputs
from .scenario import (
    DEFAULT_GAMMAS,
    Program,
    ScenarioSpec,
    compare_scenarios,
    load_scenario_config,
    run_scenario,
    study_specs,
)

log = logging.getLogger("dropf")

SOLVE_FILES = ["solve_buses.csv", "solve_generators.csv", "solve_branches.csv"]


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--case", default="ieee14", help="case file or bundled name (default: ieee14)")
    common.add_argument("--costs", default=None,
                        help="generator cost table: 'study', 'case' or a JSON path "
                             "(default: study for the bundled case, else case)")
    common.add_argument("--out", type=Path, default=None,
                        help="output directory (default: runs/<timestamp>)")
    common.add_argument("--verbose", action="store_true", help="debug logging and solver diagnostics")

    dr = argparse.ArgumentParser(add_help=False)
    dr.add_argument("--profile", default="default", help="24-hour load profile CSV or 'default'")
    dr.add_argument("--elasticity", default=None, help="elasticity block JSON")
    dr.add_argument("--tariff-config", default=None, help="tariff config JSON")
    dr.add_argument("--baseline-price", type=float, default=None,
                    help="flat pre-program price in $/MWh (overrides the tariff config)")
    dr.add_argument("--workers", type=int, default=1, help="threads for the hourly OPFs")
    dr.add_argument("--config", default=None,
                    help="JSON scenario config; its values act as defaults for the flags above")

    parser = argparse.ArgumentParser(prog="dropf", description=__doc__)
    parser.add_argument("--version", action="version", version=f"dropf {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    parser.subcommands = sub.choices
    sub.add_parser("solve", parents=[common], help="single AC OPF at base load")
    sc = sub.add_parser("scenario", parents=[common, dr], help="one 24-hour scenario")
    sc.add_argument("--tariff", choices=[p.value for p in Program], default="none")
    sc.add_argument("--gamma", type=float, default=0.0, help="participation factor in [0, 1]")
    st = sub.add_parser("study", parents=[common, dr],
                        help="baseline plus TOU and RTP at each participation factor")
    st.add_argument("--gammas", type=float, nargs="+", default=list(DEFAULT_GAMMAS))
    return parser


def _load_case(args) -> tuple[NetworkCase, dict[str, str]]:
    path = datasets.resolve("case", args.case)
    case = load_case(path)
    inputs = {"case": str(path)}
    costs = args.costs or ("study" if args.case in datasets.BUNDLED["case"] else "case")
    if costs != "case":
        cost_path = datasets.resolve("costs", costs)
        case = case.with_costs(datasets.load_cost_table(cost_path))
        inputs["costs"] = str(cost_path)
    return case, inputs


def _load_dr_inputs(args, inputs):
    profile_path = datasets.resolve("profile", args.profile)
    tariff_path = (datasets.resolve("tariff", args.tariff_config) if args.tariff_config
                   else datasets.default_config("tariff"))
    elasticity_path = (datasets.resolve("elasticity", args.elasticity) if args.elasticity
                       else datasets.default_config("elasticity"))
    tariff = load_tariff_config(tariff_path)
    if args.baseline_price is not None:
        tariff = TariffConfig(tariff.period_map, tariff.tou_levels, tariff.rtp_levels,
                              args.baseline_price)
    inputs.update(profile=str(profile_path), tariff_config=str(tariff_path),
                  elasticity=str(elasticity_path))
    E = load_elasticity_config(elasticity_path).matrix(tariff.period_map)
    return load_profile(profile_path), tariff, E


def _out_dir(args) -> Path:
    if args.out is not None:
        return args.out
    return Path("runs") / _dt.datetime.now().strftime("%Y%m%d-%H%M%S")


def _write_rows(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _num(x) -> str:
    return repr(float(x))


def cmd_solve(args) -> int:
    case, inputs = _load_case(args)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    files = [MANIFEST_NAME, *SOLVE_FILES] + (["opf_diagnostics.json"] if args.verbose else [])
    manifest = RunManifest("solve", str(out), ["base_load"], inputs, files)
    manifest.write()

    sol = solve_opf(case, options=OpfOptions(keep_history=args.verbose))
    st = sol.state
    _write_rows(out / "solve_buses.csv", ["bus", "vm_pu", "va_rad", "lmp_per_mwh"],
                [[b.id, _num(st.vm[k]), _num(st.va[k]), _num(sol.lmp[k])]
                 for k, b in enumerate(case.buses)])
    _write_rows(out / "solve_generators.csv", ["gen", "bus", "pg_mw", "qg_mvar", "cost_per_h"],
                [[k + 1, g.bus, _num(st.pg[k]), _num(st.qg[k]),
                  _num(g.cost(st.pg[k]) if g.in_service else 0.0)]
                 for k, g in enumerate(case.generators)])
    _write_rows(out / "solve_branches.csv",
                ["branch", "from_bus", "to_bus", "p_from_mw", "q_from_mvar", "p_to_mw", "q_to_mvar"],
                [[k + 1, br.from_bus, br.to_bus, *map(_num, sol.branch_flows[k])]
                 for k, br in enumerate(case.branches)])
    if args.verbose:
        (out / "opf_diagnostics.json").write_text(json.dumps(sol.diagnostics(), indent=2) + "\n")
    print(f"objective {sol.objective!r} $/h  iterations {sol.iterations}  "
          f"converged {sol.converged}")
    if sol.binding:
        print("binding: " + ", ".join(sol.binding))
    if not sol.converged:
        for name, amount in sol.violations:
            print(f"violation {name}: {amount:.3e} p.u.", file=sys.stderr)
        return 1
    print(f"results written to {out}")
    return 0


def _print_table(results) -> None:
    base = results[0]
    print(f"{'scenario':<12} {'total cost ($)':>18} {'peak (MW)':>12} {'saving (%)':>11}")
    for r in results:
        saving = 0.0 if r is base else compare_scenarios(base, r).percent_saving
        print(f"{r.label:<12} {r.total_cost:>18.6f} {r.modified_profile.peak:>12.4f} {saving:>11.5f}")


def _run_specs(args, specs, command) -> int:
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    labels = [s.label for s in specs]
    manifest = RunManifest(command, str(out), labels, args.inputs, planned_outputs(labels))
    manifest.write()
    results = [run_scenario(spec, workers=args.workers) for spec in specs]
    failed = [r for r in results if not r.ok]
    for r in failed:
        for w in r.warnings:
            print(f"{r.label}: {w}", file=sys.stderr)
    if failed:
        return 1
    emit_report(results, out)
    _print_table(results)
    print(f"results written to {out}")
    return 0


def cmd_scenario(args) -> int:
    case, inputs = _load_case(args)
    profile, tariff, E = _load_dr_inputs(args, inputs)
    args.inputs = inputs
    specs = [ScenarioSpec(case, profile, Program(args.tariff), args.gamma, tariff, E)]
    if specs[0].tariff_kind is not Program.NONE:
        specs.insert(0, ScenarioSpec(case, profile, Program.NONE, 0.0, tariff, E))
    return _run_specs(args, specs, "scenario")


def cmd_study(args) -> int:
    case, inputs = _load_case(args)
    profile, tariff, E = _load_dr_inputs(args, inputs)
    args.inputs = inputs
    return _run_specs(args, study_specs(case, profile, tariff, E, gammas=args.gammas), "study")


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        try:
            config = load_scenario_config(args.config)
        except (OSError, ValueError, RuntimeError) as exc:
            print(f"dropf {args.command}: error: {exc}", file=sys.stderr)
            return 1
        parser.subcommands[args.command].set_defaults(**config)
        args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    log.setLevel(logging.DEBUG if args.verbose else logging.WARNING)
    handler = {"solve": cmd_solve, "scenario": cmd_scenario, "study": cmd_study}[args.command]
    try:
        return handler(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"dropf {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
