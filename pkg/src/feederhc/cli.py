"""hc command line: run studies, render reports, generate feeders, solve."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import network as netmod
from .hosting import IntervalIndex
from .network import FeederSpec, NetworkError, apply_configuration
from .power_flow import PowerFlowError, solve
from .reconfiguration import TransferError, enumerate_configurations
from .reporting import (ConfigError, ReportError, REPORT_KINDS,
                        load_run_config, report, run_study)
from .scenarios import PenetrationScenario, apply_penetration, build_default_library

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _cmd_run(args) -> int:
    cfg = load_run_config(args.config)
    out = run_study(cfg, output_dir=args.output_dir)
    print(f"bundle written to {out}")
    return EXIT_OK


def _cmd_report(args) -> int:
    written = report(args.kind, args.bundle, bucket_miles=args.bucket_miles)
    for name in written:
        print(name)
    return EXIT_OK


def _feeder_spec(doc: dict, seed) -> FeederSpec:
    kwargs = dict(doc)
    if seed is not None:
        kwargs["seed"] = seed
    return FeederSpec(**kwargs)


def _cmd_gen_feeder(args) -> int:
    doc = json.loads(Path(args.spec).read_text())
    if "pair" in doc:
        pair = doc["pair"]
        f1 = _feeder_spec(pair["f1"], args.seed)
        f2 = _feeder_spec(pair["f2"], None if args.seed is None else args.seed + 1)
        network = netmod.make_feeder_pair(
            f1, f2,
            tie_length_miles=pair.get("tie_length_miles", 0.2),
            tie_rating_amps=pair.get("tie_rating_amps", 400.0))
        network.configurations.extend(enumerate_configurations(network))
    elif "feeder" in doc:
        network = netmod.generate_synthetic_feeder(_feeder_spec(doc["feeder"], args.seed))
    else:
        raise ConfigError("feeder spec file needs a 'feeder' or 'pair' object")
    netmod.save_network(network, args.out)
    print(f"{len(network.sections)} sections, "
          f"{sum(ld.peak_kw for ld in network.loads) / 1000:.2f} MW peak -> {args.out}")
    return EXIT_OK


REGIME_FLAG = {"classical": "classical", "opflex": "opflex",
               "transfer": "transfer_study"}


def _cmd_solve(args) -> int:
    network = netmod.load_network(args.network)
    interval = IntervalIndex.parse(args.interval)
    view = apply_configuration(network, network.base_configuration())
    ratios = {ld.profile_id: args.min_peak_ratio for ld in network.loads}
    library = build_default_library(ratios)
    net_load = apply_penetration(network, PenetrationScenario(0.0, 0.0), library)
    solution = solve(view, net_load.loads_at(interval))
    if not solution.converged:
        print("power flow did not converge", file=sys.stderr)
        return EXIT_NUMERICAL
    if args.out:
        Path(args.out + "_voltages.csv").write_text(solution.voltages_csv())
        Path(args.out + "_flows.csv").write_text(solution.flows_csv())
        print(f"{args.out}_voltages.csv")
        print(f"{args.out}_flows.csv")
    else:
        print(solution.voltages_csv())
        print(solution.flows_csv())
    if args.regime:
        from .criteria import evaluate, regime_presets
        regime = regime_presets()[REGIME_FLAG[args.regime]]
        for rep in evaluate(solution, solution, view, regime):
            state = "pass" if rep.passed else "FAIL"
            print(f"{rep.criterion.value}: {state} margin={rep.worst_margin:.4g} "
                  f"at {rep.location}")
    return EXIT_OK


def _cmd_transfer(args) -> int:
    from .criteria import regime_presets
    from .hosting import flat_snapshot_hc
    from .reconfiguration import opflex_vs_transfer_diff, transfer_hc_all

    network = netmod.load_network(args.network)
    ratios = {ld.profile_id: args.min_peak_ratio for ld in network.loads}
    library = build_default_library(ratios)
    net_load = apply_penetration(network, PenetrationScenario(0.0, 0.0), library)
    if args.configs == "all":
        configs = network.configurations or enumerate_configurations(network)
    else:
        base = network.base_configuration()
        configs = [netmod.Configuration("base", base.open_switches,
                                        base.closed_switches, 1.0)]
    presets = regime_presets()
    transfer = transfer_hc_all(network, presets["transfer_study"], net_load, configs)
    base_view = apply_configuration(
        network, next(c for c in configs if c.id == "base"))
    opflex = flat_snapshot_hc(base_view, presets["opflex"], net_load)
    diff = opflex_vs_transfer_diff(opflex, transfer, network)

    lines = ["section_id,hc_opflex_kw,hc_transfer_kw,diff_kw"]
    for sid in sorted(diff.per_section):
        o, t, d = diff.per_section[sid]
        lines.append(f"{sid},{o:.1f},{t:.1f},{d:.1f}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(args.out)
    else:
        print(text)
    print(f"total diff {diff.total_diff_kw:.1f} kW over "
          f"{len(diff.per_section)} sections", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hc",
                                description="Feeder hosting-capacity engine")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a study from a run-config file")
    run.add_argument("--config", required=True)
    run.add_argument("--output-dir", default=None)
    run.set_defaults(func=_cmd_run)

    rep = sub.add_parser("report", help="render a report from a results bundle")
    rep.add_argument("--kind", required=True, choices=REPORT_KINDS)
    rep.add_argument("--bundle", required=True)
    rep.add_argument("--bucket-miles", type=float, default=1.0)
    rep.set_defaults(func=_cmd_report)

    gen = sub.add_parser("gen-feeder", help="generate a synthetic feeder or pair")
    gen.add_argument("--spec", required=True)
    gen.add_argument("--seed", type=int, default=None)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=_cmd_gen_feeder)

    sol = sub.add_parser("solve", help="solve one interval on a network file")
    sol.add_argument("--network", required=True)
    sol.add_argument("--interval", required=True, metavar="MM/daytype/HH")
    sol.add_argument("--min-peak-ratio", type=float, default=0.5)
    sol.add_argument("--regime", choices=sorted(REGIME_FLAG), default=None,
                     help="also evaluate the named criteria regime")
    sol.add_argument("--out", default=None)
    sol.set_defaults(func=_cmd_solve)

    tr = sub.add_parser("transfer",
                        help="transfer-analysis HC and the OpFlex diff report")
    tr.add_argument("--network", required=True)
    tr.add_argument("--configs", choices=["all", "base"], default="all")
    tr.add_argument("--min-peak-ratio", type=float, default=0.5)
    tr.add_argument("--out", default=None)
    tr.set_defaults(func=_cmd_transfer)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ReportError, NetworkError, TransferError,
            FileNotFoundError, json.JSONDecodeError, KeyError, TypeError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PowerFlowError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
