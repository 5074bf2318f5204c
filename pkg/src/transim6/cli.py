"""Command line interface: run, sweep, report, plotdata."""

from __future__ import annotations

import argparse
import sys

from . import harness
from .config import ConfigError, apply_overrides
from .harness import ExpectationError, builtin_data_path


def _add_plr_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--plr-denominator", choices=("received", "sent"),
                        default="received",
                        help="divide packet loss by packets received (default) or sent")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="transim6",
        description="Packet-level comparison of IPv4/IPv6 transition mechanisms")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario")
    p_run.add_argument("--scenario", required=True,
                       help="scenario file path, or a built-in name like paper-default")
    p_run.add_argument("--mechanism", choices=("DWC", "BDSIIT", "DSTM"))
    p_run.add_argument("--traffic", choices=("FTP", "CBR", "MIXED"))
    p_run.add_argument("--packet-size", type=int)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--out", required=True, help="output directory")
    _add_plr_flag(p_run)

    p_sweep = sub.add_parser("sweep", help="run a mechanism x traffic x size sweep")
    p_sweep.add_argument("--spec", required=True,
                         help="sweep spec path, or a built-in name like paper-sweep")
    p_sweep.add_argument("--out", required=True)
    _add_plr_flag(p_sweep)

    p_report = sub.add_parser("report", help="check a sweep report against expectations")
    p_report.add_argument("--check", required=True,
                          help="expectations file path, or a built-in like paper-trends")
    p_report.add_argument("--in", dest="in_dir", required=True,
                          help="sweep output directory containing report.csv")

    p_plot = sub.add_parser("plotdata", help="emit per-figure CSV data from a sweep")
    p_plot.add_argument("--in", dest="in_dir", required=True)
    return parser


def _resolve_builtin(path_text: str, suffix: str) -> str:
    from pathlib import Path
    if Path(path_text).exists():
        return path_text
    builtin = builtin_data_path(f"{path_text}{suffix}")
    if builtin.exists():
        return str(builtin)
    return path_text


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = harness.resolve_scenario(args.scenario)
            cfg = apply_overrides(cfg, mechanism=args.mechanism, traffic=args.traffic,
                                  packet_size=args.packet_size, seed=args.seed)
            report = harness.run(cfg, args.out, args.plr_denominator)
            print(report.csv_row())
            return 0
        if args.command == "sweep":
            spec = harness.load_sweep_spec(_resolve_builtin(args.spec, ".spec"))
            rows = harness.sweep(spec, args.out, args.plr_denominator)
            print(f"{len(rows)} cells -> {args.out}/report.csv")
            from pathlib import Path
            errors = Path(args.out) / "errors.txt"
            if errors.exists():
                sys.stderr.write(errors.read_text())
                return 1
            return 0
        if args.command == "report":
            expect = _resolve_builtin(args.check, ".expect")
            passed, failed = harness.report_check(f"{args.in_dir}/report.csv", expect)
            for line in passed:
                print(f"PASS {line}")
            for line in failed:
                print(f"FAIL {line}")
            print(f"{len(passed)} passed, {len(failed)} failed")
            return 1 if failed else 0
        if args.command == "plotdata":
            written = harness.emit_plotdata(args.in_dir)
            for path in written:
                print(path)
            return 0
    except (ConfigError, ExpectationError, FileNotFoundError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
