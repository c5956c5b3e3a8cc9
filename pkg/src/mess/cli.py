"""``mess`` command line: metrics, simulate, characterize, profile, gen-curves.

Exit codes: 0 ok, 2 input or format error, 3 simulation error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path
from typing import List, Optional

from .curves import family_manifest, family_to_csv, load_family, save_family
from .devices import AnalyticDevice, FixedLatencyDevice, MD1Device
from .errors import MessError, OracleError, SaturationError, SimulationError
from .fixtures import PLATFORMS, RATIOS, analytic_family, table1_family
from .frontend import (DEFAULT_STREAMS, DEFAULT_SWEEP_MSHR, STYLES, CoreConfig, characterize,
                       default_pressure_sweep, parse_trace)
from .metrics import family_metrics
from .profiler import DEFAULT_WEIGHTS, profile_csv
from .simulator import ControllerConfig, MessDevice, run_simulation

log = logging.getLogger("mess")

EXIT_OK, EXIT_INPUT, EXIT_SIM = 0, 2, 3


class InputError(Exception):
    """Bad command-line input; reported with exit code 2."""


def parse_sweep(text: str, what: str) -> List[int]:
    """``lo:hi:step`` (inclusive) or a comma-separated list of integers."""
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            if len(parts) != 3:
                raise ValueError
            lo, hi, step = parts
            if step <= 0 or hi < lo:
                raise ValueError
            return list(range(lo, hi + 1, step))
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise InputError(f"bad {what} sweep {text!r}; use lo:hi:step or a comma list") from None


def _conv_factor(text: str) -> float:
    v = float(text)
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError(f"conv-factor must be in (0, 1], got {text}")
    return v


def _positive(kind):
    def conv(text: str):
        v = kind(text)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
        return v
    return conv


def _write(text: str, out: Optional[str]):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _add_core_flags(p, mshr_default: int = 10):
    g = p.add_argument_group("core model")
    g.add_argument("--frequency", type=_positive(float), default=2.0, help="core clock in GHz (default 2.0)")
    g.add_argument("--ipc", type=_positive(float), default=1.0,
                   help="non-memory instructions retired per core cycle, in instructions/cycle (default 1.0)")
    g.add_argument("--mshr", type=_positive(int), default=mshr_default,
                   help=f"outstanding memory requests per core or stream, count (default {mshr_default})")
    g.add_argument("--line-size", type=_positive(int), default=64, help="cache line size in bytes (default 64)")
    g.add_argument("--blocking-reads", action="store_true",
                   help="each read blocks the next operation until it completes")


def _core(args) -> CoreConfig:
    return CoreConfig(args.frequency, args.ipc, args.mshr, args.line_size, args.blocking_reads)


def _add_device_flags(p):
    p.add_argument("--fixed-latency", type=_positive(float), help="fixed device latency in ns")
    p.add_argument("--service-bw", type=_positive(float), help="M/D/1 service bandwidth in GB/s")
    p.add_argument("--base-lat", type=_positive(float), help="M/D/1 base latency in ns")


def _add_controller_flags(p):
    p.add_argument("--window", type=_positive(int), default=1000,
                   help="memory operations per controller window, count (default 1000)")
    p.add_argument("--conv-factor", type=_conv_factor, default=0.5,
                   help="controller convergence factor, dimensionless in (0, 1] (default 0.5)")
    p.add_argument("--cpu-latency", type=float, default=0.0,
                   help="latency already modelled by the core, subtracted before use, in ns (default 0)")


def _controller(args) -> ControllerConfig:
    return ControllerConfig(window_ops=args.window, conv_factor=args.conv_factor,
                            cpu_latency_ns=args.cpu_latency, line_size=args.line_size)


# -- subcommands -------------------------------------------------------------

def cmd_metrics(args) -> int:
    m = family_metrics(load_family(args.curves))
    if args.json:
        sys.stdout.write(json.dumps(m.to_dict(), indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(m.table() + "\n")
    return EXIT_OK


def cmd_simulate(args) -> int:
    family = load_family(args.curves) if args.curves else None
    if args.device == "mess" and family is None:
        raise InputError("--device mess needs --curves")
    records = list(parse_trace(args.trace, args.format))
    runlog = run_simulation(
        family, records, _controller(args), _core(args), device=args.device,
        fixed_latency_ns=args.fixed_latency, service_bandwidth=args.service_bw,
        base_latency_ns=args.base_lat,
    )
    if args.out:
        out = Path(args.out)
        out.write_text(runlog.to_csv(), encoding="utf-8")
        out.with_suffix(".json").write_text(runlog.summary_json(), encoding="utf-8")
    else:
        sys.stdout.write(runlog.to_csv())
        sys.stderr.write(runlog.summary_json())
    return EXIT_OK


def _characterize_device(args):
    if args.device == "fixed":
        if args.fixed_latency is None:
            raise InputError("--device fixed needs --fixed-latency")
        return FixedLatencyDevice(args.fixed_latency)
    if args.device == "md1":
        if args.service_bw is None or args.base_lat is None:
            raise InputError("--device md1 needs --service-bw and --base-lat")
        return MD1Device(args.service_bw, args.base_lat, args.line_size)
    if args.device == "mess":
        if not args.curves:
            raise InputError("--device mess needs --curves")
        return MessDevice(load_family(args.curves), _controller(args))
    if args.device == "analytic":
        return MessDevice(AnalyticDevice(args.l0, args.k, args.bmax, args.penalty), _controller(args))
    raise InputError(f"unknown device {args.device!r}")


def cmd_characterize(args) -> int:
    device = _characterize_device(args)
    ratios = parse_sweep(args.ratios, "ratio")
    gaps = parse_sweep(args.pressure, "pressure") if args.pressure else default_pressure_sweep()
    if not ratios or not gaps:
        raise InputError("ratio and pressure sweeps must be non-empty")
    if any(not 0 <= r <= 100 for r in ratios):
        raise InputError("read ratios must be within 0..100")
    if any(g < 0 for g in gaps):
        raise InputError("pressure gaps must be >= 0")
    family = characterize(device, ratios, gaps, core=_core(args), probe_ops=args.probe_ops,
                          streams=args.streams, threads=args.threads,
                          platform_name=f"characterized {args.device}")
    _emit_family(family, args.out)
    return EXIT_OK


def cmd_profile(args) -> int:
    family = load_family(args.curves)
    text = Path(args.samples).read_text(encoding="utf-8")
    _write(profile_csv(family, text.splitlines(), (args.w_lat, 1.0 - args.w_lat)), args.out)
    return EXIT_OK


def cmd_gen_curves(args) -> int:
    if args.model == "table1":
        family = table1_family(args.platform)
    else:
        ratios = parse_sweep(args.ratios, "ratio")
        family = analytic_family(args.l0, args.k, args.bmax, ratios, points=args.points,
                                 read_penalty=args.penalty)
    _emit_family(family, args.out)
    return EXIT_OK


def _emit_family(family, out: Optional[str]):
    if out:
        save_family(family, out)
    else:
        sys.stdout.write(family_to_csv(family))
        log.info("family manifest: %s", json.dumps(family_manifest(family)))


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mess", description="Memory bandwidth-latency curve toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("metrics", help="summarize a curve family")
    p.add_argument("curves", help="curve CSV (read_ratio_pct, bandwidth_gbps, latency_ns)")
    p.add_argument("--json", action="store_true", help="print JSON instead of a table")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("simulate", help="run a memory trace through a core model and memory device")
    p.add_argument("--curves", help="curve CSV for the mess device (also default fixed/md1 parameters)")
    p.add_argument("--trace", required=True, help="memory trace file")
    p.add_argument("--format", choices=STYLES, required=True,
                   help="trace style: ramulator (non-memory instruction count) or dramsim3 (arrival cycle)")
    p.add_argument("--device", choices=("mess", "fixed", "md1"), default="mess", help="memory device model")
    _add_device_flags(p)
    _add_controller_flags(p)
    _add_core_flags(p)
    p.add_argument("--out", help="run-log CSV path; the summary JSON goes next to it (default: stdout/stderr)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("characterize", help="measure a device into a curve family")
    p.add_argument("--device", choices=("md1", "fixed", "mess", "analytic"), required=True,
                   help="device to characterize")
    p.add_argument("--curves", help="curve CSV driving the mess device")
    _add_device_flags(p)
    p.add_argument("--l0", type=_positive(float), default=89.0, help="analytic unloaded latency in ns (default 89)")
    p.add_argument("--k", type=float, default=31.2, help="analytic queueing coefficient in ns (default 31.2)")
    p.add_argument("--bmax", type=_positive(float), default=128.0,
                   help="analytic bandwidth pole in GB/s (default 128)")
    p.add_argument("--penalty", type=float, default=0.3,
                   help="analytic write latency penalty, dimensionless (default 0.3)")
    p.add_argument("--ratios", default="50:100:10", help="read ratios in percent, lo:hi:step or list (default 50:100:10)")
    p.add_argument("--pressure",
                   help="inter-request gaps in core cycles, lo:hi:step or list "
                        "(default: geometric sweep 8192..16 plus 0)")
    p.add_argument("--streams", type=_positive(int), default=DEFAULT_STREAMS,
                   help=f"traffic generator streams, count (default {DEFAULT_STREAMS})")
    p.add_argument("--probe-ops", type=_positive(int), default=200,
                   help="probe loads per sweep point, count (default 200)")
    p.add_argument("--threads", type=_positive(int),
                   help="worker threads, count (default: CPU count, max 8; MESS_THREADS caps it)")
    _add_controller_flags(p)
    _add_core_flags(p, mshr_default=DEFAULT_SWEEP_MSHR)
    p.add_argument("--out", help="curve CSV path; a .json manifest is written next to it (default: stdout)")
    p.set_defaults(func=cmd_characterize)

    p = sub.add_parser("profile", help="score application bandwidth samples against a curve family")
    p.add_argument("--curves", required=True, help="curve CSV")
    p.add_argument("--samples", required=True,
                   help="sample CSV: timestamp_us,total_bw_gbps,read_ratio_pct "
                        "or timestamp_us,read_bw_gbps,write_bw_gbps")
    p.add_argument("--w-lat", type=float, default=DEFAULT_WEIGHTS[0],
                   help="latency weight in [0, 1], dimensionless; the slope weight is 1 - w-lat (default 0.5)")
    p.add_argument("--out", help="scored CSV path (default: stdout)")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("gen-curves", help="write a synthetic curve family")
    p.add_argument("--model", choices=("analytic", "table1"), required=True, help="family generator")
    p.add_argument("--platform", choices=sorted(PLATFORMS), default="skylake", help="table1 platform")
    p.add_argument("--l0", type=_positive(float), default=89.0, help="unloaded latency in ns (default 89)")
    p.add_argument("--k", type=float, default=31.2, help="queueing coefficient in ns (default 31.2)")
    p.add_argument("--bmax", type=_positive(float), default=128.0, help="bandwidth pole in GB/s (default 128)")
    p.add_argument("--penalty", type=float, default=0.3,
                   help="write latency penalty, dimensionless; latency x (1 + penalty*(100-ratio)/50) (default 0.3)")
    p.add_argument("--ratios", default=f"{RATIOS[0]}:{RATIOS[-1]}:10",
                   help="read ratios in percent, lo:hi:step or list (default 50:100:10)")
    p.add_argument("--points", type=_positive(int), default=30, help="points per curve, count (default 30)")
    p.add_argument("--out", help="curve CSV path; a .json manifest is written next to it (default: stdout)")
    p.set_defaults(func=cmd_gen_curves)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    warnings.simplefilter("default")
    try:
        return args.func(args)
    except (SimulationError, SaturationError, OracleError) as exc:
        print(f"mess: simulation error: {exc}", file=sys.stderr)
        return EXIT_SIM
    except (MessError, InputError, ValueError, OSError) as exc:
        print(f"mess: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
