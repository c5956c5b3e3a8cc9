"""Traffic sources for the memory devices.

* Trace-driven cores over two trace styles: ``ramulator`` lines give the
  number of non-memory instructions before each memory operation,
  ``dramsim3`` lines give the cycle at which a request reaches memory.
* A dependent-load latency probe (one request in flight at a time) and
  configurable traffic generators, run together in simulated time to
  characterize any device into a curve family.
"""

from __future__ import annotations

import logging
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, List, Optional, Sequence

import numpy as np

from . import engine as _eng
from ._engine import ARRIVAL, GEN, TRACE, Issuer
from .curves import Curve, CurvePoint, CurveFamily
from .devices import READ, WRITE
from .errors import MessWarning, ParseError, SaturationError, SimulationError

log = logging.getLogger(__name__)

RAMULATOR = "ramulator"
DRAMSIM3 = "dramsim3"
STYLES = (RAMULATOR, DRAMSIM3)

_RAMULATOR_OPS = {"R": READ, "W": WRITE}
_DRAMSIM3_OPS = {"READ": READ, "WRITE": WRITE}


@dataclass(frozen=True, slots=True)
class TraceRecord:
    op_kind: str
    address: int
    nonmem_instructions: Optional[int] = None  # ramulator style
    arrival_cycle: Optional[int] = None  # dramsim3 style

    def __post_init__(self):
        if self.op_kind not in (READ, WRITE):
            raise ValueError(f"op_kind must be {READ!r} or {WRITE!r}, got {self.op_kind!r}")
        if (self.nonmem_instructions is None) == (self.arrival_cycle is None):
            raise ValueError("a trace record has either nonmem_instructions or arrival_cycle")

    @property
    def style(self) -> str:
        return RAMULATOR if self.nonmem_instructions is not None else DRAMSIM3

    @property
    def is_write(self) -> bool:
        return self.op_kind == WRITE


def _parse_int(tok: str, line_no: int, what: str, base: int = 10) -> int:
    try:
        value = int(tok, base)
    except ValueError:
        raise ParseError(line_no, f"bad {what} {tok!r}") from None
    if value < 0:
        raise ParseError(line_no, f"negative {what} {tok!r}")
    return value


def parse_trace_lines(lines: Iterable[str], style: str) -> Iterator[TraceRecord]:
    if style not in STYLES:
        raise ValueError(f"unknown trace style {style!r}")
    last_cycle = -1
    for line_no, line in enumerate(lines, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        fields = text.split()
        if len(fields) != 3:
            raise ParseError(line_no, f"expected 3 fields, got {len(fields)}")
        if style == RAMULATOR:
            nonmem = _parse_int(fields[0], line_no, "instruction count")
            op = _RAMULATOR_OPS.get(fields[1])
            if op is None:
                raise ParseError(line_no, f"expected R or W, got {fields[1]!r}")
            addr = _parse_int(fields[2], line_no, "address", 16)
            yield TraceRecord(op, addr, nonmem_instructions=nonmem)
        else:
            addr = _parse_int(fields[0], line_no, "address", 16)
            op = _DRAMSIM3_OPS.get(fields[1])
            if op is None:
                raise ParseError(line_no, f"expected READ or WRITE, got {fields[1]!r}")
            cycle = _parse_int(fields[2], line_no, "cycle")
            if cycle < last_cycle:
                raise ParseError(line_no, f"cycle {cycle} goes back from {last_cycle}")
            last_cycle = cycle
            yield TraceRecord(op, addr, arrival_cycle=cycle)


def parse_trace(path, style: str) -> Iterator[TraceRecord]:
    """Stream records from a trace file in file order."""
    with open(path, "r", encoding="utf-8") as fh:
        yield from parse_trace_lines(fh, style)


def format_record(rec: TraceRecord, style: str) -> str:
    if style == RAMULATOR:
        if rec.nonmem_instructions is None:
            raise ValueError("ramulator lines need nonmem_instructions")
        return f"{rec.nonmem_instructions} {'W' if rec.is_write else 'R'} {rec.address:#x}"
    if rec.arrival_cycle is None:
        raise ValueError("dramsim3 lines need arrival_cycle")
    return f"{rec.address:#x} {'WRITE' if rec.is_write else 'READ'} {rec.arrival_cycle}"


def format_trace(records: Iterable[TraceRecord], style: str) -> str:
    return "".join(format_record(r, style) + "\n" for r in records)


def write_trace(path, records: Iterable[TraceRecord], style: str) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(format_record(r, style))
            fh.write("\n")
    return path


# -- core model --------------------------------------------------------------

@dataclass
class CoreConfig:
    frequency: float = 2.0  # GHz
    ipc_nonmem: float = 1.0
    mshr_entries: int = 10
    line_size: int = 64
    reads_blocking: bool = False

    def __post_init__(self):
        if not (self.frequency > 0 and self.ipc_nonmem > 0 and self.line_size > 0):
            raise ValueError("core frequency, IPC and line size must be positive")
        if self.mshr_entries < 1:
            raise ValueError("mshr_entries must be >= 1")

    @property
    def cycle_time_ns(self) -> float:
        return 1.0 / self.frequency


@dataclass
class GeneratorConfig:
    streams: int = 1
    read_ratio: int = 100
    inter_request_gap: int = 0  # cycles between issues of one stream
    duration_ops: int = 1000  # per stream

    def __post_init__(self):
        if self.streams < 0:
            raise ValueError("streams must be >= 0")
        if not 0 <= self.read_ratio <= 100:
            raise ValueError("read_ratio must be within 0..100")
        if self.inter_request_gap < 0:
            raise ValueError("inter_request_gap must be >= 0")


@dataclass
class CoreRunStats:
    total_cycles: int
    reads: int
    writes: int
    issue: np.ndarray
    complete: np.ndarray
    latencies: np.ndarray
    bandwidth: float  # GB/s over the whole run


class _CallbackDevice:
    def __init__(self, fn):
        self.fn = fn

    def latency(self, request):
        return self.fn(request)


def _as_device(memory):
    return memory if hasattr(memory, "latency") else _CallbackDevice(memory)


def _trace_issuer(records: Sequence[TraceRecord], core: CoreConfig) -> Issuer:
    style = records[0].style
    n = len(records)
    writes = np.fromiter((r.is_write for r in records), dtype=np.uint8, count=n)
    addresses = np.fromiter((r.address & 0xFFFFFFFFFFFFFFFF for r in records), dtype=np.uint64, count=n)
    if style == RAMULATOR:
        if any(r.nonmem_instructions is None for r in records):
            raise ValueError("mixed trace styles")
        nonmem = np.fromiter((r.nonmem_instructions for r in records), dtype=np.float64, count=n)
        delays = np.ceil(nonmem / core.ipc_nonmem - 1e-9).astype(np.int64)
        delays[delays < 0] = 0
        kind = TRACE
    else:
        if any(r.arrival_cycle is None for r in records):
            raise ValueError("mixed trace styles")
        delays = np.fromiter((r.arrival_cycle for r in records), dtype=np.int64, count=n)
        kind = ARRIVAL
    return Issuer(kind, core.mshr_entries, blocking_reads=core.reads_blocking, record=True,
                  delays=delays, writes=writes, addresses=addresses)


def run_trace_core(records: Sequence[TraceRecord], core: Optional[CoreConfig] = None, memory=None,
                   engine: Optional[str] = None) -> CoreRunStats:
    """Replay a trace through an MSHR-bounded in-order core.

    ``memory`` is a device or a ``latency(request) -> ns`` callable.
    """
    core = core or CoreConfig()
    if memory is None:
        raise ValueError("a memory device is required")
    records = list(records)
    if not records:
        empty = np.zeros(0, np.int64)
        return CoreRunStats(0, 0, 0, empty, empty, np.zeros(0), 0.0)
    issuer = _trace_issuer(records, core)
    res = _eng.run([issuer], _as_device(memory), core.frequency, core.line_size, engine=engine)
    st, rec = res.stats[0], res.recordings[0]
    ops = st.reads + st.writes
    bw = ops * core.line_size / (res.end_cycle * core.cycle_time_ns) if res.end_cycle else 0.0
    return CoreRunStats(res.end_cycle, st.reads, st.writes, rec.issue, rec.complete, rec.latency, bw)


# -- probe and generators ----------------------------------------------------

STREAM_ADDRESS_SHIFT = 40


def _generator_issuers(gen: GeneratorConfig, core: CoreConfig, limit: int, first_id: int = 0) -> List[Issuer]:
    issuers = []
    for s in range(gen.streams):
        issuers.append(Issuer(
            GEN, core.mshr_entries,
            gap=gen.inter_request_gap,
            read_ratio=gen.read_ratio,
            start=(s * gen.inter_request_gap) // gen.streams,  # spread streams over one gap
            limit=limit,
            address_base=(first_id + s + 1) << STREAM_ADDRESS_SHIFT,
            # stagger the read/write pattern so the aggregate mix is steady
            phase=s % 100,
        ))
    return issuers


@dataclass
class ProbeMeasurement:
    latency: float  # mean probe latency, ns
    bandwidth: float  # all device traffic while the probe was measured, GB/s
    latencies: np.ndarray
    issue: np.ndarray
    complete: np.ndarray
    total_ops: int


def measure_loaded_latency(memory, probe_ops: int, gen: Optional[GeneratorConfig] = None,
                           core: Optional[CoreConfig] = None, warmup_ops: int = 0,
                           engine: Optional[str] = None) -> ProbeMeasurement:
    """Run the probe concurrently with background generators."""
    if probe_ops < 1:
        raise ValueError("probe_ops must be >= 1")
    core = core or CoreConfig()
    probe = Issuer(GEN, 1, gap=0, read_ratio=100, limit=probe_ops, measured=True, record=True)
    issuers = [probe]
    if gen is not None and gen.streams:
        issuers += _generator_issuers(gen, core, limit=0)
    res = _eng.run(issuers, _as_device(memory), core.frequency, core.line_size,
                   warmup_ops=warmup_ops, engine=engine)
    rec = res.recordings[0]
    span = int(rec.issue[-1] - rec.issue[0])
    if span > 0:
        ops = int(rec.global_index[-1] - rec.global_index[0])
        bw = ops * core.line_size / (span * core.cycle_time_ns)
    else:
        bw = res.total_ops * core.line_size / (res.end_cycle * core.cycle_time_ns)
    return ProbeMeasurement(float(np.mean(rec.latency)), bw, rec.latency, rec.issue, rec.complete, res.total_ops)


def run_probe(memory, duration_ops: int, gen: Optional[GeneratorConfig] = None,
              core: Optional[CoreConfig] = None, warmup_ops: int = 0,
              engine: Optional[str] = None) -> float:
    """Mean latency of ``duration_ops`` strictly serialized reads."""
    return measure_loaded_latency(memory, duration_ops, gen, core, warmup_ops, engine).latency


def run_generator(memory, gen: GeneratorConfig, core: Optional[CoreConfig] = None,
                  engine: Optional[str] = None) -> float:
    """Aggregate bandwidth (GB/s) of ``gen.streams`` streams run to completion."""
    core = core or CoreConfig()
    if gen.streams == 0 or gen.duration_ops == 0:
        return 0.0
    issuers = _generator_issuers(gen, core, limit=gen.duration_ops)
    res = _eng.run(issuers, _as_device(memory), core.frequency, core.line_size, engine=engine)
    return res.total_ops * core.line_size / (res.end_cycle * core.cycle_time_ns)


# -- characterization --------------------------------------------------------

def _default_warmup(memory) -> int:
    cfg = getattr(memory, "config", None)
    window = getattr(cfg, "window_ops", None)
    # enough controller windows for the estimate to settle
    return 30 * window if window else 2000


def _thread_count(threads: Optional[int]) -> int:
    """Requested threads (default: CPU count, max 8), capped by MESS_THREADS."""
    env = os.environ.get("MESS_THREADS")
    cap = max(1, int(env)) if env else None
    n = threads if threads else (cap or min(8, os.cpu_count() or 1))
    return max(1, min(n, cap) if cap else n)


def characterize_point(memory, ratio: int, gap: int, core: CoreConfig, streams: int,
                       probe_ops: int, warmup_ops: Optional[int] = None,
                       engine: Optional[str] = None) -> ProbeMeasurement:
    """Measure one (bandwidth, latency) point on a fresh device instance."""
    device = memory.fresh()
    if warmup_ops is None:
        warmup_ops = _default_warmup(device)
    gen = GeneratorConfig(streams=streams, read_ratio=ratio, inter_request_gap=gap)
    try:
        m = measure_loaded_latency(device, probe_ops, gen, core, warmup_ops, engine)
    except SimulationError as exc:
        # a whole controller window issued in one cycle: unbounded demand
        raise SaturationError(f"ratio {ratio}, gap {gap}: {exc}") from exc
    # Only a clamped estimate means demand exceeded the device; the lookup
    # flag alone also fires between two curves of different reach.
    if hasattr(device, "clamped_since") and device.clamped_since(warmup_ops // device.config.window_ops):
        raise SaturationError(f"device saturated at ratio {ratio}, gap {gap}")
    return m


DEFAULT_STREAMS = 64
SATURATION_PATIENCE = 3  # consecutive saturated points that end a ratio's sweep
DEFAULT_SWEEP_MSHR = 32


def default_pressure_sweep(max_gap: int = 8192, knee_gap: int = 128, min_gap: int = 16,
                           coarse: float = 1.25, fine: float = 1.02) -> List[int]:
    """Inter-request gaps (cycles) from light to heavy load.

    Coarse geometric steps down to ``knee_gap``, fine steps below it where
    curves bend, and a final gap of 0 (MSHR-bound).  With the default 64
    streams at 2 GHz, demand is ``8192 / gap`` GB/s.
    """
    gaps = {0}
    g = float(max_gap)
    while g > knee_gap:
        gaps.add(int(round(g)))
        g /= coarse
    g = float(knee_gap)
    while g >= min_gap:
        gaps.add(int(round(g)))
        g /= fine
    return sorted(gaps, reverse=True)


def characterize(memory, ratios: Sequence[int], pressure_sweep: Optional[Sequence[int]] = None,
                 core: Optional[CoreConfig] = None, probe_ops: int = 200, streams: int = DEFAULT_STREAMS,
                 warmup_ops: Optional[int] = None, threads: Optional[int] = None,
                 platform_name: str = "characterized", engine: Optional[str] = None) -> CurveFamily:
    """Sweep read ratio and generator pressure; return the measured family.

    Each (ratio, gap) point runs the probe and ``streams`` generators together
    on a fresh copy of ``memory``.  Points are ordered by increasing pressure
    (decreasing gap).  Points where the device saturates are skipped.
    The default core has ``DEFAULT_SWEEP_MSHR`` entries per stream.
    """
    if pressure_sweep is None:
        pressure_sweep = default_pressure_sweep()
    if not ratios or not pressure_sweep:
        raise ValueError("ratio and pressure sweeps must be non-empty")
    core = core or CoreConfig(mshr_entries=DEFAULT_SWEEP_MSHR)
    gaps = sorted(set(int(g) for g in pressure_sweep), reverse=True)

    def sweep(r):
        # Pressure only grows along the sweep, so a run of saturated points
        # means the rest of this ratio would saturate too.
        out, misses = [], 0
        for g in gaps:
            try:
                out.append(((r, g), characterize_point(memory, r, g, core, streams, probe_ops,
                                                       warmup_ops, engine), None))
                misses = 0
            except SaturationError as exc:
                out.append(((r, g), None, str(exc)))
                misses += 1
                if misses >= SATURATION_PATIENCE:
                    break
        return out

    n_threads = min(_thread_count(threads), len(ratios))
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            per_ratio = list(pool.map(sweep, ratios))
    else:
        per_ratio = [sweep(r) for r in ratios]
    results = [item for chunk in per_ratio for item in chunk]

    points = {r: [] for r in ratios}
    for (r, g), m, err in results:
        if m is None:
            warnings.warn(f"skipping sweep point: {err}", MessWarning, stacklevel=2)
            continue
        points[r].append(CurvePoint(m.bandwidth, m.latency))
    curves = {r: Curve(r, pts) for r, pts in points.items() if pts}
    if not curves:
        raise SaturationError("every sweep point saturated the device")
    return CurveFamily(curves, platform_name=platform_name, line_size=core.line_size)
