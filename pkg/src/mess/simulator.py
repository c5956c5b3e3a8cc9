"""The Mess analytical memory simulator.

A feedback controller sits between a core model and a curve family.  During a
window of memory operations every request is served with the same latency.
When the window closes, the controller compares the bandwidth the core really
generated (``cpu_bw``) with its own estimate (``mess_bw``), moves the estimate
part of the way towards the observation, and reads the next latency off the
curve for the observed read ratio.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np

from .curves import CurveFamily
from .devices import (
    KIND_MESS,
    WRITE,
    AnalyticDevice,
    FixedLatencyDevice,
    MD1Device,
    MemoryRequest,
)
from .errors import MessWarning, OracleError, SimulationError

MIN_DEVICE_LATENCY_NS = 1.0

LatencyModel = Union[CurveFamily, AnalyticDevice]


@dataclass
class ControllerConfig:
    window_ops: int = 1000
    conv_factor: float = 0.5
    cpu_latency_ns: float = 0.0
    line_size: Optional[int] = None  # taken from the family when unset
    clamp_fraction: float = 0.999
    initial_latency: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.conv_factor <= 1:
            raise ValueError(f"conv_factor must be in (0, 1], got {self.conv_factor}")
        if self.window_ops < 1:
            raise ValueError("window_ops must be >= 1")
        if self.cpu_latency_ns < 0:
            raise ValueError("cpu_latency_ns must be >= 0")
        if not 0 < self.clamp_fraction <= 1:
            raise ValueError("clamp_fraction must be in (0, 1]")
        if self.initial_latency is not None and not self.initial_latency > 0:
            raise ValueError("initial_latency must be positive")


@dataclass
class ControllerState:
    mess_bw: float
    latency: float
    window_reads: int = 0
    window_writes: int = 0
    window_start_cycle: int = 0
    window_index: int = 0
    saturated: bool = False


@dataclass(frozen=True)
class WindowRecord:
    window_index: int
    cpu_bw: float
    mess_bw: float
    read_ratio: int
    latency_ns: float
    saturated: bool


def read_ratio_pct(reads: int, writes: int) -> int:
    """Nearest integer percent of reads, halves rounded up."""
    total = reads + writes
    return (200 * reads + total) // (2 * total)


class MessController:
    """Windowed proportional controller over a latency model.

    ``model`` is a :class:`CurveFamily` or anything with the same
    ``lookup``/``max_bandwidth``/``top_latency`` surface (e.g. an
    :class:`AnalyticDevice`).
    """

    def __init__(self, model: LatencyModel, config: Optional[ControllerConfig] = None):
        self.model = model
        self.config = config or ControllerConfig()
        self.line_size = self.config.line_size or getattr(model, "line_size", 64)
        self.windows: List[WindowRecord] = []
        self.state = self.init()
        self._mem_latency = self._memory_latency()

    def init(self) -> ControllerState:
        if self.config.initial_latency is not None:
            latency = self.config.initial_latency
        else:
            latency = self.model.lookup(100, 0.0)[0]
        return ControllerState(mess_bw=0.0, latency=latency)

    def _memory_latency(self) -> float:
        lat = self.state.latency - self.config.cpu_latency_ns
        if lat < MIN_DEVICE_LATENCY_NS:
            warnings.warn(
                f"latency {self.state.latency} ns minus CPU latency {self.config.cpu_latency_ns} ns "
                f"is below {MIN_DEVICE_LATENCY_NS} ns; flooring",
                MessWarning,
                stacklevel=3,
            )
            return MIN_DEVICE_LATENCY_NS
        return lat

    def memory_latency(self) -> float:
        """Latency handed to the core for every request of the current window."""
        return self._mem_latency

    def record_access(self, op_kind: str, now_cycle: int, cycle_time_ns: float) -> Optional[WindowRecord]:
        st = self.state
        if op_kind == WRITE:
            st.window_writes += 1
        else:
            st.window_reads += 1
        if st.window_reads + st.window_writes >= self.config.window_ops:
            return self.close_window(now_cycle, cycle_time_ns)
        return None

    def close_window(self, now_cycle: int, cycle_time_ns: float) -> WindowRecord:
        st, cfg = self.state, self.config
        ops = st.window_reads + st.window_writes
        if ops == 0:
            raise SimulationError("cannot close an empty window")
        elapsed = now_cycle - st.window_start_cycle
        if elapsed <= 0:
            raise SimulationError(
                f"window {st.window_index} closed after {elapsed} cycles; bandwidth is undefined"
            )
        cpu_bw = ops * self.line_size / (elapsed * cycle_time_ns)
        ratio = read_ratio_pct(st.window_reads, st.window_writes)
        mess_bw = st.mess_bw + cfg.conv_factor * (cpu_bw - st.mess_bw)
        limit = cfg.clamp_fraction * self.model.max_bandwidth(ratio)
        if mess_bw > limit:
            # Hold the top of the curve; latency back-pressure does the rest.
            mess_bw = limit
            latency = self.model.top_latency(ratio)
            saturated = True
        else:
            latency, saturated = self.model.lookup(ratio, mess_bw)
        record = WindowRecord(st.window_index, cpu_bw, mess_bw, ratio, latency, saturated)
        self.windows.append(record)
        st.mess_bw = mess_bw
        st.latency = latency
        st.saturated = saturated
        st.window_reads = 0
        st.window_writes = 0
        st.window_start_cycle = now_cycle
        st.window_index += 1
        self._mem_latency = self._memory_latency()
        return record

    def finish(self, end_cycle: int, cycle_time_ns: float) -> Optional[WindowRecord]:
        """Close a trailing partial window, if any."""
        if self.state.window_reads + self.state.window_writes == 0:
            return None
        return self.close_window(end_cycle, cycle_time_ns)


class MessDevice:
    """Memory device whose latency comes from a Mess controller."""

    def __init__(self, model: LatencyModel, config: Optional[ControllerConfig] = None):
        self.model = model
        self.config = config or ControllerConfig()
        self.controller = MessController(model, self.config)

    def latency(self, request: MemoryRequest) -> float:
        ctl = self.controller
        lat = ctl._mem_latency
        ctl.record_access(request.op_kind, request.issue_cycle, request.cycle_time_ns)
        return lat

    @property
    def windows(self) -> List[WindowRecord]:
        return self.controller.windows

    @property
    def saturated(self) -> bool:
        return self.controller.state.saturated

    def clamped_since(self, first_window: int = 0) -> bool:
        """True if any window from ``first_window`` on held its estimate at the curve maximum."""
        frac = self.config.clamp_fraction
        return any(
            w.mess_bw >= frac * self.model.max_bandwidth(w.read_ratio)
            for w in self.windows[first_window:]
        )

    def fresh(self) -> "MessDevice":
        return MessDevice(self.model, self.config)

    def _kernel_spec(self):
        if not isinstance(self.model, CurveFamily):
            return None
        fam = self.model
        ratios = np.array(fam.read_ratios, dtype=np.float64)
        offsets = [0]
        bws: List[float] = []
        lats: List[float] = []
        for c in fam.curves.values():
            bws.extend(c.envelope_bandwidths)
            lats.extend(c.envelope_latencies)
            offsets.append(len(bws))
        cfg = self.config
        st = self.controller.state
        params = {
            "ratios": ratios,
            "offsets": np.array(offsets, dtype=np.int64),
            "env_bw": np.array(bws, dtype=np.float64),
            "env_lat": np.array(lats, dtype=np.float64),
            "window_ops": cfg.window_ops,
            "conv_factor": cfg.conv_factor,
            "cpu_latency_ns": cfg.cpu_latency_ns,
            "line_size": self.controller.line_size,
            "clamp_fraction": cfg.clamp_fraction,
        }
        state = (st.mess_bw, st.latency, st.window_reads, st.window_writes,
                 st.window_start_cycle, st.window_index, st.saturated)
        return KIND_MESS, params, state

    def _kernel_restore(self, result):
        state, windows = result
        st = self.controller.state
        (st.mess_bw, st.latency, st.window_reads, st.window_writes,
         st.window_start_cycle, st.window_index, st.saturated) = state
        self.controller.windows.extend(WindowRecord(*w) for w in windows)
        self.controller._mem_latency = self.controller._memory_latency()


# -- fixed-point oracle ------------------------------------------------------

def steady_state_oracle(model, think_ns: float, outstanding: int, line_size: int = 64,
                        read_ratio: float = 100.0, rel_tol: float = 1e-9):
    """Solve ``b = outstanding * line / (think + lat(b))`` by bisection.

    ``model`` may be an :class:`AnalyticDevice`, a :class:`CurveFamily`, a
    :class:`FixedLatencyDevice`, or a plain ``lat(b)`` callable.  Returns
    ``(bandwidth GB/s, latency ns)``.
    """
    if outstanding < 1:
        raise ValueError("outstanding must be >= 1")
    if think_ns < 0:
        raise ValueError("think time must be >= 0")

    bmax = math.inf
    if isinstance(model, AnalyticDevice):
        def lat(b):
            return model.latency_at(b, read_ratio)
        bmax = model.bmax
    elif isinstance(model, CurveFamily):
        def lat(b):
            return model.lookup(read_ratio, b)[0]
        bmax = model.max_bandwidth(read_ratio)
    elif isinstance(model, FixedLatencyDevice):
        def lat(b):
            return model.latency_ns
    elif callable(model):
        lat = model
    else:
        raise TypeError(f"unsupported latency model {model!r}")

    demand = outstanding * line_size

    def excess(b):
        return b - demand / (think_ns + lat(b))

    # Latency never drops below lat(0), so the root is at most demand/(think+lat(0)).
    hi = demand / (think_ns + lat(0.0))
    if hi >= bmax:
        if isinstance(model, AnalyticDevice):
            hi = math.nextafter(bmax, 0.0)
        else:
            hi = bmax
    lo = 0.0
    if excess(hi) < 0:
        raise OracleError(
            f"no steady state below {hi} GB/s: demand exceeds the curve's maximum bandwidth"
        )
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if excess(mid) < 0:
            lo = mid
        else:
            hi = mid
    b = 0.5 * (lo + hi)
    return b, lat(b)


# -- run driver --------------------------------------------------------------

@dataclass
class RunLog:
    windows: List[WindowRecord] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    CSV_HEADER = ("window_index", "cpu_bw_gbps", "mess_bw_gbps", "read_ratio_pct", "latency_ns", "saturated")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_HEADER)
        for r in self.windows:
            w.writerow([r.window_index, repr(r.cpu_bw), repr(r.mess_bw), r.read_ratio,
                        repr(r.latency_ns), int(r.saturated)])
        return buf.getvalue()

    def summary_json(self) -> str:
        return json.dumps(self.summary, indent=2, sort_keys=True) + "\n"


def make_device(mode: str, family: Optional[CurveFamily] = None, config: Optional[ControllerConfig] = None,
                fixed_latency_ns: Optional[float] = None, service_bandwidth: Optional[float] = None,
                base_latency_ns: Optional[float] = None, line_size: int = 64):
    if mode == "mess":
        if family is None:
            raise ValueError("mess mode needs a curve family")
        return MessDevice(family, config)
    if mode == "fixed":
        if fixed_latency_ns is None:
            if family is None:
                raise ValueError("fixed mode needs a latency or a family")
            fixed_latency_ns = family.unloaded_latency()
        return FixedLatencyDevice(fixed_latency_ns)
    if mode == "md1":
        if base_latency_ns is None and family is not None:
            base_latency_ns = family.unloaded_latency()
        if service_bandwidth is None and family is not None:
            service_bandwidth = family.theoretical_max_bandwidth or family.max_bandwidth(100)
        if service_bandwidth is None or base_latency_ns is None:
            raise ValueError("md1 mode needs a service bandwidth and a base latency")
        return MD1Device(service_bandwidth, base_latency_ns, line_size)
    raise ValueError(f"unknown device mode {mode!r}")


def run_simulation(family: Optional[CurveFamily], records: Sequence, config: Optional[ControllerConfig] = None,
                   core=None, device="mess", engine: Optional[str] = None, **device_kwargs) -> RunLog:
    """Drive a trace through a core model against the chosen memory device.

    ``device`` is ``"mess"``, ``"fixed"``, ``"md1"`` or a device instance.
    """
    from .frontend import CoreConfig, run_trace_core

    core = core or CoreConfig()
    if config is None:
        config = ControllerConfig(line_size=core.line_size)
    if isinstance(device, str):
        mode = device
        device = make_device(mode, family, config, line_size=core.line_size, **device_kwargs)
    else:
        mode = type(device).__name__
    records = list(records)
    if not records:
        return RunLog([], _empty_summary(mode))
    stats = run_trace_core(records, core, device, engine=engine)
    windows: List[WindowRecord] = []
    if isinstance(device, MessDevice):
        device.controller.finish(stats.total_cycles, core.cycle_time_ns)
        windows = list(device.windows)
    lat = stats.latencies
    summary = {
        "device": mode,
        "total_cycles": int(stats.total_cycles),
        "total_ops": int(stats.reads + stats.writes),
        "reads": int(stats.reads),
        "writes": int(stats.writes),
        "mean_latency_ns": float(np.mean(lat)),
        "p50_latency_ns": float(np.percentile(lat, 50)),
        "p95_latency_ns": float(np.percentile(lat, 95)),
        "p99_latency_ns": float(np.percentile(lat, 99)),
        "max_latency_ns": float(np.max(lat)),
        "mean_bandwidth_gbps": float(stats.bandwidth),
        "windows": len(windows),
        "saturated_windows": sum(1 for w in windows if w.saturated),
    }
    return RunLog(windows, summary)


def _empty_summary(mode: str) -> dict:
    return {
        "device": mode, "total_cycles": 0, "total_ops": 0, "reads": 0, "writes": 0,
        "mean_latency_ns": 0.0, "p50_latency_ns": 0.0, "p95_latency_ns": 0.0,
        "p99_latency_ns": 0.0, "max_latency_ns": 0.0, "mean_bandwidth_gbps": 0.0,
        "windows": 0, "saturated_windows": 0,
    }
