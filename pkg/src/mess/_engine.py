"""Discrete-event engine shared by trace cores, probes and traffic generators.

Pure-Python reference implementation.  ``_kernel.pyx`` mirrors this loop
statement for statement; both must produce bit-identical results.

Each issuer owns ``mshr`` slots holding the completion cycle of its last
request in that slot.  A request issues at ``max(ready, earliest slot)`` and
replaces the earliest slot, so no issuer ever has more than ``mshr``
requests in flight.  Events are ordered by ``(cycle, issuer index)``.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .devices import READ, WRITE, MemoryRequest

GEN = 0  # periodic stream: next op ready ``gap`` cycles after the previous issue
TRACE = 1  # per-op delay after the previous issue (non-memory instruction time)
ARRIVAL = 2  # per-op absolute arrival cycle

ADDRESS_MASK = (1 << 64) - 1
LATENCY_EPS = 1e-9


@dataclass
class Issuer:
    kind: int
    mshr: int
    gap: int = 0
    read_ratio: int = 100
    start: int = 0
    limit: int = 0  # ops before the issuer stops; 0 = runs in the background
    measured: bool = False  # limit and recording only count ops after warm-up
    blocking_reads: bool = False
    record: bool = False
    address_base: int = 0
    phase: int = 0  # offset into the read/write pattern (GEN)
    delays: Optional[np.ndarray] = None  # int64, TRACE/ARRIVAL
    writes: Optional[np.ndarray] = None  # uint8, TRACE/ARRIVAL
    addresses: Optional[np.ndarray] = None  # uint64, TRACE/ARRIVAL

    def __post_init__(self):
        if self.mshr < 1:
            raise ValueError("mshr must be >= 1")
        if self.phase < 0:
            raise ValueError("phase must be >= 0")
        if self.kind != GEN:
            n = len(self.delays)
            if self.limit == 0 or self.limit > n:
                self.limit = n
        if self.record and self.limit <= 0:
            raise ValueError("recorded issuers need a finite op limit")


@dataclass
class IssuerStats:
    ops: int = 0
    reads: int = 0
    writes: int = 0
    latency_sum: float = 0.0
    first_issue: int = -1
    last_issue: int = -1
    last_complete: int = 0


@dataclass
class Recording:
    issue: np.ndarray
    complete: np.ndarray
    latency: np.ndarray
    global_index: np.ndarray  # device ops issued before this one


@dataclass
class EngineResult:
    total_ops: int
    end_cycle: int
    stats: List[IssuerStats]
    recordings: Dict[int, Recording] = field(default_factory=dict)


def is_write_op(k: int, read_ratio: int) -> bool:
    """Op ``k`` of a stream is a read iff ceil((k+1)r/100) > ceil(kr/100).

    Spreads reads evenly, so every run of 100/gcd(r, 100) ops holds exactly
    the configured share of reads (ratio 50 alternates R, W, R, W, ...).
    """
    return -((-(k + 1) * read_ratio) // 100) == -((-k * read_ratio) // 100)


def run(issuers: List[Issuer], device, frequency_ghz: float, line_size: int = 64,
        warmup_ops: int = 0) -> EngineResult:
    n = len(issuers)
    cycle_ns = 1.0 / frequency_ghz
    slots = [[0] * iss.mshr for iss in issuers]
    issued = [0] * n
    counted = [0] * n
    stats = [IssuerStats() for _ in issuers]
    rec_buf = {i: ([], [], [], []) for i, iss in enumerate(issuers) if iss.record}
    active = sum(1 for iss in issuers if iss.limit > 0)
    if active == 0:
        raise ValueError("at least one issuer needs a finite op limit")

    heap = []
    for i, iss in enumerate(issuers):
        if iss.kind == GEN:
            ready = iss.start
        elif iss.kind == TRACE:
            ready = iss.start + int(iss.delays[0])
        else:
            ready = int(iss.delays[0])
        heap.append((ready, i))
    heapq.heapify(heap)

    total = 0
    end_cycle = 0
    while heap and active:
        t, i = heapq.heappop(heap)
        iss = issuers[i]
        k = issued[i]
        if iss.kind == GEN:
            write = is_write_op(k + iss.phase, iss.read_ratio)
            addr = (iss.address_base + k * line_size) & ADDRESS_MASK
        else:
            write = bool(iss.writes[k])
            addr = int(iss.addresses[k])
        lat = device.latency(MemoryRequest(WRITE if write else READ, addr, t, cycle_ns))
        lc = math.ceil(lat * frequency_ghz - LATENCY_EPS)
        if lc < 1:
            lc = 1
        done = t + lc

        s = slots[i]
        j = s.index(min(s))
        s[j] = done

        st = stats[i]
        st.ops += 1
        if write:
            st.writes += 1
        else:
            st.reads += 1
        st.latency_sum += lat
        if st.first_issue < 0:
            st.first_issue = t
        st.last_issue = t
        if done > st.last_complete:
            st.last_complete = done
        if done > end_cycle:
            end_cycle = done

        counts = not iss.measured or total >= warmup_ops
        if counts and iss.record:
            b = rec_buf[i]
            b[0].append(t)
            b[1].append(done)
            b[2].append(lat)
            b[3].append(total)
        total += 1
        issued[i] = k + 1
        if counts:
            counted[i] += 1
        if iss.limit > 0 and counted[i] >= iss.limit:
            active -= 1
            continue
        if iss.kind != GEN and k + 1 >= len(iss.delays):
            continue

        base = done if (iss.blocking_reads and not write) else t
        if iss.kind == GEN:
            ready = base + iss.gap
        elif iss.kind == TRACE:
            ready = base + int(iss.delays[k + 1])
        else:
            ready = int(iss.delays[k + 1])
            if ready < base:
                ready = base
        m = min(s)
        heapq.heappush(heap, (ready if ready > m else m, i))

    recordings = {
        i: Recording(
            np.array(b[0], dtype=np.int64),
            np.array(b[1], dtype=np.int64),
            np.array(b[2], dtype=np.float64),
            np.array(b[3], dtype=np.int64),
        )
        for i, b in rec_buf.items()
    }
    return EngineResult(total, end_cycle, stats, recordings)
