"""Memory devices: anything that answers "what is the latency of this request now".

Every device implements ``latency(request) -> ns`` and ``fresh()`` (a new,
unused instance with the same configuration).  Devices that the compiled
engine understands also provide ``_kernel_spec()``/``_kernel_restore()``.

The Mess curve device lives in :mod:`mess.simulator` next to its controller.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ProtocolError, SaturationError

READ = "read"
WRITE = "write"

KIND_FIXED = 0
KIND_MD1 = 1
KIND_MESS = 2


@dataclass(frozen=True, slots=True)
class MemoryRequest:
    op_kind: str
    address: int
    issue_cycle: int
    cycle_time_ns: float

    @property
    def is_write(self) -> bool:
        return self.op_kind == WRITE

    @property
    def time_ns(self) -> float:
        return self.issue_cycle * self.cycle_time_ns


class FixedLatencyDevice:
    """Constant latency regardless of load."""

    def __init__(self, latency_ns: float):
        if not latency_ns > 0:
            raise ValueError("fixed latency must be positive")
        self.latency_ns = float(latency_ns)

    def latency(self, request: MemoryRequest) -> float:
        return self.latency_ns

    def fresh(self) -> "FixedLatencyDevice":
        return FixedLatencyDevice(self.latency_ns)

    def _kernel_spec(self):
        return KIND_FIXED, (self.latency_ns,), None

    def _kernel_restore(self, state):
        pass

    def __repr__(self):
        return f"FixedLatencyDevice({self.latency_ns:g} ns)"


class MD1Device:
    """Single FIFO server with a deterministic service time.

    Service time is ``line_size / service_bandwidth``; bytes per ns equals GB/s.
    Reads and writes share the server.
    """

    def __init__(self, service_bandwidth: float, base_latency_ns: float, line_size: int = 64):
        if not (service_bandwidth > 0 and base_latency_ns > 0 and line_size > 0):
            raise ValueError("M/D/1 parameters must be positive")
        self.service_bandwidth = float(service_bandwidth)
        self.base_latency_ns = float(base_latency_ns)
        self.line_size = int(line_size)
        self.service_time_ns = self.line_size / self.service_bandwidth
        self.last_arrival_ns = 0.0
        self.last_completion_ns = 0.0

    def latency(self, request: MemoryRequest) -> float:
        arrival = request.issue_cycle * request.cycle_time_ns
        if arrival < self.last_arrival_ns:
            raise ProtocolError(
                f"arrival {arrival} ns precedes previous arrival {self.last_arrival_ns} ns"
            )
        self.last_arrival_ns = arrival
        completion = max(arrival, self.last_completion_ns) + self.service_time_ns
        self.last_completion_ns = completion
        return self.base_latency_ns + (completion - arrival)

    def wait_formula(self, utilization: float) -> float:
        """Mean queueing wait of an M/D/1 queue, rho*D / (2(1-rho)), in ns."""
        if not 0 <= utilization < 1:
            raise ValueError("utilization must be in [0, 1)")
        return utilization * self.service_time_ns / (2.0 * (1.0 - utilization))

    def fresh(self) -> "MD1Device":
        return MD1Device(self.service_bandwidth, self.base_latency_ns, self.line_size)

    def _kernel_spec(self):
        params = (self.base_latency_ns, self.service_time_ns)
        return KIND_MD1, params, (self.last_arrival_ns, self.last_completion_ns)

    def _kernel_restore(self, state):
        self.last_arrival_ns, self.last_completion_ns = state

    def __repr__(self):
        return f"MD1Device({self.service_bandwidth:g} GB/s, base {self.base_latency_ns:g} ns)"


class AnalyticDevice:
    """Closed-form curve ``latency(b) = L0 + k*b / (Bmax - b)``.

    An optional ``read_penalty`` scales latency by ``1 + penalty*(100-ratio)/50``
    so write-heavy traffic sees higher latency.  The device serves bandwidth up
    to ``saturation_fraction * Bmax``; lookups beyond that are clamped and
    flagged, which lets the Mess controller drive it like a measured family.
    """

    def __init__(self, l0: float, k: float, bmax: float, read_penalty: float = 0.0,
                 saturation_fraction: float = 0.999):
        if not (l0 > 0 and k > 0 and bmax > 0):
            raise ValueError("analytic device parameters must be positive")
        if read_penalty < 0:
            raise ValueError("read_penalty must be non-negative")
        if not 0 < saturation_fraction < 1:
            raise ValueError("saturation_fraction must be in (0, 1)")
        self.l0 = float(l0)
        self.k = float(k)
        self.bmax = float(bmax)
        self.read_penalty = float(read_penalty)
        self.saturation_fraction = saturation_fraction
        self.line_size = 64

    def _factor(self, read_ratio: float) -> float:
        return 1.0 + self.read_penalty * (100.0 - read_ratio) / 50.0

    def latency_at(self, bandwidth: float, read_ratio: float = 100.0) -> float:
        if bandwidth < 0:
            raise ValueError("bandwidth must be non-negative")
        if bandwidth >= self.bmax:
            raise SaturationError(f"{bandwidth} GB/s is at or beyond Bmax={self.bmax} GB/s")
        return (self.l0 + self.k * bandwidth / (self.bmax - bandwidth)) * self._factor(read_ratio)

    # The curve-model surface shared with CurveFamily.
    def max_bandwidth(self, read_ratio: float = 100.0) -> float:
        return self.saturation_fraction * self.bmax

    def top_latency(self, read_ratio: float = 100.0) -> float:
        return self.latency_at(self.max_bandwidth(read_ratio), read_ratio)

    def lookup(self, read_ratio: float, bandwidth: float):
        top = self.max_bandwidth(read_ratio)
        if bandwidth > top:
            return self.latency_at(top, read_ratio), True
        return self.latency_at(bandwidth, read_ratio), False

    def unloaded_latency(self) -> float:
        return self.l0

    def __repr__(self):
        return f"AnalyticDevice(L0={self.l0:g}, k={self.k:g}, Bmax={self.bmax:g})"
