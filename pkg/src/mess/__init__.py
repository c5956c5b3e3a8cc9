"""Mess memory-performance toolkit.

Curve families, metrics, reference memory devices, the Mess feedback
controller, a trace-driven core frontend and a stress-score profiler.
"""

from .curves import (Curve, CurveFamily, CurvePoint, build_envelope, load_family, lookup_latency,
                     max_bandwidth, parse_family, save_family)
from .devices import AnalyticDevice, FixedLatencyDevice, MD1Device, MemoryRequest
from .engine import HAVE_KERNEL
from .errors import (EmptyInputError, FormatError, MessError, MessWarning, OracleError, ParseError,
                     ProtocolError, SaturationError, SimulationError)
from .fixtures import analytic_family, table1_family
from .frontend import (CoreConfig, GeneratorConfig, TraceRecord, characterize, parse_trace,
                       run_generator, run_probe, run_trace_core, write_trace)
from .metrics import FamilyMetrics, family_metrics, saturation_onset
from .profiler import ProfilePoint, ProfileSample, profile, stress_score
from .simulator import (ControllerConfig, MessController, MessDevice, RunLog, WindowRecord,
                        run_simulation, steady_state_oracle)

__version__ = "0.1.0"

__all__ = [
    "Curve", "CurveFamily", "CurvePoint", "build_envelope", "load_family", "lookup_latency",
    "max_bandwidth", "parse_family", "save_family",
    "AnalyticDevice", "FixedLatencyDevice", "MD1Device", "MemoryRequest",
    "HAVE_KERNEL",
    "EmptyInputError", "FormatError", "MessError", "MessWarning", "OracleError", "ParseError",
    "ProtocolError", "SaturationError", "SimulationError",
    "analytic_family", "table1_family",
    "CoreConfig", "GeneratorConfig", "TraceRecord", "characterize", "parse_trace",
    "run_generator", "run_probe", "run_trace_core", "write_trace",
    "FamilyMetrics", "family_metrics", "saturation_onset",
    "ProfilePoint", "ProfileSample", "profile", "stress_score",
    "ControllerConfig", "MessController", "MessDevice", "RunLog", "WindowRecord",
    "run_simulation", "steady_state_oracle",
]
