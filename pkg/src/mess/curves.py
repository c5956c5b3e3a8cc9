"""Bandwidth-latency curve families.

A family holds one curve per read ratio (percent of reads in the memory
traffic).  Each curve keeps its raw points in measurement order and a derived
Pareto envelope, which is the single-valued latency(bandwidth) map used for
lookups.  Raw points stay available for metrics and plotting.
"""

from __future__ import annotations

import bisect
import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import EmptyInputError, FormatError, MessWarning

CSV_HEADER = ("read_ratio_pct", "bandwidth_gbps", "latency_ns")


@dataclass(frozen=True)
class CurvePoint:
    bandwidth: float  # GB/s
    latency: float  # ns

    def __post_init__(self):
        if not (math.isfinite(self.bandwidth) and math.isfinite(self.latency)):
            raise ValueError(f"non-finite curve point {self}")
        if self.bandwidth < 0:
            raise ValueError(f"negative bandwidth {self.bandwidth}")
        if self.latency <= 0:
            raise ValueError(f"non-positive latency {self.latency}")


def build_envelope(points: Sequence[CurvePoint]) -> List[CurvePoint]:
    """Return the Pareto frontier of ``points`` sorted by bandwidth.

    ``p`` dominates ``q`` when it delivers at least as much bandwidth at no
    more latency (one of them strictly).  The frontier is strictly increasing
    in bandwidth and non-decreasing in latency; every element is one of the
    input points.
    """
    if not points:
        raise ValueError("cannot build an envelope from no points")
    # Highest bandwidth first; among equal bandwidths the lowest latency first.
    ordered = sorted(points, key=lambda p: (-p.bandwidth, p.latency))
    frontier: List[CurvePoint] = []
    best_latency = math.inf
    for p in ordered:
        if p.latency < best_latency:
            frontier.append(p)
            best_latency = p.latency
    frontier.reverse()
    return frontier


@dataclass
class Curve:
    read_ratio: int
    points: List[CurvePoint]
    envelope: List[CurvePoint] = field(default_factory=list)

    def __post_init__(self):
        if not self.points:
            raise ValueError(f"curve {self.read_ratio} has no points")
        if not 0 <= self.read_ratio <= 100:
            raise ValueError(f"read ratio {self.read_ratio} outside 0..100")
        if not self.envelope:
            self.envelope = build_envelope(self.points)
        self._env_bw = [p.bandwidth for p in self.envelope]
        self._env_lat = [p.latency for p in self.envelope]

    @property
    def envelope_bandwidths(self) -> List[float]:
        return self._env_bw

    @property
    def envelope_latencies(self) -> List[float]:
        return self._env_lat

    @property
    def max_bandwidth(self) -> float:
        return self._env_bw[-1]

    def latency_at(self, bandwidth: float) -> Tuple[float, bool]:
        """Piecewise-linear envelope latency at ``bandwidth``.

        Flat below the first point; clamped (and flagged) above the last.
        """
        bws, lats = self._env_bw, self._env_lat
        if bandwidth <= bws[0]:
            return lats[0], False
        if bandwidth > bws[-1]:
            return lats[-1], True
        i = bisect.bisect_left(bws, bandwidth)
        if bws[i] == bandwidth:
            return lats[i], False
        b0, b1 = bws[i - 1], bws[i]
        l0, l1 = lats[i - 1], lats[i]
        w = (bandwidth - b0) / (b1 - b0)
        # min() keeps rounding from stepping above the segment end.
        return min(l0 + w * (l1 - l0), l1), False

    def slopes(self) -> List[float]:
        """dLatency/dBandwidth of each envelope segment (ns per GB/s)."""
        bws, lats = self._env_bw, self._env_lat
        return [(lats[i + 1] - lats[i]) / (bws[i + 1] - bws[i]) for i in range(len(bws) - 1)]


@dataclass
class CurveFamily:
    curves: Dict[int, Curve]
    platform_name: str = "unknown"
    theoretical_max_bandwidth: Optional[float] = None
    line_size: int = 64
    exceeds_theoretical: bool = field(default=False, init=False)

    def __post_init__(self):
        if not self.curves:
            raise EmptyInputError("a curve family needs at least one curve")
        for key, curve in self.curves.items():
            if key != curve.read_ratio:
                raise ValueError(f"curve keyed {key} has read ratio {curve.read_ratio}")
        self.curves = dict(sorted(self.curves.items()))
        self._ratios = list(self.curves)
        if self.theoretical_max_bandwidth is not None:
            if not self.theoretical_max_bandwidth > 0:
                raise ValueError("theoretical_max_bandwidth must be positive")
            peak = max(p.bandwidth for c in self.curves.values() for p in c.points)
            # Simulated systems can exceed the theoretical peak; flag, don't reject.
            self.exceeds_theoretical = peak > self.theoretical_max_bandwidth
        if self.line_size <= 0:
            raise ValueError("line_size must be positive")

    @classmethod
    def from_points(cls, points: Dict[int, Iterable[Tuple[float, float]]], **kwargs) -> "CurveFamily":
        curves = {
            int(ratio): Curve(int(ratio), [CurvePoint(float(b), float(l)) for b, l in pts])
            for ratio, pts in points.items()
        }
        return cls(curves, **kwargs)

    @property
    def read_ratios(self) -> List[int]:
        return self._ratios

    def _bracket(self, read_ratio: float) -> Tuple[Curve, Curve, float]:
        ratios = self._ratios
        if read_ratio <= ratios[0]:
            c = self.curves[ratios[0]]
            return c, c, 0.0
        if read_ratio >= ratios[-1]:
            c = self.curves[ratios[-1]]
            return c, c, 0.0
        i = bisect.bisect_left(ratios, read_ratio)
        if ratios[i] == read_ratio:
            c = self.curves[ratios[i]]
            return c, c, 0.0
        lo, hi = ratios[i - 1], ratios[i]
        return self.curves[lo], self.curves[hi], (read_ratio - lo) / (hi - lo)

    def lookup(self, read_ratio: float, bandwidth: float) -> Tuple[float, bool]:
        """Latency at (read_ratio, bandwidth), bilinear over the envelopes."""
        lo, hi, f = self._bracket(read_ratio)
        lat_lo, sat_lo = lo.latency_at(bandwidth)
        if hi is lo:
            return lat_lo, sat_lo
        lat_hi, sat_hi = hi.latency_at(bandwidth)
        return (1.0 - f) * lat_lo + f * lat_hi, sat_lo or sat_hi

    def max_bandwidth(self, read_ratio: float) -> float:
        lo, hi, f = self._bracket(read_ratio)
        if hi is lo:
            return lo.max_bandwidth
        return (1.0 - f) * lo.max_bandwidth + f * hi.max_bandwidth

    def top_latency(self, read_ratio: float) -> float:
        """Latency at the right-most envelope point, interpolated by ratio."""
        lo, hi, f = self._bracket(read_ratio)
        if hi is lo:
            return lo.envelope_latencies[-1]
        return (1.0 - f) * lo.envelope_latencies[-1] + f * hi.envelope_latencies[-1]

    def unloaded_latency(self) -> float:
        return min(p.latency for c in self.curves.values() for p in c.points)

    def max_envelope_latency(self) -> float:
        return max(c.envelope_latencies[-1] for c in self.curves.values())

    def same_points(self, other: "CurveFamily") -> bool:
        return (
            self.platform_name == other.platform_name
            and self.theoretical_max_bandwidth == other.theoretical_max_bandwidth
            and self.line_size == other.line_size
            and {k: c.points for k, c in self.curves.items()}
            == {k: c.points for k, c in other.curves.items()}
        )


def lookup_latency(family: CurveFamily, read_ratio: float, bandwidth: float) -> Tuple[float, bool]:
    if bandwidth < 0:
        raise ValueError("bandwidth must be non-negative")
    if not 0 <= read_ratio <= 100:
        raise ValueError("read_ratio must be within 0..100")
    return family.lookup(read_ratio, bandwidth)


def max_bandwidth(family: CurveFamily, read_ratio: float) -> float:
    return family.max_bandwidth(read_ratio)


# -- file format -------------------------------------------------------------

def manifest_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".json")


def _parse_number(text: str, row: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ValueError(f"row {row}: not a number: {text!r}") from None
    if not math.isfinite(value):
        raise ValueError(f"row {row}: non-finite value {text!r}")
    return value


def parse_family(lines: Iterable[str], manifest: Optional[dict] = None) -> CurveFamily:
    reader = csv.reader(lines)
    header = next(reader, None)
    if header is None:
        raise EmptyInputError("curve file is empty")
    header = [h.strip() for h in header]
    missing = [c for c in CSV_HEADER if c not in header]
    if missing:
        raise FormatError(f"missing columns: {', '.join(missing)}")
    idx = [header.index(c) for c in CSV_HEADER]

    raw: Dict[int, List[CurvePoint]] = {}
    seen: Dict[Tuple[int, float], float] = {}
    for row_no, row in enumerate(reader, start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) < len(header):
            raise FormatError(f"row {row_no}: expected {len(header)} fields, got {len(row)}")
        ratio_f, bw, lat = (_parse_number(row[i].strip(), row_no) for i in idx)
        if ratio_f != int(ratio_f) or not 0 <= ratio_f <= 100:
            raise ValueError(f"row {row_no}: read ratio must be an integer percent, got {ratio_f}")
        if bw < 0:
            raise ValueError(f"row {row_no}: negative bandwidth {bw}")
        if lat <= 0:
            raise ValueError(f"row {row_no}: non-positive latency {lat}")
        ratio = int(ratio_f)
        prev = seen.get((ratio, bw))
        if prev is not None and prev != lat:
            warnings.warn(
                f"row {row_no}: duplicate point at ratio {ratio}, {bw} GB/s "
                f"({prev} vs {lat} ns); the envelope keeps the lower latency",
                MessWarning,
                stacklevel=2,
            )
        seen[(ratio, bw)] = lat if prev is None else min(prev, lat)
        raw.setdefault(ratio, []).append(CurvePoint(bw, lat))
    if not raw:
        raise EmptyInputError("curve file has no data rows")

    manifest = manifest or {}
    return CurveFamily(
        {r: Curve(r, pts) for r, pts in raw.items()},
        platform_name=manifest.get("platform_name") or "unknown",
        theoretical_max_bandwidth=manifest.get("theoretical_max_bandwidth_gbps"),
        line_size=int(manifest.get("line_size_bytes") or 64),
    )


def load_family(source) -> CurveFamily:
    """Load a curve CSV and its optional sidecar ``.json`` manifest."""
    path = Path(source)
    text = path.read_text(encoding="utf-8")
    if not text.strip():
        raise EmptyInputError(f"{path} is empty")
    mpath = manifest_path(path)
    manifest = None
    if mpath.exists() and mpath != path:
        manifest = json.loads(mpath.read_text(encoding="utf-8"))
    return parse_family(text.splitlines(), manifest)


def _num(x: float) -> str:
    # repr is the shortest text that parses back to the same double.
    return repr(float(x))


def family_to_csv(family: CurveFamily) -> str:
    lines = [",".join(CSV_HEADER)]
    for ratio, curve in family.curves.items():
        for p in curve.points:
            lines.append(f"{ratio},{_num(p.bandwidth)},{_num(p.latency)}")
    return "\n".join(lines) + "\n"


def family_manifest(family: CurveFamily) -> dict:
    return {
        "platform_name": family.platform_name,
        "theoretical_max_bandwidth_gbps": family.theoretical_max_bandwidth,
        "line_size_bytes": family.line_size,
    }


def save_family(family: CurveFamily, path, manifest: bool = True) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(family_to_csv(family))
    if manifest:
        with open(manifest_path(path), "w", encoding="utf-8", newline="\n") as fh:
            json.dump(family_manifest(family), fh, indent=2)
            fh.write("\n")
    return path
