"""Memory stress score and scored application timelines.

An application's operating point (read ratio, bandwidth) is placed on a curve
family and scored in [0, 1] as a weighted sum of two normalized terms:

* latency: ``(lookup - unloaded) / (max envelope latency - unloaded)``;
* slope: the running maximum of the envelope segment slope up to the point,
  divided by the curve's maximum segment slope.

Both terms are non-decreasing in bandwidth along a curve, so the score is too.
"""

from __future__ import annotations

import bisect
import csv
import io
import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Tuple

from .curves import Curve, CurveFamily, lookup_latency
from .errors import EmptyInputError, FormatError, MessWarning

GREEN, YELLOW, RED = "green", "yellow", "red"
YELLOW_THRESHOLD = 0.33
RED_THRESHOLD = 0.66
DEFAULT_WEIGHTS = (0.5, 0.5)

TOTAL_HEADER = ("timestamp_us", "total_bw_gbps", "read_ratio_pct")
SPLIT_HEADER = ("timestamp_us", "read_bw_gbps", "write_bw_gbps")
OUTPUT_COLUMNS = ("latency_ns", "stress_score", "bucket", "saturated")


@dataclass(frozen=True)
class ProfileSample:
    timestamp_us: float
    total_bw: float  # GB/s
    read_ratio: float  # percent
    raw: Tuple[str, ...] = field(default=(), compare=False)  # input columns, echoed on output

    def __post_init__(self):
        if not (math.isfinite(self.total_bw) and self.total_bw >= 0):
            raise ValueError(f"bandwidth must be finite and >= 0, got {self.total_bw}")
        if not 0 <= self.read_ratio <= 100:
            raise ValueError(f"read ratio must be within 0..100, got {self.read_ratio}")


@dataclass(frozen=True)
class ProfilePoint:
    sample: ProfileSample
    latency_ns: float
    stress_score: float
    bucket: str
    saturated: bool


def bucket_of(score: float) -> str:
    if score < YELLOW_THRESHOLD:
        return GREEN
    if score < RED_THRESHOLD:
        return YELLOW
    return RED


def _check_weights(weights: Tuple[float, float]) -> Tuple[float, float]:
    w_lat, w_slope = (float(w) for w in weights)
    if w_lat < 0 or w_slope < 0 or not math.isclose(w_lat + w_slope, 1.0, abs_tol=1e-9):
        raise ValueError(f"weights must be >= 0 and sum to 1, got {weights}")
    return w_lat, w_slope


class _CurveSlopes:
    """Running-maximum slope table for one envelope."""

    def __init__(self, curve: Curve):
        self.bws = curve.envelope_bandwidths
        slopes = curve.slopes()
        self.cummax = list(itertools.accumulate(slopes, max))
        self.max_slope = self.cummax[-1] if self.cummax else 0.0

    def norm(self, bandwidth: float) -> float:
        if self.max_slope <= 0 or bandwidth <= self.bws[0]:
            return 0.0
        if bandwidth >= self.bws[-1]:
            return 1.0
        # segment j spans (bws[j], bws[j+1]]
        j = bisect.bisect_left(self.bws, bandwidth) - 1
        if math.isinf(self.max_slope):
            # near-vertical step from a subnormal bandwidth gap: take the limit
            return 1.0 if math.isinf(self.cummax[j]) else 0.0
        return min(self.cummax[j] / self.max_slope, 1.0)


class StressScorer:
    """Precomputed scorer over one family; reuse it for many samples."""

    def __init__(self, family: CurveFamily, weights: Tuple[float, float] = DEFAULT_WEIGHTS):
        self.family = family
        self.weights = _check_weights(weights)
        self.unloaded = family.unloaded_latency()
        self.top = family.max_envelope_latency()
        self.degenerate = not self.top > self.unloaded
        self._slopes: Dict[int, _CurveSlopes] = {r: _CurveSlopes(c) for r, c in family.curves.items()}
        self._warned = False

    def slope_norm(self, read_ratio: float, bandwidth: float) -> float:
        lo, hi, f = self.family._bracket(read_ratio)
        s_lo = self._slopes[lo.read_ratio].norm(bandwidth)
        if hi is lo:
            return s_lo
        return (1.0 - f) * s_lo + f * self._slopes[hi.read_ratio].norm(bandwidth)

    def lat_norm(self, latency: float) -> float:
        return min(max((latency - self.unloaded) / (self.top - self.unloaded), 0.0), 1.0)

    def score(self, read_ratio: float, bandwidth: float) -> Tuple[float, float, bool]:
        """Return (score, latency, saturated) at the operating point."""
        latency, saturated = lookup_latency(self.family, read_ratio, bandwidth)
        if self.degenerate:
            if not self._warned:
                warnings.warn("degenerate family: maximum latency equals unloaded latency; scores are 0",
                              MessWarning, stacklevel=3)
                self._warned = True
            return 0.0, latency, saturated
        w_lat, w_slope = self.weights
        s = w_lat * self.lat_norm(latency) + w_slope * self.slope_norm(read_ratio, bandwidth)
        return min(max(s, 0.0), 1.0), latency, saturated


def stress_score(family: CurveFamily, read_ratio: float, bandwidth: float,
                 weights: Tuple[float, float] = DEFAULT_WEIGHTS) -> float:
    return StressScorer(family, weights).score(read_ratio, bandwidth)[0]


def profile(family: CurveFamily, samples: Sequence[ProfileSample],
            weights: Tuple[float, float] = DEFAULT_WEIGHTS) -> List[ProfilePoint]:
    scorer = StressScorer(family, weights)
    out = []
    for s in samples:
        score, latency, saturated = scorer.score(s.read_ratio, s.total_bw)
        out.append(ProfilePoint(s, latency, score, bucket_of(score), saturated))
    return out


def _float(text: str, row: int, column: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ValueError(f"row {row}: {column} is not a number: {text!r}") from None
    if not math.isfinite(v):
        raise ValueError(f"row {row}: {column} is not finite")
    return v


def parse_samples(lines: Iterable[str]) -> Tuple[Tuple[str, ...], List[ProfileSample]]:
    """Parse a sample CSV, auto-detecting the total/ratio or read/write header.

    With read/write columns, the ratio is ``100 * read / (read + write)``;
    an idle sample (both zero) counts as 100% reads.
    """
    reader = csv.reader(lines)
    header = None
    for row in reader:
        if row and any(c.strip() for c in row):
            header = tuple(c.strip() for c in row)
            break
    if header is None:
        raise EmptyInputError("sample file is empty")
    if header[:3] == TOTAL_HEADER:
        split = False
    elif header[:3] == SPLIT_HEADER:
        split = True
    else:
        raise FormatError(f"unrecognized sample header {','.join(header)!r}; expected "
                          f"{','.join(TOTAL_HEADER)!r} or {','.join(SPLIT_HEADER)!r}")
    samples: List[ProfileSample] = []
    prev_ts = -math.inf
    for row in reader:
        n = reader.line_num
        if not row or not any(c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ValueError(f"row {n}: expected {len(header)} columns, got {len(row)}")
        ts = _float(row[0], n, header[0])
        a = _float(row[1], n, header[1])
        b = _float(row[2], n, header[2])
        if ts < prev_ts:
            raise ValueError(f"row {n}: timestamp {ts:g} goes backwards")
        prev_ts = ts
        if split:
            if a < 0 or b < 0:
                raise ValueError(f"row {n}: negative bandwidth")
            total = a + b
            ratio = 100.0 * a / total if total > 0 else 100.0
        else:
            total, ratio = a, b
        try:
            samples.append(ProfileSample(ts, total, ratio, tuple(c.strip() for c in row)))
        except ValueError as exc:
            raise ValueError(f"row {n}: {exc}") from None
    return header, samples


def format_profile(header: Sequence[str], points: Sequence[ProfilePoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(header) + list(OUTPUT_COLUMNS))
    for p in points:
        raw = list(p.sample.raw) or [repr(p.sample.timestamp_us), repr(p.sample.total_bw), repr(p.sample.read_ratio)]
        w.writerow(raw + [repr(p.latency_ns), repr(p.stress_score), p.bucket, int(p.saturated)])
    return buf.getvalue()


def profile_csv(family: CurveFamily, lines: Iterable[str],
                weights: Tuple[float, float] = DEFAULT_WEIGHTS) -> str:
    header, samples = parse_samples(lines)
    return format_profile(header, profile(family, samples, weights))
