"""Quantitative memory-system metrics derived from a curve family."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Tuple

from .curves import Curve, CurveFamily


class Onset(NamedTuple):
    bandwidth: float
    saturating: bool  # False when latency never reaches twice the unloaded value


@dataclass
class FamilyMetrics:
    unloaded_latency: float
    max_latency_range: Tuple[float, float]
    saturated_bandwidth_range: Tuple[float, float]
    saturation_onset_per_ratio: Dict[int, float]
    saturating_per_ratio: Dict[int, bool]
    wave_segments_per_ratio: Dict[int, List[Tuple[int, int]]]
    platform_name: str = "unknown"
    theoretical_max_bandwidth: Optional[float] = None

    def to_dict(self) -> dict:
        out = {
            "platform_name": self.platform_name,
            "unloaded_latency_ns": self.unloaded_latency,
            "max_latency_range_ns": list(self.max_latency_range),
            "saturated_bandwidth_range_gbps": list(self.saturated_bandwidth_range),
            "saturation_onset_per_ratio_gbps": {str(k): v for k, v in self.saturation_onset_per_ratio.items()},
            "saturating_per_ratio": {str(k): v for k, v in self.saturating_per_ratio.items()},
            "wave_segments_per_ratio": {
                str(k): [list(s) for s in v] for k, v in self.wave_segments_per_ratio.items()
            },
        }
        if self.theoretical_max_bandwidth:
            lo, hi = self.saturated_bandwidth_range
            peak = self.theoretical_max_bandwidth
            out["theoretical_max_bandwidth_gbps"] = peak
            out["saturated_bandwidth_range_pct"] = [100.0 * lo / peak, 100.0 * hi / peak]
        return out

    def table(self) -> str:
        lat_lo, lat_hi = self.max_latency_range
        bw_lo, bw_hi = self.saturated_bandwidth_range
        rows = [
            ("Platform", self.platform_name),
            ("Unloaded latency", f"{self.unloaded_latency:g} ns"),
            ("Maximum latency range", f"{lat_lo:g}-{lat_hi:g} ns"),
            ("Saturated bandwidth range", f"{bw_lo:.1f}-{bw_hi:.1f} GB/s"),
        ]
        if self.theoretical_max_bandwidth:
            peak = self.theoretical_max_bandwidth
            rows.append(("  % of theoretical", f"{100 * bw_lo / peak:.0f}-{100 * bw_hi / peak:.0f}% of {peak:g} GB/s"))
        for ratio, onset in self.saturation_onset_per_ratio.items():
            note = "" if self.saturating_per_ratio[ratio] else " (never saturates)"
            waves = len(self.wave_segments_per_ratio.get(ratio, []))
            wave_note = f", {waves} wave segment(s)" if waves else ""
            rows.append((f"  onset @ {ratio}% reads", f"{onset:.2f} GB/s{note}{wave_note}"))
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows)


def unloaded_latency(family: CurveFamily) -> float:
    return family.unloaded_latency()


def max_latency_range(family: CurveFamily) -> Tuple[float, float]:
    peaks = [max(p.latency for p in c.points) for c in family.curves.values()]
    return min(peaks), max(peaks)


def saturation_onset(curve: Curve, unloaded: float) -> Onset:
    """Bandwidth where the envelope latency first reaches twice ``unloaded``."""
    if unloaded <= 0:
        raise ValueError("unloaded latency must be positive")
    threshold = 2.0 * unloaded
    bws, lats = curve.envelope_bandwidths, curve.envelope_latencies
    for i, lat in enumerate(lats):
        if lat >= threshold:
            if i == 0:
                return Onset(bws[0], True)
            b0, b1, l0 = bws[i - 1], bws[i], lats[i - 1]
            return Onset(b0 + (threshold - l0) / (lat - l0) * (b1 - b0), True)
    return Onset(bws[-1], False)


def saturated_bandwidth_range(family: CurveFamily) -> Tuple[float, float]:
    unloaded = family.unloaded_latency()
    onsets = [saturation_onset(c, unloaded).bandwidth for c in family.curves.values()]
    return min(onsets), max(c.max_bandwidth for c in family.curves.values())


def wave_segments(curve: Curve, rel_eps: float = 0.0) -> List[Tuple[int, int]]:
    """Index ranges of raw points where bandwidth falls while latency rises.

    Points must be in measurement order.  A step counts only when both changes
    exceed ``rel_eps`` relative to the earlier point.
    """
    pts = curve.points
    segments: List[Tuple[int, int]] = []
    start = None
    for i in range(len(pts) - 1):
        a, b = pts[i], pts[i + 1]
        declining = (
            b.bandwidth < a.bandwidth * (1.0 - rel_eps)
            and b.latency > a.latency * (1.0 + rel_eps)
        )
        if declining:
            if start is None:
                start = i
        elif start is not None:
            segments.append((start, i))
            start = None
    if start is not None:
        segments.append((start, len(pts) - 1))
    return segments


def family_metrics(family: CurveFamily, wave_eps: float = 0.0) -> FamilyMetrics:
    unloaded = family.unloaded_latency()
    onsets = {r: saturation_onset(c, unloaded) for r, c in family.curves.items()}
    return FamilyMetrics(
        unloaded_latency=unloaded,
        max_latency_range=max_latency_range(family),
        saturated_bandwidth_range=saturated_bandwidth_range(family),
        saturation_onset_per_ratio={r: o.bandwidth for r, o in onsets.items()},
        saturating_per_ratio={r: o.saturating for r, o in onsets.items()},
        wave_segments_per_ratio={r: wave_segments(c, wave_eps) for r, c in family.curves.items()},
        platform_name=family.platform_name,
        theoretical_max_bandwidth=family.theoretical_max_bandwidth,
    )
