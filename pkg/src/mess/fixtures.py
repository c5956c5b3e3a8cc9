"""Synthetic curve families.

``table1_family`` builds a family whose metrics reproduce the published
per-platform numbers exactly: unloaded latency, maximum latency range and
saturated bandwidth range.  The construction:

* read ratios 50..100 in steps of 10, interpolating every per-curve anchor
  linearly in ``t = (ratio - 50) / 50``;
* each curve follows ``L0 + (Lmax - L0) * u**16`` over ``u = b / Bmax``,
  flat at low load and rising steeply towards its maximum bandwidth;
* the 50%-read curve hits exactly twice the unloaded latency at its maximum
  bandwidth and then shows a short wave (bandwidth falling, latency rising
  to the low end of the maximum latency range).  That makes its saturation
  onset equal its maximum bandwidth, the low end of the saturated range.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

from .curves import CurveFamily
from .devices import AnalyticDevice

SHAPE_EXPONENT = 16
CURVE_GRID = (
    0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.75, 0.8, 0.85, 0.88,
    0.9, 0.92, 0.94, 0.95, 0.96, 0.97, 0.98, 0.99, 1.0,
)
RATIOS = (50, 60, 70, 80, 90, 100)


@dataclass(frozen=True)
class PlatformRow:
    name: str
    theoretical_bw: float  # GB/s
    saturated_bw: Tuple[float, float]  # GB/s
    unloaded_latency: float  # ns
    max_latency: Tuple[float, float]  # ns


def _pct(theoretical: float, lo: float, hi: float) -> Tuple[float, float]:
    return round(theoretical * lo / 100, 1), round(theoretical * hi / 100, 1)


# Skylake uses the GB/s values also reported for the real system (92-116 GB/s).
PLATFORMS: Dict[str, PlatformRow] = {
    "skylake": PlatformRow("Intel Skylake Xeon Platinum", 128, (92.2, 116.5), 89, (242, 391)),
    "cascadelake": PlatformRow("Intel Cascade Lake Xeon Gold", 128, _pct(128, 68, 87), 85, (182, 303)),
    "zen2": PlatformRow("AMD Zen 2 EPYC 7742", 204, _pct(204, 57, 71), 113, (257, 657)),
    "power9": PlatformRow("IBM Power 9 02CY415", 170, _pct(170, 67, 91), 96, (238, 546)),
    "graviton3": PlatformRow("Amazon Graviton 3", 307, _pct(307, 63, 95), 122, (332, 527)),
    "sapphirerapids": PlatformRow("Intel Sapphire Rapids Xeon Platinum", 307, _pct(307, 60, 86), 109, (238, 406)),
    "a64fx": PlatformRow("Fujitsu A64FX", 1024, _pct(1024, 72, 92), 129, (338, 428)),
    "h100": PlatformRow("NVIDIA Hopper H100", 1631, _pct(1631, 51, 95), 363, (699, 1433)),
}

WRITE_LATENCY_OFFSET = 2.0  # ns added to the unloaded latency of the 50%-read curve


def table1_family(platform: str = "skylake") -> CurveFamily:
    try:
        row = PLATFORMS[platform]
    except KeyError:
        raise ValueError(f"unknown platform {platform!r}; choose from {', '.join(PLATFORMS)}") from None
    bw_lo, bw_hi = row.saturated_bw
    lat_lo, lat_hi = row.max_latency
    doubled = 2.0 * row.unloaded_latency
    points: Dict[int, List[Tuple[float, float]]] = {}
    for ratio in RATIOS:
        t = (ratio - 50) / 50
        l0 = row.unloaded_latency + (1 - t) * WRITE_LATENCY_OFFSET
        bmax = bw_lo + t * (bw_hi - bw_lo)
        lmax = lat_lo + t * (lat_hi - lat_lo)
        wave = ratio == 50 and lat_lo > doubled
        top = doubled if wave else lmax
        pts = [
            (round(bmax * u, 3), round(l0 + (top - l0) * u ** SHAPE_EXPONENT, 2))
            for u in CURVE_GRID
        ]
        if wave:
            pts.append((round(bmax * 0.994, 3), round(0.5 * (doubled + lat_lo), 2)))
            pts.append((round(bmax * 0.988, 3), float(lat_lo)))
        points[ratio] = pts
    return CurveFamily.from_points(
        points,
        platform_name=row.name,
        theoretical_max_bandwidth=float(row.theoretical_bw),
    )


def analytic_family(l0: float, k: float, bmax: float, ratios: Sequence[int] = RATIOS,
                    points: int = 30, read_penalty: float = 0.3,
                    saturation_fraction: float = 0.999) -> CurveFamily:
    """Sample the closed-form device into a family.

    Bandwidths are evenly spaced from 0 to ``saturation_fraction * bmax``;
    write-heavy ratios pay ``1 + read_penalty * (100 - ratio) / 50`` on latency.
    """
    if points < 1:
        raise ValueError("points must be >= 1")
    dev = AnalyticDevice(l0, k, bmax, read_penalty=read_penalty, saturation_fraction=saturation_fraction)
    top = dev.max_bandwidth()
    fam: Dict[int, List[Tuple[float, float]]] = {}
    for ratio in ratios:
        if points == 1:
            bws = [0.0]
        else:
            bws = [top * j / (points - 1) for j in range(points)]
        fam[ratio] = [(b, dev.latency_at(b, ratio)) for b in bws]
    return CurveFamily.from_points(fam, platform_name=f"analytic L0={l0:g} k={k:g} Bmax={bmax:g}")
