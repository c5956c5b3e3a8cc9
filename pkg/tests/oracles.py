"""Independent reference implementations used as test oracles.

Each one is written from the defining formula or by brute force and shares
no code with the package.
"""

import math

import numpy as np
from scipy.optimize import brentq


def dominates(p, q):
    return p[0] >= q[0] and p[1] <= q[1] and (p[0] > q[0] or p[1] < q[1])


def brute_envelope(points):
    """O(n^2) Pareto filter: keep points no other point dominates, one per bandwidth."""
    keep = {p for p in points if not any(dominates(q, p) for q in points)}
    return sorted(keep)


def curve_latency(envelope, b):
    """numpy.interp over the envelope, clamped and flagged above the top."""
    bws = np.array([p[0] for p in envelope])
    lats = np.array([p[1] for p in envelope])
    if b > bws[-1]:
        return float(lats[-1]), True
    return float(np.interp(b, bws, lats)), False


def family_latency(curves, ratio, b):
    """Bilinear lookup over {ratio: envelope} following the interpolation rules."""
    keys = sorted(curves)
    r = min(max(ratio, keys[0]), keys[-1])
    lo = max(k for k in keys if k <= r)
    hi = min(k for k in keys if k >= r)
    lat_lo, sat_lo = curve_latency(curves[lo], b)
    if lo == hi:
        return lat_lo, sat_lo
    lat_hi, sat_hi = curve_latency(curves[hi], b)
    f = (r - lo) / (hi - lo)
    return lat_lo + f * (lat_hi - lat_lo), sat_lo or sat_hi


def md1_wait(rho, service_ns):
    """Pollaczek-Khinchine mean wait for deterministic service."""
    return rho * service_ns / (2.0 * (1.0 - rho))


def controller_error(b_demand, m0, cf, i):
    """Closed-form estimate after i proportional updates towards a constant demand."""
    return b_demand + (m0 - b_demand) * (1.0 - cf) ** i


def fixed_point(lat, outstanding, line, think, b_hi):
    """Root of b = n*line/(think + lat(b)) with Brent's method."""
    return brentq(lambda b: b - outstanding * line / (think + lat(b)), 0.0, b_hi, xtol=1e-14, rtol=1e-13)


def analytic_latency(l0, k, bmax, b, ratio=100, penalty=0.0):
    return (l0 + k * b / (bmax - b)) * (1 + penalty * (100 - ratio) / 50)


def fixed_latency_schedule(ready, latency_cycles, mshr):
    """Issue/complete cycles for one in-order issuer with FIFO-reused MSHR slots.

    With a constant latency, slot reuse order is FIFO, so op k waits for op k-mshr.
    ``ready[k]`` is the earliest issue cycle ignoring MSHRs, as a function of
    the previous issue: callers pass a function ``ready(k, prev_issue)``.
    """
    issue, complete = [], []
    prev = None
    for k in range(len(latency_cycles)):
        t = ready(k, prev)
        if k >= mshr:
            t = max(t, complete[k - mshr])
        issue.append(t)
        complete.append(t + latency_cycles[k])
        prev = t
    return issue, complete


def linear_r2(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot else 1.0


def ceil_cycles(ns, ghz):
    return max(1, math.ceil(ns * ghz - 1e-9))
