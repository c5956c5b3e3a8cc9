"""Exit criteria A1-A7; a PASS/FAIL line per criterion is printed in the terminal summary."""

import io
import json
import subprocess
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

from mess.cli import main
from mess.devices import READ, WRITE, AnalyticDevice, FixedLatencyDevice, MD1Device
from mess.errors import MessWarning, ParseError
from mess.frontend import (CoreConfig, TraceRecord, characterize, format_trace, parse_trace, parse_trace_lines,
                           write_trace)
from mess.metrics import saturation_onset
from mess.simulator import ControllerConfig, MessDevice, run_simulation, steady_state_oracle

from oracles import analytic_latency, controller_error, fixed_point, linear_r2, md1_wait

TESTS = Path(__file__).parent


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


@pytest.mark.acceptance("A1", "controller formula and convergence")
def test_A1_controller_convergence(skylake):
    # one 64 B read every 2 cycles at 2 GHz is a constant 64 GB/s demand
    records = [TraceRecord(READ, 64 * k, arrival_cycle=2 * (k + 1)) for k in range(30_000)]
    with Timer() as t:
        log = run_simulation(skylake, records, ControllerConfig(conv_factor=0.5),
                             CoreConfig(mshr_entries=256))
    assert t.elapsed < 1.0
    est = [w.mess_bw for w in log.windows]
    assert all(w.cpu_bw == 64.0 and w.read_ratio == 100 for w in log.windows)
    for i, m in enumerate(est):
        assert abs(m - controller_error(64, 0, 0.5, i + 1)) <= 1e-9 * 64
    errors = [64 - m for m in [0.0] + est]
    for e0, e1 in zip(errors, errors[1:]):
        if e0 > 1e-6:
            assert abs(e1 / e0 - 0.5) < 1e-9
    assert abs(est[19] - 64) < 0.01 * 64


@pytest.mark.acceptance("A2", "closed loop matches the fixed-point oracle")
def test_A2_fixed_point_oracle():
    device = AnalyticDevice(89, 31.2, 128)
    records = [TraceRecord(READ, 64 * k, nonmem_instructions=0) for k in range(20_000)]
    with Timer() as t:
        log = run_simulation(None, records, core=CoreConfig(mshr_entries=1), device=MessDevice(device))
        b_ref, lat_ref = steady_state_oracle(device, 0.0, 1, 64)
    assert t.elapsed < 1.0
    # independent check of the oracle itself
    assert b_ref == pytest.approx(fixed_point(lambda b: analytic_latency(89, 31.2, 128, b), 1, 64, 0, 127.9),
                                  rel=1e-8)
    assert b_ref == pytest.approx(0.718, abs=5e-4) and lat_ref == pytest.approx(89.2, abs=0.05)
    steady = log.windows[-2]
    assert steady.mess_bw == pytest.approx(b_ref, rel=0.02)
    assert steady.cpu_bw == pytest.approx(b_ref, rel=0.02)
    assert steady.latency_ns == pytest.approx(lat_ref, rel=0.02)
    assert log.summary["mean_latency_ns"] == pytest.approx(lat_ref, rel=0.02)


@pytest.mark.acceptance("A3", "characterization round trip")
def test_A3_characterization_round_trip(skylake):
    ratios = list(range(50, 101, 10))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MessWarning)
        with Timer() as t:
            fam = characterize(MessDevice(skylake), ratios)
    assert t.elapsed < 30.0
    unloaded = skylake.unloaded_latency()
    for r in ratios:
        src, got = skylake.curves[r], fam.curves[r]
        onset = saturation_onset(src, unloaded).bandwidth
        below = [p for p in got.envelope if p.bandwidth < onset]
        assert len(below) >= 10
        for p in below:
            assert p.latency == pytest.approx(skylake.lookup(r, p.bandwidth)[0], rel=0.05)
        assert got.max_bandwidth == pytest.approx(src.max_bandwidth, rel=0.03)


@pytest.mark.acceptance("A4", "published platform metrics reproduction")
def test_A4_platform_metrics(tmp_path, capsys):
    path = tmp_path / "skylake.csv"
    assert main(["gen-curves", "--model", "table1", "--platform", "skylake", "--out", str(path)]) == 0
    capsys.readouterr()
    assert main(["metrics", str(path)]) == 0
    out = capsys.readouterr().out
    assert "Unloaded latency" in out and " 89 ns" in out
    assert "242-391 ns" in out
    assert main(["metrics", str(path), "--json"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["unloaded_latency_ns"] == 89
    assert d["max_latency_range_ns"] == [242, 391]
    lo, hi = d["saturated_bandwidth_range_gbps"]
    assert abs(lo - 92.2) <= 0.1 and abs(hi - 116.5) <= 0.1
    assert [round(x) for x in d["saturated_bandwidth_range_pct"]] == [72, 91]


@pytest.mark.acceptance("A5", "fixed-latency and M/D/1 reference devices")
def test_A5_reference_devices():
    # fixed device: flat, knee-free, bandwidth linear in stream count
    streams = list(range(1, 17))
    peaks = []
    for s in streams:
        fam = characterize(FixedLatencyDevice(89), [50, 100], [1024, 256, 64, 0], streams=s,
                           core=CoreConfig(mshr_entries=10))
        for c in fam.curves.values():
            assert all(abs(p.latency - 89) <= 1e-6 for p in c.points)
            assert not saturation_onset(c, 89).saturating
        peaks.append(fam.curves[100].max_bandwidth)
    assert linear_r2(streams, peaks) > 0.999
    # M/D/1: the knee sits at the service bandwidth
    service, base = 128.0, 89.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MessWarning)
        fam = characterize(MD1Device(service, base), [50, 100])
    unloaded = base + 64 / service
    # formula knee: queueing wait equals the unloaded latency
    rho = np.linspace(0, 0.99999, 1_000_001)
    rho_knee = rho[np.argmax(md1_wait(rho, 64 / service) >= unloaded)]
    formula_knee = rho_knee * service
    for c in fam.curves.values():
        onset = saturation_onset(c, min(p.latency for p in c.points))
        assert onset.saturating
        assert onset.bandwidth == pytest.approx(service, rel=0.10)
        assert onset.bandwidth == pytest.approx(formula_knee, rel=0.10)
        assert c.envelope[0].latency == pytest.approx(unloaded)


@pytest.mark.acceptance("A6", "invariant suites under property testing")
def test_A6_property_suites():
    with Timer() as t:
        res = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                              str(TESTS / "test_properties.py")],
                             capture_output=True, text=True, cwd=TESTS.parent)
    assert res.returncode == 0, res.stdout[-3000:]
    assert " passed" in res.stdout and "failed" not in res.stdout
    assert t.elapsed < 120.0


def _trace(style, n, seed):
    rng = np.random.default_rng(seed)
    writes = rng.random(n) < 0.3
    addrs = rng.integers(0, 2 ** 48, n) * 64
    gaps = rng.integers(0, 200, n)
    if style == "ramulator":
        return [TraceRecord(WRITE if w else READ, int(a), nonmem_instructions=int(g))
                for w, a, g in zip(writes, addrs, gaps)]
    cycles = np.cumsum(gaps)
    return [TraceRecord(WRITE if w else READ, int(a), arrival_cycle=int(c)) for w, a, c in zip(writes, addrs, cycles)]


MALFORMED = {
    "ramulator": [
        (["1 R 0x40", "2 W"], 2),
        (["1 R 0x40", "", "# note", "x R 0x40"], 4),
        (["R 1 0x40"], 1),
        (["1 R 0x40", "2 Q 0x40"], 2),
        (["1 R 0x40", "-3 R 0x40"], 2),
        (["1 R 0x40", "2 R 0xzz"], 2),
        (["1 R 0x40 7"], 1),
    ],
    "dramsim3": [
        (["0x40 READ 1", "0x80 READ"], 2),
        (["0x40 READ 5", "0x80 WRITE 4"], 2),
        (["0x40 READ 1", "", "0x80 R 2"], 3),
        (["READ 0x40 1"], 1),
        (["0x40 READ 1", "0x80 WRITE -2"], 2),
        (["0x40 WRITE one"], 1),
    ],
}


@pytest.mark.acceptance("A7", "trace grammar conformance")
def test_A7_trace_grammar(tmp_path):
    for style, seed in (("ramulator", 1), ("dramsim3", 2)):
        records = _trace(style, 100_000, seed)
        text = format_trace(records, style)
        assert text.count("\n") == 100_000
        back = list(parse_trace_lines(io.StringIO(text), style))
        assert back == records
        assert format_trace(back, style) == text
        path = write_trace(tmp_path / f"t.{style}", records, style)
        assert path.read_bytes() == text.encode()
        assert format_trace(parse_trace(path, style), style).encode() == path.read_bytes()
        for lines, line_no in MALFORMED[style]:
            with pytest.raises(ParseError) as exc:
                list(parse_trace_lines(lines, style))
            assert exc.value.line == line_no, (style, lines)
