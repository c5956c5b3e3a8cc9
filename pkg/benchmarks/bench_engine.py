"""Compare the compiled event engine with the pure-Python fallback.

    python benchmarks/bench_engine.py [--ops N] [--repeat R]

Runs the same random ramulator trace through each device mode on both
engines, checks the outputs match, and prints wall time per engine.
"""

import argparse
import time

import numpy as np

from mess.engine import HAVE_KERNEL
from mess.fixtures import table1_family
from mess.frontend import CoreConfig, GeneratorConfig, TraceRecord, measure_loaded_latency
from mess.simulator import MessDevice, run_simulation


def random_trace(n, seed=1):
    rng = np.random.default_rng(seed)
    gaps = rng.integers(0, 40, n)
    writes = rng.random(n) < 0.3
    addrs = rng.integers(0, 1 << 32, n) * 64
    return [TraceRecord("write" if w else "read", int(a), nonmem_instructions=int(g))
            for g, w, a in zip(gaps, writes, addrs)]


def best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ops", type=int, default=200_000, help="trace length, records")
    ap.add_argument("--repeat", type=int, default=3, help="timed repetitions per case, best is kept")
    args = ap.parse_args()
    if not HAVE_KERNEL:
        raise SystemExit("compiled kernel not built; run `pip install --no-build-isolation -e .` first")

    family = table1_family("skylake")
    records = random_trace(args.ops)
    core = CoreConfig(mshr_entries=10)
    kwargs = {"mess": {}, "md1": {"service_bandwidth": 128.0, "base_latency_ns": 89.0},
              "fixed": {"fixed_latency_ns": 89.0}}

    print(f"{'case':<22}{'python s':>10}{'compiled s':>12}{'speedup':>9}  match")
    for mode, kw in kwargs.items():
        times, csvs = {}, {}
        for engine in ("python", "compiled"):
            t, log = best_of(lambda: run_simulation(family, records, core=core, device=mode,
                                                    engine=engine, **kw), args.repeat)
            times[engine], csvs[engine] = t, (log.to_csv(), log.summary)
        match = csvs["python"] == csvs["compiled"]
        print(f"{'trace/' + mode:<22}{times['python']:>10.3f}{times['compiled']:>12.3f}"
              f"{times['python'] / times['compiled']:>8.1f}x  {match}")

    gen = GeneratorConfig(streams=64, read_ratio=80, inter_request_gap=90)
    core = CoreConfig(mshr_entries=32)
    times, res = {}, {}
    for engine in ("python", "compiled"):
        t, m = best_of(lambda: measure_loaded_latency(MessDevice(family), 200, gen, core, 30_000, engine),
                       args.repeat)
        times[engine], res[engine] = t, (m.latency, m.bandwidth)
    match = res["python"] == res["compiled"]
    print(f"{'probe+64 streams/mess':<22}{times['python']:>10.3f}{times['compiled']:>12.3f}"
          f"{times['python'] / times['compiled']:>8.1f}x  {match}")


if __name__ == "__main__":
    main()
