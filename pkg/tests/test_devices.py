import pytest

from mess.devices import READ, WRITE, AnalyticDevice, FixedLatencyDevice, MD1Device, MemoryRequest
from mess.errors import ProtocolError, SaturationError

from oracles import analytic_latency, md1_wait


def req(cycle, kind=READ, cycle_ns=0.5):
    return MemoryRequest(kind, 0x40, cycle, cycle_ns)


def test_fixed_latency():
    dev = FixedLatencyDevice(89)
    assert dev.latency(req(0)) == 89
    assert [dev.latency(req(5)), dev.latency(req(5, WRITE))] == [89, 89]


def test_fixed_rejects_non_positive():
    with pytest.raises(ValueError):
        FixedLatencyDevice(0)


def test_md1_empty_queue():
    dev = MD1Device(128, 89)
    assert dev.service_time_ns == 0.5
    assert dev.latency(req(10)) == 89.5


def test_md1_two_simultaneous_arrivals():
    dev = MD1Device(128, 89)
    assert [dev.latency(req(4)), dev.latency(req(4))] == [89.5, 90.0]


def test_md1_critical_load_grows_without_bound():
    # arrivals 1/D apart at exactly the service rate, with a burst of two at the start
    dev = MD1Device(128, 89)
    lats = [dev.latency(MemoryRequest(READ, 0, 0, 1.0))]
    lats += [dev.latency(MemoryRequest(READ, 0, k, 0.5)) for k in range(0, 200)]
    assert all(b >= a for a, b in zip(lats, lats[1:]))


def test_md1_overload_grows_linearly():
    dev = MD1Device(128, 89)
    lats = [dev.latency(req(0)) for _ in range(100)]
    assert lats[-1] == pytest.approx(89 + 100 * 0.5)


def test_md1_arrival_regression():
    dev = MD1Device(128, 89)
    dev.latency(req(10))
    with pytest.raises(ProtocolError):
        dev.latency(req(9))


def test_md1_wait_formula():
    dev = MD1Device(128, 89)
    for rho in (0.0, 0.3, 0.9, 0.99):
        assert dev.wait_formula(rho) == pytest.approx(md1_wait(rho, 0.5))
    with pytest.raises(ValueError):
        dev.wait_formula(1.0)


def test_md1_periodic_arrivals_below_capacity_never_wait():
    dev = MD1Device(128, 89)
    # one request per ns is 64 GB/s, half the service rate, perfectly periodic
    assert {dev.latency(MemoryRequest(READ, 0, k, 1.0)) for k in range(100)} == {89.5}


def test_md1_fresh_resets_queue():
    dev = MD1Device(128, 89)
    for _ in range(10):
        dev.latency(req(0))
    assert dev.fresh().latency(req(0)) == 89.5


def test_analytic_zero_load():
    assert AnalyticDevice(89, 31.2, 128).latency_at(0) == 89


def test_analytic_near_pole():
    lat = AnalyticDevice(89, 31.2, 128).latency_at(116)
    assert lat == pytest.approx(89 + 31.2 * 116 / 12)
    assert lat == pytest.approx(390.6, abs=0.05)


def test_analytic_pole_raises():
    with pytest.raises(SaturationError):
        AnalyticDevice(89, 31.2, 128).latency_at(128)


def test_analytic_read_penalty():
    dev = AnalyticDevice(89, 31.2, 128, read_penalty=0.3)
    for ratio in (50, 70, 100):
        assert dev.latency_at(40, ratio) == pytest.approx(analytic_latency(89, 31.2, 128, 40, ratio, 0.3))
    assert dev.latency_at(0, 50) == pytest.approx(89 * 1.3)


def test_analytic_lookup_surface():
    dev = AnalyticDevice(89, 31.2, 128)
    assert dev.max_bandwidth() == pytest.approx(0.999 * 128)
    assert dev.lookup(100, 10) == (dev.latency_at(10), False)
    lat, sat = dev.lookup(100, 200)
    assert sat and lat == dev.top_latency()


def test_analytic_is_increasing_and_convex():
    dev = AnalyticDevice(89, 31.2, 128)
    bs = [i * 1.27 for i in range(100)]
    lats = [dev.latency_at(b) for b in bs]
    d1 = [b - a for a, b in zip(lats, lats[1:])]
    assert all(x > 0 for x in d1)
    assert all(y >= x for x, y in zip(d1, d1[1:]))


def test_memory_request_time():
    r = MemoryRequest(WRITE, 1, 10, 0.5)
    assert r.is_write and r.time_ns == 5.0
