# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled event engine.

Statement-for-statement port of ``mess._engine.run`` with the fixed-latency,
M/D/1 and Mess-curve devices inlined.  Results are bit-identical to the
Python engine.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport ceil
from libc.stdint cimport int64_t, uint64_t, uint8_t

from .errors import ProtocolError, SimulationError

cnp.import_array()

cdef enum:
    GEN = 0
    TRACE = 1
    ARRIVAL = 2

cdef enum:
    KIND_FIXED = 0
    KIND_MD1 = 1
    KIND_MESS = 2

cdef double LATENCY_EPS = 1e-9
cdef double MIN_DEVICE_LATENCY_NS = 1.0


cdef struct Mess:
    int n_curves
    double *ratios
    int64_t *offsets
    double *env_bw
    double *env_lat
    int64_t window_ops
    double conv_factor
    double cpu_latency_ns
    int64_t line_size
    double clamp_fraction
    double mess_bw
    double latency
    double mem_latency
    int64_t reads
    int64_t writes
    int64_t window_start
    int64_t window_index
    bint saturated


cdef inline bint heap_less(int64_t ta, int64_t ia, int64_t tb, int64_t ib) nogil:
    return ta < tb or (ta == tb and ia < ib)


cdef inline void heap_push(int64_t[::1] ht, int64_t[::1] hi, int64_t *size, int64_t t, int64_t i) nogil:
    cdef int64_t pos = size[0]
    cdef int64_t parent
    size[0] += 1
    while pos > 0:
        parent = (pos - 1) >> 1
        if heap_less(t, i, ht[parent], hi[parent]):
            ht[pos] = ht[parent]
            hi[pos] = hi[parent]
            pos = parent
        else:
            break
    ht[pos] = t
    hi[pos] = i


cdef inline void heap_pop(int64_t[::1] ht, int64_t[::1] hi, int64_t *size, int64_t *t, int64_t *i) nogil:
    cdef int64_t n, pos, child, lt, li
    t[0] = ht[0]
    i[0] = hi[0]
    size[0] -= 1
    n = size[0]
    if n == 0:
        return
    lt = ht[n]
    li = hi[n]
    pos = 0
    while True:
        child = 2 * pos + 1
        if child >= n:
            break
        if child + 1 < n and heap_less(ht[child + 1], hi[child + 1], ht[child], hi[child]):
            child += 1
        if heap_less(ht[child], hi[child], lt, li):
            ht[pos] = ht[child]
            hi[pos] = hi[child]
            pos = child
        else:
            break
    ht[pos] = lt
    hi[pos] = li


cdef double curve_latency(Mess *m, int c, double b, bint *sat) nogil:
    cdef int64_t lo = m.offsets[c]
    cdef int64_t hi = m.offsets[c + 1]
    cdef int64_t a, z, mid
    cdef double b0, b1, l0, l1, w, v
    if b <= m.env_bw[lo]:
        sat[0] = 0
        return m.env_lat[lo]
    if b > m.env_bw[hi - 1]:
        sat[0] = 1
        return m.env_lat[hi - 1]
    sat[0] = 0
    # bisect_left over env_bw[lo:hi]
    a = lo
    z = hi
    while a < z:
        mid = (a + z) >> 1
        if m.env_bw[mid] < b:
            a = mid + 1
        else:
            z = mid
    if m.env_bw[a] == b:
        return m.env_lat[a]
    b0 = m.env_bw[a - 1]
    b1 = m.env_bw[a]
    l0 = m.env_lat[a - 1]
    l1 = m.env_lat[a]
    w = (b - b0) / (b1 - b0)
    v = l0 + w * (l1 - l0)
    if v <= l1:
        return v
    return l1


cdef int bracket(Mess *m, double ratio, double *f) nogil:
    """Index of the lower curve; ``f`` < 0 means a single curve."""
    cdef int n = m.n_curves
    cdef int a, z, mid
    if ratio <= m.ratios[0]:
        f[0] = -1.0
        return 0
    if ratio >= m.ratios[n - 1]:
        f[0] = -1.0
        return n - 1
    a = 0
    z = n
    while a < z:
        mid = (a + z) >> 1
        if m.ratios[mid] < ratio:
            a = mid + 1
        else:
            z = mid
    if m.ratios[a] == ratio:
        f[0] = -1.0
        return a
    f[0] = (ratio - m.ratios[a - 1]) / (m.ratios[a] - m.ratios[a - 1])
    return a - 1


cdef double mess_lookup(Mess *m, double ratio, double b, bint *sat) nogil:
    cdef double f, la, lb
    cdef bint sa, sb
    cdef int c = bracket(m, ratio, &f)
    la = curve_latency(m, c, b, &sa)
    if f < 0:
        sat[0] = sa
        return la
    lb = curve_latency(m, c + 1, b, &sb)
    sat[0] = sa or sb
    return (1.0 - f) * la + f * lb


cdef double mess_max_bandwidth(Mess *m, double ratio) nogil:
    cdef double f
    cdef int c = bracket(m, ratio, &f)
    cdef double ba = m.env_bw[m.offsets[c + 1] - 1]
    if f < 0:
        return ba
    return (1.0 - f) * ba + f * m.env_bw[m.offsets[c + 2] - 1]


cdef double mess_top_latency(Mess *m, double ratio) nogil:
    cdef double f
    cdef int c = bracket(m, ratio, &f)
    cdef double la = m.env_lat[m.offsets[c + 1] - 1]
    if f < 0:
        return la
    return (1.0 - f) * la + f * m.env_lat[m.offsets[c + 2] - 1]


cdef inline void mess_set_mem_latency(Mess *m) nogil:
    m.mem_latency = m.latency - m.cpu_latency_ns
    if m.mem_latency < MIN_DEVICE_LATENCY_NS:
        m.mem_latency = MIN_DEVICE_LATENCY_NS


cdef object mess_close_window(Mess *m, int64_t now, double cycle_ns):
    cdef int64_t ops = m.reads + m.writes
    cdef int64_t elapsed = now - m.window_start
    cdef double cpu_bw, mess_bw, limit, latency
    cdef int64_t ratio
    cdef bint sat
    if elapsed <= 0:
        raise SimulationError(
            f"window {m.window_index} closed after {elapsed} cycles; bandwidth is undefined"
        )
    cpu_bw = <double>(ops * m.line_size) / (<double>elapsed * cycle_ns)
    ratio = (200 * m.reads + ops) // (2 * ops)
    mess_bw = m.mess_bw + m.conv_factor * (cpu_bw - m.mess_bw)
    limit = m.clamp_fraction * mess_max_bandwidth(m, <double>ratio)
    if mess_bw > limit:
        mess_bw = limit
        latency = mess_top_latency(m, <double>ratio)
        sat = 1
    else:
        latency = mess_lookup(m, <double>ratio, mess_bw, &sat)
    rec = (m.window_index, cpu_bw, mess_bw, ratio, latency, bool(sat))
    m.mess_bw = mess_bw
    m.latency = latency
    m.saturated = sat
    m.reads = 0
    m.writes = 0
    m.window_start = now
    m.window_index += 1
    mess_set_mem_latency(m)
    return rec


def run(issuers, device_kind, params, state, double frequency_ghz, int64_t line_size=64,
        int64_t warmup_ops=0):
    """Run the event loop; returns ``(EngineResult fields..., device state)``."""
    cdef int64_t n = len(issuers)
    cdef double cycle_ns = 1.0 / frequency_ghz
    cdef int64_t i, j, k, kp, t, done, lc, ready, mm, total = 0, end_cycle = 0, active = 0
    cdef int64_t hsize = 0
    cdef double lat, arrival, completion
    cdef bint write, counts
    cdef uint64_t addr

    # -- issuer tables
    cdef int64_t[::1] kind = np.empty(n, np.int64)
    cdef int64_t[::1] mshr = np.empty(n, np.int64)
    cdef int64_t[::1] gap = np.empty(n, np.int64)
    cdef int64_t[::1] rratio = np.empty(n, np.int64)
    cdef int64_t[::1] phase = np.empty(n, np.int64)
    cdef int64_t[::1] limit = np.empty(n, np.int64)
    cdef uint8_t[::1] measured = np.empty(n, np.uint8)
    cdef uint8_t[::1] blocking = np.empty(n, np.uint8)
    cdef uint8_t[::1] record = np.empty(n, np.uint8)
    cdef uint64_t[::1] abase = np.empty(n, np.uint64)
    cdef int64_t[::1] slot_off = np.empty(n + 1, np.int64)
    cdef int64_t[::1] tr_off = np.empty(n + 1, np.int64)
    cdef int64_t[::1] issued = np.zeros(n, np.int64)
    cdef int64_t[::1] counted = np.zeros(n, np.int64)
    cdef int64_t[::1] rec_n = np.zeros(n, np.int64)

    slot_off[0] = 0
    tr_off[0] = 0
    delays_l, writes_l, addrs_l = [], [], []
    for i in range(n):
        iss = issuers[i]
        kind[i] = iss.kind
        mshr[i] = iss.mshr
        gap[i] = iss.gap
        rratio[i] = iss.read_ratio
        phase[i] = iss.phase
        limit[i] = iss.limit
        measured[i] = iss.measured
        blocking[i] = iss.blocking_reads
        record[i] = iss.record
        abase[i] = iss.address_base & 0xFFFFFFFFFFFFFFFF
        slot_off[i + 1] = slot_off[i] + iss.mshr
        if iss.kind != GEN:
            delays_l.append(np.ascontiguousarray(iss.delays, dtype=np.int64))
            writes_l.append(np.ascontiguousarray(iss.writes, dtype=np.uint8))
            addrs_l.append(np.ascontiguousarray(iss.addresses, dtype=np.uint64))
            tr_off[i + 1] = tr_off[i] + len(iss.delays)
        else:
            tr_off[i + 1] = tr_off[i]
        if iss.limit > 0:
            active += 1
    if active == 0:
        raise ValueError("at least one issuer needs a finite op limit")

    cdef int64_t[::1] delays = np.concatenate(delays_l) if delays_l else np.zeros(1, np.int64)
    cdef uint8_t[::1] wflags = np.concatenate(writes_l) if writes_l else np.zeros(1, np.uint8)
    cdef uint64_t[::1] addrs = np.concatenate(addrs_l) if addrs_l else np.zeros(1, np.uint64)
    cdef int64_t[::1] slots = np.zeros(slot_off[n], np.int64)

    # -- per-issuer stats
    cdef int64_t[::1] s_ops = np.zeros(n, np.int64)
    cdef int64_t[::1] s_reads = np.zeros(n, np.int64)
    cdef int64_t[::1] s_writes = np.zeros(n, np.int64)
    cdef double[::1] s_lat = np.zeros(n, np.float64)
    cdef int64_t[::1] s_first = np.full(n, -1, np.int64)
    cdef int64_t[::1] s_last = np.full(n, -1, np.int64)
    cdef int64_t[::1] s_done = np.zeros(n, np.int64)

    # -- recordings, one flat buffer sliced per issuer
    cdef int64_t[::1] rec_off = np.zeros(n + 1, np.int64)
    for i in range(n):
        rec_off[i + 1] = rec_off[i] + (limit[i] if record[i] else 0)
    rec_issue_a = np.empty(rec_off[n], np.int64)
    rec_done_a = np.empty(rec_off[n], np.int64)
    rec_lat_a = np.empty(rec_off[n], np.float64)
    rec_gidx_a = np.empty(rec_off[n], np.int64)
    cdef int64_t[::1] r_issue = rec_issue_a
    cdef int64_t[::1] r_done = rec_done_a
    cdef double[::1] r_lat = rec_lat_a
    cdef int64_t[::1] r_gidx = rec_gidx_a

    # -- device
    cdef double fixed_lat = 0.0, md1_base = 0.0, md1_service = 0.0
    cdef double md1_last_arrival = 0.0, md1_last_completion = 0.0
    cdef Mess m
    cdef double[::1] m_ratios, m_bw, m_lat
    cdef int64_t[::1] m_off
    windows = []
    if device_kind == KIND_FIXED:
        fixed_lat = params[0]
    elif device_kind == KIND_MD1:
        md1_base, md1_service = params
        md1_last_arrival, md1_last_completion = state
    elif device_kind == KIND_MESS:
        m_ratios = np.ascontiguousarray(params["ratios"], dtype=np.float64)
        m_off = np.ascontiguousarray(params["offsets"], dtype=np.int64)
        m_bw = np.ascontiguousarray(params["env_bw"], dtype=np.float64)
        m_lat = np.ascontiguousarray(params["env_lat"], dtype=np.float64)
        m.n_curves = m_ratios.shape[0]
        m.ratios = &m_ratios[0]
        m.offsets = &m_off[0]
        m.env_bw = &m_bw[0]
        m.env_lat = &m_lat[0]
        m.window_ops = params["window_ops"]
        m.conv_factor = params["conv_factor"]
        m.cpu_latency_ns = params["cpu_latency_ns"]
        m.line_size = params["line_size"]
        m.clamp_fraction = params["clamp_fraction"]
        (m.mess_bw, m.latency, m.reads, m.writes, m.window_start, m.window_index,
         m.saturated) = state
        mess_set_mem_latency(&m)
    else:
        raise ValueError(f"unknown device kind {device_kind}")

    # -- initial events
    cdef int64_t[::1] ht = np.empty(n, np.int64)
    cdef int64_t[::1] hi = np.empty(n, np.int64)
    for i in range(n):
        iss = issuers[i]
        if kind[i] == GEN:
            ready = iss.start
        elif kind[i] == TRACE:
            ready = iss.start + delays[tr_off[i]]
        else:
            ready = delays[tr_off[i]]
        heap_push(ht, hi, &hsize, ready, i)

    while hsize > 0 and active > 0:
        heap_pop(ht, hi, &hsize, &t, &i)
        k = issued[i]
        if kind[i] == GEN:
            kp = k + phase[i]
            write = ((kp + 1) * rratio[i] + 99) // 100 == (kp * rratio[i] + 99) // 100
            addr = abase[i] + <uint64_t>k * <uint64_t>line_size
        else:
            write = wflags[tr_off[i] + k] != 0
            addr = addrs[tr_off[i] + k]

        if device_kind == KIND_FIXED:
            lat = fixed_lat
        elif device_kind == KIND_MD1:
            arrival = <double>t * cycle_ns
            if arrival < md1_last_arrival:
                raise ProtocolError(
                    f"arrival {arrival} ns precedes previous arrival {md1_last_arrival} ns"
                )
            md1_last_arrival = arrival
            completion = (arrival if arrival >= md1_last_completion else md1_last_completion) + md1_service
            md1_last_completion = completion
            lat = md1_base + (completion - arrival)
        else:
            lat = m.mem_latency
            if write:
                m.writes += 1
            else:
                m.reads += 1
            if m.reads + m.writes >= m.window_ops:
                windows.append(mess_close_window(&m, t, cycle_ns))

        lc = <int64_t>ceil(lat * frequency_ghz - LATENCY_EPS)
        if lc < 1:
            lc = 1
        done = t + lc

        # earliest slot (first on ties)
        j = slot_off[i]
        for mm in range(slot_off[i] + 1, slot_off[i + 1]):
            if slots[mm] < slots[j]:
                j = mm
        slots[j] = done

        s_ops[i] += 1
        if write:
            s_writes[i] += 1
        else:
            s_reads[i] += 1
        s_lat[i] += lat
        if s_first[i] < 0:
            s_first[i] = t
        s_last[i] = t
        if done > s_done[i]:
            s_done[i] = done
        if done > end_cycle:
            end_cycle = done

        counts = (not measured[i]) or total >= warmup_ops
        if counts and record[i]:
            mm = rec_off[i] + rec_n[i]
            r_issue[mm] = t
            r_done[mm] = done
            r_lat[mm] = lat
            r_gidx[mm] = total
            rec_n[i] += 1
        total += 1
        issued[i] = k + 1
        if counts:
            counted[i] += 1
        if limit[i] > 0 and counted[i] >= limit[i]:
            active -= 1
            continue
        if kind[i] != GEN and k + 1 >= tr_off[i + 1] - tr_off[i]:
            continue

        if blocking[i] and not write:
            ready = done
        else:
            ready = t
        if kind[i] == GEN:
            ready = ready + gap[i]
        elif kind[i] == TRACE:
            ready = ready + delays[tr_off[i] + k + 1]
        else:
            if delays[tr_off[i] + k + 1] > ready:
                ready = delays[tr_off[i] + k + 1]
        mm = slots[slot_off[i]]
        for j in range(slot_off[i] + 1, slot_off[i + 1]):
            if slots[j] < mm:
                mm = slots[j]
        heap_push(ht, hi, &hsize, ready if ready > mm else mm, i)

    stats = [
        (s_ops[i], s_reads[i], s_writes[i], s_lat[i], s_first[i], s_last[i], s_done[i])
        for i in range(n)
    ]
    recordings = {}
    for i in range(n):
        if record[i]:
            lo = rec_off[i]
            hi_ = lo + rec_n[i]
            recordings[i] = (rec_issue_a[lo:hi_], rec_done_a[lo:hi_], rec_lat_a[lo:hi_], rec_gidx_a[lo:hi_])
    if device_kind == KIND_MD1:
        dev_state = (md1_last_arrival, md1_last_completion)
    elif device_kind == KIND_MESS:
        dev_state = ((m.mess_bw, m.latency, m.reads, m.writes, m.window_start,
                      m.window_index, bool(m.saturated)), windows)
    else:
        dev_state = None
    return total, end_cycle, stats, recordings, dev_state
