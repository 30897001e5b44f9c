# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled forward-model kernel.

Line-for-line transliteration of ``opdiag._kernel_py``; that module's
docstring documents the model.  Expressions and their evaluation order are
kept identical (and the build disables FP contraction) so both kernels
return bit-identical counters.
"""

from libc.math cimport ceil

DEF MIN_CYCLE_S = 1e-9
DEF DAMPING = 0.5
DEF FP_TOL = 1e-6
DEF FP_MAX_ITER = 100


def evaluate(double[::1] w, double[::1] prof, double[::1] counters, double[::1] extras):
    """Evaluate the forward model on flat arrays; see opdiag._kernel_py."""
    cdef double t_sr = w[0], s_sr = w[1]
    cdef double t_sw = w[2], s_sw = w[3]
    cdef double t_rr = w[4], s_rr = w[5], e_rr = w[6]
    cdef double t_rw = w[7], s_rw = w[8], e_rw = w[9]
    cdef double ram = w[10], aff = w[11]
    cdef int i

    for i in range(12):
        if w[i] < 0.0:
            return 2
    if aff > 1.0:
        return 2
    if s_rr > 0.0 and e_rr < s_rr:
        return 2
    if s_rw > 0.0 and e_rw < s_rw:
        return 2

    cdef double p_ram = prof[0], p_osr = prof[1]
    cdef double p_cmax = prof[2], p_cmin = prof[3]
    cdef double p_pg = prof[4], p_sra = prof[5], p_clus = prof[6]
    cdef double p_df = prof[7], p_tr = prof[8]
    cdef double p_ovs = prof[9], p_ovi = prof[10]
    cdef double p_csc = prof[11], p_cpf = prof[12]
    cdef double p_kap = prof[13], p_del = prof[14]

    cdef double page_io = p_df + p_pg / p_tr

    cdef double raw_short = ram - (p_ram - p_osr - p_cmax)
    if raw_short < 0.0:
        raw_short = 0.0
    cdef double cache = p_cmax - raw_short
    if cache < p_cmin:
        cache = p_cmin
    if cache > p_cmax:
        cache = p_cmax
    cdef double avail = p_ram - p_osr - cache
    cdef double short = ram - avail
    if short < 0.0:
        short = 0.0
    cdef double pages_per_op_raw = p_kap * (short / p_pg)

    cdef bint active_sr = s_sr > 0.0
    cdef bint active_sw = s_sw > 0.0
    cdef bint active_rr = s_rr > 0.0
    cdef bint active_rw = s_rw > 0.0
    cdef int n_active = (1 if active_sr else 0) + (1 if active_sw else 0) \
        + (1 if active_rr else 0) + (1 if active_rw else 0)

    cdef double h_sr = 0.0, os_sr = 0.0, sync_sr = 0.0, ra_ratio = 0.0
    if active_sr:
        ra_ratio = s_sr / p_sra
        h_sr = 1.0 - ra_ratio
        if h_sr < 0.0:
            h_sr = 0.0
        os_sr = p_csc + ra_ratio * (p_ovi + p_ovs * p_sra)
        sync_sr = ra_ratio * (p_df + p_sra / p_tr)

    cdef double os_sw = 0.0, flush_sw = 0.0
    if active_sw:
        os_sw = p_csc + (p_ovi + p_ovs * s_sw)
        flush_sw = s_sw * (p_df / p_clus + 1.0 / p_tr)

    cdef double h_rr = 0.0, os_rr = 0.0, sync_rr = 0.0, miss_rr = 0.0, trans_rr = 0.0
    if active_rr:
        h_rr = cache / e_rr
        if h_rr > 1.0:
            h_rr = 1.0
        miss_rr = 1.0 - h_rr
        trans_rr = ceil(s_rr / p_pg) * p_pg
        os_rr = p_csc + miss_rr * (p_ovi + p_ovs * trans_rr)
        sync_rr = miss_rr * (p_df + trans_rr / p_tr)

    # Random writes land scattered, so the lazy writer cannot coalesce them
    # into clusters: they flush as positioned page-sized I/Os.
    cdef double os_rw = 0.0, flush_rw = 0.0
    if active_rw:
        os_rw = p_csc + (p_ovi + p_ovs * s_rw)
        flush_rw = s_rw * (p_df / p_pg + 1.0 / p_tr)

    cdef double base_sr = t_sr + os_sr + sync_sr
    cdef double base_sw = t_sw + os_sw
    cdef double base_rr = t_rr + os_rr + sync_rr
    cdef double base_rw = t_rw + os_rw
    if active_sr and base_sr < MIN_CYCLE_S:
        return 3
    if active_sw and base_sw < MIN_CYCLE_S:
        return 3
    if active_rr and base_rr < MIN_CYCLE_S:
        return 3
    if active_rw and base_rw < MIN_CYCLE_S:
        return 3

    cdef double stall_per_page = p_cpf + aff * page_io
    cdef double page_cap = 1.0 / page_io

    cdef double pages_per_op = 0.0
    cdef double prev[14]
    for i in range(14):
        prev[i] = 0.0
    cdef int status = 1
    cdef int iterations = 0

    cdef double x_sr = 0.0, x_sw = 0.0, x_rr = 0.0, x_rw = 0.0
    cdef double busy_cpu = 0.0, busy_disk = 0.0, scale = 1.0
    cdef double pin = 0.0, pout = 0.0
    cdef double stall, disk_shared, cyc, work
    cdef double sum_x, pct_user, pct_priv, write_bytes, reads
    cdef double hits_pct, cache_faults, target, ref, delta
    cdef int iteration
    cdef bint converged

    for iteration in range(1, FP_MAX_ITER + 1):
        iterations = iteration
        stall = pages_per_op * stall_per_page
        disk_shared = pages_per_op * aff * page_io * (1.0 + p_del)
        x_sr = 0.0; x_sw = 0.0; x_rr = 0.0; x_rw = 0.0
        if active_sr:
            cyc = base_sr + stall
            work = sync_sr + disk_shared
            x_sr = 1.0 / (cyc if cyc > work else work)
        if active_sw:
            cyc = base_sw + stall
            work = flush_sw + disk_shared
            x_sw = 1.0 / (cyc if cyc > work else work)
        if active_rr:
            cyc = base_rr + stall
            work = sync_rr + disk_shared
            x_rr = 1.0 / (cyc if cyc > work else work)
        if active_rw:
            cyc = base_rw + stall
            work = flush_rw + disk_shared
            x_rw = 1.0 / (cyc if cyc > work else work)
        sum_x = x_sr + x_sw + x_rr + x_rw

        busy_cpu = (
            x_sr * (t_sr + os_sr)
            + x_sw * (t_sw + os_sw)
            + x_rr * (t_rr + os_rr)
            + x_rw * (t_rw + os_rw)
            + sum_x * pages_per_op * p_cpf
        )
        busy_disk = (
            x_sr * sync_sr
            + x_rr * sync_rr
            + x_sw * flush_sw
            + x_rw * flush_rw
            + sum_x * pages_per_op * aff * page_io * (1.0 + p_del)
        )
        scale = 1.0
        if busy_cpu > scale:
            scale = busy_cpu
        if busy_disk > scale:
            scale = busy_disk
        x_sr /= scale
        x_sw /= scale
        x_rr /= scale
        x_rw /= scale
        sum_x /= scale

        pin = pages_per_op * sum_x
        pout = p_del * pin

        pct_user = 100.0 * (x_sr * t_sr + x_sw * t_sw + x_rr * t_rr + x_rw * t_rw)
        if pct_user > 100.0:
            pct_user = 100.0
        pct_priv = 100.0 * (
            x_sr * os_sr + x_sw * os_sw + x_rr * os_rr + x_rw * os_rw + pin * p_cpf
        )
        if pct_priv > 100.0:
            pct_priv = 100.0
        write_bytes = x_sw * s_sw + x_rw * s_rw
        reads = x_sr + x_rr
        if reads > 0.0:
            hits_pct = 100.0 * (x_sr * h_sr + x_rr * h_rr) / reads
        else:
            hits_pct = 0.0
        cache_faults = x_sr * (1.0 - h_sr) + x_rr * miss_rr

        counters[0] = pct_priv
        counters[1] = pct_user
        counters[2] = sum_x
        counters[3] = x_sr * s_sr + x_rr * miss_rr * trans_rr + aff * pin * p_pg
        counters[4] = x_sr * ra_ratio + x_rr * miss_rr + aff * pin
        counters[5] = write_bytes + aff * pout * p_pg
        counters[6] = x_sw * s_sw / p_clus + x_rw * s_rw / p_pg + aff * pout
        counters[7] = hits_pct
        counters[8] = reads
        counters[9] = write_bytes / p_pg
        counters[10] = cache_faults + pin
        counters[11] = cache_faults
        counters[12] = pin
        counters[13] = pout

        converged = True
        for i in range(14):
            ref = prev[i] if prev[i] > 1.0 else 1.0
            delta = counters[i] - prev[i]
            if delta < 0.0:
                delta = -delta
            if delta > FP_TOL * ref:
                converged = False
            prev[i] = counters[i]
        if converged and iteration > 1:
            status = 0
            break

        if sum_x > 0.0:
            target = pages_per_op_raw
            if target * sum_x > page_cap:
                target = page_cap / sum_x
        else:
            target = 0.0
        pages_per_op = pages_per_op + DAMPING * (target - pages_per_op)

    cdef double pages_per_cycle = n_active * pages_per_op
    cdef double cpu_streams = 0.0
    cdef double d_sr = 0.0, d_sw = 0.0, d_rr = 0.0, d_rw = 0.0
    if active_sr:
        cpu_streams += t_sr + os_sr
        d_sr = sync_sr
    if active_sw:
        cpu_streams += t_sw + os_sw
        d_sw = flush_sw
    if active_rr:
        cpu_streams += t_rr + os_rr
        d_rr = sync_rr
    if active_rw:
        cpu_streams += t_rw + os_rw
        d_rw = flush_rw
    cdef double cpu_paging = pages_per_cycle * p_cpf
    cdef double d_paging = pages_per_cycle * aff * page_io * (1.0 + p_del)

    extras[0] = cpu_streams + cpu_paging
    extras[1] = d_sr + d_sw + d_rr + d_rw + d_paging
    extras[2] = d_sr
    extras[3] = d_sw
    extras[4] = d_rr
    extras[5] = d_rw
    extras[6] = d_paging
    extras[7] = cpu_streams
    extras[8] = cpu_paging
    extras[9] = h_sr
    extras[10] = h_rr
    extras[11] = pages_per_op
    extras[12] = n_active
    extras[13] = iterations
    extras[14] = busy_cpu / scale
    extras[15] = busy_disk / scale
    extras[16] = scale
    extras[17] = cache
    extras[18] = short
    extras[19] = x_sr
    extras[20] = x_sw
    extras[21] = x_rr
    extras[22] = x_rw
    return status
