"""Pure-Python forward-model kernel.

Reference implementation of the deterministic map from (workload, profile)
to the 14 performance counters plus per-cycle resource demands.  The
compiled extension ``opdiag._kernel`` mirrors this file operation for
operation; keep the two in lockstep (same expressions, same order) so their
results stay bit-identical.

Model summary (full derivation and a worked example in
docs/model_reference.md):

* Each active stream runs closed-loop with one outstanding operation and no
  CPU/disk overlap along its blocking path: nominal cycle = inter_op_cpu +
  os_cpu_per_op + sync_disk_per_op + page_fault_stall_per_op.  Asynchronous
  disk work (flushes, page-outs) applies backpressure: the sustained cycle
  is max(nominal cycle, the op's total disk work), so no stream can outrun
  the disk serving it.  Rate X_k = 1 / cycle_k.
* Sequential reads are served by fixed-size read-aheads; sequential writes
  land in cache and are flushed asynchronously in lazy-writer clusters;
  random writes land scattered and flush as positioned page-sized I/Os;
  random reads hit the file cache with probability cache_bytes / extent.
* Memory pressure first shrinks the cache from its maximum toward its
  minimum; residual shortfall beyond that drives paging at
  kappa * (shortfall_pages) pages input per stream operation, capped at the
  local disk's page bandwidth.  Page-ins stall the faulting operation;
  page-outs (dirty_page_fraction of page-ins) are written back
  asynchronously.
* A saturation guard rescales all stream rates by a common factor whenever
  the implied busy fraction of CPU or disk would exceed 1; no resource can
  be more than 100% busy.
* Paging feedback (faults lengthen cycles, which lowers rates, which lowers
  paging) is solved by damped fixed-point iteration: damping 0.5,
  convergence when successive counter vectors agree to 1e-6 relative
  (absolute below 1.0), cap 100 iterations.  The update map is monotone,
  so when the page-bandwidth cap binds the damped iteration decays
  geometrically with a rate that can approach 1; every fourth iteration a
  same-sign shrinking delta is Aitken-extrapolated to its geometric limit,
  which keeps worst-case convergence inside the cap.

Kernel status codes: 0 converged, 1 fixed point hit the iteration cap,
2 invariant-violating workload components, 3 degenerate stream cycle
(denominator below 1e-9 s).
"""

from math import ceil

# Indices into the flattened workload (types.WORKLOAD_COMPONENTS order).
_T_SR, _S_SR = 0, 1
_T_SW, _S_SW = 2, 3
_T_RR, _S_RR, _E_RR = 4, 5, 6
_T_RW, _S_RW, _E_RW = 7, 8, 9
_RAM, _AFF = 10, 11

# Indices into the profile array (types.PROFILE_FIELD_ORDER order).
_P_RAM, _P_OSR, _P_CMAX, _P_CMIN, _P_PG, _P_SRA, _P_CLUS = 0, 1, 2, 3, 4, 5, 6
_P_DF, _P_TR, _P_OVS, _P_OVI, _P_CSC, _P_CPF, _P_KAP, _P_DEL = 7, 8, 9, 10, 11, 12, 13, 14

# Extras layout, shared with the compiled kernel via model.EXTRA_FIELDS.
X_D_CPU = 0
X_D_DISK = 1
X_DISK_SEQ_READ = 2
X_DISK_SEQ_WRITE = 3
X_DISK_RAND_READ = 4
X_DISK_RAND_WRITE = 5
X_DISK_PAGING = 6
X_CPU_STREAMS = 7
X_CPU_PAGING = 8
X_HIT_SEQ_READ = 9
X_HIT_RAND_READ = 10
X_PAGES_PER_OP = 11
X_N_ACTIVE = 12
X_ITERATIONS = 13
X_BUSY_CPU = 14
X_BUSY_DISK = 15
X_SCALE = 16
X_CACHE_BYTES = 17
X_SHORTFALL_BYTES = 18
X_RATE_SEQ_READ = 19
X_RATE_SEQ_WRITE = 20
X_RATE_RAND_READ = 21
X_RATE_RAND_WRITE = 22
N_EXTRAS = 23

MIN_CYCLE_S = 1e-9
DAMPING = 0.5
FP_TOL = 1e-6
FP_MAX_ITER = 100


def evaluate(w, prof, counters, extras):
    """Evaluate the forward model on flat arrays.

    ``w``: 12 workload components; ``prof``: 15 profile constants;
    ``counters``: output buffer of 14; ``extras``: output buffer of 23.
    Returns a status code (see module docstring).
    """
    t_sr = float(w[_T_SR]); s_sr = float(w[_S_SR])
    t_sw = float(w[_T_SW]); s_sw = float(w[_S_SW])
    t_rr = float(w[_T_RR]); s_rr = float(w[_S_RR]); e_rr = float(w[_E_RR])
    t_rw = float(w[_T_RW]); s_rw = float(w[_S_RW]); e_rw = float(w[_E_RW])
    ram = float(w[_RAM]); aff = float(w[_AFF])

    for i in range(12):
        if w[i] < 0.0:
            return 2
    if aff > 1.0:
        return 2
    if s_rr > 0.0 and e_rr < s_rr:
        return 2
    if s_rw > 0.0 and e_rw < s_rw:
        return 2

    p_ram = prof[_P_RAM]; p_osr = prof[_P_OSR]
    p_cmax = prof[_P_CMAX]; p_cmin = prof[_P_CMIN]
    p_pg = prof[_P_PG]; p_sra = prof[_P_SRA]; p_clus = prof[_P_CLUS]
    p_df = prof[_P_DF]; p_tr = prof[_P_TR]
    p_ovs = prof[_P_OVS]; p_ovi = prof[_P_OVI]
    p_csc = prof[_P_CSC]; p_cpf = prof[_P_CPF]
    p_kap = prof[_P_KAP]; p_del = prof[_P_DEL]

    page_io = p_df + p_pg / p_tr  # disk time for one page-sized transfer

    # Memory pressure shrinks the cache before any paging starts; paging
    # begins only once the cache is pinned at its minimum.
    raw_short = ram - (p_ram - p_osr - p_cmax)
    if raw_short < 0.0:
        raw_short = 0.0
    cache = p_cmax - raw_short
    if cache < p_cmin:
        cache = p_cmin
    if cache > p_cmax:
        cache = p_cmax
    avail = p_ram - p_osr - cache
    short = ram - avail
    if short < 0.0:
        short = 0.0
    pages_per_op_raw = p_kap * (short / p_pg)

    active_sr = s_sr > 0.0
    active_sw = s_sw > 0.0
    active_rr = s_rr > 0.0
    active_rw = s_rw > 0.0
    n_active = (1 if active_sr else 0) + (1 if active_sw else 0) \
        + (1 if active_rr else 0) + (1 if active_rw else 0)

    # Per-op stream costs that do not depend on the paging state.
    h_sr = 0.0; os_sr = 0.0; sync_sr = 0.0; ra_ratio = 0.0
    if active_sr:
        ra_ratio = s_sr / p_sra
        h_sr = 1.0 - ra_ratio
        if h_sr < 0.0:
            h_sr = 0.0
        os_sr = p_csc + ra_ratio * (p_ovi + p_ovs * p_sra)
        sync_sr = ra_ratio * (p_df + p_sra / p_tr)

    os_sw = 0.0; flush_sw = 0.0
    if active_sw:
        os_sw = p_csc + (p_ovi + p_ovs * s_sw)
        flush_sw = s_sw * (p_df / p_clus + 1.0 / p_tr)

    h_rr = 0.0; os_rr = 0.0; sync_rr = 0.0; miss_rr = 0.0; trans_rr = 0.0
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
    os_rw = 0.0; flush_rw = 0.0
    if active_rw:
        os_rw = p_csc + (p_ovi + p_ovs * s_rw)
        flush_rw = s_rw * (p_df / p_pg + 1.0 / p_tr)

    base_sr = t_sr + os_sr + sync_sr
    base_sw = t_sw + os_sw
    base_rr = t_rr + os_rr + sync_rr
    base_rw = t_rw + os_rw
    if active_sr and base_sr < MIN_CYCLE_S:
        return 3
    if active_sw and base_sw < MIN_CYCLE_S:
        return 3
    if active_rr and base_rr < MIN_CYCLE_S:
        return 3
    if active_rw and base_rw < MIN_CYCLE_S:
        return 3

    # Page-in handling stalls the faulting op: CPU fault service plus the
    # local share of a page-sized disk read.  Page-outs are asynchronous.
    stall_per_page = p_cpf + aff * page_io
    page_cap = 1.0 / page_io  # local disk page bandwidth

    pages_per_op = 0.0
    prev = [0.0] * 14
    status = 1
    iterations = 0
    prev_delta = 0.0

    x_sr = x_sw = x_rr = x_rw = 0.0
    busy_cpu = busy_disk = scale = 0.0
    pin = pout = 0.0

    for iteration in range(1, FP_MAX_ITER + 1):
        iterations = iteration
        stall = pages_per_op * stall_per_page
        disk_shared = pages_per_op * aff * page_io * (1.0 + p_del)
        x_sr = x_sw = x_rr = x_rw = 0.0
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

        # Counter assembly for the current snapshot.
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

        # Damped update of the pages-per-op state; the raw driver is capped
        # at the local disk's page bandwidth.
        if sum_x > 0.0:
            target = pages_per_op_raw
            if target * sum_x > page_cap:
                target = page_cap / sum_x
        else:
            target = 0.0
        delta = DAMPING * (target - pages_per_op)
        pages_per_op = pages_per_op + delta
        if iteration % 4 == 0 and prev_delta != 0.0:
            ratio = delta / prev_delta
            if 0.0 < ratio < 1.0:
                pages_per_op = pages_per_op + delta * ratio / (1.0 - ratio)
                if pages_per_op < 0.0:
                    pages_per_op = 0.0
                if pages_per_op > pages_per_op_raw:
                    pages_per_op = pages_per_op_raw
                delta = 0.0
        prev_delta = delta

    # Demands per transaction cycle: one op per active stream at the
    # converged paging state.
    pages_per_cycle = n_active * pages_per_op
    cpu_streams = 0.0
    d_sr = d_sw = d_rr = d_rw = 0.0
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
    cpu_paging = pages_per_cycle * p_cpf
    d_paging = pages_per_cycle * aff * page_io * (1.0 + p_del)

    extras[X_D_CPU] = cpu_streams + cpu_paging
    extras[X_D_DISK] = d_sr + d_sw + d_rr + d_rw + d_paging
    extras[X_DISK_SEQ_READ] = d_sr
    extras[X_DISK_SEQ_WRITE] = d_sw
    extras[X_DISK_RAND_READ] = d_rr
    extras[X_DISK_RAND_WRITE] = d_rw
    extras[X_DISK_PAGING] = d_paging
    extras[X_CPU_STREAMS] = cpu_streams
    extras[X_CPU_PAGING] = cpu_paging
    extras[X_HIT_SEQ_READ] = h_sr
    extras[X_HIT_RAND_READ] = h_rr
    extras[X_PAGES_PER_OP] = pages_per_op
    extras[X_N_ACTIVE] = n_active
    extras[X_ITERATIONS] = iterations
    extras[X_BUSY_CPU] = busy_cpu / scale
    extras[X_BUSY_DISK] = busy_disk / scale
    extras[X_SCALE] = scale
    extras[X_CACHE_BYTES] = cache
    extras[X_SHORTFALL_BYTES] = short
    extras[X_RATE_SEQ_READ] = x_sr
    extras[X_RATE_SEQ_WRITE] = x_sw
    extras[X_RATE_RAND_READ] = x_rr
    extras[X_RATE_RAND_WRITE] = x_rw
    return status
