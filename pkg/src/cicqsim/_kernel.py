"""Compiled slot loop for long simulation runs.

Mirrors the object-based reference path in :mod:`cicqsim.engine` on flat
arrays.  Both share the splitmix64 stream and draw order, so for the same
configuration and seed they produce identical counters, delays and samples.
VOQ ``(i, j)`` is stored at flat index ``i * n + j``.
"""

import numpy as np
from numba import njit

POLICY_RR = 0
POLICY_OCF = 1
POLICY_LQF = 2
POLICY_ISLIP = 3

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True)
def _splitmix_next(state):
    state = state + _GOLDEN
    z = state
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    z = z ^ (z >> np.uint64(31))
    return state, z


@njit(cache=True)
def _rr_select(i, n, voq_len, seen, cp_cap, in_ptr, counter, burst):
    p = in_ptr[i]
    k = i * n + p
    # a full CP under the pointer always advances the poll pointer
    if burst > 0 and voq_len[k] > 0 and seen[k] >= cp_cap:
        counter[k] = burst
        p = (p + 1) % n
        in_ptr[i] = p
    for d in range(n):
        j = (p + d) % n
        k = i * n + j
        if voq_len[k] > 0 and seen[k] < cp_cap:
            if j != p:
                counter[i * n + p] = burst
            return j
    return -1


@njit(cache=True)
def _burst_after_transfer(k, voq_len, counter, threshold, burst):
    """Apply the counter event for a transfer from VOQ ``k``.

    Returns True when the poll (or accept) pointer must stay on this VOQ.
    """
    if counter[k] > 0:
        counter[k] -= 1
    if voq_len[k] == 0:
        counter[k] = burst
        return False
    if burst > 0 and voq_len[k] > threshold and counter[k] > 0:
        return True
    counter[k] = burst
    return False


@njit(cache=True)
def simulate(
    n,
    rates,
    policy,
    cp_cap,
    credit_delay,
    islip_iters,
    threshold,
    burst,
    seed,
    max_slots,
    trip_len,
    sample_interval,
    warmup,
):
    nn = n * n
    qcap = trip_len + 2
    voq_buf = np.zeros((nn, qcap), dtype=np.int64)
    voq_head = np.zeros(nn, dtype=np.int64)
    voq_len = np.zeros(nn, dtype=np.int64)
    cp_buf = np.zeros((nn, cp_cap), dtype=np.int64)
    cp_head = np.zeros(nn, dtype=np.int64)
    cp_len = np.zeros(nn, dtype=np.int64)
    in_ptr = np.zeros(n, dtype=np.int64)
    out_ptr = np.zeros(n, dtype=np.int64)
    grant_ptr = np.zeros(n, dtype=np.int64)
    accept_ptr = np.zeros(n, dtype=np.int64)
    counter = np.full(nn, burst, dtype=np.int64)

    # departures still awaiting their credit, one row per slot of latency
    hist_rows = max(credit_delay, 1)
    dep_hist = np.zeros((hist_rows, nn), dtype=np.int64)
    pending = np.zeros(nn, dtype=np.int64)
    seen = np.zeros(nn, dtype=np.int64)

    arrivals = np.zeros(nn, dtype=np.int64)
    departures = np.zeros(nn, dtype=np.int64)
    delay_sum = np.zeros(nn, dtype=np.int64)
    delay_count = np.zeros(nn, dtype=np.int64)

    n_samples_max = max_slots // sample_interval + 2
    sample_slots = np.zeros(n_samples_max, dtype=np.int64)
    samples = np.zeros((n_samples_max, nn), dtype=np.int64)
    n_samples = 0

    flat_rates = rates.ravel()
    state = np.uint64(seed)
    trip_slot = -1
    trip_voq = -1

    grant = np.full(n, -1, dtype=np.int64)
    in_match = np.full(n, -1, dtype=np.int64)
    out_match = np.full(n, -1, dtype=np.int64)
    first_iter = np.zeros(n, dtype=np.bool_)

    t = 0
    while t < max_slots:
        row = t % hist_rows
        if credit_delay > 0:
            for k in range(nn):
                pending[k] -= dep_hist[row, k]
                dep_hist[row, k] = 0

        # (1) output arbitration: RR over the CP column
        for j in range(n):
            start = out_ptr[j]
            for d in range(n):
                i = (start + d) % n
                k = i * n + j
                if cp_len[k] > 0:
                    a = cp_buf[k, cp_head[k]]
                    cp_head[k] = (cp_head[k] + 1) % cp_cap
                    cp_len[k] -= 1
                    departures[k] += 1
                    if credit_delay > 0:
                        dep_hist[row, k] += 1
                        pending[k] += 1
                    if t >= warmup:
                        delay_sum[k] += t - a
                        delay_count[k] += 1
                    out_ptr[j] = (i + 1) % n
                    break

        # (2) input arbitration: VOQ -> CP
        for k in range(nn):
            seen[k] = cp_len[k] + pending[k]
        if policy == POLICY_ISLIP:
            # bufferless crossbar: the output stage is always drained in (1)
            for x in range(n):
                in_match[x] = -1
                out_match[x] = -1
                first_iter[x] = False
            for it in range(islip_iters):
                for j in range(n):
                    grant[j] = -1
                    if out_match[j] >= 0:
                        continue
                    for d in range(n):
                        i = (grant_ptr[j] + d) % n
                        if in_match[i] < 0 and voq_len[i * n + j] > 0:
                            grant[j] = i
                            break
                for i in range(n):
                    if in_match[i] >= 0:
                        continue
                    for d in range(n):
                        j = (accept_ptr[i] + d) % n
                        if grant[j] == i:
                            in_match[i] = j
                            out_match[j] = i
                            if it == 0:
                                first_iter[i] = True
                                grant_ptr[j] = (i + 1) % n
                                accept_ptr[i] = (j + 1) % n
                            break
            for i in range(n):
                j = in_match[i]
                if j < 0:
                    continue
                k = i * n + j
                a = voq_buf[k, voq_head[k]]
                voq_head[k] = (voq_head[k] + 1) % qcap
                voq_len[k] -= 1
                cp_buf[k, (cp_head[k] + cp_len[k]) % cp_cap] = a
                cp_len[k] += 1
                if burst > 0 and first_iter[i]:
                    if _burst_after_transfer(k, voq_len, counter, threshold, burst):
                        accept_ptr[i] = j
        else:
            for i in range(n):
                sel = -1
                if policy == POLICY_RR:
                    sel = _rr_select(i, n, voq_len, seen, cp_cap, in_ptr, counter, burst)
                elif policy == POLICY_OCF:
                    best = -1
                    for j in range(n):
                        k = i * n + j
                        if voq_len[k] > 0 and seen[k] < cp_cap:
                            h = voq_buf[k, voq_head[k]]
                            if best < 0 or h < best:
                                best = h
                                sel = j
                else:
                    best = -1
                    for j in range(n):
                        k = i * n + j
                        if voq_len[k] > 0 and seen[k] < cp_cap:
                            if voq_len[k] > best:
                                best = voq_len[k]
                                sel = j
                if sel < 0:
                    continue
                k = i * n + sel
                a = voq_buf[k, voq_head[k]]
                voq_head[k] = (voq_head[k] + 1) % qcap
                voq_len[k] -= 1
                cp_buf[k, (cp_head[k] + cp_len[k]) % cp_cap] = a
                cp_len[k] += 1
                if policy == POLICY_RR:
                    if _burst_after_transfer(k, voq_len, counter, threshold, burst):
                        in_ptr[i] = sel
                    else:
                        in_ptr[i] = (sel + 1) % n

        # (3) Bernoulli arrivals, input-major draw order, zero-rate pairs skipped
        for k in range(nn):
            r = flat_rates[k]
            if r <= 0.0:
                continue
            state, z = _splitmix_next(state)
            u = float(z >> np.uint64(11)) * _INV53
            if u < r:
                voq_buf[k, (voq_head[k] + voq_len[k]) % qcap] = t
                voq_len[k] += 1
                arrivals[k] += 1

        t += 1

        tripped = False
        for k in range(nn):
            if voq_len[k] > trip_len:
                trip_slot = t - 1
                trip_voq = k
                tripped = True
                break

        if tripped or t % sample_interval == 0:
            sample_slots[n_samples] = t
            for k in range(nn):
                samples[n_samples, k] = voq_len[k]
            n_samples += 1
        if tripped:
            break

    return (
        t,
        trip_slot,
        trip_voq,
        arrivals,
        departures,
        delay_sum,
        delay_count,
        sample_slots[:n_samples],
        samples[:n_samples],
        voq_len,
        cp_len,
    )


@njit(cache=True)
def simulate_vacating(lam, threshold, burst, seed, max_slots, sample_interval):
    """Single burst-stabilized queue with a one-slot server vacation.

    Below THRESHOLD the server vacates for one slot after every service.
    Above it, up to ``burst`` cells are served back to back before the next
    vacation.  Returns (arrivals, departures, sample_slots, samples).
    """
    state = np.uint64(seed)
    q = 0
    vacation = False
    run = 0
    arrivals = 0
    departures = 0
    n_max = max_slots // sample_interval + 1
    sample_slots = np.zeros(n_max, dtype=np.int64)
    samples = np.zeros(n_max, dtype=np.int64)
    ns = 0
    for t in range(max_slots):
        if vacation:
            vacation = False
            run = 0
        elif q > 0:
            q -= 1
            departures += 1
            run += 1
            if not (q > threshold and run < burst):
                vacation = True
        else:
            run = 0
        state, z = _splitmix_next(state)
        if float(z >> np.uint64(11)) * _INV53 < lam:
            q += 1
            arrivals += 1
        if (t + 1) % sample_interval == 0:
            sample_slots[ns] = t + 1
            samples[ns] = q
            ns += 1
    return arrivals, departures, sample_slots[:ns], samples[:ns]
