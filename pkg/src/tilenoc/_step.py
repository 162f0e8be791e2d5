"""Compiled cycle kernels.

The public engine API compiles a NetworkGraph into flat arrays (see
engine.py); the functions here execute cycles over those arrays under
numba.  One cycle runs three phases:

1. workload phase: generate/stage the next request per core,
2. response pass: move response flits (banks -> ... -> core sinks),
3. request pass: move request flits (cores -> ... -> banks).

A network pass resolves every combinational segment at once.  Each
in-flight head (source stage or elastic-buffer front) walks its
oblivious route, collecting the switch-output arbitration points it
must win.  Arbitration points are visited in topological level order;
at each, the round-robin winner survives and the rest stall for the
cycle.  Survivors fire if their destination storage can accept
(start-of-cycle occupancy below capacity: skid-buffer semantics), and
only fired grants advance the round-robin pointers.

Responses are resolved before requests so a bank whose response departs
this cycle can accept a new request in the same cycle (the access
pipeline passes through at full rate).
"""

from __future__ import annotations

import numpy as np
from numba import njit

# storage kinds in the per-net flat encoding
ST_SRC = 0     # request net: core stage; response net: bank pipeline
ST_EB = 1      # elastic buffer
ST_TERM = 2    # request net: bank; response net: core sink

# counter slots (shared between drivers)
C_GENERATED = 0
C_INJECT_LOADS = 1
C_INJECT_STORES = 2
C_DONE_LOADS = 3
C_DONE_STORES = 4
C_DONE_WINDOW = 5
C_LAT_SUM = 6
C_LAT_N = 7
C_STAMP = 8
C_EV_N = 9
C_EV_LOST = 10
N_COUNTERS = 11

# event codes (debug trace)
EV_GEN = 0
EV_INJECT = 1
EV_MOVE_REQ = 2
EV_MOVE_RESP = 3
EV_BANK = 4
EV_DONE = 5
EV_STORE = 6

MAX_CHAIN = 4

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


@njit(cache=True)
def mix64(x):
    x = (x ^ (x >> np.uint64(30))) * _MIX1
    x = (x ^ (x >> np.uint64(27))) * _MIX2
    return x ^ (x >> np.uint64(31))


@njit(cache=True)
def rng_next(states, i):
    """SplitMix64 step of stream i; returns a uint64."""
    states[i] += _GAMMA
    return mix64(states[i])


@njit(cache=True)
def u01(x):
    # 53-bit mantissa draw in [0, 1)
    return (x >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def _ev(ev, counters, cap, cycle, kind, a, b):
    n = counters[C_EV_N]
    if n < cap:
        ev[n, 0] = cycle
        ev[n, 1] = kind
        ev[n, 2] = a
        ev[n, 3] = b
        counters[C_EV_N] = n + 1
    else:
        counters[C_EV_LOST] += 1


@njit(cache=True)
def net_pass(net, ebs, heads, n_heads, scratch, pool, counters,
             src_slot, bq_buf, bq_cyc, bq_head, bq_count, bq_cap,
             is_req, cycle, f_src, f_term_head, debug, ev, ev_cap):
    """Resolve one network for one cycle; returns (n_src_fired, n_term_fired).

    Mutates: elastic buffers (moves), arb pointers/counters, fired
    sources (request net: src_slot entry cleared; response net: bank
    staging queue popped), and bank capture into the staging queue on
    the request net.  Terminal fires on the response net are returned
    for the driver to complete.
    """
    (route_tab, sw_route_base, sw_arb_base, arb_ptr, arb_n_in, arb_level,
     arb_to_sw, arb_to_port, arb_to_store, arb_fires,
     st_kind, st_cap, st_out_sw, st_out_port, st_out_store, st_ext,
     n_src, n_levels) = net
    (eb_buf, eb_head, eb_count, eb_active, eb_active_pos, eb_meta,
     cap_max) = ebs
    (h_store, h_slot, h_dest, h_chain_arb, h_chain_port, h_len, h_target,
     h_alive, h_pos) = heads
    (a_stamp, a_best, a_best_head) = scratch
    (slot_gen, slot_inject, slot_core, slot_dest, slot_load,
     free_list, free_meta) = pool

    # ---- build chains -------------------------------------------------
    for i in range(n_heads):
        s = h_store[i]
        d = h_dest[i]
        h_alive[i] = 1
        h_pos[i] = 0
        sw = st_out_sw[s]
        if sw < 0:
            h_len[i] = 0
            h_target[i] = st_out_store[s]
            continue
        port = st_out_port[s]
        ln = 0
        while True:
            out = route_tab[sw_route_base[sw] + d]
            a = sw_arb_base[sw] + out
            h_chain_arb[i, ln] = a
            h_chain_port[i, ln] = port
            ln += 1
            nxt = arb_to_sw[a]
            if nxt >= 0:
                port = arb_to_port[a]
                sw = nxt
            else:
                h_target[i] = arb_to_store[a]
                break
        h_len[i] = ln

    # ---- level-ordered arbitration ------------------------------------
    counters[C_STAMP] += 1
    stamp = counters[C_STAMP]
    for lev in range(n_levels):
        # register candidates
        for i in range(n_heads):
            if h_alive[i] == 0 or h_pos[i] >= h_len[i]:
                continue
            a = h_chain_arb[i, h_pos[i]]
            if arb_level[a] != lev:
                continue
            port = h_chain_port[i, h_pos[i]]
            dist = port - arb_ptr[a]
            if dist < 0:
                dist += arb_n_in[a]
            if a_stamp[a] != stamp or dist < a_best[a]:
                a_stamp[a] = stamp
                a_best[a] = dist
                a_best_head[a] = i
        # knock out losers
        for i in range(n_heads):
            if h_alive[i] == 0 or h_pos[i] >= h_len[i]:
                continue
            a = h_chain_arb[i, h_pos[i]]
            if arb_level[a] != lev:
                continue
            if a_best_head[a] == i:
                h_pos[i] += 1
            else:
                h_alive[i] = 0

    # ---- decide fires against start-of-cycle occupancy ----------------
    for i in range(n_heads):
        if h_alive[i] == 0 or h_pos[i] < h_len[i]:
            continue
        t = h_target[i]
        k = st_kind[t]
        if k == ST_EB:
            if eb_count[t - n_src] >= st_cap[t]:
                h_alive[i] = 0
        elif k == ST_TERM and is_req:
            # bank ready unless its response staging queue is full
            if bq_count[st_ext[t]] >= bq_cap:
                h_alive[i] = 0
        # response terminals (core sinks) always accept

    # ---- apply ---------------------------------------------------------
    nf_src = 0
    nf_term = 0
    for i in range(n_heads):
        if h_alive[i] == 0 or h_pos[i] < h_len[i]:
            continue
        s = h_store[i]
        sl = h_slot[i]
        # pop the source
        if st_kind[s] == ST_SRC:
            ext = st_ext[s]
            if is_req:
                src_slot[ext] = -1
            else:
                bq_head[ext] = (bq_head[ext] + 1) % bq_cap
                bq_count[ext] -= 1
            f_src[nf_src] = i
            nf_src += 1
        else:
            e = s - n_src
            eb_head[e] = (eb_head[e] + 1) % cap_max
            eb_count[e] -= 1
            if eb_count[e] == 0:
                # swap-remove from the active list
                p = eb_active_pos[e]
                last = eb_meta[0] - 1
                moved = eb_active[last]
                eb_active[p] = moved
                eb_active_pos[moved] = p
                eb_active_pos[e] = -1
                eb_meta[0] = last
        # push the target
        t = h_target[i]
        if st_kind[t] == ST_EB:
            e = t - n_src
            if eb_count[e] == 0:
                eb_active[eb_meta[0]] = e
                eb_active_pos[e] = eb_meta[0]
                eb_meta[0] += 1
            eb_buf[e * cap_max + (eb_head[e] + eb_count[e]) % cap_max] = sl
            eb_count[e] += 1
            if debug:
                _ev(ev, counters, ev_cap, cycle,
                    EV_MOVE_REQ if is_req else EV_MOVE_RESP, sl, e)
        else:
            if is_req:
                ext = st_ext[t]
                if slot_load[sl]:
                    p = (bq_head[ext] + bq_count[ext]) % bq_cap
                    bq_buf[ext * bq_cap + p] = sl
                    bq_cyc[ext * bq_cap + p] = cycle
                    bq_count[ext] += 1
                    if debug:
                        _ev(ev, counters, ev_cap, cycle, EV_BANK, sl, ext)
                else:
                    # stores finish at the bank: no response
                    counters[C_DONE_STORES] += 1
                    free_list[free_meta[0]] = sl
                    free_meta[0] += 1
                    if debug:
                        _ev(ev, counters, ev_cap, cycle, EV_STORE, sl, ext)
            else:
                f_term_head[nf_term] = i
                nf_term += 1
        # advance the winners' pointers
        for j in range(h_len[i]):
            a = h_chain_arb[i, j]
            p = h_chain_port[i, j] + 1
            if p == arb_n_in[a]:
                p = 0
            arb_ptr[a] = p
            arb_fires[a] += 1
    return nf_src, nf_term


@njit(cache=True)
def _gather_req_heads(heads, src_slot, outstanding, window,
                      pool, q_ebq, n_src):
    (h_store, h_slot, h_dest, h_chain_arb, h_chain_port, h_len, h_target,
     h_alive, h_pos) = heads
    (eb_buf, eb_head, eb_count, eb_active, eb_active_pos, eb_meta,
     cap_max) = q_ebq
    slot_load = pool[4]
    slot_dest = pool[3]
    n = 0
    for c in range(src_slot.shape[0]):
        sl = src_slot[c]
        if sl < 0:
            continue
        if slot_load[sl] and outstanding[c] >= window:
            continue
        h_store[n] = c
        h_slot[n] = sl
        h_dest[n] = slot_dest[sl]
        n += 1
    for j in range(eb_meta[0]):
        e = eb_active[j]
        sl = eb_buf[e * cap_max + eb_head[e]]
        h_store[n] = n_src + e
        h_slot[n] = sl
        h_dest[n] = slot_dest[sl]
        n += 1
    return n


@njit(cache=True)
def _gather_resp_heads(heads, bq_buf, bq_cyc, bq_head, bq_count, bq_cap,
                       cycle, pool, s_ebs, n_src):
    (h_store, h_slot, h_dest, h_chain_arb, h_chain_port, h_len, h_target,
     h_alive, h_pos) = heads
    (eb_buf, eb_head, eb_count, eb_active, eb_active_pos, eb_meta,
     cap_max) = s_ebs
    slot_core = pool[2]
    n = 0
    for b in range(bq_count.shape[0]):
        if bq_count[b] > 0:
            p = b * bq_cap + bq_head[b]
            if bq_cyc[p] < cycle:
                sl = bq_buf[p]
                h_store[n] = b
                h_slot[n] = sl
                h_dest[n] = slot_core[sl]
                n += 1
    for j in range(eb_meta[0]):
        e = eb_active[j]
        sl = eb_buf[e * cap_max + eb_head[e]]
        h_store[n] = n_src + e
        h_slot[n] = sl
        h_dest[n] = slot_core[sl]
        n += 1
    return n


@njit(cache=True)
def _complete(pool, counters, hist, outstanding, heads_resp, f_term_head,
              n_term, cycle, w0, zero_tbl, check_floor, debug, ev, ev_cap):
    (slot_gen, slot_inject, slot_core, slot_dest, slot_load,
     free_list, free_meta) = pool
    h_slot = heads_resp[1]
    for j in range(n_term):
        i = f_term_head[j]
        sl = h_slot[i]
        c = slot_core[sl]
        outstanding[c] -= 1
        counters[C_DONE_LOADS] += 1
        if cycle >= w0:
            counters[C_DONE_WINDOW] += 1
        if check_floor:
            lo = zero_tbl[c, slot_dest[sl]]
            if cycle - slot_inject[sl] < lo:
                raise RuntimeError("completion beat the zero-load latency")
        if slot_gen[sl] >= w0:
            lat = cycle - slot_gen[sl]
            counters[C_LAT_SUM] += lat
            counters[C_LAT_N] += 1
            h = lat if lat < hist.shape[0] else hist.shape[0] - 1
            hist[h] += 1
        if debug:
            _ev(ev, counters, ev_cap, cycle, EV_DONE, sl, c)
        free_list[free_meta[0]] = sl
        free_meta[0] += 1


@njit(cache=True)
def _inject_mark(pool, counters, outstanding, heads_req, f_src, n_src_fired,
                 cycle, debug, ev, ev_cap):
    (slot_gen, slot_inject, slot_core, slot_dest, slot_load,
     free_list, free_meta) = pool
    h_store = heads_req[0]
    h_slot = heads_req[1]
    for j in range(n_src_fired):
        i = f_src[j]
        sl = h_slot[i]
        slot_inject[sl] = cycle
        if slot_load[sl]:
            outstanding[h_store[i]] += 1
            counters[C_INJECT_LOADS] += 1
        else:
            counters[C_INJECT_STORES] += 1
        if debug:
            _ev(ev, counters, ev_cap, cycle, EV_INJECT, sl, h_store[i])


@njit(cache=True)
def _check_conservation(counters, queue_len, pool_size, free_meta):
    allocated = pool_size - free_meta[0]
    inq = 0
    for c in range(queue_len.shape[0]):
        inq += queue_len[c]
    if counters[C_GENERATED] != (inq + allocated + counters[C_DONE_LOADS]
                                 + counters[C_DONE_STORES]):
        raise RuntimeError("request conservation violated")


@njit(cache=True)
def run_synth(n_cycles, start_cycle, nets_q, nets_s, ebs_q, ebs_s,
              heads_q, heads_s, scratch_q, scratch_s, pool,
              src_slot, outstanding, queue_len,
              bq_buf, bq_cyc, bq_head, bq_count, bq_cap,
              rng_coin, rng_replay, replay_cycle, rng_dest,
              lam, p_local, store_frac, cores_pt, n_bank_pt, region_words,
              window, w0, counters, hist,
              f_src, f_term, debug, ev, ev_cap, zero_tbl, check_floor):
    """Open-loop Bernoulli workload driver; returns cycles executed."""
    n_cores = src_slot.shape[0]
    n_banks = bq_head.shape[0]
    (slot_gen, slot_inject, slot_core, slot_dest, slot_load,
     free_list, free_meta) = pool
    pool_size = free_list.shape[0]
    n_src_q = nets_q[16]
    n_src_s = nets_s[16]

    for cyc in range(start_cycle, start_cycle + n_cycles):
        # 1. generation: one Bernoulli coin per core per cycle
        for c in range(n_cores):
            if u01(rng_next(rng_coin, c)) < lam:
                queue_len[c] += 1
                counters[C_GENERATED] += 1
                if debug:
                    _ev(ev, counters, ev_cap, cyc, EV_GEN, c, 0)
        # 2. staging: pull the queue head into the stage slot
        for c in range(n_cores):
            if src_slot[c] >= 0 or queue_len[c] == 0:
                continue
            # recover the head's generation cycle by replaying the coin
            # stream (the queue itself stores no per-request state)
            gen = -1
            t = replay_cycle[c]
            while True:
                hit = u01(rng_next(rng_replay, c)) < lam
                if hit:
                    gen = t
                    break
                t += 1
            replay_cycle[c] = gen + 1
            queue_len[c] -= 1
            # destination: three draws per request, always
            u_loc = u01(rng_next(rng_dest, c))
            idx = rng_next(rng_dest, c)
            row_draw = rng_next(rng_dest, c)
            if u_loc < p_local:
                w = idx % np.uint64(region_words)
                dest = (c // cores_pt) * n_bank_pt + int(
                    w % np.uint64(n_bank_pt))
            else:
                dest = int(idx % np.uint64(n_banks))
            is_load = True
            if store_frac > 0.0:
                is_load = u01(rng_next(rng_dest, c)) >= store_frac
            sl = free_list[free_meta[0] - 1]
            free_meta[0] -= 1
            slot_gen[sl] = gen
            slot_core[sl] = c
            slot_dest[sl] = dest
            slot_load[sl] = is_load
            src_slot[c] = sl
        # 3. responses, then 4. requests
        n_h = _gather_resp_heads(heads_s, bq_buf, bq_cyc, bq_head, bq_count,
                                 bq_cap, cyc, pool, ebs_s, n_src_s)
        _, n_term = net_pass(nets_s, ebs_s, heads_s, n_h, scratch_s, pool,
                             counters, src_slot, bq_buf, bq_cyc, bq_head,
                             bq_count, bq_cap,
                             False, cyc, f_src, f_term, debug, ev, ev_cap)
        _complete(pool, counters, hist, outstanding, heads_s, f_term,
                  n_term, cyc, w0, zero_tbl, check_floor, debug, ev, ev_cap)
        n_h = _gather_req_heads(heads_q, src_slot, outstanding, window,
                                pool, ebs_q, n_src_q)
        n_sf, _ = net_pass(nets_q, ebs_q, heads_q, n_h, scratch_q, pool,
                           counters, src_slot, bq_buf, bq_cyc, bq_head,
                           bq_count, bq_cap,
                           True, cyc, f_src, f_term, debug, ev, ev_cap)
        _inject_mark(pool, counters, outstanding, heads_q, f_src, n_sf,
                     cyc, debug, ev, ev_cap)
        if debug:
            _check_conservation(counters, queue_len, pool_size, free_meta)
    return n_cycles


@njit(cache=True)
def run_trace(n_cycles, start_cycle, nets_q, nets_s, ebs_q, ebs_s,
              heads_q, heads_s, scratch_q, scratch_s, pool,
              src_slot, outstanding,
              bq_buf, bq_cyc, bq_head, bq_count, bq_cap,
              op_start, op_kind, op_val, cursor, eligible,
              window, counters, hist,
              f_src, f_term, debug, ev, ev_cap, zero_tbl, check_floor):
    """Closed-loop trace driver.

    Per core: L/S ops issue in order, G entries delay the next issue,
    loads beyond the outstanding window stall the trace.  Returns the
    cycle on which the last core drained, or -1 if the budget ran out.
    """
    n_cores = src_slot.shape[0]
    (slot_gen, slot_inject, slot_core, slot_dest, slot_load,
     free_list, free_meta) = pool
    pool_size = free_list.shape[0]
    n_src_q = nets_q[16]
    n_src_s = nets_s[16]
    dummy_q = np.zeros(1, np.int64)

    for cyc in range(start_cycle, start_cycle + n_cycles):
        # staging from the trace
        for c in range(n_cores):
            if src_slot[c] >= 0:
                continue
            k = cursor[c]
            end = op_start[c + 1]
            while k < end and op_kind[k] == 2:
                base = eligible[c] if eligible[c] > cyc else cyc
                eligible[c] = base + op_val[k]
                k += 1
            cursor[c] = k
            if k >= end or cyc < eligible[c]:
                continue
            sl = free_list[free_meta[0] - 1]
            free_meta[0] -= 1
            slot_gen[sl] = cyc
            slot_core[sl] = c
            slot_dest[sl] = op_val[k]
            slot_load[sl] = op_kind[k] == 0
            src_slot[c] = sl
            cursor[c] = k + 1
            counters[C_GENERATED] += 1
            if debug:
                _ev(ev, counters, ev_cap, cyc, EV_GEN, c, 0)
        n_h = _gather_resp_heads(heads_s, bq_buf, bq_cyc, bq_head, bq_count,
                                 bq_cap, cyc, pool, ebs_s, n_src_s)
        _, n_term = net_pass(nets_s, ebs_s, heads_s, n_h, scratch_s, pool,
                             counters, src_slot, bq_buf, bq_cyc, bq_head,
                             bq_count, bq_cap,
                             False, cyc, f_src, f_term, debug, ev, ev_cap)
        _complete(pool, counters, hist, outstanding, heads_s, f_term,
                  n_term, cyc, 0, zero_tbl, check_floor, debug, ev, ev_cap)
        n_h = _gather_req_heads(heads_q, src_slot, outstanding, window,
                                pool, ebs_q, n_src_q)
        n_sf, _ = net_pass(nets_q, ebs_q, heads_q, n_h, scratch_q, pool,
                           counters, src_slot, bq_buf, bq_cyc, bq_head,
                           bq_count, bq_cap,
                           True, cyc, f_src, f_term, debug, ev, ev_cap)
        _inject_mark(pool, counters, outstanding, heads_q, f_src, n_sf,
                     cyc, debug, ev, ev_cap)
        # gap bookkeeping for ops that just left their stage slot
        h_store = heads_q[0]
        for j in range(n_sf):
            c = h_store[f_src[j]]
            if eligible[c] <= cyc:
                eligible[c] = cyc + 1
        if debug:
            _check_conservation(counters, dummy_q, pool_size, free_meta)
        # drained once every trace is consumed and every slot (stage,
        # in-fabric store, outstanding load) has been returned
        if free_meta[0] == pool_size:
            alldone = True
            for c in range(n_cores):
                if cursor[c] < op_start[c + 1]:
                    alldone = False
                    break
            if alldone:
                return cyc
    return -1
