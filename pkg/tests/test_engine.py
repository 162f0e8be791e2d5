"""Cycle engine tests.

Latency oracles are closed-form path classes; RNG expectations replay
the plain-Python traffic reference against the compiled driver.
"""

import numpy as np
import pytest

from tilenoc import engine
from tilenoc import _step
from tilenoc.engine import (
    SimState,
    arbitrate_rr,
    compiled_cluster,
    run_synthetic,
    run_traces,
    step,
)
from tilenoc.topology import ClusterConfig, VARIANTS
from tilenoc.traffic import (
    COIN_STREAM,
    DEST_STREAM,
    SplitMix64,
    SyntheticConfig,
    draw_destination,
    maybe_generate,
    stream_state,
)


def comp(variant):
    return compiled_cluster(ClusterConfig(variant=variant))


def idle_traces(n=256):
    return [[] for _ in range(n)]


def oracle_latency(variant, core, bank):
    if variant == "topX":
        return 1
    core_tile, bank_tile = core // 4, bank // 16
    if core_tile == bank_tile:
        return 1
    if variant == "topH" and core_tile // 16 == bank_tile // 16:
        return 3
    return 5


# ------------------------------------------------------------- arbitration

def test_arbitrate_rr_basics():
    assert arbitrate_rr({2}, 0, 4) == 2
    assert arbitrate_rr({0, 1, 2, 3}, 2, 4) == 2
    assert arbitrate_rr({0, 1}, 2, 4) == 0  # wraps past 3
    assert arbitrate_rr(set(), 1, 4) is None


def test_arbitrate_rr_rejects_bad_port():
    with pytest.raises(ValueError):
        arbitrate_rr({4}, 0, 4)


def test_arbitrate_rr_full_contention_shares():
    # all four inputs always requesting: each wins 1 of every 4 grants
    ptr, wins = 0, [0, 0, 0, 0]
    for _ in range(4096):
        g = arbitrate_rr({0, 1, 2, 3}, ptr, 4)
        wins[g] += 1
        ptr = (g + 1) % 4
    assert wins == [1024, 1024, 1024, 1024]


# --------------------------------------------------------- single latencies

@pytest.mark.parametrize("variant,core,bank", [
    ("topX", 0, 0), ("topX", 255, 1023), ("topX", 97, 404),
    ("top1", 0, 0), ("top1", 0, 16), ("top1", 255, 0), ("top1", 9, 39),
    ("top4", 5, 17), ("top4", 5, 999), ("top4", 200, 803),
    ("topH", 0, 0), ("topH", 0, 16), ("topH", 0, 255),
    ("topH", 0, 256), ("topH", 17, 1000), ("topH", 255, 0),
])
def test_single_load_completion(variant, core, bank):
    traces = idle_traces()
    traces[core] = [("L", bank)]
    raw = run_traces(comp(variant), traces, check_floor=True)
    assert raw.completion == oracle_latency(variant, core, bank)
    assert raw.counters["completed_loads"] == 1


def test_zero_load_table_matches_oracle():
    for variant in VARIANTS:
        tbl = comp(variant).zero_load_table()
        rng = np.random.default_rng(3)
        for core, bank in zip(rng.integers(0, 256, 25),
                              rng.integers(0, 1024, 25)):
            assert tbl[core, bank] == oracle_latency(
                variant, int(core), int(bank))


def test_bank_conflict_stalls_exactly_one_cycle():
    traces = idle_traces()
    traces[0] = [("L", 7)]
    traces[1] = [("L", 7)]
    raw = run_traces(comp("topX"), traces, debug=True)
    done = sorted(c for c, k, _, _ in raw.events.tolist()
                  if k == _step.EV_DONE)
    assert done == [1, 2]


def test_back_to_back_same_bank():
    # the bank takes one request per cycle; a two-load burst drains in 2
    traces = idle_traces()
    traces[0] = [("L", 3), ("L", 3)]
    raw = run_traces(comp("topX"), traces)
    assert raw.completion == 2


# -------------------------------------------------------------- trace ops

def test_trace_gap_delays_next_issue():
    traces = idle_traces()
    traces[0] = [("L", 0), ("G", 3), ("L", 0)]
    raw = run_traces(comp("topX"), traces)
    # issues at 0 and 4 (gap counts from the previous issue)
    assert raw.completion == 5


def test_trace_window_blocks_loads():
    traces = idle_traces()
    traces[0] = [("L", 999), ("L", 999)]  # remote on topH: 5 cycles
    raw = run_traces(comp("topH"), traces, window=1)
    # second load waits for the first completion at 5, lands at 10
    assert raw.completion == 10
    raw = run_traces(comp("topH"), traces, window=2)
    assert raw.completion == 6


def test_store_completes_at_bank_without_response():
    traces = idle_traces()
    traces[0] = [("S", 999)]
    raw = run_traces(comp("topH"), traces)
    # request path only: two register crossings, lands in the bank
    assert raw.completion == 2
    assert raw.counters["completed_stores"] == 1
    assert raw.counters["completed_loads"] == 0


def test_stores_not_window_limited():
    traces = idle_traces()
    traces[0] = [("S", 999)] * 10
    raw = run_traces(comp("topH"), traces, window=1)
    # one store enters the fabric per cycle regardless of the window
    assert raw.completion == 11


def test_trace_budget_exhaustion_raises():
    traces = idle_traces()
    traces[0] = [("G", 5000), ("L", 0)]
    with pytest.raises(RuntimeError):
        run_traces(comp("topX"), traces, max_cycles=100)


def test_trace_validation():
    with pytest.raises(ValueError):
        run_traces(comp("topX"), idle_traces(7))
    bad = idle_traces()
    bad[0] = [("L", 1024)]
    with pytest.raises(ValueError):
        run_traces(comp("topX"), bad)


def test_responses_in_order_with_window_one():
    banks = [999, 0, 517, 16, 255, 3]
    traces = idle_traces()
    traces[42] = [("L", b) for b in banks]
    raw = run_traces(comp("topH"), traces, window=1, debug=True)
    seen = [b for _, k, _, b in raw.events.tolist() if k == _step.EV_BANK]
    assert seen == banks


# ------------------------------------------------------------ rr fairness

def test_round_robin_fairness_under_full_contention():
    # four cores of one tile hammer one bank; their grant shares over
    # the saturated stretch may differ by at most one
    traces = idle_traces()
    for c in range(4):
        traces[c] = [("L", 5)] * 64
    raw = run_traces(comp("topX"), traces, window=8, debug=True)
    done = [(cyc, core) for cyc, k, _, core in raw.events.tolist()
            if k == _step.EV_DONE]
    mid = [core for cyc, core in done if 16 <= cyc < 208]  # 48 rounds of 4
    counts = [mid.count(c) for c in range(4)]
    assert max(counts) - min(counts) <= 1
    # the bank serves one per cycle throughout the contended stretch
    cycles = sorted(cyc for cyc, _ in done)
    assert cycles == list(range(1, 257))


# ------------------------------------------------------------ determinism

def test_synthetic_determinism():
    syn = SyntheticConfig(rate=0.2, p_local=0.25)
    a = run_synthetic(comp("top4"), syn, horizon=1500, seed=11)
    b = run_synthetic(comp("top4"), syn, horizon=1500, seed=11)
    assert a.counters == b.counters
    assert np.array_equal(a.hist, b.hist)
    assert np.array_equal(a.fires_req, b.fires_req)
    c = run_synthetic(comp("top4"), syn, horizon=1500, seed=12)
    assert c.counters != a.counters


def test_step_chunking_equals_single_run():
    syn = SyntheticConfig(rate=0.3)
    whole = run_synthetic(comp("top1"), syn, horizon=1200, seed=5)
    st = SimState(comp("top1"), syn, seed=5, horizon=1200)
    for n in (1, 7, 131, 500, 561):
        step(st, n)
    chunked = st.collect()
    assert chunked.counters == whole.counters
    assert np.array_equal(chunked.hist, whole.hist)


# ------------------------------------------------------- conservation etc.

def test_conservation_holds_every_debug_cycle():
    # the kernel raises on any imbalance when debug is set
    syn = SyntheticConfig(rate=0.4, store_fraction=0.3)
    raw = run_synthetic(comp("topH"), syn, horizon=800, seed=3, debug=True,
                        check_floor=True)
    assert raw.counters["events_lost"] >= 0  # ran to completion


def test_final_accounting_balances():
    syn = SyntheticConfig(rate=0.35, store_fraction=0.2)
    st = SimState(comp("top4"), syn, seed=9, horizon=2000)
    step(st, 2000)
    in_flight = (int((st.src_slot >= 0).sum()) + int(st.q.eb_count.sum())
                 + int(st.s.eb_count.sum()) + int(st.bq_count.sum()))
    c = st.collect().counters
    assert c["generated"] == (c["completed_loads"] + c["completed_stores"]
                              + int(st.queue_len.sum()) + in_flight)


def test_latency_floor_enforced_under_load():
    syn = SyntheticConfig(rate=0.5)
    run_synthetic(comp("topH"), syn, horizon=1000, seed=2, check_floor=True)


def test_event_trace_decodes():
    traces = idle_traces()
    traces[0] = [("L", 999)]
    raw = run_traces(comp("topH"), traces, debug=True)
    lines = raw.event_lines()
    assert any(line.endswith("gen core=0") for line in lines)
    assert any("complete" in line for line in lines)
    assert len(lines) == len(raw.events)


# ------------------------------------------------------------ rng contract

def test_driver_replays_reference_streams():
    lam, horizon, seed = 0.15, 400, 21
    syn = SyntheticConfig(rate=lam)
    raw = run_synthetic(comp("topX"), syn, horizon=horizon, seed=seed,
                        window=1, debug=True)
    events = raw.events.tolist()
    for core in (0, 137, 255):
        coin = SplitMix64(stream_state(seed, core, COIN_STREAM))
        gen_cycles = [t for t in range(horizon)
                      if maybe_generate(coin, syn)]
        got = [cyc for cyc, k, c, _ in events
               if k == _step.EV_GEN and c == core]
        assert got == gen_cycles

        dest = SplitMix64(stream_state(seed, core, DEST_STREAM))
        nbpt = syn.layout.n_banks_per_tile
        want = [t * nbpt + b for t, b, _ in
                (draw_destination(dest, syn, core)
                 for _ in range(len(gen_cycles)))]
        # window=1 serializes the core, so inject order = draw order
        slots = [(cyc, a) for cyc, k, a, b in events
                 if k == _step.EV_INJECT and b == core]
        banks = []
        for cyc, slot in slots:
            banks.append(next(b for c2, k, a, b in events
                              if k == _step.EV_BANK and a == slot
                              and c2 >= cyc))
        assert banks == want[:len(banks)]


def test_locality_one_keeps_traffic_in_tile():
    syn = SyntheticConfig(rate=0.3, p_local=1.0)
    raw = run_synthetic(comp("topH"), syn, horizon=600, seed=4, debug=True)
    for cyc, k, slot, bank in raw.events.tolist():
        if k == _step.EV_BANK:
            inject_core = next(
                b for c2, k2, a, b in raw.events.tolist()[::-1]
                if k2 == _step.EV_INJECT and a == slot and c2 <= cyc)
            assert bank // 16 == inject_core // 4
            break  # spot check one; the full check is O(n^2)
    counts = raw.counters
    assert counts["completed_loads"] > 0


# ---------------------------------------------------------------- compile

def test_compiled_chain_depth_bounded():
    for variant in VARIANTS:
        c = comp(variant)
        assert 0 < c.req.n_levels <= engine.MAX_CHAIN
        assert 0 < c.resp.n_levels <= engine.MAX_CHAIN


def test_compiled_cluster_is_cached():
    assert comp("top1") is comp("top1")
