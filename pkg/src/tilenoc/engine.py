"""Cycle-accurate execution over a compiled interconnect graph.

The engine turns a :class:`~tilenoc.topology.NetworkGraph` into flat
arrays (one set per network) and advances the cluster one cycle at a
time in compiled code.  Semantics, in one place:

* Storage points are core stage slots, elastic buffers, bank access
  pipelines and core sinks.  Everything between two storage points is
  combinational and is crossed in the cycle the flit moves.
* Each storage head follows its oblivious route and must win the
  round-robin arbiter at every switch output on the way; the arbiter
  grants the candidate closest after its pointer, and the pointer
  advances (to winner + 1) only when the grant actually fires.
* A winner fires only if the destination storage can accept it, judged
  by start-of-cycle occupancy (skid-buffer rule, so a full buffer that
  drains this cycle still refuses).  Non-firing requests retry next
  cycle; nothing is dropped.
* A bank accepts one request per cycle; a load accepted in cycle c
  emits its response in cycle c + 1 into a small per-bank staging
  queue feeding the response network.  Contention on the response path
  therefore queues at the bank output instead of blocking the memory,
  and only a full staging queue stalls new accesses.  Stores complete
  on arrival.
* A core stalls load injection while `window` loads are outstanding;
  stores are neither counted nor blocked by the window (only by FIFO
  order behind a blocked load).

Workloads are either open-loop synthetic traffic
(:class:`~tilenoc.traffic.SyntheticConfig`) or per-core operation
traces (see :mod:`tilenoc.kernels`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np

from . import _step
from .topology import (ClusterConfig, NetworkGraph, NodeKind, build_cluster,
                       zero_load_latency)
from .traffic import COIN_STREAM, DEST_STREAM, SyntheticConfig, stream_state

__all__ = [
    "arbitrate_rr",
    "CompiledNet",
    "CompiledCluster",
    "compile_cluster",
    "compiled_cluster",
    "SimState",
    "RawRun",
    "step",
    "run",
    "run_synthetic",
    "run_traces",
    "EVENT_NAMES",
]

EVENT_NAMES = {
    _step.EV_GEN: "gen",
    _step.EV_INJECT: "inject",
    _step.EV_MOVE_REQ: "move-req",
    _step.EV_MOVE_RESP: "move-resp",
    _step.EV_BANK: "bank",
    _step.EV_DONE: "complete",
    _step.EV_STORE: "store-done",
}

MAX_CHAIN = _step.MAX_CHAIN

# depth of the per-bank response staging queue; deep enough that it
# never fills outside adversarial single-bank traces
BANK_QUEUE_CAP = 16


def arbitrate_rr(candidates, pointer: int, n_inputs: int):
    """Round-robin grant: the candidate closest at-or-after the pointer.

    `candidates` are input port indices; returns the granted port or
    None.  On a fire the caller moves the pointer to (grant + 1) mod n,
    which is exactly what the compiled nets do.
    """
    best = None
    best_d = None
    for i in candidates:
        if not 0 <= i < n_inputs:
            raise ValueError(f"candidate {i} out of range 0..{n_inputs - 1}")
        d = (i - pointer) % n_inputs
        if best_d is None or d < best_d:
            best_d, best = d, i
    return best


# ------------------------------------------------------------- compilation


@dataclass
class CompiledNet:
    """One network flattened for the cycle kernels.

    Storage ids: sources first (request net: cores; response net:
    banks), then elastic buffers, then terminals (banks / sinks).
    Arbiter ids follow switch order, one per switch output.
    """

    net: str
    route_tab: np.ndarray
    sw_route_base: np.ndarray
    sw_arb_base: np.ndarray
    arb_n_in: np.ndarray
    arb_level: np.ndarray
    arb_to_sw: np.ndarray
    arb_to_port: np.ndarray
    arb_to_store: np.ndarray
    st_kind: np.ndarray
    st_cap: np.ndarray
    st_out_sw: np.ndarray
    st_out_port: np.ndarray
    st_out_store: np.ndarray
    st_ext: np.ndarray
    n_src: int
    n_eb: int
    n_term: int
    n_levels: int
    cap_max: int
    sw_names: list = field(repr=False, default_factory=list)
    eb_names: list = field(repr=False, default_factory=list)

    @property
    def n_arbs(self) -> int:
        return len(self.arb_n_in)

    @cached_property
    def arb_labels(self) -> list:
        labels = [""] * self.n_arbs
        for s, name in enumerate(self.sw_names):
            base = self.sw_arb_base[s]
            end = (self.sw_arb_base[s + 1] if s + 1 < len(self.sw_names)
                   else self.n_arbs)
            for o in range(end - base):
                labels[base + o] = f"{name}:{o}"
        return labels


def _compile_net(g: NetworkGraph, net: str) -> CompiledNet:
    nodes = g.nodes
    is_req = net == "req"
    switches = [n.idx for n in nodes
                if n.kind is NodeKind.SWITCH and n.net == net]
    sw_local = {idx: i for i, idx in enumerate(switches)}
    if is_req:
        sources = [src for src, _ in g.cores]
        terminals = list(g.banks)
    else:
        sources = list(g.banks)
        terminals = [snk for _, snk in g.cores]
    ebs = [n.idx for n in nodes if n.kind is NodeKind.BUFFER and n.net == net]
    n_src, n_eb, n_term = len(sources), len(ebs), len(terminals)

    st_target = {idx: n_src + e for e, idx in enumerate(ebs)}
    for k, idx in enumerate(terminals):
        st_target[idx] = n_src + n_eb + k

    def resolve(edge):
        dst, dport = edge
        if dst in sw_local:
            return "sw", sw_local[dst], dport
        assert dst in st_target, \
            f"{net} edge into foreign node {nodes[dst].name}"
        assert dport == 0
        return "st", st_target[dst], 0

    n_st = n_src + n_eb + n_term
    st_kind = np.empty(n_st, np.int32)
    st_kind[:n_src] = _step.ST_SRC
    st_kind[n_src:n_src + n_eb] = _step.ST_EB
    st_kind[n_src + n_eb:] = _step.ST_TERM
    st_cap = np.zeros(n_st, np.int32)
    st_ext = np.empty(n_st, np.int32)
    st_ext[:n_src] = np.arange(n_src)
    st_ext[n_src:n_src + n_eb] = np.arange(n_eb)
    st_ext[n_src + n_eb:] = np.arange(n_term)
    st_out_sw = np.full(n_st, -1, np.int32)
    st_out_port = np.zeros(n_st, np.int32)
    st_out_store = np.full(n_st, -1, np.int32)
    for e, idx in enumerate(ebs):
        st_cap[n_src + e] = nodes[idx].capacity
    for st, idx in enumerate(sources + ebs):
        kind, a, b = resolve(g.out_edges[idx][0])
        if kind == "sw":
            st_out_sw[st], st_out_port[st] = a, b
        else:
            st_out_store[st] = a

    # switches: concatenated route tables and one arbiter per output
    route_parts = []
    sw_route_base = np.zeros(len(switches), np.int32)
    sw_arb_base = np.zeros(len(switches), np.int32)
    pos = arb = 0
    for s, idx in enumerate(switches):
        node = nodes[idx]
        sw_route_base[s] = pos
        sw_arb_base[s] = arb
        route_parts.append(node.route)
        pos += len(node.route)
        arb += node.n_out
    route_tab = (np.concatenate(route_parts).astype(np.int32)
                 if route_parts else np.zeros(0, np.int32))
    n_arbs = arb
    arb_n_in = np.zeros(n_arbs, np.int32)
    arb_to_sw = np.full(n_arbs, -1, np.int32)
    arb_to_port = np.zeros(n_arbs, np.int32)
    arb_to_store = np.full(n_arbs, -1, np.int32)
    adj = [[] for _ in switches]
    indeg = [0] * len(switches)
    for s, idx in enumerate(switches):
        node = nodes[idx]
        for o in range(node.n_out):
            a = sw_arb_base[s] + o
            arb_n_in[a] = node.n_in
            kind, x, y = resolve(g.out_edges[idx][o])
            if kind == "sw":
                arb_to_sw[a], arb_to_port[a] = x, y
                adj[s].append(x)
                indeg[x] += 1
            else:
                arb_to_store[a] = x

    # levels: longest switch-to-switch distance; chains ascend strictly
    level = [0] * len(switches)
    ready = [s for s in range(len(switches)) if indeg[s] == 0]
    seen = 0
    while ready:
        s = ready.pop()
        seen += 1
        for t in adj[s]:
            if level[s] + 1 > level[t]:
                level[t] = level[s] + 1
            indeg[t] -= 1
            if indeg[t] == 0:
                ready.append(t)
    assert seen == len(switches), "combinational cycle"
    n_levels = (max(level) + 1) if switches else 0
    assert n_levels <= MAX_CHAIN
    arb_level = np.zeros(n_arbs, np.int32)
    for s in range(len(switches)):
        node = nodes[switches[s]]
        arb_level[sw_arb_base[s]:sw_arb_base[s] + node.n_out] = level[s]

    return CompiledNet(
        net=net, route_tab=route_tab, sw_route_base=sw_route_base,
        sw_arb_base=sw_arb_base, arb_n_in=arb_n_in, arb_level=arb_level,
        arb_to_sw=arb_to_sw, arb_to_port=arb_to_port,
        arb_to_store=arb_to_store, st_kind=st_kind, st_cap=st_cap,
        st_out_sw=st_out_sw, st_out_port=st_out_port,
        st_out_store=st_out_store, st_ext=st_ext,
        n_src=n_src, n_eb=n_eb, n_term=n_term, n_levels=n_levels,
        cap_max=max((int(st_cap[n_src:n_src + n_eb].max()), 1))
        if n_eb else 1,
        sw_names=[nodes[i].name for i in switches],
        eb_names=[nodes[i].name for i in ebs],
    )


class CompiledCluster:
    """Immutable compiled form of a cluster graph; shared across runs."""

    def __init__(self, graph: NetworkGraph):
        self.graph = graph
        self.req = _compile_net(graph, "req")
        self.resp = _compile_net(graph, "resp")
        self.n_cores = len(graph.cores)
        self.n_banks = len(graph.banks)
        n_tiles = max(graph.nodes[b].meta.get("tile", 0)
                      for b in graph.banks) + 1
        self.n_tiles = n_tiles
        self.cores_per_tile = self.n_cores // n_tiles
        self.banks_per_tile = self.n_banks // n_tiles
        self.bank_names = [graph.nodes[b].name for b in graph.banks]
        self._zero_tbl = None

    def zero_load_table(self) -> np.ndarray:
        """Round-trip zero-load latency per (core, bank), int16.

        No buffer placement depends on the bank within a tile, so one
        walk per (core, tile) is exact for all 16 banks of the tile.
        """
        if self._zero_tbl is None:
            tbl = np.empty((self.n_cores, self.n_banks), np.int16)
            for c in range(self.n_cores):
                for t in range(self.n_tiles):
                    lat = zero_load_latency(self.graph, c,
                                            t * self.banks_per_tile)
                    tbl[c, t * self.banks_per_tile:
                        (t + 1) * self.banks_per_tile] = lat
            self._zero_tbl = tbl
        return self._zero_tbl


def compile_cluster(graph: NetworkGraph) -> CompiledCluster:
    return CompiledCluster(graph)


@lru_cache(maxsize=16)
def compiled_cluster(cfg: ClusterConfig) -> CompiledCluster:
    """Build + compile a cluster once per configuration."""
    return compile_cluster(build_cluster(cfg))


# ------------------------------------------------------------------ state


@dataclass
class RawRun:
    """Raw cycle-level outcome of one run, before statistics."""

    counters: dict
    hist: np.ndarray
    horizon: int
    w0: int
    window: int
    cycles_run: int
    completion: int | None
    fires_req: np.ndarray
    fires_resp: np.ndarray
    compiled: CompiledCluster = field(repr=False)
    events: np.ndarray | None = field(repr=False, default=None)

    def event_lines(self) -> list:
        """Decode the debug event trace into readable lines."""
        if self.events is None:
            return []
        q_names = self.compiled.req.eb_names
        s_names = self.compiled.resp.eb_names
        bank_names = self.compiled.bank_names
        out = []
        for cyc, kind, a, b in self.events.tolist():
            name = EVENT_NAMES[kind]
            if kind == _step.EV_GEN:
                out.append(f"{cyc} {name} core={a}")
            elif kind == _step.EV_INJECT:
                out.append(f"{cyc} {name} slot={a} core={b}")
            elif kind == _step.EV_MOVE_REQ:
                out.append(f"{cyc} {name} slot={a} to={q_names[b]}")
            elif kind == _step.EV_MOVE_RESP:
                out.append(f"{cyc} {name} slot={a} to={s_names[b]}")
            elif kind in (_step.EV_BANK, _step.EV_STORE):
                out.append(f"{cyc} {name} slot={a} bank={bank_names[b]}")
            else:
                out.append(f"{cyc} {name} slot={a} core={b}")
        return out


def _net_tuple(cn: CompiledNet, arb_ptr, arb_fires):
    return (cn.route_tab, cn.sw_route_base, cn.sw_arb_base, arb_ptr,
            cn.arb_n_in, cn.arb_level, cn.arb_to_sw, cn.arb_to_port,
            cn.arb_to_store, arb_fires, cn.st_kind, cn.st_cap,
            cn.st_out_sw, cn.st_out_port, cn.st_out_store, cn.st_ext,
            cn.n_src, cn.n_levels)


class _NetState:
    def __init__(self, cn: CompiledNet):
        self.arb_ptr = np.zeros(cn.n_arbs, np.int32)
        self.arb_fires = np.zeros(cn.n_arbs, np.int64)
        self.eb_buf = np.zeros(cn.n_eb * cn.cap_max, np.int32)
        self.eb_head = np.zeros(cn.n_eb, np.int32)
        self.eb_count = np.zeros(cn.n_eb, np.int32)
        self.eb_active = np.zeros(cn.n_eb, np.int32)
        self.eb_active_pos = np.full(cn.n_eb, -1, np.int32)
        self.eb_meta = np.zeros(1, np.int64)
        n_heads = cn.n_src + cn.n_eb
        self.h_store = np.zeros(n_heads, np.int32)
        self.h_slot = np.zeros(n_heads, np.int32)
        self.h_dest = np.zeros(n_heads, np.int32)
        self.h_chain_arb = np.zeros((n_heads, MAX_CHAIN), np.int32)
        self.h_chain_port = np.zeros((n_heads, MAX_CHAIN), np.int32)
        self.h_len = np.zeros(n_heads, np.int32)
        self.h_target = np.zeros(n_heads, np.int32)
        self.h_alive = np.zeros(n_heads, np.int32)
        self.h_pos = np.zeros(n_heads, np.int32)
        self.a_stamp = np.full(cn.n_arbs, -1, np.int64)
        self.a_best = np.zeros(cn.n_arbs, np.int32)
        self.a_best_head = np.zeros(cn.n_arbs, np.int32)
        self.net = _net_tuple(cn, self.arb_ptr, self.arb_fires)
        self.ebs = (self.eb_buf, self.eb_head, self.eb_count, self.eb_active,
                    self.eb_active_pos, self.eb_meta, cn.cap_max)
        self.heads = (self.h_store, self.h_slot, self.h_dest,
                      self.h_chain_arb, self.h_chain_port, self.h_len,
                      self.h_target, self.h_alive, self.h_pos)
        self.scratch = (self.a_stamp, self.a_best, self.a_best_head)


class SimState:
    """Mutable simulation state: one workload bound to one cluster.

    `workload` is either a SyntheticConfig (open loop, runs to
    `horizon`) or per-core operation traces: a sequence of n_cores
    sequences of ("L", bank), ("S", bank) or ("G", cycles) tuples, bank
    being the global bank index (closed loop, runs until drained).
    """

    def __init__(self, compiled: CompiledCluster, workload, *, seed: int = 0,
                 horizon: int = 10_000, window: int = 8,
                 warmup_frac: float = 0.2, debug: bool = False,
                 check_floor: bool = False, event_capacity: int = 1 << 16):
        c = compiled
        self.compiled = c
        self.window = int(window)
        self.debug = bool(debug)
        self.check_floor = bool(check_floor)
        self.cycle = 0
        self.completion = None

        self.q = _NetState(c.req)
        self.s = _NetState(c.resp)

        pool_n = (c.n_cores + c.n_banks * BANK_QUEUE_CAP + 8
                  + int(c.req.st_cap.sum()) + int(c.resp.st_cap.sum()))
        self.slot_gen = np.zeros(pool_n, np.int64)
        self.slot_inject = np.zeros(pool_n, np.int64)
        self.slot_core = np.zeros(pool_n, np.int32)
        self.slot_dest = np.zeros(pool_n, np.int32)
        self.slot_load = np.zeros(pool_n, np.uint8)
        self.free_list = np.arange(pool_n, dtype=np.int32)
        self.free_meta = np.array([pool_n], np.int64)
        self.pool = (self.slot_gen, self.slot_inject, self.slot_core,
                     self.slot_dest, self.slot_load, self.free_list,
                     self.free_meta)

        self.src_slot = np.full(c.n_cores, -1, np.int32)
        self.outstanding = np.zeros(c.n_cores, np.int32)
        # per-bank response staging queue: a fired bank access parks here
        # until the response network grants it, so the bank itself only
        # stalls if the queue fills
        self.bq_cap = BANK_QUEUE_CAP
        self.bq_buf = np.zeros(c.n_banks * self.bq_cap, np.int32)
        self.bq_cyc = np.zeros(c.n_banks * self.bq_cap, np.int64)
        self.bq_head = np.zeros(c.n_banks, np.int32)
        self.bq_count = np.zeros(c.n_banks, np.int32)
        n_heads = max(c.req.n_src + c.req.n_eb, c.resp.n_src + c.resp.n_eb)
        self.f_src = np.zeros(n_heads, np.int32)
        self.f_term = np.zeros(n_heads, np.int32)
        self.counters = np.zeros(_step.N_COUNTERS, np.int64)

        if self.check_floor:
            self.zero_tbl = c.zero_load_table()
        else:
            self.zero_tbl = np.zeros((1, 1), np.int16)
        if self.debug:
            self.ev = np.zeros((event_capacity, 4), np.int64)
            self.ev_cap = event_capacity
        else:
            self.ev = np.zeros((0, 4), np.int64)
            self.ev_cap = 0

        if isinstance(workload, SyntheticConfig):
            self.mode = "synthetic"
            self.syn = workload
            self.horizon = int(horizon)
            self.w0 = int(self.horizon * warmup_frac)
            self.hist = np.zeros(self.horizon + 2, np.int64)
            self.queue_len = np.zeros(c.n_cores, np.int64)
            self.rng_coin = np.empty(c.n_cores, np.uint64)
            self.rng_replay = np.empty(c.n_cores, np.uint64)
            self.rng_dest = np.empty(c.n_cores, np.uint64)
            self.replay_cycle = np.zeros(c.n_cores, np.int64)
            for core in range(c.n_cores):
                a = stream_state(seed, core, COIN_STREAM)
                self.rng_coin[core] = a
                self.rng_replay[core] = a
                self.rng_dest[core] = stream_state(seed, core, DEST_STREAM)
        else:
            self.mode = "trace"
            self.horizon = int(horizon)
            self.w0 = 0
            self.hist = np.zeros(min(self.horizon, 1 << 20) + 2, np.int64)
            kinds = {"L": 0, "S": 1, "G": 2}
            op_kind, op_val = [], []
            op_start = np.zeros(c.n_cores + 1, np.int64)
            if len(workload) != c.n_cores:
                raise ValueError(f"need {c.n_cores} per-core traces, "
                                 f"got {len(workload)}")
            for core, ops in enumerate(workload):
                for kind, val in ops:
                    op_kind.append(kinds[kind])
                    if kind != "G" and not 0 <= val < c.n_banks:
                        raise ValueError(f"bank {val} out of range")
                    op_val.append(val)
                op_start[core + 1] = len(op_kind)
            self.op_start = op_start
            self.op_kind = np.array(op_kind, np.int8)
            self.op_val = np.array(op_val, np.int32)
            self.cursor = op_start[:-1].copy()
            self.eligible = np.zeros(c.n_cores, np.int64)

    # ------------------------------------------------------------- runs

    def _step_synthetic(self, n: int) -> None:
        syn = self.syn
        _step.run_synth(
            n, self.cycle, self.q.net, self.s.net, self.q.ebs, self.s.ebs,
            self.q.heads, self.s.heads, self.q.scratch, self.s.scratch,
            self.pool, self.src_slot, self.outstanding, self.queue_len,
            self.bq_buf, self.bq_cyc, self.bq_head, self.bq_count,
            self.bq_cap,
            self.rng_coin, self.rng_replay, self.replay_cycle, self.rng_dest,
            float(syn.rate), float(syn.p_local), float(syn.store_fraction),
            self.compiled.cores_per_tile, self.compiled.banks_per_tile,
            syn.region_words, self.window, self.w0, self.counters, self.hist,
            self.f_src, self.f_term, self.debug, self.ev, self.ev_cap,
            self.zero_tbl, self.check_floor)
        self.cycle += n

    def _step_trace(self, n: int) -> None:
        done = _step.run_trace(
            n, self.cycle, self.q.net, self.s.net, self.q.ebs, self.s.ebs,
            self.q.heads, self.s.heads, self.q.scratch, self.s.scratch,
            self.pool, self.src_slot, self.outstanding,
            self.bq_buf, self.bq_cyc, self.bq_head, self.bq_count,
            self.bq_cap,
            self.op_start, self.op_kind, self.op_val, self.cursor,
            self.eligible, self.window, self.counters, self.hist,
            self.f_src, self.f_term, self.debug, self.ev, self.ev_cap,
            self.zero_tbl, self.check_floor)
        if done >= 0:
            self.completion = int(done)
            self.cycle = int(done) + 1
        else:
            self.cycle += n

    def collect(self) -> RawRun:
        names = ["generated", "injected_loads", "injected_stores",
                 "completed_loads", "completed_stores", "completed_in_window",
                 "latency_sum", "latency_n"]
        counters = {k: int(self.counters[i]) for i, k in enumerate(names)}
        counters["events_lost"] = int(self.counters[_step.C_EV_LOST])
        events = None
        if self.debug:
            events = self.ev[:int(self.counters[_step.C_EV_N])].copy()
        return RawRun(
            counters=counters, hist=self.hist.copy(), horizon=self.horizon,
            w0=self.w0, window=self.window, cycles_run=self.cycle,
            completion=self.completion, fires_req=self.q.arb_fires.copy(),
            fires_resp=self.s.arb_fires.copy(), compiled=self.compiled,
            events=events)


def step(state: SimState, cycles: int = 1) -> None:
    """Advance the simulation by `cycles` (stops early if a trace drains)."""
    if cycles <= 0 or state.completion is not None:
        return
    if state.mode == "synthetic":
        state._step_synthetic(cycles)
    else:
        state._step_trace(cycles)


def run(state: SimState) -> RawRun:
    """Run to the horizon (synthetic) or until drained (trace)."""
    if state.mode == "synthetic":
        if state.cycle < state.horizon:
            step(state, state.horizon - state.cycle)
    else:
        while state.completion is None:
            if state.cycle >= state.horizon:
                raise RuntimeError(
                    f"trace did not drain within {state.horizon} cycles")
            step(state, min(8192, state.horizon - state.cycle))
    return state.collect()


def run_synthetic(compiled: CompiledCluster, syn: SyntheticConfig, *,
                  horizon: int, seed: int = 0, window: int = 8,
                  warmup_frac: float = 0.2, debug: bool = False,
                  check_floor: bool = False) -> RawRun:
    state = SimState(compiled, syn, seed=seed, horizon=horizon,
                     window=window, warmup_frac=warmup_frac, debug=debug,
                     check_floor=check_floor)
    return run(state)


def run_traces(compiled: CompiledCluster, traces: Sequence, *,
               max_cycles: int = 1 << 22, window: int = 8,
               debug: bool = False, check_floor: bool = False) -> RawRun:
    state = SimState(compiled, traces, horizon=max_cycles, window=window,
                     debug=debug, check_floor=check_floor)
    return run(state)
