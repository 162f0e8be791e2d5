"""Interconnect graphs for the tile cluster.

A cluster couples 256 cores to 1024 SRAM banks (64 tiles of 4 cores and
16 banks) through a request network and a disjoint response network.
Within a tile every core reaches the local banks through a combinational
crossbar in a single cycle.  Remote traffic crosses one of four variant
fabrics:

* ``top1``: one 64x64 radix-4 butterfly per direction, one remote port
  per tile (4:1 concentrator in front of it).
* ``top4``: four parallel 64x64 butterflies, one remote port per core.
* ``topH``: hierarchical.  4 groups of 16 tiles; a full 16x16 crossbar
  inside each group plus three 16x16 butterflies to the other groups,
  selected by a per-tile 4x4 port router.
* ``topX``: ideal single-cycle crossbar, conflicts only at bank ports.

Timing is carried entirely by buffer (elastic) nodes: every path from
storage to storage is combinational and costs one cycle to traverse.
Buffers sit at each tile's remote request/response ports, midway through
the 64x64 butterflies, and at each group's master interfaces in topH.
That placement yields round-trip zero-load latencies of 1 (local),
3 (topH intra-group) and 5 (all other remote paths).

The graph is a plain DAG description; the cycle-accurate semantics live
in :mod:`tilenoc.engine`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .addressing import AddressLayout

__all__ = [
    "NodeKind",
    "Node",
    "NetworkGraph",
    "ClusterConfig",
    "VARIANTS",
    "build_crossbar",
    "build_butterfly",
    "build_cluster",
    "zero_load_latency",
]

VARIANTS = ("top1", "top4", "topH", "topX")


class NodeKind(enum.Enum):
    SOURCE = "source"    # per-core request origin
    SINK = "sink"        # per-core response terminal
    BANK = "bank"        # request terminal / response origin
    SWITCH = "switch"    # combinational, arbitrated per output
    BUFFER = "buffer"    # elastic storage, breaks combinational paths


@dataclass
class Node:
    idx: int
    kind: NodeKind
    name: str
    net: str = ""              # 'req' | 'resp' | '' for endpoints
    n_in: int = 1
    n_out: int = 1
    capacity: int = 0          # buffers only
    route: np.ndarray | None = None   # switches: dest -> out port
    meta: dict = field(default_factory=dict)


class NetworkGraph:
    """Request + response DAGs with oblivious per-switch routing.

    Destinations are small integers: global bank index on the request
    net, core index on the response net.  Every storage or source node
    has at most one outgoing edge; switch outputs each have exactly one.
    """

    def __init__(self, name: str, n_req_dest: int, n_resp_dest: int):
        self.name = name
        self.n_req_dest = n_req_dest
        self.n_resp_dest = n_resp_dest
        self.nodes: list[Node] = []
        # out_edges[idx][port] = (dst_idx, dst_port)
        self.out_edges: list[list[tuple[int, int] | None]] = []
        self._feeders: dict[tuple[int, int], int] = {}
        self.cores: list[tuple[int, int]] = []   # core id -> (source, sink)
        self.banks: list[int] = []               # global bank id -> node

    # ------------------------------------------------------------ build

    def _add(self, node: Node) -> int:
        node.idx = len(self.nodes)
        self.nodes.append(node)
        self.out_edges.append([None] * node.n_out)
        return node.idx

    def add_source(self, name, **meta):
        return self._add(Node(-1, NodeKind.SOURCE, name, "req", 0, 1, meta=meta))

    def add_sink(self, name, **meta):
        return self._add(Node(-1, NodeKind.SINK, name, "resp", 1, 0, meta=meta))

    def add_bank(self, name, **meta):
        return self._add(Node(-1, NodeKind.BANK, name, "", 1, 1, meta=meta))

    def add_buffer(self, name, net, capacity, **meta):
        assert capacity >= 1
        return self._add(Node(-1, NodeKind.BUFFER, name, net, 1, 1,
                              capacity=capacity, meta=meta))

    def add_switch(self, name, net, n_in, n_out, route, **meta):
        route = np.asarray(route, dtype=np.int32)
        n_dest = self.n_req_dest if net == "req" else self.n_resp_dest
        assert route.shape == (n_dest,)
        assert n_out > 0 and (0 <= route).all() and (route < n_out).all()
        return self._add(Node(-1, NodeKind.SWITCH, name, net, n_in, n_out,
                              route=route, meta=meta))

    def connect(self, src: int, sport: int, dst: int, dport: int = 0) -> None:
        assert self.out_edges[src][sport] is None, \
            f"output {sport} of {self.nodes[src].name} already wired"
        dnode = self.nodes[dst]
        if dnode.kind is not NodeKind.SINK:
            key = (dst, dport)
            assert key not in self._feeders, \
                f"input {dport} of {dnode.name} already fed"
            self._feeders[key] = src
        self.out_edges[src][sport] = (dst, dport)

    # --------------------------------------------------------- validate

    def validate(self) -> None:
        for node in self.nodes:
            edges = self.out_edges[node.idx]
            if node.kind is NodeKind.SWITCH:
                missing = [p for p, e in enumerate(edges) if e is None]
                assert not missing, f"{node.name}: unwired outputs {missing}"
            elif node.kind in (NodeKind.SOURCE, NodeKind.BUFFER, NodeKind.BANK):
                assert edges[0] is not None, f"{node.name}: no output edge"
        # combinational subgraph (switch -> switch edges) must be acyclic
        colour = [0] * len(self.nodes)

        def visit(i):
            colour[i] = 1
            for e in self.out_edges[i]:
                if e is None:
                    continue
                j = e[0]
                if self.nodes[j].kind is NodeKind.SWITCH:
                    if colour[j] == 1:
                        raise AssertionError("combinational cycle via "
                                             + self.nodes[j].name)
                    if colour[j] == 0:
                        visit(j)
            colour[i] = 2

        for node in self.nodes:
            if node.kind is NodeKind.SWITCH and colour[node.idx] == 0:
                visit(node.idx)

    # ------------------------------------------------------------- walk

    def walk(self, start: int, dest: int) -> list[int]:
        """Follow the oblivious route from a source/storage to a terminal.

        Returns the node index sequence, ending at a BANK (request net)
        or SINK (response net).
        """
        path = [start]
        node = self.nodes[start]
        seen = 0
        edge = self.out_edges[start][0]
        while True:
            assert edge is not None, f"dangling path at {node.name}"
            nxt, _ = edge
            path.append(nxt)
            node = self.nodes[nxt]
            if node.kind in (NodeKind.BANK, NodeKind.SINK) and nxt != start:
                return path
            if node.kind is NodeKind.SWITCH:
                edge = self.out_edges[nxt][int(node.route[dest])]
            else:
                edge = self.out_edges[nxt][0]
            seen += 1
            assert seen < 100, "runaway path"

    # ------------------------------------------------------------- dump

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "nodes": [
                {
                    "idx": n.idx, "kind": n.kind.value, "name": n.name,
                    "net": n.net, "n_in": n.n_in, "n_out": n.n_out,
                    "capacity": n.capacity,
                }
                for n in self.nodes
            ],
            "edges": [
                {"src": i, "port": p, "dst": e[0], "dst_port": e[1]}
                for i, ports in enumerate(self.out_edges)
                for p, e in enumerate(ports) if e is not None
            ],
        }

    def describe(self) -> str:
        lines = [f"graph {self.name}: {len(self.nodes)} nodes"]
        for n in self.nodes:
            edges = ", ".join(
                f"{p}->{self.nodes[e[0]].name}:{e[1]}"
                for p, e in enumerate(self.out_edges[n.idx]) if e is not None)
            cap = f" cap={n.capacity}" if n.kind is NodeKind.BUFFER else ""
            lines.append(f"  [{n.idx}] {n.kind.value} {n.name}{cap} | {edges}")
        return "\n".join(lines)


# ------------------------------------------------------------ butterflies


def _digit(value, radix, i):
    return (value // radix**i) % radix


def _butterfly_switches(g: NetworkGraph, net: str, name: str, n_ports: int,
                        radix: int, port_of_dest: np.ndarray,
                        buffer_after_stage: int | None,
                        buffer_capacity: int):
    """Add an indexed radix-k butterfly; return (input hooks, output hooks).

    Stage i groups the positions that differ only in base-radix digit i
    and lets the switch rewrite that digit; selecting digit i of the
    destination port at every stage yields the unique path.  Hooks are
    (node, port) pairs: inputs accept one edge each, outputs must be
    connected onward by the caller.
    """
    n_stages = 0
    while radix ** n_stages < n_ports:
        n_stages += 1
    assert radix ** n_stages == n_ports, "port count must be a radix power"
    n_sw = n_ports // radix

    stage_nodes = []
    for i in range(n_stages):
        route = np.array([_digit(int(p), radix, i) for p in port_of_dest],
                         dtype=np.int32)
        stage_nodes.append([
            g.add_switch(f"{name}.s{i}.{s}", net, radix, radix, route)
            for s in range(n_sw)
        ])

    def sw_of(pos, i):
        # strip digit i from the position to index the stage-i switch
        hi = pos // radix ** (i + 1)
        lo = pos % radix ** i
        return hi * radix**i + lo

    inputs = [(stage_nodes[0][sw_of(p, 0)], _digit(p, radix, 0))
              for p in range(n_ports)]
    outputs = []
    for i in range(n_stages):
        for pos in range(n_ports):
            src = (stage_nodes[i][sw_of(pos, i)], _digit(pos, radix, i))
            if i == buffer_after_stage and i < n_stages - 1:
                buf = g.add_buffer(f"{name}.pipe.{pos}", net, buffer_capacity)
                g.connect(src[0], src[1], buf)
                src = (buf, 0)
            if i < n_stages - 1:
                dst_sw = stage_nodes[i + 1][sw_of(pos, i + 1)]
                g.connect(src[0], src[1], dst_sw, _digit(pos, radix, i + 1))
            else:
                outputs.append(src)
    return inputs, outputs


def build_butterfly(n_ports: int, radix: int = 4,
                    buffer_after_stage: int | None = None,
                    buffer_capacity: int = 2) -> NetworkGraph:
    """Standalone butterfly with per-port sources and sinks (for tests)."""
    g = NetworkGraph(f"butterfly{n_ports}", n_ports, n_ports)
    ins, outs = _butterfly_switches(
        g, "req", "bf", n_ports, radix, np.arange(n_ports),
        buffer_after_stage, buffer_capacity)
    for p in range(n_ports):
        src = g.add_source(f"in{p}", port=p)
        g.connect(src, 0, *ins[p])
    for p, (node, port) in enumerate(outs):
        # reuse BANK as the generic terminal so walks stop here
        term = g.add_bank(f"out{p}", port=p)
        g.connect(node, port, term)
        g.banks.append(term)
    return g


def build_crossbar(n_in: int, n_out: int,
                   registered: bool = False, capacity: int = 2) -> NetworkGraph:
    """Standalone single-stage crossbar (for tests)."""
    g = NetworkGraph(f"crossbar{n_in}x{n_out}", n_out, n_out)
    sw = g.add_switch("xbar", "req", n_in, n_out, np.arange(n_out))
    for p in range(n_in):
        src = g.add_source(f"in{p}", port=p)
        g.connect(src, 0, sw, p)
    for p in range(n_out):
        hook = (sw, p)
        if registered:
            buf = g.add_buffer(f"reg{p}", "req", capacity)
            g.connect(sw, p, buf)
            hook = (buf, 0)
        term = g.add_bank(f"out{p}", port=p)
        g.connect(hook[0], hook[1], term)
        g.banks.append(term)
    return g


# ---------------------------------------------------------------- cluster


@dataclass(frozen=True)
class ClusterConfig:
    """Shape of the simulated cluster.

    Tile and bank counts derive from the address layout so the memory
    map and the fabric can never disagree.
    """

    variant: str = "topH"
    layout: AddressLayout = AddressLayout()
    cores_per_tile: int = 4
    eb_capacity: int = 2        # elastic buffer depth at every register point
    n_groups: int = 4           # topH only

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.eb_capacity < 1:
            raise ValueError("eb_capacity must be >= 1")

    @property
    def n_tiles(self) -> int:
        return self.layout.n_tiles

    @property
    def n_cores(self) -> int:
        return self.n_tiles * self.cores_per_tile

    @property
    def n_banks(self) -> int:
        return self.layout.n_banks

    @property
    def remote_ports_per_tile(self) -> int:
        return {"top1": 1, "top4": 4, "topH": 4, "topX": 0}[self.variant]


# tile request crossbars are provisioned full-width: 4 core ports plus 16
# remote-in ports, even where a variant wires fewer remote inputs
REMOTE_IN_PORTS = 16


def _tile_of(cfg, core):
    return core // cfg.cores_per_tile


def build_cluster(cfg: ClusterConfig) -> NetworkGraph:
    builder = {
        "top1": _build_top1,
        "top4": _build_top4,
        "topH": _build_topH,
        "topX": _build_topX,
    }[cfg.variant]
    g = builder(cfg)
    g.validate()
    return g


def _base_tiles(g: NetworkGraph, cfg: ClusterConfig):
    """Cores, banks and the per-tile crossbars shared by all variants.

    Returns (xreq, xresp) lists indexed by tile.  Request crossbar input
    ports: cores at 0..3, remote-in at 4..19.  Response crossbar output
    ports: local cores at 0..3, remote-out from 4 up (wired per variant).
    """
    nt, cpt = cfg.n_tiles, cfg.cores_per_tile
    nbk = cfg.layout.n_banks_per_tile
    bank_of_dest = np.arange(cfg.n_banks) % nbk
    core_lane = np.arange(cfg.n_cores) % cpt

    for c in range(cfg.n_cores):
        src = g.add_source(f"c{c}.src", core=c)
        snk = g.add_sink(f"c{c}.sink", core=c)
        g.cores.append((src, snk))
    xreq, xresp = [], []
    for t in range(nt):
        xr = g.add_switch(f"t{t}.xreq", "req", cpt + REMOTE_IN_PORTS, nbk,
                          bank_of_dest, tile=t)
        n_rout = 4 + cfg.remote_ports_per_tile
        # local responses fall through to core sinks; remote route filled
        # in by the variant (placeholder stays for unwired local lanes)
        route = core_lane.copy()
        xs = g.add_switch(f"t{t}.xresp", "resp", nbk, n_rout, route, tile=t)
        xreq.append(xr)
        xresp.append(xs)
        for k in range(nbk):
            b = g.add_bank(f"t{t}.b{k}", tile=t, bank=k)
            g.banks.append(b)
            g.connect(xr, k, b)
            g.connect(b, 0, xs, k)
        for j in range(cpt):
            g.connect(xs, j, g.cores[t * cpt + j][1])
    return xreq, xresp


def _core_routers(g, cfg, xreq, remote_hook):
    """1x2 router per core: local tile -> crossbar, else the remote path.

    remote_hook(core) -> (node, port) accepting the core's remote output.
    """
    tiles_of_dest = np.arange(cfg.n_banks) // cfg.layout.n_banks_per_tile
    for c in range(cfg.n_cores):
        t = _tile_of(cfg, c)
        route = (tiles_of_dest != t).astype(np.int32)
        rt = g.add_switch(f"c{c}.rt", "req", 1, 2, route, core=c)
        g.connect(g.cores[c][0], 0, rt, 0)
        g.connect(rt, 0, xreq[t], c % cfg.cores_per_tile)
        g.connect(rt, 1, *remote_hook(c))


def _resp_route(g, xresp, tile, port, dest_cores):
    """Point the tile's response crossbar at `port` for the given cores."""
    self_route = g.nodes[xresp[tile]].route
    self_route[dest_cores] = port


def _build_top1(cfg: ClusterConfig) -> NetworkGraph:
    g = NetworkGraph("top1", cfg.n_banks, cfg.n_cores)
    xreq, xresp = _base_tiles(g, cfg)
    nt, cpt, cap = cfg.n_tiles, cfg.cores_per_tile, cfg.eb_capacity
    tile_of_dest = np.arange(cfg.n_banks) // cfg.layout.n_banks_per_tile
    tile_of_core = np.arange(cfg.n_cores) // cpt

    # request: 4:1 concentrator -> port buffer -> one global butterfly
    conc = [g.add_switch(f"t{t}.conc", "req", cpt, 1,
                         np.zeros(cfg.n_banks, np.int32)) for t in range(nt)]
    ebq = [g.add_buffer(f"t{t}.eb.req", "req", cap) for t in range(nt)]
    bf_in, bf_out = _butterfly_switches(
        g, "req", "bf.req", nt, 4, tile_of_dest, 1, cap)
    for t in range(nt):
        g.connect(conc[t], 0, ebq[t])
        g.connect(ebq[t], 0, *bf_in[t])
        g.connect(*bf_out[t], xreq[t], cpt)
    _core_routers(g, cfg, xreq,
                  lambda c: (conc[_tile_of(cfg, c)], c % cpt))

    # response: mirrored butterfly -> port buffer -> 1:4 distributor,
    # pipelined midway like the request direction
    rf_in, rf_out = _butterfly_switches(
        g, "resp", "bf.resp", nt, 4, tile_of_core, 1, cap)
    for t in range(nt):
        _resp_route(g, xresp, t,  cpt,
                    np.nonzero(tile_of_core != t)[0])
        g.connect(xresp[t], cpt, *rf_in[t])
        ebs = g.add_buffer(f"t{t}.eb.resp", "resp", cap)
        g.connect(*rf_out[t], ebs)
        lane = np.arange(cfg.n_cores) % cpt
        dist = g.add_switch(f"t{t}.dist", "resp", 1, cpt, lane)
        g.connect(ebs, 0, dist, 0)
        for j in range(cpt):
            g.connect(dist, j, g.cores[t * cpt + j][1])
    return g


def _build_top4(cfg: ClusterConfig) -> NetworkGraph:
    g = NetworkGraph("top4", cfg.n_banks, cfg.n_cores)
    xreq, xresp = _base_tiles(g, cfg)
    nt, cpt, cap = cfg.n_tiles, cfg.cores_per_tile, cfg.eb_capacity
    tile_of_dest = np.arange(cfg.n_banks) // cfg.layout.n_banks_per_tile
    tile_of_core = np.arange(cfg.n_cores) // cpt
    lane_of_core = np.arange(cfg.n_cores) % cpt

    ebq = {}
    for lane in range(cpt):
        bf_in, bf_out = _butterfly_switches(
            g, "req", f"bf{lane}.req", nt, 4, tile_of_dest, 1, cap)
        for t in range(nt):
            eb = g.add_buffer(f"t{t}.eb.req{lane}", "req", cap)
            ebq[t, lane] = eb
            g.connect(eb, 0, *bf_in[t])
            g.connect(*bf_out[t], xreq[t], cpt + lane)
    _core_routers(g, cfg, xreq,
                  lambda c: (ebq[_tile_of(cfg, c), c % cpt], 0))

    for lane in range(cpt):
        rf_in, rf_out = _butterfly_switches(
            g, "resp", f"bf{lane}.resp", nt, 4, tile_of_core, 1, cap)
        for t in range(nt):
            _resp_route(g, xresp, t, cpt + lane, np.nonzero(
                (tile_of_core != t) & (lane_of_core == lane))[0])
            g.connect(xresp[t], cpt + lane, *rf_in[t])
            ebs = g.add_buffer(f"t{t}.eb.resp{lane}", "resp", cap)
            g.connect(*rf_out[t], ebs)
            g.connect(ebs, 0, g.cores[t * cpt + lane][1])
    return g


def _build_topH(cfg: ClusterConfig) -> NetworkGraph:
    g = NetworkGraph("topH", cfg.n_banks, cfg.n_cores)
    xreq, xresp = _base_tiles(g, cfg)
    nt, cpt, cap = cfg.n_tiles, cfg.cores_per_tile, cfg.eb_capacity
    ng = cfg.n_groups
    tpg = nt // ng                       # tiles per group
    assert tpg * ng == nt
    tile_of_dest = np.arange(cfg.n_banks) // cfg.layout.n_banks_per_tile
    tile_of_core = np.arange(cfg.n_cores) // cpt
    group_of_dest = tile_of_dest // tpg
    group_of_core_tile = tile_of_core // tpg

    # per-tile direction buffers; direction 0 = local group, d = offset d
    ebq = {(t, d): g.add_buffer(f"t{t}.eb.req{d}", "req", cap)
           for t in range(nt) for d in range(4)}
    ebs = {(t, d): g.add_buffer(f"t{t}.eb.resp{d}", "resp", cap)
           for t in range(nt) for d in range(4)}

    # port routers (request out, response in)
    pr_of = []
    for t in range(nt):
        gidx = t // tpg
        route = (group_of_dest - gidx) % ng
        pr = g.add_switch(f"t{t}.pr", "req", cpt, 4, route, tile=t)
        pr_of.append(pr)
        for d in range(4):
            g.connect(pr, d, ebq[t, d])
        lane = np.arange(cfg.n_cores) % cpt
        prr = g.add_switch(f"t{t}.prr", "resp", 4, cpt, lane, tile=t)
        for d in range(4):
            g.connect(ebs[t, d], 0, prr, d)
        for j in range(cpt):
            g.connect(prr, j, g.cores[t * cpt + j][1])

    _core_routers(g, cfg, xreq,
                  lambda c: (pr_of[_tile_of(cfg, c)], c % cfg.cores_per_tile))

    # local group crossbars (direction 0)
    for gi in range(ng):
        tiles = range(gi * tpg, (gi + 1) * tpg)
        lx = g.add_switch(f"g{gi}.lx.req", "req", tpg, tpg,
                          tile_of_dest % tpg, group=gi)
        lxr = g.add_switch(f"g{gi}.lx.resp", "resp", tpg, tpg,
                           tile_of_core % tpg, group=gi)
        for li, t in enumerate(tiles):
            g.connect(ebq[t, 0], 0, lx, li)
            g.connect(lx, li, xreq[t], cpt + 0)
            _resp_route(g, xresp, t, cpt + 0, np.nonzero(
                (group_of_core_tile == gi) & (tile_of_core != t))[0])
            g.connect(xresp[t], cpt + 0, lxr, li)
            g.connect(lxr, li, ebs[t, 0])

    # inter-group butterflies, one per (group, direction)
    for gi in range(ng):
        for d in range(1, 4):
            gj = (gi + d) % ng                  # destination group
            bf_in, bf_out = _butterfly_switches(
                g, "req", f"g{gi}.bf{d}.req", tpg, 4,
                tile_of_dest % tpg, None, cap)
            for li in range(tpg):
                t_src, t_dst = gi * tpg + li, gj * tpg + li
                # group interface register on the origin side; the
                # butterfly output runs combinationally into the remote
                # tile crossbar
                gif = g.add_buffer(f"g{gi}.gif{d}.req.{li}", "req", cap)
                g.connect(ebq[t_src, d], 0, gif)
                g.connect(gif, 0, *bf_in[li])
                g.connect(*bf_out[li], xreq[t_dst], cpt + d)
            rf_in, rf_out = _butterfly_switches(
                g, "resp", f"g{gi}.bf{d}.resp", tpg, 4,
                tile_of_core % tpg, None, cap)
            for li in range(tpg):
                t_origin, t_resp = gi * tpg + li, gj * tpg + li
                _resp_route(g, xresp, t_resp, cpt + d, np.nonzero(
                    group_of_core_tile == gi)[0])
                # mirrored on the way back: combinational into the
                # response butterfly, registered at the origin group's
                # interface
                gifr = g.add_buffer(f"g{gi}.gif{d}.resp.{li}", "resp", cap)
                g.connect(xresp[t_resp], cpt + d, *rf_in[li])
                g.connect(*rf_out[li], gifr)
                g.connect(gifr, 0, ebs[t_origin, d])
    return g


def _build_topX(cfg: ClusterConfig) -> NetworkGraph:
    g = NetworkGraph("topX", cfg.n_banks, cfg.n_cores)
    # ideal fabric: a single all-to-all request switch (bank-port conflicts
    # only) and contention-free per-bank response dispatch
    nbk = cfg.layout.n_banks_per_tile
    for c in range(cfg.n_cores):
        src = g.add_source(f"c{c}.src", core=c)
        snk = g.add_sink(f"c{c}.sink", core=c)
        g.cores.append((src, snk))
    xr = g.add_switch("xideal", "req", cfg.n_cores, cfg.n_banks,
                      np.arange(cfg.n_banks))
    for c in range(cfg.n_cores):
        g.connect(g.cores[c][0], 0, xr, c)
    for b in range(cfg.n_banks):
        t, k = divmod(b, nbk)
        bank = g.add_bank(f"t{t}.b{k}", tile=t, bank=k)
        g.banks.append(bank)
        g.connect(xr, b, bank)
        disp = g.add_switch(f"t{t}.b{k}.disp", "resp", 1, cfg.n_cores,
                            np.arange(cfg.n_cores))
        g.connect(bank, 0, disp, 0)
        for c in range(cfg.n_cores):
            g.connect(disp, c, g.cores[c][1])
    return g


# ---------------------------------------------------------------- latency


def zero_load_latency(graph: NetworkGraph, core: int, bank: int) -> int:
    """Round-trip cycles of an uncontended load: buffers crossed + 1."""
    req_path = graph.walk(graph.cores[core][0], bank)
    assert req_path[-1] == graph.banks[bank]
    resp_path = graph.walk(graph.banks[bank], core)
    assert resp_path[-1] == graph.cores[core][1]
    nodes = graph.nodes
    stages = sum(1 for i in req_path if nodes[i].kind is NodeKind.BUFFER)
    stages += sum(1 for i in resp_path if nodes[i].kind is NodeKind.BUFFER)
    return stages + 1
