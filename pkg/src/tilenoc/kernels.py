"""Trace-driven kernel models: matmul, conv2d, dct.

Each generator turns a KernelConfig into per-core address traces
(loads, stores, compute gaps).  Arithmetic is abstracted: a gap entry
stands for the cycles a core computes between memory operations, so
completion counts compare interconnects, not core microarchitecture.

Placement conventions (defaults):

* matmul operands A, B, C are row-major in the interleaved space above
  the scramble window, so their banks are identical with scrambling on
  or off and accesses spread over all tiles.
* conv2d strips the image by rows across tiles; each tile's input and
  output strip fills that tile's sequential region, so the halo rows at
  strip borders are the only remote traffic.
* dct block input/output live at tile-local interleaved addresses
  outside the window (local under either map), while the per-core
  stack sits in the tile's sequential region: with scrambling the
  stack is tile-local, without it the same addresses spray across the
  cluster.  The scramble flag therefore isolates the stack behaviour.

Traces serialize to a line-oriented text form (``C <core>`` headers,
then ``L <hexaddr>`` / ``S <hexaddr>`` / ``G <n>`` lines) so externally
produced traces can be injected.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .addressing import (
    AddressLayout,
    decode_hybrid,
    decode_interleaved,
    sequential_base,
)
from .engine import CompiledCluster, run_traces

__all__ = [
    "KernelConfig",
    "KERNELS",
    "generate",
    "gen_matmul",
    "gen_conv2d",
    "gen_dct",
    "resolve_banks",
    "run_kernel",
    "traces_to_text",
    "traces_from_text",
]

KERNELS = ("matmul", "conv2d", "dct")


@dataclass(frozen=True)
class KernelConfig:
    """One benchmark instance: kind, problem dims, placement knobs."""

    kind: str
    scramble_enabled: bool = True
    compute_gap: int = 1
    layout: AddressLayout = field(default_factory=AddressLayout)
    n_cores: int = 256
    cores_per_tile: int = 4
    # matmul: C = A @ B, all n x n, word-sized elements
    matmul_n: int = 64
    matmul_a_base: int = 0x10000
    matmul_b_base: int = 0x14000
    matmul_c_base: int = 0x18000
    # conv2d: H x W image, 3x3 kernel, one row-strip per tile
    conv_h: int = 512
    conv_w: int = 16
    # dct: 8x8 blocks per core
    dct_blocks_per_core: int = 4

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise ValueError(f"unknown kernel {self.kind!r}")
        if self.compute_gap < 0:
            raise ValueError("compute_gap must be >= 0")
        if self.n_cores % self.cores_per_tile:
            raise ValueError("cores must fill tiles evenly")

    @property
    def n_tiles(self) -> int:
        return self.n_cores // self.cores_per_tile

    def stack_base(self, core: int) -> int:
        """Per-core stack address, one lane of the tile's sequential region.

        The address is the same with scrambling on or off; only the
        decode changes, which is the whole point of the experiment.
        """
        lay = self.layout
        lane_bytes = (1 << lay.seq_region_bits) // self.cores_per_tile
        tile = core // self.cores_per_tile
        return sequential_base(tile, lay) + (core % self.cores_per_tile) * lane_bytes


class _Emitter:
    """Collects one core's ops, inserting the compute gap between them."""

    def __init__(self, gap: int):
        self.gap = gap
        self.ops = []

    def _pad(self):
        if self.ops and self.gap:
            self.ops.append(("G", self.gap))

    def load(self, addr: int):
        self._pad()
        self.ops.append(("L", addr))

    def store(self, addr: int):
        self._pad()
        self.ops.append(("S", addr))


def _interleaved_word(lay: AddressLayout, tile: int, bank: int,
                      row: int) -> int:
    return (((row << lay.tile_bits | tile) << lay.bank_bits | bank)
            << lay.byte_bits)


# ----------------------------------------------------------------- matmul


def gen_matmul(cfg: KernelConfig) -> list:
    """Row-strip blocking: the cores sharing output row r split it into
    equal column strips; every element takes the full k-loop of
    interleaved A/B loads and one store.

    Row ownership is staggered across each tile's cores.  A row of A
    occupies a 4-tile band of the interleave, so if the cores of one
    tile all stream the same row (the naive row = core/4 mapping) the
    tile's entire A traffic converges on one quarter of the cluster
    and that egress direction saturates.  Offsetting the row index per
    lane sends the four concurrent A streams to four different
    quadrants; any such assignment covers the output exactly once.
    """
    n = cfg.matmul_n
    if cfg.n_cores % n or n % (cfg.n_cores // n):
        raise ValueError("matrix rows must split evenly over the cores")
    per_row = cfg.n_cores // n
    strip = n // per_row
    end = cfg.matmul_c_base + 4 * n * n
    if end > cfg.layout.total_bytes:
        raise ValueError("operands exceed the address space")
    if cfg.matmul_a_base < 1 << cfg.layout.seq_window_bits:
        raise ValueError("operands must sit above the scramble window")

    lay = cfg.layout
    # rows whose A bands wrap once around the cluster's tiles
    tile_bytes = 1 << (lay.bank_bits + lay.byte_bits)
    wrap = max(1, lay.n_tiles * tile_bytes // (4 * n))
    stagger = wrap == per_row * per_row and n % wrap == 0

    traces = []
    for core in range(cfg.n_cores):
        em = _Emitter(cfg.compute_gap)
        slot, lane = divmod(core, per_row)
        if stagger:
            span, q = divmod(slot, wrap)
            row = span * wrap + (q + per_row * lane) % wrap
            j0 = (q // per_row) * strip
        else:
            row, j0 = slot, lane * strip
        for j in range(j0, j0 + strip):
            for k in range(n):
                em.load(cfg.matmul_a_base + 4 * (row * n + k))
                em.load(cfg.matmul_b_base + 4 * (k * n + j))
            em.store(cfg.matmul_c_base + 4 * (row * n + j))
        traces.append(em.ops)
    return traces


# ----------------------------------------------------------------- conv2d


def gen_conv2d(cfg: KernelConfig) -> list:
    """Row strips, one per tile, input+output in the tile's sequential
    region; 3x3 window with edge clamping (always 9 loads)."""
    h, w, lay = cfg.conv_h, cfg.conv_w, cfg.layout
    nt = cfg.n_tiles
    if h % nt:
        raise ValueError("image rows must split evenly over the tiles")
    strip_h = h // nt
    if strip_h % cfg.cores_per_tile:
        raise ValueError("strip rows must split evenly over a tile's cores")
    strip_bytes = 4 * strip_h * w
    if 2 * strip_bytes > 1 << lay.seq_region_bits:
        raise ValueError("input+output strip exceeds the sequential region")

    def in_addr(r, c):
        tile = r // strip_h
        return sequential_base(tile, lay) + 4 * ((r % strip_h) * w + c)

    def out_addr(r, c):
        tile = r // strip_h
        return (sequential_base(tile, lay) + strip_bytes
                + 4 * ((r % strip_h) * w + c))

    rows_per_core = strip_h // cfg.cores_per_tile
    traces = []
    for core in range(cfg.n_cores):
        em = _Emitter(cfg.compute_gap)
        tile = core // cfg.cores_per_tile
        r0 = tile * strip_h + (core % cfg.cores_per_tile) * rows_per_core
        for r in range(r0, r0 + rows_per_core):
            for c in range(w):
                for dr in (-1, 0, 1):
                    for dc in (-1, 0, 1):
                        rr = min(max(r + dr, 0), h - 1)
                        cc = min(max(c + dc, 0), w - 1)
                        em.load(in_addr(rr, cc))
                em.store(out_addr(r, c))
        traces.append(em.ops)
    return traces


# -------------------------------------------------------------------- dct


def gen_dct(cfg: KernelConfig) -> list:
    """Per 8x8 block: load the block writing intermediates to the stack
    (pass 1), then read them back and store the output (pass 2)."""
    lay = cfg.layout
    cpt = cfg.cores_per_tile
    stack_words = 64
    if cpt * stack_words * 4 > 1 << lay.seq_region_bits:
        raise ValueError("per-core stacks exceed the sequential region")
    blocks = cfg.dct_blocks_per_core
    nbpt = lay.n_banks_per_tile
    rows_per_block = -(-64 // nbpt)
    first_row = 1 << lay.seq_bits      # first row outside the window
    per_tile_blocks = cpt * blocks
    out_row0 = first_row + per_tile_blocks * rows_per_block
    if out_row0 + per_tile_blocks * rows_per_block > 1 << lay.row_bits:
        raise ValueError("block data exceeds the banks' rows")

    traces = []
    for core in range(cfg.n_cores):
        em = _Emitter(cfg.compute_gap)
        tile = core // cpt
        stack = cfg.stack_base(core)
        for b in range(blocks):
            slot = (core % cpt) * blocks + b

            def word(i, row0, slot=slot, tile=tile):
                row = row0 + slot * rows_per_block + i // nbpt
                return _interleaved_word(lay, tile, i % nbpt, row)

            for i in range(64):
                em.load(word(i, first_row))
                em.store(stack + 4 * i)
            for i in range(64):
                em.load(stack + 4 * i)
                em.store(word(i, out_row0))
        traces.append(em.ops)
    return traces


_GENERATORS = {"matmul": gen_matmul, "conv2d": gen_conv2d, "dct": gen_dct}


def generate(cfg: KernelConfig) -> list:
    return _GENERATORS[cfg.kind](cfg)


# ------------------------------------------------------------- execution


def resolve_banks(traces, layout: AddressLayout, scramble_enabled: bool):
    """Address traces -> engine traces (global bank ids)."""
    decode = decode_hybrid if scramble_enabled else decode_interleaved
    nbpt = layout.n_banks_per_tile
    out = []
    for ops in traces:
        resolved = []
        for kind, val in ops:
            if kind == "G":
                resolved.append((kind, val))
            else:
                loc = decode(val, layout)
                resolved.append((kind, loc.tile * nbpt + loc.bank))
        out.append(resolved)
    return out


def run_kernel(compiled: CompiledCluster, traces, *,
               layout: AddressLayout | None = None,
               scramble_enabled: bool = True, window: int = 8,
               max_cycles: int = 1 << 22) -> int:
    """Run address traces to completion; returns the drain cycle."""
    lay = layout if layout is not None else AddressLayout()
    raw = run_traces(compiled, resolve_banks(traces, lay, scramble_enabled),
                     window=window, max_cycles=max_cycles)
    return raw.completion


# ------------------------------------------------------------ text format


def traces_to_text(traces) -> str:
    lines = []
    for core, ops in enumerate(traces):
        lines.append(f"C {core}")
        for kind, val in ops:
            lines.append(f"G {val}" if kind == "G" else f"{kind} {val:#x}")
    return "\n".join(lines) + "\n"


def traces_from_text(text: str) -> list:
    traces, ops = [], None
    for ln, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            kind, val = line.split()
            if kind == "C":
                if int(val) != len(traces):
                    raise ValueError("out-of-order core header")
                ops = []
                traces.append(ops)
            elif kind == "G":
                ops.append(("G", int(val)))
            elif kind in ("L", "S"):
                ops.append((kind, int(val, 16)))
            else:
                raise ValueError(f"unknown op {kind!r}")
        except (ValueError, AttributeError) as exc:
            raise ValueError(f"trace line {ln}: {exc}") from None
    return traces
