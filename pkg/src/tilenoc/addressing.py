"""Word address decoding for a banked, tiled shared-L1 memory.

The simulated memory is a single flat byte-address space spread over
``2^tile_bits`` tiles with ``2^bank_bits`` word-wide banks each.  In the
plain *interleaved* map, consecutive words walk the banks of one tile,
then the tiles, then the rows:

    +-----------+-----------+-----------+----------+
    |    row    |   tile    |   bank    |  byte    |
    +-----------+-----------+-----------+----------+
     msb                                        lsb
      row_bits    tile_bits   bank_bits   byte_bits

Interleaving maximises bank-level parallelism for shared data but makes
it impossible to place a contiguous buffer on one tile.  The *hybrid*
map fixes that with a scrambling permutation applied to the bottom
``2^(seq_window_bits + tile_bits)`` bytes of the address space: inside
that window the ``seq_bits`` bits just above the bank field swap places
with the tile field, so each tile owns one contiguous ``2^S``-byte
sequential region (``S = byte_bits + bank_bits + seq_bits``) while the
words inside a region still interleave across the tile's banks.
Addresses outside the window are left untouched, so bulk shared data
keeps the interleaved layout.

Scrambling is a pure bit permutation of the window onto itself: it is
bijective, and applying it costs nothing in hardware (wire swaps).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "AddressLayout",
    "PhysicalLocation",
    "decode_interleaved",
    "decode_hybrid",
    "scramble",
    "descramble",
    "scramble_array",
    "descramble_array",
    "sequential_base",
]


@dataclass(frozen=True)
class AddressLayout:
    """Bit-field widths of the flat address space.

    byte_bits is 2 throughout (4-byte words); it is kept as a field so
    the arithmetic stays explicit rather than buried in magic numbers.
    """

    bank_bits: int = 4    # banks per tile (default 16)
    tile_bits: int = 6    # tiles per cluster (default 64)
    row_bits: int = 8     # rows per bank (default 256 words)
    seq_bits: int = 4     # rows per tile claimed by the sequential region
    byte_bits: int = 2

    def __post_init__(self):
        for name in ("bank_bits", "tile_bits", "row_bits", "seq_bits", "byte_bits"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 0:
                raise ValueError(f"{name} must be a non-negative int, got {v!r}")
        if self.seq_bits > self.row_bits:
            # the scrambled window would not fit into the bank rows
            raise ValueError(
                f"seq_bits ({self.seq_bits}) must not exceed row_bits ({self.row_bits})"
            )

    # -- derived widths -------------------------------------------------

    @property
    def seq_region_bits(self) -> int:
        """log2 bytes of one tile's sequential region (S)."""
        return self.byte_bits + self.bank_bits + self.seq_bits

    @property
    def seq_window_bits(self) -> int:
        """log2 bytes of the scrambled window (all tiles' regions)."""
        return self.seq_region_bits + self.tile_bits

    @property
    def total_bits(self) -> int:
        return self.byte_bits + self.bank_bits + self.tile_bits + self.row_bits

    @property
    def n_tiles(self) -> int:
        return 1 << self.tile_bits

    @property
    def n_banks_per_tile(self) -> int:
        return 1 << self.bank_bits

    @property
    def n_banks(self) -> int:
        return self.n_tiles * self.n_banks_per_tile

    @property
    def total_bytes(self) -> int:
        return 1 << self.total_bits

    def check_addr(self, addr: int) -> None:
        if not 0 <= addr < self.total_bytes:
            raise ValueError(
                f"address {addr:#x} outside the {self.total_bytes:#x}-byte space"
            )


@dataclass(frozen=True)
class PhysicalLocation:
    """A word slot: which tile, which bank in it, which row of the bank."""

    tile: int
    bank: int
    row: int


def decode_interleaved(addr: int, layout: AddressLayout) -> PhysicalLocation:
    """Map a byte address to its word slot under the interleaved layout."""
    layout.check_addr(addr)
    lo = layout.byte_bits
    bank = (addr >> lo) & (layout.n_banks_per_tile - 1)
    tile = (addr >> (lo + layout.bank_bits)) & (layout.n_tiles - 1)
    row = addr >> (lo + layout.bank_bits + layout.tile_bits)
    return PhysicalLocation(tile=tile, bank=bank, row=row)


def scramble(addr: int, layout: AddressLayout) -> int:
    """Hybrid-map bit permutation (identity outside the sequential window).

    Inside the window the seq_bits field (just above the bank bits) and
    the tile field trade places; all other bits pass through.
    """
    layout.check_addr(addr)
    if addr >= 1 << layout.seq_window_bits:
        return addr
    lo = layout.byte_bits + layout.bank_bits   # bit position above the bank field
    s, t = layout.seq_bits, layout.tile_bits
    seq = (addr >> lo) & ((1 << s) - 1)
    tile = (addr >> (lo + s)) & ((1 << t) - 1)
    keep = addr & ((1 << lo) - 1)
    return keep | (tile << lo) | (seq << (lo + t))


def descramble(addr: int, layout: AddressLayout) -> int:
    """Inverse of :func:`scramble` (the window permutes onto itself)."""
    layout.check_addr(addr)
    if addr >= 1 << layout.seq_window_bits:
        return addr
    lo = layout.byte_bits + layout.bank_bits
    s, t = layout.seq_bits, layout.tile_bits
    tile = (addr >> lo) & ((1 << t) - 1)
    seq = (addr >> (lo + t)) & ((1 << s) - 1)
    keep = addr & ((1 << lo) - 1)
    return keep | (seq << lo) | (tile << (lo + s))


def decode_hybrid(addr: int, layout: AddressLayout) -> PhysicalLocation:
    """Word slot under the hybrid layout (scramble, then interleave-decode)."""
    return decode_interleaved(scramble(addr, layout), layout)


def sequential_base(tile: int, layout: AddressLayout) -> int:
    """First byte address of a tile's sequential region (hybrid map)."""
    if not 0 <= tile < layout.n_tiles:
        raise ValueError(f"tile {tile} out of range")
    return tile << layout.seq_region_bits


# -- vectorised variants (used by the exhaustive permutation check) -----


def _swap_fields(addrs: np.ndarray, layout: AddressLayout, low_field_bits: int,
                 high_field_bits: int) -> np.ndarray:
    lo = layout.byte_bits + layout.bank_bits
    a, b = low_field_bits, high_field_bits
    addrs = addrs.astype(np.int64)
    low = (addrs >> lo) & ((1 << a) - 1)
    high = (addrs >> (lo + a)) & ((1 << b) - 1)
    keep = addrs & ((1 << lo) - 1)
    out = keep | (high << lo) | (low << (lo + b))
    inside = addrs < (1 << layout.seq_window_bits)
    return np.where(inside, out, addrs)


def scramble_array(addrs: np.ndarray, layout: AddressLayout) -> np.ndarray:
    """Vectorised :func:`scramble` over an int array."""
    if addrs.size and (addrs.min() < 0 or addrs.max() >= layout.total_bytes):
        raise ValueError("address out of range")
    return _swap_fields(addrs, layout, layout.seq_bits, layout.tile_bits)


def descramble_array(addrs: np.ndarray, layout: AddressLayout) -> np.ndarray:
    """Vectorised :func:`descramble` over an int array."""
    if addrs.size and (addrs.min() < 0 or addrs.max() >= layout.total_bytes):
        raise ValueError("address out of range")
    return _swap_fields(addrs, layout, layout.tile_bits, layout.seq_bits)
