"""Address map tests.

The oracle here manipulates addresses as binary strings: fields are cut
and re-glued textually, so any sign/shift/mask slip in the package code
cannot also be present in the expected values.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tilenoc.addressing import (
    AddressLayout,
    PhysicalLocation,
    decode_hybrid,
    decode_interleaved,
    descramble,
    descramble_array,
    scramble,
    scramble_array,
    sequential_base,
)

DEFAULT = AddressLayout()


# ---------------------------------------------------------------- oracle

def bits_of(addr, layout):
    return format(addr, f"0{layout.total_bits}b")


def oracle_decode(addr, layout):
    """Slice (row | tile | bank | byte) fields out of the binary string."""
    s = bits_of(addr, layout)
    n = layout.total_bits
    row_end = layout.row_bits
    tile_end = row_end + layout.tile_bits
    bank_end = tile_end + layout.bank_bits
    row = int(s[:row_end], 2) if layout.row_bits else 0
    tile = int(s[row_end:tile_end], 2) if layout.tile_bits else 0
    bank = int(s[tile_end:bank_end], 2) if layout.bank_bits else 0
    assert bank_end + layout.byte_bits == n
    return tile, bank, row


def oracle_scramble(addr, layout):
    """Swap the seq and tile substrings if the address is in the window.

    Window layout msb->lsb is (head | tile' | seq' | bank | byte) where
    seq' is the s-bit field adjacent to the banks and tile' the t-bit
    field above it; the scrambled address is (head | seq' | tile' | ...).
    """
    if addr >= 1 << (layout.seq_region_bits + layout.tile_bits):
        return addr
    s = bits_of(addr, layout)
    n = layout.total_bits
    lo_start = n - layout.byte_bits - layout.bank_bits  # start of (bank|byte)
    seq_start = lo_start - layout.seq_bits
    tile_start = seq_start - layout.tile_bits
    head = s[:tile_start]
    tile = s[tile_start:seq_start]
    seq = s[seq_start:lo_start]
    low = s[lo_start:]
    out = head + seq + tile + low
    return int(out, 2) if out else 0


# ------------------------------------------------------- frozen examples

def test_decode_interleaved_frozen_example():
    # 0x1040: word 0x410 -> bank 0, tile 1, row 1 under the default map
    loc = decode_interleaved(0x1040, DEFAULT)
    assert loc == PhysicalLocation(tile=1, bank=0, row=1)
    assert oracle_decode(0x1040, DEFAULT) == (1, 0, 1)


def test_scramble_frozen_example():
    # second word row of tile 1's sequential region lands on (tile 1, row 1)
    assert scramble(0x0440, DEFAULT) == 0x1040
    assert oracle_scramble(0x0440, DEFAULT) == 0x1040


def test_sequential_block_lands_on_one_tile():
    base = sequential_base(1, DEFAULT)
    assert base == 1024
    region = 1 << DEFAULT.seq_region_bits
    assert region == 1024
    tiles = {decode_hybrid(base + d, DEFAULT).tile for d in range(region)}
    assert tiles == {1}


def test_identity_outside_window():
    window = 1 << DEFAULT.seq_window_bits
    assert window == 0x10000
    for addr in (window, window + 4, 0x12345 & ~0x3, DEFAULT.total_bytes - 4):
        assert scramble(addr, DEFAULT) == addr
        assert descramble(addr, DEFAULT) == addr


def test_word_walk_cycles_banks_then_tiles():
    banks = [decode_interleaved(4 * w, DEFAULT).bank for w in range(32)]
    assert banks == list(range(16)) * 2
    assert decode_interleaved(4 * 16, DEFAULT).tile == 1
    assert decode_interleaved(4 * 16 * 64, DEFAULT) == PhysicalLocation(0, 0, 1)


# -------------------------------------------------- exhaustive window run

def test_window_bijective_and_local_exhaustive():
    layout = DEFAULT
    window = 1 << layout.seq_window_bits
    addrs = np.arange(window, dtype=np.int64)
    out = scramble_array(addrs, layout)
    # permutation of the window onto itself
    assert out.min() == 0 and out.max() == window - 1
    assert len(np.unique(out)) == window
    # inverse really inverts
    assert np.array_equal(descramble_array(out, layout), addrs)
    # every region maps wholly onto its tile, words spread evenly over banks
    region = 1 << layout.seq_region_bits
    tile_field = (out >> (layout.byte_bits + layout.bank_bits)) & (layout.n_tiles - 1)
    bank_field = (out >> layout.byte_bits) & (layout.n_banks_per_tile - 1)
    for tile in (0, 1, 17, 63):
        sl = slice(tile * region, (tile + 1) * region)
        assert (tile_field[sl] == tile).all()
        counts = np.bincount(bank_field[sl], minlength=16)
        assert (counts == region // 16).all()


def test_identity_outside_window_vectorised():
    layout = DEFAULT
    window = 1 << layout.seq_window_bits
    addrs = np.arange(window, layout.total_bytes, 977, dtype=np.int64)
    assert np.array_equal(scramble_array(addrs, layout), addrs)


# --------------------------------------------------------------- errors

def test_out_of_range_address_rejected():
    with pytest.raises(ValueError):
        decode_interleaved(DEFAULT.total_bytes, DEFAULT)
    with pytest.raises(ValueError):
        scramble(-4, DEFAULT)


def test_bad_layout_rejected():
    with pytest.raises(ValueError):
        AddressLayout(seq_bits=9, row_bits=8)
    with pytest.raises(ValueError):
        AddressLayout(bank_bits=-1)
    with pytest.raises(ValueError):
        sequential_base(64, DEFAULT)


# ---------------------------------------------------------- property set

layouts = st.builds(
    AddressLayout,
    bank_bits=st.integers(0, 5),
    tile_bits=st.integers(0, 6),
    row_bits=st.integers(2, 8),
    seq_bits=st.integers(0, 2),
)


@given(layouts, st.integers(0, (1 << 20) - 1))
@settings(max_examples=300, deadline=None)
def test_scramble_matches_oracle(layout, raw):
    addr = raw % layout.total_bytes
    assert scramble(addr, layout) == oracle_scramble(addr, layout)


@given(layouts, st.integers(0, (1 << 20) - 1))
@settings(max_examples=300, deadline=None)
def test_descramble_inverts(layout, raw):
    addr = raw % layout.total_bytes
    assert descramble(scramble(addr, layout), layout) == addr
    assert scramble(descramble(addr, layout), layout) == addr


@given(layouts, st.integers(0, (1 << 20) - 1))
@settings(max_examples=300, deadline=None)
def test_decode_matches_oracle(layout, raw):
    addr = raw % layout.total_bytes
    loc = decode_interleaved(addr, layout)
    assert (loc.tile, loc.bank, loc.row) == oracle_decode(addr, layout)


@given(layouts, st.data())
@settings(max_examples=200, deadline=None)
def test_hybrid_region_is_tile_local(layout, data):
    tile = data.draw(st.integers(0, layout.n_tiles - 1))
    offset = data.draw(st.integers(0, (1 << layout.seq_region_bits) - 1))
    addr = sequential_base(tile, layout) + offset
    assert decode_hybrid(addr, layout).tile == tile
