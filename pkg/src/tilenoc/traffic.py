"""Open-loop synthetic workload definition.

Every core owns two SplitMix64 streams derived from (seed, core): a
coin stream deciding, per cycle, whether a request is generated
(Bernoulli approximation of Poisson arrivals) and a destination stream
consumed once per request.  Keeping the streams apart means the
generation timeline is identical across locality settings and fabric
variants, so sweeps with a shared seed are paired experiments.

Each request consumes exactly three destination draws (locality coin,
index, row) plus one optional store coin, whether or not a draw ends up
unused.  The compiled engine replays the same streams internally; the
functions here are the plain-Python reference the tests check it
against.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .addressing import AddressLayout

__all__ = [
    "SplitMix64",
    "stream_state",
    "COIN_STREAM",
    "DEST_STREAM",
    "SyntheticConfig",
    "maybe_generate",
    "draw_destination",
    "draw_is_load",
]

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

COIN_STREAM = 0
DEST_STREAM = 1


def _mix64(x: int) -> int:
    x = ((x ^ (x >> 30)) * _MIX1) & _MASK
    x = ((x ^ (x >> 27)) * _MIX2) & _MASK
    return x ^ (x >> 31)


class SplitMix64:
    """Tiny counter-based PRNG; one instance per (core, stream)."""

    __slots__ = ("state",)

    def __init__(self, state: int):
        self.state = state & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK
        return _mix64(self.state)

    def next_float(self) -> float:
        # 53-bit draw in [0, 1)
        return (self.next_u64() >> 11) * 2.0 ** -53


def stream_state(seed: int, core: int, stream: int) -> int:
    """Initial SplitMix64 state for a (seed, core, stream) triple."""
    x = _mix64((seed & _MASK) + _GAMMA * (core + 1) & _MASK)
    return _mix64((x + _GAMMA * (stream + 1)) & _MASK)


@dataclass(frozen=True)
class SyntheticConfig:
    """Per-core Bernoulli injection at `rate` requests/cycle.

    With p_local > 0 a request picks, with that probability, a word in
    the core's own tile region (sequential map: the region walks the 16
    local banks); otherwise a word uniform over the interleaved
    remainder of memory.  rate spans [0, 1]; store_fraction turns that
    share of requests into stores (no response, not window-limited).
    """

    rate: float
    p_local: float = 0.0
    store_fraction: float = 0.0
    layout: AddressLayout = field(default_factory=AddressLayout)
    cores_per_tile: int = 4

    def __post_init__(self):
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError("rate must be in [0, 1]")
        if not 0.0 <= self.p_local <= 1.0:
            raise ValueError("p_local must be in [0, 1]")
        if not 0.0 <= self.store_fraction <= 1.0:
            raise ValueError("store_fraction must be in [0, 1]")
        if self.p_local < 1.0 and self.remainder_rows == 0:
            raise ValueError("layout has no interleaved remainder to draw "
                             "remote destinations from")

    @property
    def region_words(self) -> int:
        return 1 << (self.layout.seq_region_bits - self.layout.byte_bits)

    @property
    def remainder_rows(self) -> int:
        return (1 << self.layout.row_bits) - (1 << self.layout.seq_bits)


def maybe_generate(coin: SplitMix64, cfg: SyntheticConfig) -> bool:
    """One per-cycle injection coin."""
    return coin.next_float() < cfg.rate


def draw_destination(dest: SplitMix64, cfg: SyntheticConfig,
                     core: int) -> tuple[int, int, int]:
    """Draw (tile, bank, row) for one request from `core`.

    Consumes exactly three values from the stream regardless of the
    branch taken, so streams stay aligned across p_local settings.
    """
    lay = cfg.layout
    nbpt = lay.n_banks_per_tile
    u_loc = dest.next_float()
    idx = dest.next_u64()
    row_draw = dest.next_u64()
    if u_loc < cfg.p_local:
        # own-tile region: words walk the local banks, then the rows
        w = idx % cfg.region_words
        return (core // cfg.cores_per_tile, w % nbpt, w // nbpt)
    v = idx % lay.n_banks
    rem = cfg.remainder_rows
    row = (1 << lay.seq_bits) + row_draw % rem if rem else 0
    return (v // nbpt, v % nbpt, row)


def draw_is_load(dest: SplitMix64, cfg: SyntheticConfig) -> bool:
    """Store coin; only drawn when stores are enabled."""
    if cfg.store_fraction <= 0.0:
        return True
    return dest.next_float() >= cfg.store_fraction
