"""Cycle-accurate simulator for banked shared-L1 tile clusters.

256 cores in 64 tiles share 1024 word-wide SRAM banks through one of
four interconnect variants (top1, top4, topH, topX).  The package
models the request/response networks at cycle granularity, generates
synthetic and kernel-trace workloads, and reports throughput/latency
sweeps as CSV.
"""

from .addressing import (
    AddressLayout,
    PhysicalLocation,
    decode_hybrid,
    decode_interleaved,
    descramble,
    scramble,
    sequential_base,
)

__version__ = "0.1.0"
