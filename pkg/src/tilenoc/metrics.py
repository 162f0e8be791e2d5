"""Run statistics: throughput, latency reduction, sweeps, saturation.

A RawRun carries raw counters; `finalize` turns one run into a Metrics
row, `aggregate` pools repetitions of the same point, `sweep` produces
one aggregated row per offered-load grid point, and `saturation_point`
finds the congestion knee.  CSV output is byte-deterministic so sweep
files can serve as regression fixtures.
"""

from __future__ import annotations

import csv
import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .engine import RawRun, compiled_cluster, run_synthetic
from .topology import ClusterConfig, VARIANTS
from .traffic import SyntheticConfig

__all__ = [
    "HIST_CAP",
    "CSV_COLUMNS",
    "Metrics",
    "finalize",
    "aggregate",
    "derive_seed",
    "sweep",
    "saturation_point",
    "write_csv",
]

# latency histogram bins; the last bin collects everything beyond it
HIST_CAP = 1 << 14

CSV_COLUMNS = ("variant", "lambda", "p_local", "seed", "throughput",
               "avg_latency", "p99_latency", "completed", "horizon")


@dataclass(frozen=True)
class Metrics:
    """One table row: a run (or pooled repetitions) of one grid point."""

    variant: str
    offered: float
    p_local: float
    seed: int
    n_cores: int
    horizon: int
    w0: int
    reps: int
    completed: int
    latency_sum: int
    latency_n: int
    latency_hist: np.ndarray        # HIST_CAP+1 bins, overflow last
    fires_req: np.ndarray           # per-arbiter grant counts
    fires_resp: np.ndarray

    @property
    def throughput(self) -> float:
        return self.completed / (self.n_cores * (self.horizon - self.w0)
                                 * self.reps)

    @property
    def avg_latency(self):
        if self.latency_n == 0:
            return None
        return self.latency_sum / self.latency_n

    @property
    def p99_latency(self):
        if self.latency_n == 0:
            return None
        need = 0.99 * self.latency_n
        run = 0
        for i, c in enumerate(self.latency_hist):
            run += int(c)
            if run >= need:
                return i
        return len(self.latency_hist) - 1


def finalize(raw: RawRun, *, variant: str, offered: float,
             p_local: float = 0.0, seed: int = 0) -> Metrics:
    """Reduce one run; statistics cover requests generated in the
    measurement window and completed before the horizon."""
    if raw.horizon <= raw.w0:
        raise ValueError("measurement window is empty")
    hist = np.zeros(HIST_CAP + 1, np.int64)
    n = min(len(raw.hist), HIST_CAP)
    hist[:n] = raw.hist[:n]
    hist[HIST_CAP] = raw.hist[n:].sum()
    lat_n = int(raw.counters["latency_n"])
    assert int(hist.sum()) == lat_n, "histogram mass != latency count"
    return Metrics(
        variant=variant, offered=offered, p_local=p_local, seed=seed,
        n_cores=raw.compiled.n_cores, horizon=raw.horizon, w0=raw.w0,
        reps=1, completed=int(raw.counters["completed_in_window"]),
        latency_sum=int(raw.counters["latency_sum"]), latency_n=lat_n,
        latency_hist=hist, fires_req=raw.fires_req.astype(np.int64),
        fires_resp=raw.fires_resp.astype(np.int64))


def aggregate(parts: Sequence[Metrics], *, seed: int) -> Metrics:
    """Pool repetitions of one grid point into a single row.

    Sums are exact (latency average is the pooled mean); the reported
    seed is the base seed the repetition seeds derive from.
    """
    first = parts[0]
    for m in parts[1:]:
        if (m.variant, m.offered, m.p_local, m.horizon, m.w0) != \
                (first.variant, first.offered, first.p_local,
                 first.horizon, first.w0):
            raise ValueError("cannot pool different grid points")
    return Metrics(
        variant=first.variant, offered=first.offered,
        p_local=first.p_local, seed=seed, n_cores=first.n_cores,
        horizon=first.horizon, w0=first.w0,
        reps=sum(m.reps for m in parts),
        completed=sum(m.completed for m in parts),
        latency_sum=sum(m.latency_sum for m in parts),
        latency_n=sum(m.latency_n for m in parts),
        latency_hist=sum(m.latency_hist for m in parts),
        fires_req=sum(m.fires_req for m in parts),
        fires_resp=sum(m.fires_resp for m in parts))


def derive_seed(base_seed: int, variant: str, lam_index: int,
                rep: int) -> int:
    """Stable per-run seed so parallel sweeps reproduce bytes."""
    key = f"{base_seed}:{variant}:{lam_index}:{rep}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(),
                          "big")


def _run_point(variant, lam, p_local, store_fraction, seed, horizon,
               window, warmup_frac, layout=None):
    compiled = compiled_cluster(ClusterConfig(variant=variant))
    kw = {} if layout is None else {"layout": layout}
    syn = SyntheticConfig(rate=lam, p_local=p_local,
                          store_fraction=store_fraction, **kw)
    raw = run_synthetic(compiled, syn, horizon=horizon, seed=seed,
                        window=window, warmup_frac=warmup_frac)
    return finalize(raw, variant=variant, offered=lam, p_local=p_local,
                    seed=seed)


def sweep(variant: str, lam_grid: Sequence[float], *, p_local: float = 0.0,
          store_fraction: float = 0.0, base_seed: int = 0, seeds: int = 3,
          horizon: int = 100_000, window: int = 8,
          warmup_frac: float = 0.2, parallel: int = 1,
          layout=None) -> list:
    """One aggregated Metrics row per grid point, in grid order.

    Each (point, repetition) runs from fresh state with a seed derived
    from (base_seed, variant, point index, repetition); results are
    identical for any parallelism degree.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if list(lam_grid) != sorted(lam_grid):
        raise ValueError("lambda grid must be monotone")
    jobs = [(variant, lam, p_local, store_fraction,
             derive_seed(base_seed, variant, li, rep), horizon, window,
             warmup_frac, layout)
            for li, lam in enumerate(lam_grid) for rep in range(seeds)]
    try:
        if parallel > 1:
            with ProcessPoolExecutor(max_workers=parallel) as pool:
                parts = list(pool.map(_run_point_star, jobs, chunksize=1))
        else:
            parts = [_run_point(*j) for j in jobs]
    except Exception as exc:
        raise RuntimeError(f"sweep failed for {variant}: {exc}") from exc
    rows = []
    for li in range(len(lam_grid)):
        rows.append(aggregate(parts[li * seeds:(li + 1) * seeds],
                              seed=base_seed))
    return rows


def _run_point_star(args):
    return _run_point(*args)


def saturation_point(rows: Sequence[Metrics], zero_load: float, *,
                     threshold: float = 3.0):
    """Smallest offered load whose average latency exceeds
    threshold x zero_load, with the plateau throughput alongside.
    Returns (lambda, plateau) or None if the knee is past the grid."""
    plateau = max((m.throughput for m in rows), default=0.0)
    for m in sorted(rows, key=lambda m: m.offered):
        avg = m.avg_latency
        if avg is not None and avg > threshold * zero_load:
            return m.offered, plateau
    return None


def _fmt(m: Metrics):
    avg = "" if m.avg_latency is None else f"{m.avg_latency:.4f}"
    p99 = "" if m.p99_latency is None else str(m.p99_latency)
    return [m.variant, f"{m.offered:g}", f"{m.p_local:g}", str(m.seed),
            f"{m.throughput:.6f}", avg, p99, str(m.completed),
            str(m.horizon)]


def write_csv(rows: Sequence[Metrics], path) -> None:
    """One header plus one line per row; stable bytes for fixed rows."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for m in rows:
            w.writerow(_fmt(m))
