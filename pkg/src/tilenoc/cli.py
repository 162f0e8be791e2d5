"""Experiment driver: sweeps, kernel comparisons, oracle checks.

Subcommands:

* ``sweep``          offered-load sweeps to CSV (one row per variant,
                     p_local and lambda grid point, seed-averaged)
* ``kernel``         run a kernel trace on every fabric variant with and
                     without scrambling; CSV of cycles + relative
                     performance against the full-crossbar baseline
* ``zero-load``      print the per-class zero-load latency table and
                     verify every (core, bank) pair against it
* ``scramble-check`` exhaustive address-map verification

A flat ``key = value`` config file can pre-set any long flag (dashes as
underscores); explicit flags win over the file, the file wins over
built-in defaults.  Runs are deterministic: the same spec and seeds
produce byte-identical output no matter the parallelism degree.
"""

from __future__ import annotations

import argparse
import csv
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels, metrics
from .addressing import AddressLayout, scramble_array
from .engine import compiled_cluster, run_traces
from .topology import ClusterConfig, VARIANTS
from .traffic import SyntheticConfig

__all__ = ["main", "run_scramble_check", "ScrambleReport"]

KERNEL_COLUMNS = ("kernel", "variant", "scramble", "cycles",
                  "relative_to_topx")


class SpecError(ValueError):
    """Invalid experiment spec; nothing has run yet."""


# ------------------------------------------------------------ spec parsing


def _parse_grid(text: str) -> list:
    """`start:stop:step` inclusive of stop, or a single value."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return [float(parts[0])]
        if len(parts) != 3:
            raise ValueError
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise ValueError
    except ValueError:
        raise SpecError(f"bad lambda grid {text!r}, want start:stop:step")
    n = int(round((stop - start) / step))
    grid = [round(start + i * step, 9) for i in range(n + 1)]
    return [g for g in grid if g <= stop + 1e-9]


def _parse_list(text: str, cast):
    try:
        return [cast(p) for p in text.split(",") if p]
    except ValueError:
        raise SpecError(f"bad list {text!r}")


def _read_config(path: str) -> dict:
    out = {}
    try:
        with open(path) as fh:
            for ln, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise SpecError(f"{path}:{ln}: expected key = value")
                key, val = (p.strip() for p in line.split("=", 1))
                key = key.replace("-", "_")
                out["lam" if key == "lambda" else key] = val
    except OSError as exc:
        raise SpecError(f"cannot read config: {exc}")
    return out


def _merged(args: argparse.Namespace, key: str, default=None):
    val = getattr(args, key, None)
    if val is not None:
        return val
    return getattr(args, "_config", {}).get(key, default)


@dataclass
class ExperimentSpec:
    command: str
    variants: list
    lam_grid: list = field(default_factory=list)
    p_locals: list = field(default_factory=lambda: [0.0])
    seed: int = 0
    seeds: int = 3
    horizon: int = 100_000
    scrambles: tuple = (True, False)
    layout: AddressLayout = field(default_factory=AddressLayout)
    kernel: str = ""
    out: str = ""
    parallel: int = 1
    trace_out: str = ""


def _build_spec(args: argparse.Namespace) -> ExperimentSpec:
    cfg_path = getattr(args, "config", None)
    args._config = _read_config(cfg_path) if cfg_path else {}

    cmd = args.command
    variants = _parse_list(_merged(args, "variant", "topH,top4,top1,topX")
                           if cmd != "sweep"
                           else _merged(args, "variant", "topH"), str)
    for v in variants:
        if v not in VARIANTS:
            raise SpecError(f"unknown variant {v!r}")

    try:
        s_bits = int(_merged(args, "s_bits", 4))
        layout = AddressLayout(seq_bits=s_bits)
    except ValueError as exc:
        raise SpecError(str(exc))

    spec = ExperimentSpec(command=cmd, variants=variants, layout=layout)
    try:
        spec.seed = int(_merged(args, "seed", 0))
        spec.seeds = int(_merged(args, "seeds", 3))
        spec.horizon = int(_merged(args, "horizon", 100_000))
        spec.parallel = int(_merged(args, "parallel", 1))
    except ValueError as exc:
        raise SpecError(str(exc))
    if spec.seeds < 1 or spec.horizon < 16 or spec.parallel < 1:
        raise SpecError("seeds, horizon and parallel must be positive")

    scramble = _merged(args, "scramble")
    if scramble is not None:
        if scramble not in ("on", "off"):
            raise SpecError("--scramble must be on or off")
        spec.scrambles = (scramble == "on",)

    if cmd == "sweep":
        lam = _merged(args, "lam")
        if lam is None:
            raise SpecError("sweep needs --lambda start:stop:step")
        spec.lam_grid = _parse_grid(lam)
        spec.p_locals = _parse_list(_merged(args, "p_local", "0"), float)
        spec.out = _merged(args, "out", "results.csv")
        for p in spec.p_locals:
            try:
                # fails fast on impossible locality configs
                SyntheticConfig(rate=0.0, p_local=p, layout=spec.layout)
            except ValueError as exc:
                raise SpecError(str(exc))
    elif cmd == "kernel":
        spec.kernel = _merged(args, "kernel", "")
        if spec.kernel not in kernels.KERNELS:
            raise SpecError(f"unknown kernel {spec.kernel!r}, "
                            f"choose from {', '.join(kernels.KERNELS)}")
        spec.out = _merged(args, "out", "kernel.csv")
        spec.trace_out = _merged(args, "trace_out", "")
    return spec


# ---------------------------------------------------------------- commands


def cmd_sweep(spec: ExperimentSpec) -> int:
    jobs = []
    for variant in spec.variants:
        for p_local in spec.p_locals:
            for li, lam in enumerate(spec.lam_grid):
                for rep in range(spec.seeds):
                    jobs.append((variant, lam, p_local, 0.0,
                                 metrics.derive_seed(spec.seed, variant,
                                                     li, rep),
                                 spec.horizon, 8, 0.2, spec.layout))
    if spec.parallel > 1:
        with ProcessPoolExecutor(max_workers=spec.parallel) as pool:
            parts = list(pool.map(metrics._run_point_star, jobs,
                                  chunksize=1))
    else:
        parts = [metrics._run_point(*j) for j in jobs]
    rows = []
    for i in range(0, len(parts), spec.seeds):
        rows.append(metrics.aggregate(parts[i:i + spec.seeds],
                                      seed=spec.seed))
    metrics.write_csv(rows, spec.out)
    print(f"wrote {len(rows)} rows to {spec.out}")
    return 0


def cmd_kernel(spec: ExperimentSpec) -> int:
    kcfg = kernels.KernelConfig(spec.kernel, layout=spec.layout)
    traces = kernels.generate(kcfg)
    if spec.trace_out:
        with open(spec.trace_out, "w") as fh:
            fh.write(kernels.traces_to_text(traces))
        print(f"wrote traces to {spec.trace_out}")

    resolved = {s: kernels.resolve_banks(traces, spec.layout, s)
                for s in spec.scrambles}
    order = spec.variants if "topX" in spec.variants \
        else list(spec.variants) + ["topX"]
    cycles = {}
    for scram in spec.scrambles:
        for variant in order:
            compiled = compiled_cluster(ClusterConfig(variant=variant))
            raw = run_traces(compiled, resolved[scram])
            cycles[variant, scram] = raw.completion

    with open(spec.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(KERNEL_COLUMNS)
        for scram in spec.scrambles:
            base = cycles["topX", scram]
            for variant in order:
                c = cycles[variant, scram]
                w.writerow([spec.kernel, variant,
                            "on" if scram else "off", c,
                            f"{base / c:.4f}"])
    n = len(order) * len(spec.scrambles)
    print(f"wrote {n} rows to {spec.out}")
    return 0


def _zero_load_classes(variant: str, compiled):
    """Expected zero-load cycles per (core, bank) class."""
    ct = np.arange(compiled.n_cores)[:, None] // compiled.cores_per_tile
    bt = np.arange(compiled.n_banks)[None, :] // compiled.banks_per_tile
    if variant == "topX":
        return [("any", np.ones((compiled.n_cores, compiled.n_banks),
                                bool), 1)]
    local = ct == bt
    if variant == "topH":
        same_group = (ct // 16) == (bt // 16)
        return [("local", local, 1),
                ("intra-group", same_group & ~local, 3),
                ("inter-group", ~same_group, 5)]
    return [("local", local, 1), ("remote", ~local, 5)]


def cmd_zero_load(spec: ExperimentSpec) -> int:
    bad = 0
    for variant in spec.variants:
        compiled = compiled_cluster(ClusterConfig(variant=variant))
        table = compiled.zero_load_table()
        print(f"{variant}:")
        for name, mask, want in _zero_load_classes(variant, compiled):
            got = table[mask]
            ok = bool((got == want).all())
            print(f"  {name:12s} {want} cycle(s)  "
                  f"[{int(mask.sum())} pairs] {'ok' if ok else 'MISMATCH'}")
            if not ok:
                idx = np.argwhere(mask & (table != want))[0]
                print(f"    first deviation: core {idx[0]} bank {idx[1]} "
                      f"-> {table[idx[0], idx[1]]}")
                bad += 1
    return 1 if bad else 0


@dataclass
class ScrambleReport:
    checked: int
    failures: list

    @property
    def ok(self) -> bool:
        return not self.failures


def run_scramble_check(layout: AddressLayout,
                       scramble_fn=None) -> ScrambleReport:
    """Exhaustive window verification; `scramble_fn` is a test hook."""
    fn = scramble_fn or (lambda a: scramble_array(a, layout))
    win = 1 << layout.seq_window_bits
    region = 1 << layout.seq_region_bits
    addrs = np.arange(win, dtype=np.int64)
    mapped = np.asarray(fn(addrs.copy()))
    failures = []

    inside = (mapped >= 0) & (mapped < win)
    if not inside.all():
        a = int(addrs[~inside][0])
        failures.append(f"escapes window: {a:#x} -> {int(fn(np.array([a]))[0]):#x}")
    counts = np.bincount(mapped[inside], minlength=win)
    if (counts != 1).any():
        dup = int(np.nonzero(counts != 1)[0][0])
        failures.append(f"not a bijection: image {dup:#x} hit "
                        f"{int(counts[dup])} times")

    tile_shift = layout.byte_bits + layout.bank_bits
    tiles = (mapped >> tile_shift) & (layout.n_tiles - 1)
    want_tile = addrs >> layout.seq_region_bits
    miss = tiles != want_tile
    if miss.any():
        a = int(addrs[miss][0])
        failures.append(f"region not tile-local: {a:#x} -> tile "
                        f"{int(tiles[miss][0])}, want {int(want_tile[miss][0])}")

    # every byte address of a word shares its bank, so each bank takes
    # region/n_banks byte addresses when words disperse evenly
    banks = (mapped >> layout.byte_bits) & (layout.n_banks_per_tile - 1)
    per = region // layout.n_banks_per_tile
    for t in range(layout.n_tiles):
        c = np.bincount(banks[want_tile == t],
                        minlength=layout.n_banks_per_tile)
        if (c != per).any():
            failures.append(f"bank dispersion off in region {t}: {c.tolist()}")
            break

    outside = np.arange(win, 2 * win, dtype=np.int64)
    ident = np.asarray(fn(outside.copy()))
    if (ident != outside).any():
        a = int(outside[ident != outside][0])
        failures.append(f"not identity outside window: {a:#x}")

    return ScrambleReport(checked=win, failures=failures)


def cmd_scramble_check(spec: ExperimentSpec) -> int:
    rep = run_scramble_check(spec.layout)
    print(f"checked {rep.checked} window addresses "
          f"(s={spec.layout.seq_bits}, t={spec.layout.tile_bits})")
    if rep.ok:
        print("all checks passed: bijective, tile-local regions, "
              "even bank dispersion, identity outside")
        return 0
    for f in rep.failures:
        print(f"FAIL: {f}")
    return 1


# -------------------------------------------------------------- entrypoint


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="tilenoc",
        description="shared-L1 cluster interconnect experiments")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--variant", help="comma list of fabric variants")
        p.add_argument("--seed", help="base seed")
        p.add_argument("--seeds", help="repetitions per grid point")
        p.add_argument("--horizon", help="cycles per run")
        p.add_argument("--s-bits", dest="s_bits",
                       help="sequential-region row bits")
        p.add_argument("--parallel", help="worker processes")
        p.add_argument("--config", help="key = value defaults file")

    p = sub.add_parser("sweep", help="offered-load sweep to CSV")
    common(p)
    p.add_argument("--lambda", dest="lam", help="grid start:stop:step")
    p.add_argument("--p-local", dest="p_local",
                   help="comma list of local-traffic fractions")
    p.add_argument("--out", help="CSV path (default results.csv)")

    p = sub.add_parser("kernel", help="kernel comparison to CSV")
    common(p)
    p.add_argument("--kernel", help="matmul | conv2d | dct")
    p.add_argument("--scramble", help="on | off (default: both)")
    p.add_argument("--out", help="CSV path (default kernel.csv)")
    p.add_argument("--trace-out", dest="trace_out",
                   help="also dump generated traces as text")

    p = sub.add_parser("zero-load", help="verify zero-load latency table")
    common(p)

    p = sub.add_parser("scramble-check", help="verify the address map")
    common(p)
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        spec = _build_spec(args)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    run = {"sweep": cmd_sweep, "kernel": cmd_kernel,
           "zero-load": cmd_zero_load, "scramble-check": cmd_scramble_check}
    return run[spec.command](spec)


if __name__ == "__main__":
    sys.exit(main())
