"""Acceptance checks, one test per criterion, one printed verdict line each.

Every check asserts at its stated tolerance; nothing is weakened to pass.
Three checks are expected to fail on this model and are kept at full
strength anyway:

  * A4: the average-latency bound at lambda=0.33 (an open-loop generator
    keeps queues fuller than a stalling core would, costing ~0.5 cycles),
  * A5: the 40% locality gain (with a fixed local/remote generation mix
    the gain is capped at 1/(1-p_local) = 4/3 minus window-sharing drag),
  * A6: the matmul bound (the no-reuse trace demands 0.5 req/core/cycle,
    above the topH fabric's ~0.41 saturation, so topH is fabric-bound
    while topX is issue-bound).

The verdict lines are printed with capture suspended so that a plain
`pytest -v` run shows them alongside the PASSED/FAILED roll-up.
"""

import pytest

from tilenoc import cli, metrics
from tilenoc.addressing import AddressLayout
from tilenoc.engine import SimState, compiled_cluster, run_synthetic, step
from tilenoc.kernels import KernelConfig, generate, run_kernel
from tilenoc.metrics import saturation_point, sweep
from tilenoc.topology import VARIANTS, ClusterConfig
from tilenoc.traffic import SyntheticConfig

HORIZON = 20_000
SEEDS = 2
BASE_SEED = 11


@pytest.fixture
def verdict(capsys):
    # each criterion leaves exactly one line visible outside the capture
    def _report(tag, ok, detail):
        with capsys.disabled():
            print(f"[{tag}] {'PASS' if ok else 'FAIL'} {detail}", flush=True)
    return _report


@pytest.fixture(scope="module")
def fabrics():
    return {v: compiled_cluster(ClusterConfig(variant=v)) for v in VARIANTS}


@pytest.fixture(scope="module")
def top1_rows():
    return sweep("top1", [0.06, 0.08, 0.10, 0.12, 0.16, 0.24],
                 seeds=SEEDS, horizon=HORIZON, base_seed=BASE_SEED)


@pytest.fixture(scope="module")
def pair_rows():
    grid = [0.10, 0.20, 0.30, 0.35, 0.40, 0.50]
    return {v: sweep(v, grid, seeds=SEEDS, horizon=HORIZON,
                     base_seed=BASE_SEED) for v in ("top4", "topH")}


@pytest.fixture(scope="module")
def locality_rows():
    grid = [0.30, 0.55, 1.00]
    return {p: sweep("topH", grid, p_local=p, seeds=SEEDS, horizon=HORIZON,
                     base_seed=BASE_SEED) for p in (0.0, 0.25, 0.5, 1.0)}


def test_a1_zero_load_latency_table(verdict, capsys):
    rcs = {v: cli.main(["zero-load", "--variant", v]) for v in VARIANTS}
    capsys.readouterr()
    bad = [v for v, rc in rcs.items() if rc != 0]
    verdict("A1", not bad,
            "zero-load latencies exact for every core/bank class "
            "(local 1, intra-group 3, inter-group 5, remote 5, topX 1)"
            + (f"; mismatch in {bad}" if bad else ""))
    assert not bad, f"zero-load table mismatch for {bad}"


def test_a2_top1_saturation(verdict, top1_rows):
    plateau = max(m.throughput for m in top1_rows)
    knee = saturation_point(top1_rows, zero_load=5.0)
    ok = 0.08 <= plateau <= 0.12
    verdict("A2", ok,
            f"top1 plateau {plateau:.3f} req/core/cycle (band 0.10 +- 0.02), "
            f"knee at lambda={knee[0] if knee else None}")
    assert ok, f"top1 plateau {plateau:.4f} outside 0.10 +- 0.02"


def test_a3_top4_toph_saturation(verdict, pair_rows):
    plat = {v: max(m.throughput for m in rows)
            for v, rows in pair_rows.items()}
    in_band = {v: 0.34 <= p <= 0.42 for v, p in plat.items()}
    # below saturation both accept everything they generate, so the
    # comparison is seed noise there; 0.002 is well under the band width
    worst = min(h.throughput - q.throughput
                for q, h in zip(pair_rows["top4"], pair_rows["topH"]))
    dominated = worst >= -0.002
    ok = all(in_band.values()) and dominated
    verdict("A3", ok,
            f"plateaus top4 {plat['top4']:.3f} / topH {plat['topH']:.3f} "
            f"(band 0.38 +- 0.04); topH-top4 worst gap {worst:+.4f}")
    assert in_band["top4"], f"top4 plateau {plat['top4']:.4f} out of band"
    assert in_band["topH"], f"topH plateau {plat['topH']:.4f} out of band"
    assert dominated, f"top4 beat topH by {-worst:.4f} at some grid point"


def test_a4_toph_latency_bound(verdict):
    (m,) = sweep("topH", [0.33], seeds=3, horizon=HORIZON,
                 base_seed=BASE_SEED)
    ok = m.avg_latency is not None and m.avg_latency < 6.5
    verdict("A4", ok,
            f"topH average latency {m.avg_latency:.2f} cycles at "
            f"lambda=0.33 (bound < 6.5)")
    assert ok, f"avg latency {m.avg_latency:.3f} >= 6.5 at lambda 0.33"


def test_a5_locality_sweep(verdict, locality_rows):
    ps = sorted(locality_rows)
    n_pts = len(locality_rows[ps[0]])
    mono_bad = []
    for i in range(n_pts):
        lam = locality_rows[ps[0]][i].offered
        thr = [locality_rows[p][i].throughput for p in ps]
        for a, b in zip(thr, thr[1:]):
            if b < a - 0.003:
                mono_bad.append(f"lambda={lam:g}: {thr}")
                break
    gain = max(h.throughput / z.throughput
               for z, h in zip(locality_rows[0.0], locality_rows[0.25]))
    ok = not mono_bad and gain >= 1.40
    verdict("A5", ok,
            f"throughput monotone in p_local "
            f"{'yes' if not mono_bad else 'NO'}; best p_local=0.25 gain "
            f"{gain:.2f}x (need >= 1.40x)")
    assert not mono_bad, f"non-monotone in p_local at {mono_bad}"
    assert gain >= 1.40, f"best locality gain {gain:.3f}x < 1.40x"


def test_a6_kernel_relative_performance(verdict, fabrics):
    mm = generate(KernelConfig(kind="matmul"))
    mm_cycles = {v: run_kernel(fabrics[v], mm) for v in ("topH", "topX")}
    ratio = mm_cycles["topH"] / mm_cycles["topX"]

    dct = generate(KernelConfig(kind="dct"))
    scram = {v: run_kernel(fabrics[v], dct, scramble_enabled=True)
             for v in VARIANTS}
    plain = {v: run_kernel(fabrics[v], dct, scramble_enabled=False)
             for v in VARIANTS}
    dct_off = max(abs(scram[v] / scram["topX"] - 1.0) for v in VARIANTS)
    worst_plain = max(plain, key=plain.get)

    mm_ok = ratio <= 1.25
    dct_ok = dct_off <= 0.05
    plain_ok = worst_plain == "top1"
    verdict("A6", mm_ok and dct_ok and plain_ok,
            f"matmul topH/topX {ratio:.2f}x (bound 1.25x); dct scrambled "
            f"within {dct_off:.1%} of topX (bound 5%); dct unscrambled "
            f"worst on {worst_plain}")
    assert dct_ok, f"scrambled dct {dct_off:.3%} from topX on some variant"
    assert plain_ok, f"unscrambled dct worst on {worst_plain}, not top1"
    assert mm_ok, f"matmul topH/topX ratio {ratio:.3f} > 1.25"


def test_a7_scrambling_properties(verdict):
    rep = cli.run_scramble_check(AddressLayout())
    verdict("A7", rep.ok,
            f"scramble bijective over {rep.checked} window addresses, "
            f"identity outside, tile-local regions, even bank dispersion"
            + (f"; failures: {rep.failures}" if rep.failures else ""))
    assert rep.ok, rep.failures


def test_a8_property_suite(verdict, fabrics, pair_rows, top1_rows,
                           tmp_path):
    failures = []

    out_a, out_b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["sweep", "--variant", "top1", "--lambda", "0.05:0.10:0.05",
            "--seeds", "2", "--horizon", "3000", "--seed", "5"]
    assert cli.main(args + ["--out", str(out_a)]) == 0
    assert cli.main(args + ["--out", str(out_b)]) == 0
    if out_a.read_bytes() != out_b.read_bytes():
        failures.append("same seed gave different CSV bytes")

    # debug mode re-checks request conservation after every cycle
    try:
        run_synthetic(fabrics["topH"],
                      SyntheticConfig(rate=0.4, store_fraction=0.3),
                      horizon=3000, debug=True)
    except RuntimeError as e:
        failures.append(f"conservation: {e}")

    # every completion must respect its path-class zero-load floor
    try:
        run_synthetic(fabrics["topH"], SyntheticConfig(rate=0.2, p_local=0.3),
                      horizon=3000, check_floor=True)
        run_synthetic(fabrics["top1"], SyntheticConfig(rate=0.05),
                      horizon=3000, check_floor=True)
    except RuntimeError as e:
        failures.append(f"latency floor: {e}")

    # four cores of one tile hammer a single remote bank: round-robin
    # arbitration must hand out issue slots within +-1 of each other
    n = fabrics["topH"].n_cores
    traces = [[("L", 768)] * 3000 if c < 4 else [] for c in range(n)]
    st = SimState(fabrics["topH"], traces, horizon=1 << 20)
    step(st, 2000)
    issued = [int(st.cursor[c] - st.op_start[c]) for c in range(4)]
    if max(issued) - min(issued) > 1:
        failures.append(f"unfair grants under contention: {issued}")

    rows = [m for v in pair_rows for m in pair_rows[v]
            if m.offered <= 0.30]
    rows += [m for m in top1_rows if m.offered <= 0.06]
    imbalance = max(abs(m.throughput - m.offered) / m.offered for m in rows)
    if imbalance > 0.02:
        failures.append(f"flow imbalance {imbalance:.3%} below saturation")

    verdict("A8", not failures,
            "determinism, per-cycle conservation, latency floors, "
            "round-robin fairness +-1, flow balance +-2%"
            + (f"; {failures}" if failures else ""))
    assert not failures, failures
