"""Throughput sweeps over (d, k, v_len, loop) and the cache-pressure trend check."""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np

from .basis import build_basis
from .config import RunConfig
from .mesh import DIMENSION_SPLITS
from .metrics import BYTES_PER_DOUBLE, OpCounters, working_set
from .operators import AdvectionOperator, ConstantField
from .partition import make_layout
from .vector import Partitioner, allocate

BENCH_COLUMNS = (
    "d_x", "d_v", "k", "v_len", "loop", "strategy", "backend", "subdivisions_x", "subdivisions_v",
    "n_dofs", "seconds", "throughput", "flops_per_dof", "modeled_bytes_per_dof", "intensity",
    "working_set", "working_set_bytes",
)

# batch-sized buffers live in the compiled loop: 3 tensors, even/odd halves, 2 line temporaries
LIVE_BATCH_BUFFERS = 8
# x-cells per axis, large enough for one full batch of 8 lanes
X_CELLS = {1: 8, 2: 4, 3: 2}
MIN_DOFS = 100_000


def detect_l2_bytes(default=1 << 20):
    """Size of the level-2 data cache of cpu0 from sysfs, else `default`."""
    base = Path("/sys/devices/system/cpu/cpu0/cache")
    try:
        for idx in sorted(base.glob("index*")):
            if (idx / "level").read_text().strip() == "2":
                text = (idx / "size").read_text().strip().upper()
                scale = {"K": 1 << 10, "M": 1 << 20}.get(text[-1], 1)
                return int(text.rstrip("KM")) * scale
    except OSError:
        pass
    return default


def default_cache_threshold():
    """Per-batch working-set bytes beyond which the live buffers spill out of L2."""
    return detect_l2_bytes() // LIVE_BATCH_BUFFERS


def bench_config(d, k, v_len, loop="ecl", strategy="even_odd"):
    """Cartesian periodic mesh with about MIN_DOFS unknowns for one sweep point."""
    d_x, d_v = DIMENSION_SPLITS[d]
    n_cells_x = X_CELLS[d_x] ** d_x
    per_cell = (k + 1) ** d
    s_v = 1
    while n_cells_x * s_v**d_v * per_cell < MIN_DOFS and s_v < 8:
        s_v += 1
    mode = "buffered" if loop == "fcl" else "non_buffered"
    return RunConfig(d_x=d_x, d_v=d_v, k=k, subdivisions_x=X_CELLS[d_x], subdivisions_v=s_v, loop=loop,
                     strategy=strategy, v_len=v_len, mapping="cartesian_single_set", mode=mode)


def _time_best(fn, repeats, min_seconds):
    best = float("inf")
    for _ in range(repeats):
        reps = 0
        t0 = time.perf_counter()
        while True:
            fn()
            reps += 1
            elapsed = time.perf_counter() - t0
            if elapsed >= min_seconds:
                break
        best = min(best, elapsed / reps)
    return best


class PreparedBench:
    """One benchmark configuration, set up once and timed repeatedly."""

    def __init__(self, cfg, backend="auto"):
        self.cfg = cfg
        self.backend = resolve_backend(cfg, backend)
        topo = cfg.topology()
        p = Partitioner(topo, make_layout(topo, 1, 1, None), 0, cfg.k)
        counters = OpCounters()
        op = AdvectionOperator(p, build_basis(cfg.k, cfg.quadrature), mapping=cfg.mapping, flux=cfg.flux,
                               v_len=cfg.v_len or None, strategy=cfg.strategy, counters=counters)
        field = ConstantField(cfg.velocity_vector())
        src = allocate(p, cfg.vector_mode(), ghosted=True)
        src.assign(np.random.default_rng(cfg.seed).uniform(-1.0, 1.0, src.owned.shape))
        dst = allocate(p, cfg.vector_mode(), ghosted=False)
        src.update_ghost_values()
        apply = op.apply_fcl if cfg.loop == "fcl" else op.apply_ecl
        # one instrumented pass gives the per-application counts
        apply(src, dst, 0.0, field)
        self.counts = counters.copy()
        self.n_dofs = src.owned.size
        if self.backend == "compiled":
            from .fastkernels import CompiledECL

            kernel = CompiledECL(op, field)
            self.run = lambda: kernel.apply(src, dst)
        else:
            self.run = lambda: apply(src, dst, 0.0, field)
        self.run()  # warm-up (JIT compilation for the compiled backend)
        self.seconds = float("inf")

    def time(self, repeats=3, min_seconds=0.1):
        self.seconds = min(self.seconds, _time_best(self.run, repeats, min_seconds))
        return self.seconds

    def row(self):
        cfg, counts, n_dofs = self.cfg, self.counts, self.n_dofs
        ws = working_set(cfg.k, cfg.d, cfg.v_len or 1)
        return {
            "d_x": cfg.d_x,
            "d_v": cfg.d_v,
            "k": cfg.k,
            "v_len": cfg.v_len,
            "loop": cfg.loop,
            "strategy": cfg.strategy,
            "backend": self.backend,
            "subdivisions_x": cfg.subdivisions_x[0],
            "subdivisions_v": cfg.subdivisions_v[0],
            "n_dofs": n_dofs,
            "seconds": self.seconds,
            "throughput": n_dofs / self.seconds,
            "flops_per_dof": counts.flops / n_dofs,
            "modeled_bytes_per_dof": BYTES_PER_DOUBLE * counts.modeled_doubles_moved / n_dofs,
            "intensity": counts.flops / (BYTES_PER_DOUBLE * counts.modeled_doubles_moved),
            "working_set": ws,
            "working_set_bytes": BYTES_PER_DOUBLE * ws,
        }


def resolve_backend(cfg, backend="auto"):
    compiled_ok = cfg.loop == "ecl" and cfg.strategy == "even_odd" and not cfg.deformation_x \
        and not cfg.deformation_v
    if backend == "auto":
        return "compiled" if compiled_ok else "numpy"
    if backend == "compiled" and not compiled_ok:
        raise ValueError("the compiled backend covers the even-odd ECL on Cartesian meshes only")
    if backend not in ("compiled", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    return backend


def bench_one(cfg, backend="auto", repeats=3, min_seconds=0.1):
    """One CSV row (dict) for a configuration."""
    prep = PreparedBench(cfg, backend)
    prep.time(repeats, min_seconds)
    return prep.row()


def sweep(ds, ks, v_lens, loops=("ecl",), backend="auto", repeats=3, min_seconds=0.1, rounds=1, on_row=None):
    """Rows for every (d, k, loop, v_len).

    With rounds > 1 all configurations are set up first and timed round-robin,
    keeping the best time of each, so a slow spell of the machine does not
    land on a single configuration.
    """
    cfgs = [bench_config(d, k, v_len, loop) for d in ds for k in ks for loop in loops for v_len in v_lens]
    if rounds <= 1:
        rows = []
        for cfg in cfgs:
            rows.append(bench_one(cfg, backend, repeats, min_seconds))
            if on_row is not None:
                on_row(rows[-1])
        return rows
    preps = [PreparedBench(cfg, backend) for cfg in cfgs]
    for _ in range(rounds):
        for prep in preps:
            prep.time(repeats, min_seconds)
    rows = [prep.row() for prep in preps]
    if on_row is not None:
        for row in rows:
            on_row(row)
    return rows


METRIC_COLUMNS = ("backend", "n_dofs", "seconds", "throughput", "flops_per_dof", "modeled_bytes_per_dof",
                  "intensity", "working_set", "working_set_bytes")


def row_to_config(row):
    """(RunConfig, metrics dict) from a bench row, e.g. one read back with csv.DictReader."""
    cfg = RunConfig(d_x=int(row["d_x"]), d_v=int(row["d_v"]), k=int(row["k"]), v_len=int(row["v_len"]),
                    loop=row["loop"], strategy=row["strategy"], subdivisions_x=int(row["subdivisions_x"]),
                    subdivisions_v=int(row["subdivisions_v"]), mapping="cartesian_single_set",
                    mode="buffered" if row["loop"] == "fcl" else "non_buffered")
    metrics = {}
    for key in METRIC_COLUMNS:
        val = row[key]
        metrics[key] = val if key == "backend" else float(val)
    return cfg, metrics


def trend_report(rows, threshold_bytes, noise=0.1):
    """Check the cache-pressure ordering on bench rows of one loop and backend.

    decline: for the widest batch and every d with at least two points above
    the threshold, throughput over increasing working set never rises by more
    than `noise` (relative), and the last point is below the best of the
    points at or under the threshold and the first point past it (the
    threshold is a model, so the turn may come one step late).
    recovery: at the largest working set of the sweep, some narrower batch is
    faster than the widest one.
    """
    widest = max(r["v_len"] for r in rows)
    decline = {}
    for d in sorted({r["d_x"] + r["d_v"] for r in rows}):
        pts = sorted((r["working_set_bytes"], r["throughput"]) for r in rows
                     if r["v_len"] == widest and r["d_x"] + r["d_v"] == d)
        above = [tp for ws, tp in pts if ws > threshold_bytes]
        below = [tp for ws, tp in pts if ws <= threshold_bytes]
        if len(above) < 2 or not below:
            continue
        steps_ok = all(b <= a * (1.0 + noise) for a, b in zip(above, above[1:]))
        decline[d] = steps_ok and above[-1] < max(below + above[:1])
    big = max(rows, key=lambda r: (r["d_x"] + r["d_v"], r["k"]))
    at_big = {r["v_len"]: r["throughput"] for r in rows
              if (r["d_x"], r["d_v"], r["k"]) == (big["d_x"], big["d_v"], big["k"])}
    narrower = {v: tp for v, tp in at_big.items() if v < widest}
    best_narrow = max(narrower, key=narrower.get) if narrower else None
    recovery = best_narrow is not None and narrower[best_narrow] > at_big.get(widest, np.inf)
    return {
        "widest": widest,
        "decline": decline,
        "decline_ok": bool(decline) and all(decline.values()),
        "largest": (big["d_x"] + big["d_v"], big["k"]),
        "throughput_by_v_len": at_big,
        "recovery_ok": recovery,
    }
