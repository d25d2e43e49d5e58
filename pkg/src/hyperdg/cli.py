"""Command-line front end: hyperdg <subcommand> [options]."""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np
import yaml

from .config import ConfigError, config_from_dict, dump_config

SUBCOMMANDS = ("run-advection", "landau", "bench", "verify", "estimate-comm", "dump-config")


class UsageError(ValueError):
    pass


def parse_range(text):
    """'2..5' -> [2, 3, 4, 5]; '1,2,4' -> [1, 2, 4]; '3' -> [3]."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ".." in part:
                lo, hi = (int(s) for s in part.split("..", 1))
                if hi < lo:
                    raise UsageError(f"empty range {part!r}")
                out.extend(range(lo, hi + 1))
            else:
                out.append(int(part))
        except ValueError as exc:
            if isinstance(exc, UsageError):
                raise
            raise UsageError(f"cannot parse integer range {part!r}") from exc
    if not out:
        raise UsageError("empty range")
    return out


def parse_overrides(items):
    data = {}
    for item in items or ():
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        data[key.strip()] = yaml.safe_load(raw)
    return data


def build_config(args, base=None):
    data = dict(base or {})
    if getattr(args, "config", None):
        with open(args.config) as fh:
            try:
                loaded = yaml.safe_load(fh) or {}
            except yaml.YAMLError as exc:
                raise ConfigError(f"cannot parse {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("configuration must be a mapping")
        data.update(loaded)
    data.update(parse_overrides(getattr(args, "set", None)))
    for key in ("output", "snapshot"):
        if getattr(args, key, None):
            data[key] = getattr(args, key)
    return config_from_dict(data)


def write_csv(path, header, rows):
    fh = open(path, "w", newline="") if path and path != "-" else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    finally:
        if fh is not sys.stdout:
            fh.close()


# ------------------------------------------------------------ subcommands


def cmd_run_advection(args):
    from .metrics import arithmetic_intensity, throughput
    from .timeint import STAGE_COLUMNS, run_advection
    from .vector import export_snapshot

    cfg = build_config(args)
    res = run_advection(cfg)
    if cfg.output:
        write_csv(cfg.output, STAGE_COLUMNS, res["stage_rows"])
    if cfg.snapshot:
        export_snapshot(cfg.snapshot, res["topology"], cfg.k, res["final"])
    c = res["counters"]
    print(f"steps {res['n_steps']}  dt {res['dt']:.6g}  t {res['t']:.6g}")
    print(f"l2_error {res['l2_error']:.6e}")
    if c.wall_seconds > 0:
        print(f"throughput {throughput(c):.4e} DoF/s  flops {c.flops}  intensity {arithmetic_intensity(c):.3f}")
    if cfg.track_mass and res["masses"]:
        m = np.asarray(res["masses"])
        print(f"mass drift {np.max(np.abs(m - m[0])):.3e} (initial mass {m[0]:.6e})")
    return 0


def cmd_landau(args):
    from .vector import export_snapshot
    from .vlasov import ENERGY_COLUMNS, dispersion_root, fit_damping, landau_config, run_landau

    cfg = build_config(args, {"t_final": 20.0, "cfl": 1.0, "subdivisions_x": 32, "subdivisions_v": 32})
    res = run_landau(cfg)
    rows = res["rows"]
    if cfg.output:
        write_csv(cfg.output, ENERGY_COLUMNS, rows)
    if cfg.snapshot:
        export_snapshot(cfg.snapshot, landau_config(cfg).topology(), cfg.k, res["final"])
    arr = np.asarray(rows)
    omega, gamma = dispersion_root(cfg.kappa)
    print(f"steps {len(rows) - 1}  dt {res['dt']:.6g}  seconds {res['seconds']:.1f}")
    try:
        g_fit, w_fit = fit_damping(arr[:, 1], arr[:, 2])
        print(f"damping rate  fitted {g_fit:.5f}  dispersion root {gamma:.5f}")
        print(f"frequency     fitted {w_fit:.5f}  dispersion root {omega:.5f}")
    except ValueError as exc:
        print(f"no damping fit: {exc}")
    drift = np.max(np.abs(arr[:, 3] - arr[0, 3])) / abs(arr[0, 3])
    print(f"relative mass drift {drift:.3e}")
    return 0


def cmd_bench(args):
    from .bench import BENCH_COLUMNS, default_cache_threshold, sweep, trend_report

    ks, ds, v_lens = parse_range(args.k), parse_range(args.d), parse_range(args.v_len)
    loops = [s.strip() for s in args.loop.split(",") if s.strip()]
    for d in ds:
        if not 2 <= d <= 6:
            raise UsageError("d must lie in 2..6")
    for v in v_lens:
        if v not in (1, 2, 4, 8):
            raise UsageError("v_len must be 1, 2, 4 or 8")
    for loop in loops:
        if loop not in ("ecl", "fcl"):
            raise UsageError(f"unknown loop {loop!r}")
    threshold = args.cache_threshold or default_cache_threshold()
    fh = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        w = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS)
        w.writeheader()

        def emit(row):
            w.writerow(row)
            fh.flush()

        rows = sweep(ds, ks, v_lens, loops, backend=args.backend, repeats=args.repeats,
                     min_seconds=args.min_seconds, rounds=args.rounds, on_row=emit)
    finally:
        if fh is not sys.stdout:
            fh.close()
    for loop in loops:
        sub = [r for r in rows if r["loop"] == loop]
        if len(sub) < 2:
            continue
        rep = trend_report(sub, threshold)
        print(f"[{loop}] cache threshold {threshold} bytes; decline beyond threshold: "
              f"{rep['decline'] or 'not enough points'}; narrower batch faster at d,k={rep['largest']}: "
              f"{rep['recovery_ok']}", file=sys.stderr)
    return 0


def cmd_verify(args):
    from .verify import run_all

    failed = 0
    for name, ok, detail in run_all():
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        failed += not ok
    return 1 if failed else 0


def cmd_estimate_comm(args):
    from .partition import estimate_comm_volume, ghost_fraction_lower_bound, make_layout, total_volume_lower_bound

    cfg = build_config(args)
    topo = cfg.topology()
    p_x, p_v = cfg.process_grid()
    est = estimate_comm_volume(topo, make_layout(topo, p_x, p_v, cfg.node_block), cfg.k)
    print(f"d={est.d} k={est.k} dofs={est.n_dofs} ranks={est.n_ranks}")
    print(f"{'rank':>5} {'owned':>8} {'ghost_doubles':>14} {'normalized':>12} {'lower':>10} {'upper':>8}")
    for r in est.rows():
        print(f"{r['rank']:>5} {r['owned_cells']:>8} {r['ghost_doubles']:>14} {r['normalized']:>12.3f} "
              f"{r['lower']:>10.3f} {r['upper']:>8}")
    print(f"within bounds: lower {est.within_lower()}  upper {est.within_upper()}"
          "  (the lower bound presumes every direction is cut)")
    print(f"total ghost volume lower bound: {est.total_lower:.6g} doubles")
    d, n, p = args.d, args.dofs, args.ranks
    print(f"thought experiment d={d} N={n:.3g} p={p}: total >= {total_volume_lower_bound(d, n, p):.4g} doubles, "
          f"ghost fraction >= {ghost_fraction_lower_bound(d, n, p):.3f}")
    return 0


def cmd_dump_config(args):
    cfg = build_config(args)
    sys.stdout.write(dump_config(cfg))
    return 0


# ------------------------------------------------------------------ parser


def _add_config_args(sp, outputs=False):
    sp.add_argument("--config", help="YAML file with RunConfig fields")
    sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one field (repeatable)")
    if outputs:
        sp.add_argument("--output", help="CSV output path")
        sp.add_argument("--snapshot", help="binary snapshot of the final state")


def build_parser():
    parser = argparse.ArgumentParser(prog="hyperdg", description="High-dimensional DG advection toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("run-advection", help="constant-velocity advection of a plane wave")
    _add_config_args(sp, outputs=True)
    sp.set_defaults(func=cmd_run_advection)
    sp = sub.add_parser("landau", help="Vlasov-Poisson Landau damping")
    _add_config_args(sp, outputs=True)
    sp.set_defaults(func=cmd_landau)
    sp = sub.add_parser("bench", help="throughput sweep, one CSV row per configuration")
    sp.add_argument("--k", default="2..5")
    sp.add_argument("--d", default="2..6")
    sp.add_argument("--v-len", default="8")
    sp.add_argument("--loop", default="ecl", help="comma list of ecl,fcl")
    sp.add_argument("--backend", default="auto", choices=("auto", "compiled", "numpy"))
    sp.add_argument("--repeats", type=int, default=3)
    sp.add_argument("--min-seconds", type=float, default=0.1)
    sp.add_argument("--rounds", type=int, default=1,
                    help="time all configurations round-robin this many times and keep the best")
    sp.add_argument("--cache-threshold", type=int, default=None, help="bytes; default L2 size / 8")
    sp.add_argument("--output", help="CSV path (default stdout)")
    sp.set_defaults(func=cmd_bench)
    sp = sub.add_parser("verify", help="oracle self-checks")
    sp.set_defaults(func=cmd_verify)
    sp = sub.add_parser("estimate-comm", help="ghost volume per rank and its bounds")
    _add_config_args(sp)
    sp.add_argument("--d", type=int, default=6, help="dimension of the thought experiment")
    sp.add_argument("--dofs", type=float, default=1e12)
    sp.add_argument("--ranks", type=int, default=49152)
    sp.set_defaults(func=cmd_estimate_comm)
    sp = sub.add_parser("dump-config", help="print the effective configuration as YAML")
    _add_config_args(sp)
    sp.set_defaults(func=cmd_dump_config)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UsageError, ValueError, OSError) as exc:
        print(f"hyperdg {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
