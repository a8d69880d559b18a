"""Command-line sweep runner.

    simulate --preset 18x4x2 --sweep p_max_dbm --values 58,60,62 --drops 50 \
             --out results/

Exit codes: 0 success, 2 configuration error, 3 when every drop of some
sweep point was infeasible.  SIM_WORKERS overrides --workers.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import ConfigError, ScenarioConfig
from .harness import SweepSpec, run_drop, run_sweep, write_channel_csv, \
    write_gnuplot_script, write_power_csv


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simulate",
        description="Monte Carlo sweeps for the sectorized-array NOMA simulator")
    parser.add_argument("--config", help="scenario config file (key = value lines)")
    parser.add_argument("--preset", help="scenario preset, e.g. 18x4x2")
    parser.add_argument("--sweep", required=True, help="parameter to sweep")
    parser.add_argument("--values", required=True,
                        help="comma-separated sweep values")
    parser.add_argument("--drops", type=int, required=True,
                        help="Monte Carlo drops per sweep value")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--workers", type=int, default=None,
                        help="parallel worker processes (default 1 or SIM_WORKERS)")
    parser.add_argument("--seed", type=int, default=None,
                        help="master seed (overrides the config's)")
    parser.add_argument("--dump-detail", action="store_true",
                        help="also write per-user power and channel CSVs "
                             "for the first drop of each sweep value")
    parser.add_argument("--gnuplot", action="store_true",
                        help="emit a gnuplot script next to sweep.csv")
    return parser


def load_config(args) -> ScenarioConfig:
    if args.preset and args.config:
        base = ScenarioConfig.preset(args.preset)
        from .config import parse_config_file
        return base.replace(**parse_config_file(args.config))
    if args.preset:
        return ScenarioConfig.preset(args.preset)
    if args.config:
        return ScenarioConfig.from_file(args.config)
    raise ConfigError("need --config and/or --preset")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args)
        if args.seed is not None:
            config = config.replace(seed=args.seed)
        values = [v.strip() for v in args.values.split(",") if v.strip()]
        if args.sweep in ("p_max_dbm", "r_qos", "antenna_spacing"):
            values = [float(v) for v in values]
        spec = SweepSpec(config, args.sweep, values, args.drops)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    os.makedirs(args.out, exist_ok=True)
    result = run_sweep(spec, out_dir=args.out, workers=args.workers)

    if args.dump_detail:
        from .harness import apply_sweep_value, drop_seed_for
        detail = []
        channel_rows = []
        cfg0 = None
        for i, value in enumerate(spec.values):
            cfg0 = apply_sweep_value(config, args.sweep, value)
            res = run_drop(cfg0, drop_seed_for(config.seed, i, 0), 0,
                           collect_detail=True, collect_channels=True)
            detail.append((i, res))
            channel_rows.extend(res.channel_rows)
            res.plan.write_csv(os.path.join(args.out, f"clusters_point{i}.csv"))
        write_power_csv(detail, os.path.join(args.out, "power.csv"))
        write_channel_csv(channel_rows, cfg0.elements_per_sector,
                          cfg0.user_antennas, os.path.join(args.out, "channels.csv"))
    if args.gnuplot:
        write_gnuplot_script(args.out)

    print(f"wrote {os.path.join(args.out, 'sweep.csv')}")
    if result.any_point_all_infeasible():
        print("at least one sweep point had no feasible drop", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
