"""Command line: fuse two images, run a scenario, sweep an axis, write a feed."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import kernels
from .config import PRESETS, ConfigError, parse_config
from .energy import EnergyError
from .feed import FeedError, generate_feed
from .fusion import ADDITIVE, WAVELET, FusionError, FusionProfile, fuse_pair
from .imagecore import ImageError, load_pgm, save_pgm, save_raw
from .netsim import NetworkError
from .scenario import MetricError, fmt, run_scenario, sweep, write_outputs, write_sweep
from .wavelet import SUPPORTED_BASES, WaveletError

EXPECTED = (ConfigError, EnergyError, FeedError, FusionError, ImageError, WaveletError, NetworkError,
            MetricError, OSError)


def _config(args):
    base = PRESETS[args.preset]
    if args.config:
        return parse_config(Path(args.config).read_text(encoding="utf-8"), base)
    return base


def _seeds(text: str) -> list:
    """'7', '0-9' or '1,4,9'."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise ConfigError(f"no seeds in {text!r}")
    return out


def cmd_fuse(args) -> int:
    a, b = load_pgm(args.a), load_pgm(args.b)
    profile = FusionProfile(args.resolution, args.basis, args.levels, args.bits, args.window,
                            args.rho, args.mode)
    fused = fuse_pair(a, b, profile)
    if fused.bit_depth in (8, 16):
        save_pgm(fused, args.out)
    else:
        save_raw(fused, args.out)
    print(f"fused {args.a} + {args.b} -> {args.out} ({fused.width}x{fused.height}, "
          f"{fused.bit_depth}-bit, {args.basis} K={args.levels}, backend={kernels.backend()})")
    return 0


def cmd_run(args) -> int:
    cfg = _config(args)
    result = run_scenario(cfg, args.seed)
    out = write_outputs(result, args.out)
    m = result.metrics
    print(f"seed={result.seed} dispatches={m.dispatches} dropping_rate={fmt(m.dropping_rate)} "
          f"throughput={fmt(m.throughput)} fusion_time_ms={fmt(m.fusion_time_ms)} -> {out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("--values is empty")
    seeds = _seeds(args.seeds) if args.seeds else None
    table = sweep(cfg, args.axis, values, seeds, workers=args.workers)
    path = write_sweep(table, args.out)
    print(f"sweep {args.axis} over {len(values)} values x {len(table.seeds)} seeds -> {path}")
    return 0


def cmd_gen_feed(args) -> int:
    cfg = _config(args)
    root = generate_feed(cfg, args.out, args.seed)
    print(f"feed for {cfg.num} nodes, {cfg.days} day(s) -> {root}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ctxfuse", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fuse", help="wavelet-fuse two PGM images")
    f.add_argument("a")
    f.add_argument("b")
    f.add_argument("-o", "--out", required=True)
    f.add_argument("--basis", default="haar", choices=SUPPORTED_BASES)
    f.add_argument("--levels", type=int, default=1)
    f.add_argument("--bits", type=int, default=8)
    f.add_argument("--window", type=int, default=3)
    f.add_argument("--rho", type=float, default=1.0)
    f.add_argument("--mode", default=WAVELET, choices=(WAVELET, ADDITIVE))
    f.add_argument("--resolution", default="low", choices=("low", "high"))
    f.set_defaults(func=cmd_fuse)

    def scenario_args(q):
        q.add_argument("--config", help="key = value file applied over the preset")
        q.add_argument("--preset", default="paper-default", choices=sorted(PRESETS))
        q.add_argument("--seed", type=int, default=None)
        q.add_argument("--out", required=True)

    r = sub.add_parser("run", help="run one scenario and write CSV/trace outputs")
    scenario_args(r)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="vary one config field and tabulate the metrics")
    scenario_args(s)
    s.add_argument("--axis", required=True)
    s.add_argument("--values", required=True, help="comma-separated axis values")
    s.add_argument("--seeds", help="seed list for medians, e.g. 0-9 or 1,2,5")
    s.add_argument("--workers", type=int, default=None)
    s.set_defaults(func=cmd_sweep)

    g = sub.add_parser("gen-feed", help="write the synthetic image feed as PGM files")
    scenario_args(g)
    g.set_defaults(func=cmd_gen_feed)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EXPECTED as exc:
        print(f"ctxfuse: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
