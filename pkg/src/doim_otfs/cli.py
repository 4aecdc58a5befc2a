"""Command line entry point: ``doim-otfs {ber,converge,csi,paths}``."""

import argparse
import logging
import sys

from . import harness
from .config import parse_config, parse_grid
from .errors import ConfigError

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3


def _overrides(args) -> dict:
    out = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    if args.seed is not None:
        out["seed"] = args.seed
    if args.snr is not None:
        out["snr_db"] = args.snr
    if getattr(args, "mode", None):
        out["mode"] = args.mode
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="doim-otfs", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    helps = {
        "ber": "BER versus SNR (DoIM-OTFS or plain OTFS)",
        "converge": "per-iteration BER and convergence statistics",
        "csi": "BER under imperfect CSI for each eps",
        "paths": "BER for each number of propagation paths",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", required=True, help="output CSV path (JSON sidecar alongside)")
        p.add_argument("--snr", help="SNR grid in dB, start:step:stop or comma list")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "ber":
            p.add_argument("--mode", choices=["doim", "plain-otfs"])
        if name == "converge":
            p.add_argument("--trace", action="store_true",
                           help="also write per-frame iteration traces (.trace.tsv)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        cfg = parse_config(args.config, _overrides(args))
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"cannot read config: {e}", file=sys.stderr)
        return EXIT_IO

    try:
        if args.command == "ber":
            harness.emit_results(harness.run_ber_sweep(cfg, args.workers), args.out, cfg)
        elif args.command == "csi":
            harness.emit_results(harness.run_csi_sweep(cfg, workers=args.workers), args.out, cfg)
        elif args.command == "paths":
            harness.emit_results(harness.run_paths_sweep(cfg, workers=args.workers), args.out, cfg)
        else:
            rows = [] if args.trace else None
            stats = harness.run_convergence_stats(cfg, workers=args.workers, trace=rows)
            harness.emit_convergence(stats, args.out, cfg)
            if rows is not None:
                harness.emit_trace(rows, args.out.rsplit(".", 1)[0] + ".trace.tsv")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
