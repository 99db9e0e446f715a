"""``python -m qeh <subcommand> --config cfg.toml [--seed S] [--out DIR] [--workers N]``."""

import argparse
import sys

from .errors import ConfigError, ExperimentError
from .harness import SEED_MAX, SUBCOMMANDS, load_config, run


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v <= SEED_MAX:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="python -m qeh", description="ergodic-hierarchy experiments")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True, help="TOML experiment file")
    ap.add_argument("--seed", type=_seed, default=None, help="overrides the config seed")
    ap.add_argument("--out", default=None, help="output directory (report.txt, series/)")
    ap.add_argument("--workers", type=int, default=None, help="parallel jobs for sweep")
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config, subcommand=args.subcommand, seed=args.seed, out=args.out, workers=args.workers)
        rep = run(cfg)
    except (ConfigError, ExperimentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for label, v in rep.verdicts.items():
        flags = " ".join(f"{lv['name']}={'pass' if lv['passed'] else 'fail'}" for lv in v["levels"])
        print(f"{label}: {flags}")
    if cfg.out:
        print(f"wrote {cfg.out}/report.txt")
    return 0


if __name__ == "__main__":
    sys.exit(main())
