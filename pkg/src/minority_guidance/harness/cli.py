"""Command line entry point: ``python -m minority_guidance <stage> --config ... --out ... --seed ...``.

Exit status is 0 on success, 2 for an invalid config and 1 when a stage fails.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import DEFAULTS, ConfigError, load_config, validate
from .pipeline import STAGES, StageError, run_stages


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="minority_guidance", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in (*STAGES, "pipeline"):
        sp = sub.add_parser(name, help="run all stages" if name == "pipeline" else f"run the {name} stage")
        sp.add_argument("--config", help="key = value config file (defaults apply to missing keys)")
        sp.add_argument("--out", help="artifact directory (overrides output.dir)")
        sp.add_argument("--seed", type=int, help="master seed (overrides seed)")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(message)s")
    try:
        cfg = load_config(args.config) if args.config else dict(DEFAULTS)
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.out is not None:
            cfg["output.dir"] = args.out
        validate(cfg)
    except (ConfigError, OSError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2
    stages = STAGES if args.command == "pipeline" else (args.command,)
    try:
        run_stages(cfg, cfg["output.dir"], stages)
    except StageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
