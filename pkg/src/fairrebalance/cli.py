"""Command-line driver for beta sweeps.

Exit codes: 0 on success, 1 for configuration errors, 2 for runtime failures.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .city import ConfigError
from .experiment import SweepError, SweepSpec, default_betas, run_sweep

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def parse_betas(text: str) -> tuple[float, ...]:
    """``"0,0.5,1"`` or an inclusive range ``"start:stop:step"``."""
    text = text.strip()
    if not text:
        return ()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"beta range must be start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ValueError("beta step must be positive")
        n = int(round((stop - start) / step))
        return tuple(round(start + k * step, 10) for k in range(n + 1))
    return tuple(float(b) for b in text.split(",") if b.strip())


def parse_seeds(text: str) -> tuple[int, ...]:
    """A count ``"10"`` (seeds 0..9) or an explicit list ``"3,7,11"``."""
    text = text.strip()
    if "," in text:
        return tuple(int(s) for s in text.split(",") if s.strip())
    return tuple(range(int(text)))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fairrebalance", description=__doc__.splitlines()[0])
    p.add_argument("--scenario", type=int, action="append", metavar="M",
                   help="number of area categories (2-5); repeatable, default 5")
    p.add_argument("--beta", default=None, help="comma list or start:stop:step (default 0:1:0.1)")
    p.add_argument("--seeds", default="10", help="seed count or comma list (default 10)")
    p.add_argument("--train-days", type=int, default=None)
    p.add_argument("--eval-days", type=int, default=None)
    p.add_argument("--scale", type=float, default=1.0, help="multiplier on the training horizon")
    p.add_argument("--desk", action="store_true",
                   help="20 000 training days with 5x faster epsilon decay")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path, default=Path("results"))
    p.add_argument("--config", type=Path, default=None, help="scenario override file")
    p.add_argument("--rate-scale", type=float, default=1.0,
                   help="multiply all demand rates (12 reads them as hourly)")
    p.add_argument("--trace", action="store_true", help="write per-epoch evaluation traces")
    p.add_argument("--curve", type=int, default=None, metavar="WINDOW",
                   help="write learning curves averaged over WINDOW days")
    p.add_argument("--save-policies", action="store_true")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        betas = default_betas() if args.beta is None else parse_betas(args.beta)
        seeds = parse_seeds(args.seeds)
        spec = SweepSpec(
            M_values=tuple(args.scenario or (5,)),
            betas=betas,
            seeds=seeds,
            scale=args.scale,
            out_dir=args.out,
            train_days=args.train_days,
            eval_days=args.eval_days,
            desk=args.desk,
            workers=args.workers,
            config_path=args.config,
            rate_scale=args.rate_scale,
            trace=args.trace,
            curve_window=args.curve,
            save_policies=args.save_policies,
        )
        spec.validate()
        if args.config is not None and not args.config.exists():
            raise SweepError(f"config file {args.config} does not exist")
    except (ValueError, ConfigError, SweepError) as exc:
        print(f"fairrebalance: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        written = run_sweep(spec)
    except (ConfigError, SweepError) as exc:
        print(f"fairrebalance: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, RuntimeError, FloatingPointError) as exc:
        print(f"fairrebalance: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for name, path in written.items():
        print(f"{name}: {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
