"""Command line: ``bladelattice <stage> --config cfg.yaml --out dir``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure. The summary
goes to stdout as ``key=value`` lines.
"""

from __future__ import annotations

import argparse
import os
import sys

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3
STAGES = ("tile", "lattice", "analyze", "optimize", "inspect", "export")
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bladelattice", description="Graded lattice design pipeline.")
    parser.add_argument("stage", choices=STAGES)
    parser.add_argument("--config", required=True, help="YAML or JSON project config")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--threads", type=int, default=None, help="BLAS/OpenMP thread limit")
    parser.add_argument("--seed", type=int, default=0, help="seed for sampling")
    parser.add_argument("--bins", type=int, default=None, help="histogram bins (inspect)")
    parser.add_argument("--band", default=None, help="tolerance band, e.g. 40um (inspect)")
    return parser


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.17g}"
    if isinstance(v, (list, tuple)):
        return ",".join(format_value(x) for x in v)
    return str(v)


def format_summary(summary: dict) -> str:
    return "".join(f"{k}={format_value(v)}\n" for k, v in summary.items())


def parse_summary(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        key, sep, value = line.partition("=")
        if sep:
            out[key.strip()] = value.strip()
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be >= 1", file=sys.stderr)
            return EXIT_INVALID
        # only effective before numpy loads its BLAS
        for var in _THREAD_VARS:
            os.environ[var] = str(args.threads)

    from .beams import ConvergenceError, SingularModelError
    from .config import ConfigError, load_config
    from .optimize import EvaluationError
    from .pipeline import run_pipeline
    from .splines import ApproximationError, DegeneracyError, DomainError

    numerical = (SingularModelError, ConvergenceError, EvaluationError, ApproximationError, DegeneracyError, DomainError)
    try:
        cfg = load_config(args.config)
        if args.bins is not None or args.band is not None:
            from .inspection import parse_length

            if args.bins is not None:
                cfg.inspection["bins"] = args.bins
            if args.band is not None:
                cfg.inspection["band"] = parse_length(args.band)
        summary = run_pipeline(cfg, args.stage, args.out, seed=args.seed, threads=args.threads)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except numerical as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    sys.stdout.write(format_summary({"stage": args.stage, **summary}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
