"""Command-line experiment runner.

Subcommands: ``distortion``, ``timing``, ``ls``, ``cprand``,
``concentration`` (each emits a trial CSV plus a ``*.summary.csv``), and
``verify`` (runs the oracle/verification battery and sets the exit code).

Flags may also be supplied through ``--config path`` pointing at a
``key=value`` text file (same keys as the long flag names, underscores for
dashes); explicit command-line flags override file values.
"""

from __future__ import annotations

import argparse
import sys

from .bench import ExperimentConfig, emit_csv, run_experiment
from .testkit import verify_suite


def parse_shape(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(p) for p in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad shape {text!r}; expected e.g. 125x125")
    if not dims or any(n < 1 for n in dims):
        raise argparse.ArgumentTypeError(f"bad shape {text!r}; dimensions must be >= 1")
    return dims


def parse_int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad list {text!r}; expected comma-separated ints")


def parse_m_grid(text: str) -> tuple[int, ...]:
    """``start:stop:step`` (stop inclusive)."""
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}; expected start:stop:step")
    try:
        start, stop, step = (int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}; expected integers")
    if step < 1 or stop < start:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}")
    return tuple(range(start, stop + 1, step))


def read_config_file(path: str) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _add_experiment_flags(sub):
    sub.add_argument("--shape", type=parse_shape, help="e.g. 125x125")
    sub.add_argument("--degrees", type=parse_int_list, help="e.g. 1,2,3")
    sub.add_argument("--m-grid", type=parse_m_grid, help="start:stop:step (stop inclusive)")
    sub.add_argument("--m-list", type=parse_int_list, help="e.g. 64,256,1024")
    sub.add_argument("--trials", type=int)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--dist", choices=["gaussian", "uniform01"])
    sub.add_argument("--structure", choices=["kron", "generic"])
    sub.add_argument("--sampling", choices=["after", "before"])
    sub.add_argument("--replacement", choices=["with", "without"])
    sub.add_argument("--gaussian", action="store_true", default=None,
                     help="include the dense Gaussian baseline")
    sub.add_argument("--rank", type=int)
    sub.add_argument("--snr-db", type=float)
    sub.add_argument("--sweeps", type=int, help="maximum ALS sweeps")
    sub.add_argument("--fit-tol", type=float, help="fit-improvement stopping tolerance")
    sub.add_argument("--out", help="output CSV path (default <kind>.csv)")
    sub.add_argument("--config", help="key=value file supplying defaults for these flags")


_CONFIG_PARSERS = {
    "shape": parse_shape,
    "degrees": parse_int_list,
    "m_grid": parse_m_grid,
    "m_list": parse_int_list,
    "trials": int,
    "seed": int,
    "dist": str,
    "structure": str,
    "sampling": str,
    "replacement": str,
    "gaussian": lambda s: s.lower() in ("1", "true", "yes"),
    "rank": int,
    "snr_db": float,
    "sweeps": int,
    "fit_tol": float,
    "out": str,
}


def build_config(kind: str, args: argparse.Namespace) -> ExperimentConfig:
    merged: dict = {}
    if args.config:
        file_values = read_config_file(args.config)
        for key, raw in file_values.items():
            if key not in _CONFIG_PARSERS:
                raise ValueError(f"unknown config key {key!r}")
            merged[key] = _CONFIG_PARSERS[key](raw)
    for key in _CONFIG_PARSERS:
        cli_value = getattr(args, key, None)
        if cli_value is not None:
            merged[key] = cli_value

    if merged.get("shape") is None:
        raise ValueError("a shape is required (--shape or config file)")
    m_grid = merged.get("m_list") or merged.get("m_grid") or ()
    return ExperimentConfig(
        kind=kind,
        shape=merged["shape"],
        degrees=merged.get("degrees") or (1,),
        m_grid=m_grid,
        trials=merged.get("trials", 100),
        seed=merged.get("seed", 0),
        dist=merged.get("dist", "gaussian"),
        structure=merged.get("structure", "kron"),
        sampling=merged.get("sampling", "after"),
        replacement=merged.get("replacement", "with"),
        include_gaussian=merged.get("gaussian", False),
        rank=merged.get("rank", 5),
        snr_db=merged.get("snr_db", 20.0),
        max_sweeps=merged.get("sweeps", 100),
        fit_tol=merged.get("fit_tol", 1e-6),
        out=merged.get("out"),
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="kfjlt", description="Kronecker FJLT experiment runner"
    )
    subs = parser.add_subparsers(dest="command", required=True)
    for kind in ("distortion", "timing", "ls", "cprand", "concentration"):
        _add_experiment_flags(subs.add_parser(kind, help=f"run the {kind} experiment"))
    verify = subs.add_parser("verify", help="run the oracle/verification battery")
    verify.add_argument("--seed", type=int, default=0)

    args = parser.parse_args(argv)
    if args.command == "verify":
        results = verify_suite(seed=args.seed, verbose=True)
        failed = [r for r in results if not r.passed]
        print(f"{len(results) - len(failed)}/{len(results)} checks passed")
        return 1 if failed else 0

    try:
        config = build_config(args.command, args)
        records = run_experiment(config)
        out = config.out or f"{args.command}.csv"
        csv_path, summary_path = emit_csv(records, out)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {len(records)} records to {csv_path} (summary: {summary_path})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
