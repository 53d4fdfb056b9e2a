"""Command line interface.

Exit codes: 0 success, 2 configuration error, 3 protocol/alignment
error, 4 numeric/domain error. The output directory of artifact-writing
subcommands can be overridden with the MCSPI_OUTPUT_DIR environment
variable.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io as mio
from ._version import __version__
from .config import ExperimentConfig
from .errors import (
    CapacityError,
    ConfigError,
    EmptyAccumulatorError,
    NoObjectError,
    ProtocolError,
)
from .metrics import minmax_normalize, mse, psnr
from .patterns import PatternBank, cake_cut_sort, hadamard_basis
from .presets import PRESET_NAMES, run_preset, run_simulation
from .reconstruction import mcspi_run
from .tracking import ReferencePoint, track_run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcspi",
        description="Motion-compensated single-pixel imaging toolkit",
    )
    parser.add_argument("--version", action="version", version=f"mcspi {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-patterns", help="generate the ordered Hadamard basis")
    p.add_argument("--size", type=int, required=True, help="pattern side length")
    p.add_argument("--order", choices=("cake-cut", "natural"), default="cake-cut")
    p.add_argument("--cache", type=Path, help="write a SPIPAT v1 cache file")

    p = sub.add_parser("simulate", help="acquire a bucket stream from a config")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--format", choices=("csv", "bin"), default="csv")

    p = sub.add_parser("track", help="recover per-set position fixes")
    p.add_argument("--stream", type=Path, required=True)
    p.add_argument("--plan", type=Path, required=True)
    p.add_argument("--reference", help="x0,y0 reference point (default field center)")
    p.add_argument("--truth", type=Path, help="truth.csv for the error summary")
    p.add_argument("--out", type=Path, help="output directory (default: stream's)")

    p = sub.add_parser("reconstruct", help="motion-compensated reconstruction")
    p.add_argument("--stream", type=Path, required=True)
    p.add_argument("--plan", type=Path, required=True)
    p.add_argument("--fixes", type=Path, help="track.csv (required unless --no-comp)")
    p.add_argument("--no-comp", action="store_true", help="skip motion compensation")
    p.add_argument("--snapshots", help="comma-separated tau checkpoints")
    p.add_argument("--out", type=Path, help="output directory (default: stream's)")

    p = sub.add_parser("metrics", help="MSE/PSNR between two image files")
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--ref", type=Path, required=True)
    p.add_argument("--peakval", type=float, default=1.0)

    p = sub.add_parser("run", help="run a named experiment preset")
    p.add_argument("--preset", choices=PRESET_NAMES, required=True)
    p.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config field (dotted paths reach nested keys)",
    )
    p.add_argument("--out", type=Path, help="output directory")
    return parser


def _cmd_gen_patterns(args) -> int:
    basis = hadamard_basis(args.size)
    if args.order == "cake-cut":
        basis = cake_cut_sort(basis)
    if args.cache:
        mio.write_pattern_cache(args.cache, basis, args.order)
        print(f"wrote {len(basis)} patterns to {args.cache}")
    else:
        counts = [p.block_count for p in basis]
        print(
            json.dumps(
                {
                    "size": args.size,
                    "count": len(basis),
                    "order": args.order,
                    "block_count_first": counts[0],
                    "block_count_last": counts[-1],
                }
            )
        )
    return 0


def _cmd_simulate(args) -> int:
    config = ExperimentConfig.load(args.config)
    result = run_simulation(config, args.out, args.format)
    print(json.dumps(result))
    return 0


def _parse_reference(text: str) -> ReferencePoint:
    try:
        x0, y0 = (float(v) for v in text.split(","))
    except ValueError as e:
        raise ConfigError(f"--reference must be x0,y0 numbers, got {text!r}") from e
    return ReferencePoint(x0, y0)


def _cmd_track(args) -> int:
    records = mio.read_bucket_stream(args.stream)
    plan = mio.read_plan(args.plan)
    reference = _parse_reference(args.reference) if args.reference else None
    truth = None
    if args.truth:
        import csv

        with open(args.truth, newline="") as fh:
            rows = sorted(csv.DictReader(fh), key=lambda r: int(r["set"]))
        truth = np.array([[float(r["rx"]), float(r["ry"])] for r in rows])
    fixes, summary = track_run(records, plan, reference, truth)
    out = args.out or args.stream.parent
    out.mkdir(parents=True, exist_ok=True)
    mio.write_track_csv(out / "track.csv", fixes)
    mio.write_json(out / "track_summary.json", summary)
    print(json.dumps(summary))
    return 0


def _cmd_reconstruct(args) -> int:
    records = mio.read_bucket_stream(args.stream)
    plan = mio.read_plan(args.plan)
    mode = "uncompensated" if args.no_comp else "compensated"
    fixes = None
    if mode == "compensated":
        if not args.fixes:
            raise ConfigError("--fixes is required unless --no-comp is given")
        fixes = mio.read_track_csv(args.fixes)
    taus = [int(t) for t in args.snapshots.split(",")] if args.snapshots else []
    bank = PatternBank(plan.side)
    image, snapshots = mcspi_run(records, plan, fixes, mode, taus, bank)
    out = args.out or args.stream.parent
    out.mkdir(parents=True, exist_ok=True)
    stem = out / f"recon_{mode}"
    mio.write_image_raw(stem.with_suffix(".img"), image)
    mio.write_pgm16(stem.with_suffix(".pgm"), image)
    for tau, img in snapshots:
        snap = out / f"recon_{mode}_tau{tau:08d}"
        mio.write_image_raw(snap.with_suffix(".img"), img)
        mio.write_pgm16(snap.with_suffix(".pgm"), img)
    print(json.dumps({"image": str(stem.with_suffix(".img")), "snapshots": len(snapshots)}))
    return 0


def _cmd_metrics(args) -> int:
    image = minmax_normalize(mio.load_image(args.image))
    ref = minmax_normalize(mio.load_image(args.ref))
    err = mse(image, ref)
    print(json.dumps({"mse": err, "psnr": psnr(image, ref, args.peakval)}))
    return 0


def _cmd_run(args) -> int:
    overrides = {}
    for item in args.overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, _, value = item.partition("=")
        overrides[key] = value
    report = run_preset(args.preset, overrides, args.out)
    print(json.dumps(report))
    return 0


_COMMANDS = {
    "gen-patterns": _cmd_gen_patterns,
    "simulate": _cmd_simulate,
    "track": _cmd_track,
    "reconstruct": _cmd_reconstruct,
    "metrics": _cmd_metrics,
    "run": _cmd_run,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"mcspi: config error: {e}", file=sys.stderr)
        return 2
    except ProtocolError as e:
        print(f"mcspi: protocol error: {e}", file=sys.stderr)
        return 3
    except (ValueError, NoObjectError, CapacityError, EmptyAccumulatorError) as e:
        print(f"mcspi: error: {e}", file=sys.stderr)
        return 4
    except OSError as e:
        print(f"mcspi: config error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
