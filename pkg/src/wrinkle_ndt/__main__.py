"""
Entry point for wrinkle-ndt.

Usage:
    wrinkle-ndt stiffness --preset specimen-I               # effective stiffness report (JSON)
    wrinkle-ndt table2                                      # max misalignment vs A/lambda (CSV)
    wrinkle-ndt sweep --config run.json --workers 4         # A/lambda sweep (CSV)
    wrinkle-ndt shear-integrate phase.phm --delta-y 5 --wrapped -o w.csv
    wrinkle-ndt fpp-extract before.csv after.csv --grid 0 0 0.1 0.1 100 100 -o dz.csv
    wrinkle-ndt fpp-height i1.csv i2.csv i3.csv --reference r1.csv r2.csv r3.csv --k-cal 0.04
    wrinkle-ndt compare --dataset shearography-specimen-I --denominator measured

Exit codes: 0 ok, 1 internal error, 2 configuration error, 3 numerical error, 4 file error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional

from wrinkle_ndt import __version__
from wrinkle_ndt.core.comparison import BUILTIN_DATASETS, Denominator
from wrinkle_ndt.core.config import PRESETS, FringeConfig, RunConfig, SweepRange, load_config, load_preset
from wrinkle_ndt.core.errors import ConfigError, WrinkleNDTError
from wrinkle_ndt.core.fpp import GridSpec, HeightGrid
from wrinkle_ndt.core.shearography import HE_NE_WAVELENGTH_NM, ShearConfig

logger = logging.getLogger(__name__)

INTERNAL_EXIT_CODE = 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config", "-c",
        type=Path,
        help="JSON run configuration",
    )
    common.add_argument(
        "--preset", "-p",
        choices=sorted(PRESETS),
        help="Built-in run configuration",
    )
    common.add_argument(
        "--out", "-o",
        type=Path,
        help="Output file (default: stdout)",
    )
    common.add_argument(
        "--strips",
        type=int,
        help="Strips per wavelength (overrides the config)",
    )
    common.add_argument(
        "--zpoints",
        type=int,
        help="Gauss points per ply (overrides the config)",
    )
    common.add_argument(
        "--workers", "-j",
        type=int,
        help="Worker threads",
    )
    common.add_argument(
        "--debug",
        action="store_true",
        help="Log debug detail to stderr",
    )

    parser = argparse.ArgumentParser(
        prog="wrinkle-ndt",
        description="Effective stiffness of wrinkled laminates and optical displacement processing",
    )
    parser.add_argument(
        "--version", "-v",
        action="version",
        version=f"%(prog)s {__version__}",
    )
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    commands.add_parser(
        "stiffness",
        parents=[common],
        help="Effective stiffness report of a wrinkled RVE",
    )

    commands.add_parser(
        "table2",
        parents=[common],
        help="Maximum misalignment angle for the study's A/lambda ratios",
    )

    sweep = commands.add_parser(
        "sweep",
        parents=[common],
        help="Effective constants over a range of A/lambda",
    )
    sweep.add_argument("--start", type=float, help="First A/lambda")
    sweep.add_argument("--stop", type=float, help="Last A/lambda (inclusive)")
    sweep.add_argument("--step", type=float, help="A/lambda increment")

    shear = commands.add_parser(
        "shear-integrate",
        parents=[common],
        help="Shearography phase map to out-of-plane displacement",
    )
    shear.add_argument("phase", type=Path, help="Phase map (.phm or CSV, radians)")
    shear.add_argument("--delta-y", type=float, help="Shear amount (mm)")
    shear.add_argument("--lambda-l", type=float, help="Laser wavelength (nm)")
    shear.add_argument("--pixel-pitch", type=float, help="Pixel pitch (mm)")
    shear.add_argument(
        "--reference",
        nargs=2,
        type=int,
        metavar=("ROW", "COL"),
        help="Zero-displacement pixel",
    )
    shear.add_argument("--wrapped", action="store_true", help="Input phase is wrapped")

    fpp = commands.add_parser(
        "fpp-extract",
        parents=[common],
        help="Out-of-plane displacement between two point clouds",
    )
    fpp.add_argument("before", type=Path, help="Point cloud before loading (CSV)")
    fpp.add_argument("after", type=Path, help="Point cloud after loading (CSV)")
    fpp.add_argument(
        "--grid",
        nargs=6,
        type=float,
        metavar=("X0", "Y0", "DX", "DY", "NX", "NY"),
        help="Common X-Y grid",
    )

    height = commands.add_parser(
        "fpp-height",
        parents=[common],
        help="Height map from three-step fringe images",
    )
    height.add_argument("images", type=Path, nargs=3, help="Object fringe images (CSV or .phm)")
    height.add_argument(
        "--reference",
        type=Path,
        nargs=3,
        required=True,
        metavar="IMAGE",
        help="Reference-plane fringe images",
    )
    height.add_argument("--k-cal", type=float, help="Phase-to-height factor (mm/rad)")
    height.add_argument("--fringe-axis", type=int, choices=(0, 1), help="Axis across the fringes")
    height.add_argument("--min-modulation", type=float, help="Pixels below this amplitude are masked")
    height.add_argument("--pixel-pitch", type=float, help="Pixel pitch (mm)")

    compare = commands.add_parser(
        "compare",
        parents=[common],
        help="Relative error table of measured vs reference series",
    )
    source = compare.add_mutually_exclusive_group()
    source.add_argument("--dataset", choices=sorted(BUILTIN_DATASETS), help="Built-in series")
    source.add_argument("--series", type=Path, help="CSV with load,measured,reference")
    compare.add_argument(
        "--denominator",
        choices=[d.value for d in Denominator],
        help="Value the error is relative to",
    )

    return parser


def resolve_config(args: argparse.Namespace, required: bool = True) -> Optional[RunConfig]:
    """Config from --config or --preset with command-line overrides applied."""
    if args.config and args.preset:
        raise ConfigError("use either --config or --preset, not both")
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = load_preset(args.preset)
    elif required:
        raise ConfigError("one of --config or --preset is required")
    else:
        return None
    return cfg.with_overrides(
        n_strips=args.strips,
        n_z_points=args.zpoints,
        denominator=getattr(args, "denominator", None),
        workers=args.workers,
    )


def output_path(args: argparse.Namespace, cfg: Optional[RunConfig], suffix: str) -> Optional[Path]:
    """
    Where a command writes its result; None means stdout.

    A config output directory holds relative --out paths and, without --out,
    a file named after the run and the command.
    """
    directory = cfg.output.directory if cfg else None
    if args.out is not None:
        if directory is not None and not args.out.is_absolute():
            return directory / args.out
        return args.out
    if directory is not None:
        return directory / f"{cfg.name}-{args.command}{suffix}"
    return None


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    from wrinkle_ndt.core.writer import ReportWriter

    ReportWriter().write_text(out, text)
    logger.info(f"Wrote {out}")


def _cmd_stiffness(args: argparse.Namespace) -> int:
    from wrinkle_ndt.app import run_stiffness
    from wrinkle_ndt.core.writer import ReportWriter

    cfg = resolve_config(args)
    report = run_stiffness(cfg)
    _emit(ReportWriter.render_json(report), output_path(args, cfg, ".json"))
    return 0


def _cmd_table2(args: argparse.Namespace) -> int:
    from wrinkle_ndt.app import run_table2

    _emit(run_table2(), output_path(args, resolve_config(args, required=False), ".csv"))
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    from wrinkle_ndt.app import DEFAULT_SWEEP, run_sweep

    cfg = resolve_config(args)
    base = cfg.sweep or DEFAULT_SWEEP
    sweep = SweepRange(
        args.start if args.start is not None else base.start,
        args.stop if args.stop is not None else base.stop,
        args.step if args.step is not None else base.step,
    )
    _emit(run_sweep(cfg, sweep), output_path(args, cfg, ".csv"))
    return 0


def _cmd_shear(args: argparse.Namespace) -> int:
    from wrinkle_ndt.app import run_shear_integrate
    from wrinkle_ndt.core.writer import ReportWriter

    cfg = resolve_config(args, required=False)
    base = cfg.shear if cfg else None
    delta_y = args.delta_y if args.delta_y is not None else (base.delta_y if base else None)
    if delta_y is None:
        raise ConfigError("shear amount missing: pass --delta-y or a shearography config section")
    reference = base.reference_point if base else (0, 0)
    shear = ShearConfig(
        delta_y=delta_y,
        lambda_L=args.lambda_l or (base.lambda_L if base else HE_NE_WAVELENGTH_NM),
        reference_point=tuple(args.reference) if args.reference else reference,
    )
    pitch = args.pixel_pitch or (cfg.pixel_pitch if cfg else 1.0)
    field = run_shear_integrate(args.phase, shear, pixel_pitch=pitch, wrapped=args.wrapped)
    if field.residues:
        logger.warning(f"{field.residues} phase residues in {args.phase}")
    _emit(ReportWriter().render_csv(None, field.values.tolist()), output_path(args, cfg, ".csv"))
    return 0


def _write_grid(result: HeightGrid, out: Optional[Path]) -> None:
    from wrinkle_ndt.core.writer import ReportWriter

    writer = ReportWriter()
    if out:
        writer.write_height_grid(out, result)
        logger.info(f"Wrote {out} and its sidecar")
    else:
        sys.stdout.write(writer.render_csv(None, result.values.tolist()))


def _cmd_fpp(args: argparse.Namespace) -> int:
    from wrinkle_ndt.app import run_fpp_extract

    cfg = resolve_config(args, required=False)
    if args.grid:
        x0, y0, dx, dy, nx, ny = args.grid
        if not (float(nx).is_integer() and float(ny).is_integer()):
            raise ConfigError("grid node counts NX and NY must be integers")
        grid = GridSpec(x0, y0, dx, dy, int(nx), int(ny))
    elif cfg and cfg.grid:
        grid = cfg.grid
    else:
        raise ConfigError("grid missing: pass --grid or a grid config section")
    result = run_fpp_extract(args.before, args.after, grid)
    _write_grid(result, output_path(args, cfg, ".csv"))
    return 0


def _cmd_fpp_height(args: argparse.Namespace) -> int:
    from wrinkle_ndt.app import run_fpp_height

    cfg = resolve_config(args, required=False)
    base = cfg.fringe if cfg else None
    k_cal = args.k_cal if args.k_cal is not None else (base.k_cal if base else None)
    if k_cal is None:
        raise ConfigError("calibration missing: pass --k-cal or an fpp config section")
    fringe = FringeConfig(
        k_cal=k_cal,
        fringe_axis=args.fringe_axis if args.fringe_axis is not None else (base.fringe_axis if base else 1),
        min_modulation=(
            args.min_modulation if args.min_modulation is not None
            else (base.min_modulation if base else 1e-6)
        ),
    )
    pitch = args.pixel_pitch or (cfg.pixel_pitch if cfg else 1.0)
    result = run_fpp_height(args.images, args.reference, fringe, pixel_pitch=pitch)
    _write_grid(result, output_path(args, cfg, ".csv"))
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    from wrinkle_ndt.app import COMPARE_HEADER, compare_rows, run_compare
    from wrinkle_ndt.core.writer import ReportWriter

    cfg = resolve_config(args, required=False)
    denominator = cfg.output.denominator if cfg else args.denominator
    table = run_compare(dataset=args.dataset, series_path=args.series, denominator=denominator)
    _emit(ReportWriter().render_csv(COMPARE_HEADER, compare_rows(table)), output_path(args, cfg, ".csv"))
    return 0


COMMANDS = {
    "stiffness": _cmd_stiffness,
    "table2": _cmd_table2,
    "sweep": _cmd_sweep,
    "shear-integrate": _cmd_shear,
    "fpp-extract": _cmd_fpp,
    "fpp-height": _cmd_fpp_height,
    "compare": _cmd_compare,
}


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    from wrinkle_ndt.utils.log_handler import setup_logging

    setup_logging(level=logging.DEBUG if args.debug else logging.INFO, enable_console=True)
    logger.debug(f"CLI command: {args.command}")

    try:
        return COMMANDS[args.command](args)
    except WrinkleNDTError as e:
        print(f"error[{e.code}]: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.exception(f"Unexpected failure in {args.command}")
        print(f"error[internal]: {type(e).__name__}: {e}", file=sys.stderr)
        return INTERNAL_EXIT_CODE


if __name__ == "__main__":
    sys.exit(main())
