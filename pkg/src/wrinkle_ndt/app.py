"""
Command implementations.

Each run_* function takes validated inputs, performs one command and returns
plain data (report dicts, CSV text or result objects); the CLI in
``__main__`` only parses arguments and moves bytes.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

from wrinkle_ndt import __version__
from wrinkle_ndt.core.comparison import Denominator, ErrorTable, compare_series, get_dataset
from wrinkle_ndt.core.config import FringeConfig, RunConfig, SweepRange
from wrinkle_ndt.core.errors import ConfigError
from wrinkle_ndt.core.fpp import GridSpec, HeightGrid, displacement_extract, reconstruct_height
from wrinkle_ndt.core.geometry import STUDY_RATIOS, WrinkleDescriptor, max_misalignment
from wrinkle_ndt.core.homogenization import check_convergence, homogenize_wrinkle
from wrinkle_ndt.core.laminate import (
    EngineeringConstants,
    effective_engineering_constants,
)
from wrinkle_ndt.core.loader import DataFileLoader
from wrinkle_ndt.core.shearography import DisplacementField, ShearConfig, recover_displacement
from wrinkle_ndt.core.writer import ReportWriter
from wrinkle_ndt.utils.log_handler import capture_warnings

logger = logging.getLogger(__name__)

MODULI = ("E11", "E22", "E33", "G23", "G31", "G12")
RATIOS = ("nu21", "nu32", "nu31")

TABLE2_HEADER = ("ratio", "phi_max_deg")

SWEEP_HEADER = (
    "ratio",
    "A_mm",
    "phi_max_deg",
    "E_x_GPa",
    "E_y_GPa",
    "E_z_GPa",
    "G_yz_GPa",
    "G_zx_GPa",
    "G_xy_GPa",
    "nu_yx",
    "nu_zy",
    "nu_zx",
)

COMPARE_HEADER = ("load", "measured", "reference", "error_percent", "error_display")

DEFAULT_SWEEP = SweepRange(STUDY_RATIOS[0], STUDY_RATIOS[-1], 0.05)


def _constants_dict(ec: EngineeringConstants) -> dict[str, float]:
    return {key: getattr(ec, key) for key in MODULI + RATIOS}


# === stiffness ===

def stiffness_report(cfg: RunConfig) -> dict:
    """
    Effective stiffness of the configured RVE with baseline and convergence data.

    The baseline is the same layup with A = 0; degradation ratios are
    wrinkled over baseline moduli.
    """
    result = homogenize_wrinkle(cfg.layup, cfg.wrinkle, cfg.discretization, workers=cfg.workers)
    convergence = check_convergence(
        cfg.layup,
        cfg.wrinkle,
        cfg.discretization,
        tolerance=cfg.tolerance,
        workers=cfg.workers,
        coarse_result=result,
    )

    if cfg.wrinkle.is_flat:
        baseline = result
    else:
        flat = WrinkleDescriptor(0.0, cfg.wrinkle.wavelength, cfg.wrinkle.h)
        baseline = homogenize_wrinkle(cfg.layup, flat, cfg.discretization, workers=cfg.workers)

    constants = effective_engineering_constants(result, cfg.material.constants.convention)
    baseline_constants = effective_engineering_constants(baseline, cfg.material.constants.convention)
    degradation = {
        key: getattr(constants, key) / getattr(baseline_constants, key) for key in MODULI
    }

    report = {"version": __version__}
    report.update(cfg.summary())
    report.update({
        "effective_stiffness_GPa": result.to_list(),
        "effective_constants": _constants_dict(constants),
        "baseline_stiffness_GPa": baseline.to_list(),
        "baseline_constants": _constants_dict(baseline_constants),
        "degradation": degradation,
        "no_degradation": cfg.wrinkle.is_flat,
        "convergence": convergence.to_dict(),
    })
    return report


def run_stiffness(cfg: RunConfig) -> dict:
    """Stiffness report with the warnings raised while computing it."""
    with capture_warnings() as warnings:
        report = stiffness_report(cfg)
    report["warnings"] = list(warnings)
    logger.info(
        f"{cfg.name}: E_x = {report['effective_constants']['E11']:.6g} GPa "
        f"({report['degradation']['E11']:.4f} of baseline)"
    )
    return report


# === table2 ===

def table2_rows(ratios: tuple[float, ...] = STUDY_RATIOS) -> list[tuple[float, float]]:
    """(A/lambda, phi_max) pairs, phi_max rounded to 0.01 degrees."""
    return [(ratio, round(max_misalignment(ratio), 2)) for ratio in ratios]


def run_table2(writer: Optional[ReportWriter] = None) -> str:
    writer = writer or ReportWriter()
    return writer.render_csv(TABLE2_HEADER, table2_rows())


# === sweep ===

def _sweep_point(cfg: RunConfig, ratio: float) -> tuple:
    wrinkle = WrinkleDescriptor(ratio * cfg.wrinkle.wavelength, cfg.wrinkle.wavelength, cfg.wrinkle.h)
    result = homogenize_wrinkle(cfg.layup, wrinkle, cfg.discretization)
    ec = effective_engineering_constants(result, cfg.material.constants.convention)
    return (
        ratio,
        wrinkle.A,
        max_misalignment(ratio),
        *(getattr(ec, key) for key in MODULI + RATIOS),
    )


def sweep_rows(cfg: RunConfig, sweep: Optional[SweepRange] = None) -> list[tuple]:
    """
    Effective constants over a range of A/lambda at the configured wavelength.

    Points run in parallel when cfg.workers > 1; rows always follow the
    range order.
    """
    sweep = sweep or cfg.sweep or DEFAULT_SWEEP
    ratios = sweep.values()
    if not ratios:
        logger.warning(f"Empty sweep range {sweep.start:g}..{sweep.stop:g}")
        return []
    logger.info(f"Sweeping {len(ratios)} ratios for {cfg.layup!r}")
    if cfg.workers and cfg.workers > 1 and len(ratios) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as executor:
            return list(executor.map(lambda r: _sweep_point(cfg, r), ratios))
    return [_sweep_point(cfg, ratio) for ratio in ratios]


def run_sweep(
    cfg: RunConfig,
    sweep: Optional[SweepRange] = None,
    writer: Optional[ReportWriter] = None,
) -> str:
    writer = writer or ReportWriter()
    return writer.render_csv(SWEEP_HEADER, sweep_rows(cfg, sweep))


# === optics ===

def run_shear_integrate(
    phase_path: Path,
    shear: ShearConfig,
    pixel_pitch: float = 1.0,
    wrapped: bool = False,
) -> DisplacementField:
    """Phase file to out-of-plane displacement (nm)."""
    phase = DataFileLoader(pixel_pitch).load_phase_map(phase_path, wrapped=wrapped)
    return recover_displacement(phase, shear)


def run_fpp_height(
    image_paths: list[Path],
    reference_paths: list[Path],
    fringe: FringeConfig,
    pixel_pitch: float = 1.0,
) -> HeightGrid:
    """Three object and three reference fringe images to a height map (mm)."""
    if len(image_paths) != 3 or len(reference_paths) != 3:
        raise ConfigError("three-step phase extraction needs three object and three reference images")
    loader = DataFileLoader(pixel_pitch)
    images = tuple(loader.load_intensity_image(path) for path in image_paths)
    reference = tuple(loader.load_intensity_image(path) for path in reference_paths)
    grid = reconstruct_height(images, reference, fringe.k_cal, fringe.fringe_axis, fringe.min_modulation)
    logger.info(f"Height map: {int(grid.mask.sum())} of {grid.mask.size} pixels supported")
    return grid


def run_fpp_extract(before_path: Path, after_path: Path, grid: GridSpec) -> HeightGrid:
    """Two point-cloud files to the displacement field on grid (mm)."""
    loader = DataFileLoader()
    before = loader.load_point_cloud(before_path)
    after = loader.load_point_cloud(after_path)
    return displacement_extract(before, after, grid)


# === compare ===

def run_compare(
    dataset: Optional[str] = None,
    series_path: Optional[Path] = None,
    denominator: "Denominator | str | None" = None,
) -> ErrorTable:
    """
    Error table for a built-in dataset or a ``load,measured,reference`` CSV.

    Built-in datasets default to the convention their published errors use;
    files default to the reference value.
    """
    if series_path is not None:
        loads, measured, reference = DataFileLoader().load_series(series_path)
        return compare_series(measured, reference, denominator or Denominator.REFERENCE, loads=loads)
    data = get_dataset(dataset or "fpp-specimen-I")
    return data.table(denominator)


def compare_rows(table: ErrorTable) -> list[tuple]:
    return [
        (row.load, row.measured, row.reference, row.error_percent, row.display_percent)
        for row in table.rows
    ]

