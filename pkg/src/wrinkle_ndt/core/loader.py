"""
Data file loader.

Reads phase maps and fringe images (CSV matrices or PHM1 binary), point clouds
(CSV ``x_mm,y_mm,z_mm``), regridded height fields (CSV plus JSON sidecar)
and measured-versus-reference series into the core data model.
"""

import csv
import json
import logging
import struct
from pathlib import Path
from typing import Optional

import numpy as np

from wrinkle_ndt.core.errors import ConfigError, DataIOError
from wrinkle_ndt.core.fpp import GridSpec, HeightGrid, IntensityImage, PointCloud
from wrinkle_ndt.core.shearography import PhaseMap

logger = logging.getLogger(__name__)

PHM_MAGIC = b"PHM1"
PHM_HEADER = struct.Struct("<4sIII")  # magic, rows, cols, reserved

POINT_CLOUD_HEADER = ("x_mm", "y_mm", "z_mm")
SERIES_HEADER = ("load", "measured", "reference")


def decode_mask_rle(encoded: dict, size: int) -> np.ndarray:
    """Inverse of the writer's run-length mask encoding (row-major)."""
    try:
        value = bool(encoded["start"])
        runs = [int(run) for run in encoded["runs"]]
    except (KeyError, TypeError, ValueError):
        raise DataIOError("malformed mask encoding in grid sidecar") from None
    if sum(runs) != size or any(run < 0 for run in runs):
        raise DataIOError(f"mask encoding covers {sum(runs)} cells, grid has {size}")
    flat = np.empty(size, dtype=bool)
    position = 0
    for run in runs:
        flat[position:position + run] = value
        position += run
        value = not value
    return flat


class DataFileLoader:
    """Loads measurement files, converting format problems into DataIOError."""

    def __init__(self, pixel_pitch: float = 1.0):
        self.pixel_pitch = pixel_pitch

    @staticmethod
    def _read_bytes(path: Path) -> bytes:
        try:
            return Path(path).read_bytes()
        except OSError as e:
            raise DataIOError(f"cannot read {path}: {e.strerror or e}") from None

    @staticmethod
    def _read_text(path: Path) -> str:
        try:
            return Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise DataIOError(f"cannot read {path}: {e.strerror or e}") from None
        except UnicodeDecodeError:
            raise DataIOError(f"{path} is not a UTF-8 text file") from None

    def _read_matrix(self, path: Path) -> np.ndarray:
        text = self._read_text(path)
        rows = [row for row in csv.reader(text.splitlines()) if row]
        if not rows:
            raise DataIOError(f"{path} is empty")
        if len({len(row) for row in rows}) != 1:
            raise DataIOError(f"{path}: rows have different lengths")
        try:
            return np.array([[float(v) if v.strip() else np.nan for v in row] for row in rows])
        except ValueError as e:
            raise DataIOError(f"{path}: non-numeric entry ({e})") from None

    def _read_phm(self, path: Path) -> np.ndarray:
        data = self._read_bytes(path)
        if len(data) < PHM_HEADER.size:
            raise DataIOError(f"{path}: file shorter than the PHM1 header")
        magic, rows, cols, _reserved = PHM_HEADER.unpack_from(data)
        if magic != PHM_MAGIC:
            raise DataIOError(f"{path}: bad magic {magic!r}, expected {PHM_MAGIC!r}")
        expected = PHM_HEADER.size + 4 * rows * cols
        if len(data) != expected:
            raise DataIOError(f"{path}: expected {expected} bytes for {rows}x{cols}, got {len(data)}")
        values = np.frombuffer(data, dtype="<f4", offset=PHM_HEADER.size)
        return values.astype(float).reshape(rows, cols)

    def load_phase_map(self, path: Path, wrapped: bool = False) -> PhaseMap:
        """
        Load a phase map; NaN entries become masked pixels.

        Args:
            path: ``.phm`` binary or CSV matrix file (radians)
            wrapped: Whether the values are wrapped into (-pi, pi]

        Returns:
            PhaseMap with this loader's pixel pitch
        """
        path = Path(path)
        if path.suffix.lower() == ".phm":
            values = self._read_phm(path)
        else:
            values = self._read_matrix(path)
        finite = np.isfinite(values)
        mask = None if finite.all() else finite
        values = np.where(finite, values, 0.0)
        try:
            phase = PhaseMap(values, pixel_pitch=self.pixel_pitch, wrapped=wrapped, mask=mask)
        except ConfigError as e:
            raise DataIOError(f"{path}: {e}") from None
        logger.debug(f"Loaded {phase.shape[0]}x{phase.shape[1]} phase map from {path}")
        return phase

    def load_intensity_image(self, path: Path) -> IntensityImage:
        """Load a fringe image stored as a CSV matrix or PHM1 file."""
        path = Path(path)
        values = self._read_phm(path) if path.suffix.lower() == ".phm" else self._read_matrix(path)
        try:
            return IntensityImage(values, pixel_pitch=self.pixel_pitch)
        except ConfigError as e:
            raise DataIOError(f"{path}: {e}") from None

    def load_point_cloud(self, path: Path) -> PointCloud:
        """Load a CSV point cloud with header ``x_mm,y_mm,z_mm``."""
        path = Path(path)
        rows = list(csv.reader(self._read_text(path).splitlines()))
        if not rows or tuple(cell.strip() for cell in rows[0]) != POINT_CLOUD_HEADER:
            raise DataIOError(f"{path}: expected header {','.join(POINT_CLOUD_HEADER)}")
        points = []
        for number, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DataIOError(f"{path}, line {number}: expected 3 columns, got {len(row)}")
            try:
                points.append([float(v) for v in row])
            except ValueError:
                raise DataIOError(f"{path}, line {number}: non-numeric coordinate") from None
        try:
            cloud = PointCloud(np.array(points, dtype=float).reshape(-1, 3))
        except ConfigError as e:
            raise DataIOError(f"{path}: {e}") from None
        logger.debug(f"Loaded {len(cloud)} points from {path}")
        return cloud

    def load_height_grid(self, path: Path, sidecar: Optional[Path] = None) -> HeightGrid:
        """Load a grid CSV and its JSON sidecar (default: same name, ``.json``)."""
        path = Path(path)
        sidecar = Path(sidecar) if sidecar else path.with_suffix(".json")
        values = self._read_matrix(path)
        try:
            meta = json.loads(self._read_text(sidecar))
            (ox, oy), (dx, dy), (ny, nx) = meta["origin"], meta["spacing"], meta["shape"]
            spec = GridSpec(float(ox), float(oy), float(dx), float(dy), int(nx), int(ny))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise DataIOError(f"{sidecar}: malformed grid sidecar ({e})") from None
        except ConfigError as e:
            raise DataIOError(f"{sidecar}: {e}") from None
        if values.shape != spec.shape:
            raise DataIOError(f"{path}: data shape {values.shape} differs from sidecar {spec.shape}")
        mask = decode_mask_rle(meta.get("mask", {"start": True, "runs": [values.size]}), values.size)
        return HeightGrid(spec, values, mask.reshape(spec.shape))

    def load_series(self, path: Path) -> tuple[list[float], list[float], list[float]]:
        """Load ``load,measured,reference`` rows."""
        path = Path(path)
        rows = list(csv.reader(self._read_text(path).splitlines()))
        if not rows or tuple(cell.strip() for cell in rows[0]) != SERIES_HEADER:
            raise DataIOError(f"{path}: expected header {','.join(SERIES_HEADER)}")
        loads, measured, reference = [], [], []
        for number, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            try:
                load, m, r = (float(v) for v in row)
            except ValueError:
                raise DataIOError(f"{path}, line {number}: expected three numbers") from None
            loads.append(load)
            measured.append(m)
            reference.append(r)
        return loads, measured, reference


def load_phase_map(path: Path, pixel_pitch: float = 1.0, wrapped: bool = False) -> PhaseMap:
    """Convenience function to load a phase map."""
    return DataFileLoader(pixel_pitch).load_phase_map(path, wrapped=wrapped)


def load_point_cloud(path: Path) -> PointCloud:
    """Convenience function to load a point cloud."""
    return DataFileLoader().load_point_cloud(path)
