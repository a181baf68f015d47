"""
Report and data file writer.

Machine-readable outputs are deterministic: floats are written with their
shortest round-trip representation and JSON keys keep insertion order, so
the same run produces byte-identical files.
"""

import csv
import io
import json
import logging
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from wrinkle_ndt.core.errors import DataIOError
from wrinkle_ndt.core.fpp import HeightGrid
from wrinkle_ndt.core.loader import PHM_HEADER, PHM_MAGIC, POINT_CLOUD_HEADER
from wrinkle_ndt.core.shearography import PhaseMap

logger = logging.getLogger(__name__)


def format_value(value: Any) -> str:
    """CSV cell text; floats use repr so they read back exactly, NaN is empty."""
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return "" if np.isnan(value) else repr(value)
    return str(value)


def encode_mask_rle(mask: np.ndarray) -> dict:
    """Run lengths of a boolean mask, row-major, starting with the first cell's value."""
    flat = np.asarray(mask, dtype=bool).ravel()
    if flat.size == 0:
        return {"start": True, "runs": []}
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    return {"start": bool(flat[0]), "runs": [int(v) for v in np.diff(bounds)]}


class ReportWriter:
    """
    Writes reports and data files.

    Args:
        float_precision: If set, CSV floats are rounded to this many
            significant digits instead of round-trip precision
    """

    def __init__(self, float_precision: Optional[int] = None):
        self._float_precision = float_precision

    def _cell(self, value: Any) -> str:
        if self._float_precision and isinstance(value, (float, np.floating)) and np.isfinite(value):
            return f"{float(value):.{self._float_precision}g}"
        return format_value(value)

    @staticmethod
    def _write(path: Path, content: str | bytes) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            if isinstance(content, bytes):
                path.write_bytes(content)
            else:
                path.write_text(content, encoding="utf-8", newline="")
        except OSError as e:
            raise DataIOError(f"cannot write {path}: {e.strerror or e}") from None
        logger.debug(f"Wrote {path}")
        return path

    def write_text(self, path: Path, text: str) -> Path:
        return self._write(path, text)

    def render_csv(self, header: Optional[Sequence[str]], rows: Iterable[Sequence[Any]]) -> str:
        buffer = io.StringIO()
        out = csv.writer(buffer, lineterminator="\n")
        if header:
            out.writerow(header)
        for row in rows:
            out.writerow([self._cell(v) for v in row])
        return buffer.getvalue()

    def write_csv(self, path: Path, header: Optional[Sequence[str]], rows: Iterable[Sequence[Any]]) -> Path:
        return self._write(path, self.render_csv(header, rows))

    @staticmethod
    def render_json(report: dict) -> str:
        return json.dumps(report, indent=2, allow_nan=False) + "\n"

    def write_json(self, path: Path, report: dict) -> Path:
        return self._write(path, self.render_json(report))

    def write_matrix(self, path: Path, values: np.ndarray) -> Path:
        """2D array as headerless CSV; NaN cells are left empty."""
        return self.write_csv(path, None, np.asarray(values, dtype=float).tolist())

    def write_phase_map(self, path: Path, phase: PhaseMap) -> Path:
        """PHM1 binary for ``.phm`` paths, CSV otherwise; masked pixels become NaN."""
        values = np.array(phase.values, dtype=float)
        if phase.mask is not None:
            values[~phase.mask] = np.nan
        path = Path(path)
        if path.suffix.lower() != ".phm":
            return self.write_matrix(path, values)
        rows, cols = values.shape
        header = PHM_HEADER.pack(PHM_MAGIC, rows, cols, 0)
        return self._write(path, header + values.astype("<f4").tobytes())

    def write_height_grid(self, path: Path, grid: HeightGrid) -> tuple[Path, Path]:
        """Grid values as CSV and geometry plus mask as a JSON sidecar next to it."""
        path = Path(path)
        sidecar = path.with_suffix(".json")
        meta = grid.spec.to_dict()
        meta["mask"] = encode_mask_rle(grid.mask)
        meta["supported_cells"] = int(np.count_nonzero(grid.mask))
        return self.write_matrix(path, grid.values), self.write_json(sidecar, meta)

    def write_point_cloud(self, path: Path, points: np.ndarray) -> Path:
        return self.write_csv(path, POINT_CLOUD_HEADER, np.asarray(points, dtype=float).tolist())


def write_report(path: Path, report: dict) -> Path:
    """Convenience function to write a JSON report."""
    return ReportWriter().write_json(path, report)
