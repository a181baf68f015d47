"""
Relative-error tables between measured and reference displacement series.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from wrinkle_ndt.core.errors import ConfigError, ZeroDenominatorError

logger = logging.getLogger(__name__)


class Denominator(Enum):
    """Which value a relative error is taken against."""
    MEASURED = "measured"
    REFERENCE = "reference"

    @classmethod
    def parse(cls, value: "str | Denominator") -> "Denominator":
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            choices = ", ".join(d.value for d in cls)
            raise ConfigError(f"unknown denominator {value!r} (choose from {choices})") from None


@dataclass(frozen=True)
class ErrorRow:
    load: float
    measured: float
    reference: float
    error_percent: float

    @property
    def display_percent(self) -> str:
        """Error rounded to 0.1 %."""
        return f"{self.error_percent:.1f}%"


@dataclass(frozen=True)
class ErrorTable:
    """Row-wise relative errors; percentages are kept at full precision."""
    rows: tuple[ErrorRow, ...]
    denominator: Denominator
    unit: str = ""

    @property
    def errors(self) -> list[float]:
        return [row.error_percent for row in self.rows]

    @property
    def max_error(self) -> float:
        return max(self.errors, default=0.0)

    def to_dict(self) -> dict:
        return {
            "denominator": self.denominator.value,
            "unit": self.unit,
            "rows": [
                {
                    "load": row.load,
                    "measured": row.measured,
                    "reference": row.reference,
                    "error_percent": row.error_percent,
                }
                for row in self.rows
            ],
        }


def relative_error(measured: float, reference: float, denominator: Denominator) -> float:
    """|measured - reference| / |denominator value|, in percent."""
    base = measured if denominator is Denominator.MEASURED else reference
    if base == 0.0:
        raise ZeroDenominatorError(
            f"{denominator.value} value is zero (measured={measured}, reference={reference})"
        )
    return float(abs(measured - reference) / abs(base) * 100.0)


def compare_series(
    measured: Sequence[float],
    reference: Sequence[float],
    denominator: "Denominator | str" = Denominator.REFERENCE,
    loads: Sequence[float] | None = None,
    unit: str = "",
) -> ErrorTable:
    """
    Build an error table from paired measured and reference values.

    Args:
        measured: Measured series (e.g. shearography or FPP peak displacement)
        reference: Reference series (e.g. simulated displacement)
        denominator: Which value the error is relative to
        loads: Load for each row; defaults to 1..n
        unit: Unit label carried into reports

    Raises:
        ConfigError: if the series lengths differ
        ZeroDenominatorError: if a denominator value is zero
    """
    denominator = Denominator.parse(denominator)
    measured = [float(v) for v in measured]
    reference = [float(v) for v in reference]
    if len(measured) != len(reference):
        raise ConfigError(
            f"series lengths differ: {len(measured)} measured vs {len(reference)} reference"
        )
    if loads is None:
        loads = list(range(1, len(measured) + 1))
    loads = [float(v) for v in loads]
    if len(loads) != len(measured):
        raise ConfigError(f"expected {len(measured)} loads, got {len(loads)}")
    if not np.all(np.isfinite(measured + reference)):
        raise ConfigError("series contain non-finite values")

    rows = tuple(
        ErrorRow(load, m, r, relative_error(m, r, denominator))
        for load, m, r in zip(loads, measured, reference)
    )
    logger.debug(f"Compared {len(rows)} rows against the {denominator.value} value")
    return ErrorTable(rows, denominator, unit)


@dataclass(frozen=True)
class ComparisonDataset:
    """A published measured-versus-reference series."""
    name: str
    description: str
    unit: str
    loads: tuple[float, ...]
    measured: tuple[float, ...]
    reference: tuple[float, ...]
    denominator: Denominator

    def table(self, denominator: "Denominator | str | None" = None) -> ErrorTable:
        return compare_series(
            self.measured,
            self.reference,
            denominator or self.denominator,
            loads=self.loads,
            unit=self.unit,
        )


# Peak displacement of specimen I, optical measurement versus simulation
BUILTIN_DATASETS: dict[str, ComparisonDataset] = {
    "shearography-specimen-I": ComparisonDataset(
        name="shearography-specimen-I",
        description="Shearography peak displacement vs simulation, loads in N",
        unit="nm",
        loads=(2.0, 3.0, 6.0, 8.0, 10.0),
        measured=(-375.0, -542.0, -1006.0, -1317.0, -1631.0),
        reference=(-350.0, -524.0, -1048.0, -1398.0, -1748.0),
        denominator=Denominator.MEASURED,
    ),
    "fpp-specimen-I": ComparisonDataset(
        name="fpp-specimen-I",
        description="Fringe projection peak displacement vs simulation, loads in N",
        unit="mm",
        loads=(200.0, 400.0, 600.0, 800.0, 1000.0),
        measured=(-0.0646, -0.1142, -0.169, -0.2011, -0.280),
        reference=(-0.0596, -0.1191, -0.1788, -0.2384, -0.298),
        denominator=Denominator.REFERENCE,
    ),
}


def get_dataset(name: str) -> ComparisonDataset:
    try:
        return BUILTIN_DATASETS[name]
    except KeyError:
        known = ", ".join(sorted(BUILTIN_DATASETS))
        raise ConfigError(f"unknown comparison dataset {name!r} (known: {known})") from None
