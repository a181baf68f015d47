"""
Run configuration.

A run is described by one JSON document, validated into frozen dataclasses
before any computation starts. Every schema violation names the JSON path of
the offending value and the line it sits on.

Example:
    {
      "name": "specimen-I",
      "material": "carbon-epoxy-table4",
      "layup": "[0/90]_2s",
      "wrinkle": {"A": 1.2, "lambda": 6.6},
      "discretization": {"n_strips": 256, "n_z_points": 4}
    }
"""

import json
import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

import numpy as np

from wrinkle_ndt.core.comparison import Denominator
from wrinkle_ndt.core.errors import ConfigError, DataIOError
from wrinkle_ndt.core.fpp import GridSpec
from wrinkle_ndt.core.geometry import WrinkleDescriptor
from wrinkle_ndt.core.homogenization import Discretization
from wrinkle_ndt.core.laminate import (
    EngineeringConstants,
    Layup,
    PoissonConvention,
    Ply,
    get_material,
)
from wrinkle_ndt.core.shearography import ShearConfig
from wrinkle_ndt.utils.naming import format_layup, parse_layup

logger = logging.getLogger(__name__)

DEFAULT_PLY_THICKNESS = 0.25  # mm

DEFAULT_MATERIAL = "carbon-epoxy-table4"


@dataclass(frozen=True)
class MaterialConfig:
    """Material by built-in name or inline constants."""
    constants: EngineeringConstants
    name: Optional[str] = None

    def to_dict(self) -> dict:
        data = {"name": self.name} if self.name else {}
        data["constants"] = self.constants.to_dict()
        return data


@dataclass(frozen=True)
class FringeConfig:
    """Phase-to-height calibration and phase extraction settings."""
    k_cal: float
    fringe_axis: int = 1
    min_modulation: float = 1e-6

    def __post_init__(self):
        if not np.isfinite(self.k_cal) or self.k_cal == 0.0:
            raise ConfigError("k_cal must be finite and non-zero")
        if self.fringe_axis not in (0, 1):
            raise ConfigError(f"fringe_axis must be 0 or 1, got {self.fringe_axis}")
        if self.min_modulation < 0.0:
            raise ConfigError("min_modulation must be >= 0")


@dataclass(frozen=True)
class SweepRange:
    """Inclusive range of severity ratios A/lambda at fixed wavelength."""
    start: float
    stop: float
    step: float

    def __post_init__(self):
        if not all(np.isfinite(v) for v in (self.start, self.stop, self.step)):
            raise ConfigError("sweep range values must be finite")
        if self.step <= 0.0:
            raise ConfigError(f"sweep step must be > 0, got {self.step}")
        if self.start < 0.0:
            raise ConfigError(f"sweep start must be >= 0, got {self.start}")

    def values(self) -> list[float]:
        """Grid points start, start + step, ... up to stop; empty when stop < start."""
        if self.stop < self.start:
            return []
        count = int(np.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [round(self.start + i * self.step, 12) for i in range(count)]


@dataclass(frozen=True)
class OutputConfig:
    """Where outputs go and which value relative errors divide by (None: the command default)."""
    directory: Optional[Path] = None
    denominator: Optional[Denominator] = None


@dataclass(frozen=True)
class RunConfig:
    """Everything a command needs, validated."""
    name: str
    material: MaterialConfig
    layup: Layup
    wrinkle: WrinkleDescriptor
    discretization: Discretization = field(default_factory=Discretization)
    tolerance: float = 1e-3
    workers: Optional[int] = None
    shear: Optional[ShearConfig] = None
    pixel_pitch: float = 1.0
    fringe: Optional[FringeConfig] = None
    grid: Optional[GridSpec] = None
    sweep: Optional[SweepRange] = None
    output: OutputConfig = field(default_factory=OutputConfig)

    def with_overrides(
        self,
        n_strips: Optional[int] = None,
        n_z_points: Optional[int] = None,
        denominator: Optional[str] = None,
        workers: Optional[int] = None,
    ) -> "RunConfig":
        """Apply command-line overrides."""
        disc = Discretization(
            n_strips if n_strips is not None else self.discretization.n_strips,
            n_z_points if n_z_points is not None else self.discretization.n_z_points,
        )
        output = OutputConfig(
            directory=self.output.directory,
            denominator=(
                Denominator.parse(denominator) if denominator else self.output.denominator
            ),
        )
        return replace(
            self,
            discretization=disc,
            output=output,
            workers=workers if workers is not None else self.workers,
        )

    def summary(self) -> dict:
        return {
            "name": self.name,
            "material": self.material.to_dict(),
            "layup": self.layup.notation or format_layup(self.layup.angles),
            "ply_count": self.layup.ply_count,
            "wrinkle": self.wrinkle.to_dict(),
            "discretization": self.discretization.to_dict(),
        }


# === Source-line lookup ===

_TOKEN = re.compile(r'"(?:[^"\\]|\\.)*"|[{}\[\]:,]|[^\s{}\[\]:,"]+')


def key_lines(text: str) -> dict[str, int]:
    """
    Map the JSON path of every object key to its 1-based source line.

    Paths look like ``wrinkle.A`` or ``layup[2].theta``.
    """
    lines: dict[str, int] = {}
    # Each frame: [kind, path, pending key or array index]
    stack: list[list] = []
    pending_string: Optional[tuple[str, int]] = None
    path = ""

    for match in _TOKEN.finditer(text):
        token = match.group()
        line = text.count("\n", 0, match.start()) + 1
        if token == ":" and pending_string is not None and stack and stack[-1][0] == "obj":
            key, key_line = pending_string
            key_path = f"{stack[-1][1]}.{key}" if stack[-1][1] else key
            lines.setdefault(key_path, key_line)
            stack[-1][2] = key_path
            pending_string = None
            continue
        pending_string = None
        if token.startswith('"'):
            try:
                pending_string = (json.loads(token), line)
            except json.JSONDecodeError:
                pending_string = None
        elif token in "{[":
            if not stack:
                path = ""
            elif stack[-1][0] == "obj":
                path = stack[-1][2] or ""
            else:
                path = f"{stack[-1][1]}[{stack[-1][2]}]"
            stack.append(["obj" if token == "{" else "arr", path, 0 if token == "[" else None])
        elif token in "}]":
            if stack:
                stack.pop()
        elif token == "," and stack and stack[-1][0] == "arr":
            stack[-1][2] += 1
    return lines


class _Section:
    """A JSON object being consumed key by key; leftovers are schema errors."""

    def __init__(self, data: Any, path: str, lines: dict[str, int]):
        self.path = path
        self.lines = lines
        if not isinstance(data, dict):
            raise self.error(f"expected an object, got {type(data).__name__}", path)
        self.data = dict(data)

    def child_path(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def error(self, message: str, path: Optional[str] = None) -> ConfigError:
        path = path if path is not None else self.path
        return ConfigError(message, path=path or "$", line=self.lines.get(path))

    def has(self, key: str) -> bool:
        return key in self.data

    def raw(self, key: str, default: Any = None) -> Any:
        return self.data.pop(key, default)

    def number(self, key: str, default: Any = ..., integer: bool = False):
        if key not in self.data:
            if default is ...:
                raise self.error(f"missing required key {key!r}")
            return default
        value = self.data.pop(key)
        valid = isinstance(value, (int, float)) and not isinstance(value, bool)
        if integer:
            valid = valid and float(value).is_integer()
        if not valid:
            kind = "an integer" if integer else "a number"
            raise self.error(f"expected {kind}, got {value!r}", self.child_path(key))
        return int(value) if integer else float(value)

    def string(self, key: str, default: Any = ...) -> Optional[str]:
        if key not in self.data:
            if default is ...:
                raise self.error(f"missing required key {key!r}")
            return default
        value = self.data.pop(key)
        if not isinstance(value, str):
            raise self.error(f"expected a string, got {value!r}", self.child_path(key))
        return value

    def section(self, key: str) -> Optional["_Section"]:
        if key not in self.data:
            return None
        return _Section(self.data.pop(key), self.child_path(key), self.lines)

    def pair(self, key: str, default: Any = ..., integer: bool = False) -> tuple:
        if key not in self.data:
            if default is ...:
                raise self.error(f"missing required key {key!r}")
            return default
        value = self.data.pop(key)
        path = self.child_path(key)
        if not isinstance(value, list) or len(value) != 2:
            raise self.error(f"expected a two-element list, got {value!r}", path)
        for item in value:
            if isinstance(item, bool) or not isinstance(item, (int, float)):
                raise self.error(f"expected numbers, got {value!r}", path)
            if integer and not float(item).is_integer():
                raise self.error(f"expected integers, got {value!r}", path)
        return tuple(int(v) for v in value) if integer else tuple(float(v) for v in value)

    def finish(self) -> None:
        if self.data:
            key = sorted(self.data)[0]
            raise self.error(f"unknown key {key!r}", self.child_path(key))

    def build(self, factory, *args, **kwargs):
        """Construct a domain object, re-raising its validation error at this path."""
        try:
            return factory(*args, **kwargs)
        except ConfigError as e:
            raise type(e)(str(e), path=self.path or "$", line=self.lines.get(self.path)) from None


# === Section parsers ===

_CONSTANT_KEYS = ("E11", "E22", "E33", "G23", "G31", "G12", "nu21", "nu32", "nu31")


def _parse_material(root: _Section) -> MaterialConfig:
    if not root.has("material"):
        return MaterialConfig(get_material(DEFAULT_MATERIAL), DEFAULT_MATERIAL)
    value = root.data["material"]
    if isinstance(value, str):
        root.raw("material")
        try:
            return MaterialConfig(get_material(value), value)
        except ConfigError as e:
            raise type(e)(str(e), path="material", line=root.lines.get("material")) from None

    section = root.section("material")
    values = {key: section.number(key) for key in _CONSTANT_KEYS}
    convention = section.string("convention", PoissonConvention.LOAD_SECOND.value)
    name = section.string("name", None)
    section.finish()
    try:
        convention = PoissonConvention(convention)
    except ValueError:
        raise section.error(
            f"unknown Poisson convention {convention!r}", section.child_path("convention")
        ) from None
    constants = section.build(EngineeringConstants, **values, convention=convention)
    return MaterialConfig(constants, name)


def _parse_layup(root: _Section, material: EngineeringConstants) -> Layup:
    if not root.has("layup"):
        raise root.error("missing required key 'layup'")
    value = root.data["layup"]
    path = root.child_path("layup")

    if isinstance(value, str):
        root.raw("layup")
        try:
            angles = parse_layup(value)
        except ConfigError as e:
            raise ConfigError(str(e), path=path, line=root.lines.get(path)) from None
        plies = tuple(Ply(theta, DEFAULT_PLY_THICKNESS, material) for theta in angles)
        return Layup(plies, notation=value)

    if isinstance(value, list):
        root.raw("layup")
        plies = []
        for index, item in enumerate(value):
            ply = _Section(item, f"{path}[{index}]", root.lines)
            theta = ply.number("theta")
            thickness = ply.number("thickness", DEFAULT_PLY_THICKNESS)
            ply.finish()
            plies.append(ply.build(Ply, theta, thickness, material))
        if not plies:
            raise root.error("layup needs at least one ply", path)
        return Layup(tuple(plies))

    section = root.section("layup")
    notation = section.string("notation")
    thickness = section.number("ply_thickness", DEFAULT_PLY_THICKNESS)
    section.finish()
    angles = section.build(parse_layup, notation)
    plies = tuple(section.build(Ply, theta, thickness, material) for theta in angles)
    return Layup(plies, notation=notation)


def _parse_wrinkle(root: _Section, layup: Layup) -> WrinkleDescriptor:
    section = root.section("wrinkle")
    if section is None:
        raise root.error("missing required key 'wrinkle'")
    amplitude = section.number("A", 0.0)
    wavelength = section.number("lambda")
    height = section.number("h", layup.height)
    section.finish()
    if abs(height - layup.height) > 1e-9 * layup.height:
        raise section.error(
            f"h={height:g} mm does not match the layup height {layup.height:g} mm",
            section.child_path("h"),
        )
    return section.build(WrinkleDescriptor, amplitude, wavelength, height)


def _parse_discretization(root: _Section) -> tuple[Discretization, float]:
    section = root.section("discretization")
    if section is None:
        return Discretization(), 1e-3
    n_strips = section.number("n_strips", 256, integer=True)
    n_z_points = section.number("n_z_points", 4, integer=True)
    tolerance = section.number("tolerance", 1e-3)
    section.finish()
    if tolerance <= 0.0:
        raise section.error("tolerance must be > 0", section.child_path("tolerance"))
    return section.build(Discretization, n_strips, n_z_points), tolerance


def _parse_shear(root: _Section) -> tuple[Optional[ShearConfig], float]:
    section = root.section("shearography")
    if section is None:
        return None, 1.0
    delta_y = section.number("delta_y")
    lambda_l = section.number("lambda_L", 632.8)
    reference = section.pair("reference_point", (0, 0), integer=True)
    pitch = section.number("pixel_pitch", 1.0)
    section.finish()
    if pitch <= 0.0:
        raise section.error("pixel_pitch must be > 0", section.child_path("pixel_pitch"))
    return section.build(ShearConfig, delta_y, lambda_l, reference), pitch


def _parse_fringe(root: _Section) -> Optional[FringeConfig]:
    section = root.section("fpp")
    if section is None:
        return None
    k_cal = section.number("k_cal")
    axis = section.number("fringe_axis", 1, integer=True)
    threshold = section.number("min_modulation", 1e-6)
    section.finish()
    return section.build(FringeConfig, k_cal, axis, threshold)


def _parse_grid(root: _Section) -> Optional[GridSpec]:
    section = root.section("grid")
    if section is None:
        return None
    origin = section.pair("origin", (0.0, 0.0))
    spacing = section.pair("spacing")
    ny, nx = section.pair("shape", integer=True)
    section.finish()
    return section.build(GridSpec, origin[0], origin[1], spacing[0], spacing[1], nx, ny)


def _parse_sweep(root: _Section) -> Optional[SweepRange]:
    section = root.section("sweep")
    if section is None:
        return None
    start = section.number("start")
    stop = section.number("stop")
    step = section.number("step")
    section.finish()
    return section.build(SweepRange, start, stop, step)


def _parse_output(root: _Section) -> OutputConfig:
    section = root.section("output")
    if section is None:
        return OutputConfig()
    directory = section.string("directory", None)
    denominator = section.string("denominator", None)
    section.finish()
    return OutputConfig(
        directory=Path(directory) if directory else None,
        denominator=section.build(Denominator.parse, denominator) if denominator else None,
    )


def parse_config(data: Any, lines: Optional[dict[str, int]] = None, source: str = "") -> RunConfig:
    """
    Validate a decoded JSON document into a RunConfig.

    Args:
        data: Decoded JSON
        lines: Key path to source line, from key_lines()
        source: Name used when the document has no "name" key

    Raises:
        ConfigError: on any schema violation
    """
    root = _Section(data, "", lines or {})
    name = root.string("name", source or "run")
    material = _parse_material(root)
    layup = _parse_layup(root, material.constants)
    wrinkle = _parse_wrinkle(root, layup)
    discretization, tolerance = _parse_discretization(root)
    workers = root.number("workers", None, integer=True)
    if workers is not None and workers < 1:
        raise root.error("workers must be >= 1", "workers")
    shear, pixel_pitch = _parse_shear(root)
    fringe = _parse_fringe(root)
    grid = _parse_grid(root)
    sweep = _parse_sweep(root)
    output = _parse_output(root)
    root.finish()

    config = RunConfig(
        name=name,
        material=material,
        layup=layup,
        wrinkle=wrinkle,
        discretization=discretization,
        tolerance=tolerance,
        workers=workers,
        shear=shear,
        pixel_pitch=pixel_pitch,
        fringe=fringe,
        grid=grid,
        sweep=sweep,
        output=output,
    )
    logger.debug(f"Parsed run config {name!r}: {layup!r}, A/lambda={wrinkle.ratio:.4g}")
    return config


def loads_config(text: str, source: str = "") -> RunConfig:
    """Parse a JSON config string."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e.msg}", path=source or None, line=e.lineno) from None
    return parse_config(data, key_lines(text), source)


def load_config(path: Path) -> RunConfig:
    """Read and validate a JSON config file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise DataIOError(f"cannot read config {path}: {e.strerror or e}") from None
    return loads_config(text, source=path.stem)


# === Presets ===

def _study(layup: str, wavelength: float, amplitude: float) -> dict:
    return {"layup": layup, "wrinkle": {"A": amplitude, "lambda": wavelength}}


PRESETS: dict[str, dict] = {
    # Test specimens
    "specimen-I": {
        "layup": "[0/90]_2s",
        "wrinkle": {"A": 1.2, "lambda": 6.6},
        "sweep": {"start": 0.10, "stop": 0.50, "step": 0.05},
    },
    "specimen-II": {
        "layup": "[0]_30",
        "wrinkle": {"A": 1.0, "lambda": 8.3},
        "sweep": {"start": 0.10, "stop": 0.50, "step": 0.05},
    },
    # Laminate configurations of the design study
    "xply8-a050": _study("[0/90]_2s", 5.0, 0.5),
    "xply8-a075": _study("[0/90]_2s", 5.0, 0.75),
    "xply16-a050": _study("[0/90]_4s", 5.0, 0.5),
    "xply16-a100": _study("[0/90]_4s", 5.0, 1.0),
    "quasi30-a100": _study("[0/90/±45/0]_3s", 5.0, 1.0),
    "quasi30-a175": _study("[0/90/±45/0]_3s", 5.0, 1.75),
    "quasi30-a250": _study("[0/90/±45/0]_3s", 5.0, 2.5),
}


def load_preset(name: str) -> RunConfig:
    try:
        data = PRESETS[name]
    except KeyError:
        known = ", ".join(sorted(PRESETS))
        raise ConfigError(f"unknown preset {name!r} (known: {known})") from None
    return parse_config(dict(data), source=name)
