"""Domain model: bar, spring and layout specs, the mechanism config, and
config-file I/O.

Everything is stored in SI base units. Unit conversion happens only in
:func:`config_from_dict` / :func:`config_to_dict`, whose keys carry units.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

MM = 1e-3
GPA = 1e9
N_PER_MM = 1e3

# angle at which the solid-length guard is checked
GUARD_ANGLE = math.radians(20.0)


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


@dataclass(frozen=True)
class ConfigIssue:
    """One violated invariant, e.g. ``ConfigIssue("layout.layer_separation", "...")``."""

    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.field} {self.message}"


class ConfigError(ValueError):
    """Raised by :func:`validate_config` with every violated invariant."""

    def __init__(self, issues: list[ConfigIssue]):
        self.issues = list(issues)
        super().__init__("; ".join(str(i) for i in self.issues))


class SpringMode(str, Enum):
    OFFSET = "offset"
    THRESHOLD = "threshold"


class ForceTerm(str, Enum):
    """How the bar base moment evaluates its force term.

    ``printed`` integrates up to the force angle against the layer angle and
    scales by ``sqrt(sin theta_0)``; ``consistent`` uses the force
    sub-problem's own tip angle in both places (exact elastica base moment).
    """

    PRINTED = "printed"
    CONSISTENT = "consistent"


def _positive(issues: list[ConfigIssue], name: str, value: float) -> None:
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        issues.append(ConfigIssue(name, "must be positive"))


def second_moment_of_area(diameter: float) -> float:
    """Second moment of area of a solid circular section, pi d^4 / 64."""
    if not diameter > 0.0:
        raise DomainError(f"diameter must be positive, got {diameter!r}")
    return math.pi * diameter**4 / 64.0


@dataclass(frozen=True)
class BarSpec:
    diameter: float
    bendable_length: float
    elastic_modulus: float

    def __post_init__(self) -> None:
        issues: list[ConfigIssue] = []
        _positive(issues, "bar.diameter", self.diameter)
        _positive(issues, "bar.bendable_length", self.bendable_length)
        _positive(issues, "bar.elastic_modulus", self.elastic_modulus)
        if issues:
            raise ConfigError(issues)

    @property
    def second_moment(self) -> float:
        return second_moment_of_area(self.diameter)

    @property
    def rigidity(self) -> float:
        return flexural_rigidity(self)


def flexural_rigidity(bar: BarSpec) -> float:
    """EI of one bar [N m^2]."""
    if not bar.elastic_modulus > 0.0:
        raise DomainError(f"elastic_modulus must be positive, got {bar.elastic_modulus!r}")
    return bar.elastic_modulus * second_moment_of_area(bar.diameter)


@dataclass(frozen=True)
class SpringSpec:
    stiffness: float
    free_length: float
    max_compression: float


@dataclass(frozen=True)
class LayerLayout:
    bars_per_layer: tuple[int, ...] = (2, 3, 2)
    layer_separation: float = 5 * MM

    @property
    def layer_count(self) -> int:
        return len(self.bars_per_layer)

    @property
    def total_bars(self) -> int:
        return sum(self.bars_per_layer)


@dataclass(frozen=True)
class MechanismConfig:
    bar: BarSpec
    spring: SpringSpec
    layout: LayerLayout = field(default_factory=LayerLayout)
    preload: float = 0.0
    spring_mode: SpringMode = SpringMode.OFFSET
    lever_arm: float = 120 * MM
    eccentricity: float = 0.0
    force_term: ForceTerm = ForceTerm.PRINTED

    @property
    def rigidity(self) -> float:
        return flexural_rigidity(self.bar)

    def with_values(self, **changes: float) -> "MechanismConfig":
        """Copy with flat parameter overrides.

        Accepted keys: ``E``, ``K``, ``Sep``, ``ecc``, ``diameter``,
        ``preload``, ``lever_arm``, all in SI units.
        """
        bar, spring, layout = self.bar, self.spring, self.layout
        top: dict[str, Any] = {}
        for key, value in changes.items():
            if key == "E":
                bar = replace(bar, elastic_modulus=value)
            elif key == "diameter":
                bar = replace(bar, diameter=value)
            elif key == "K":
                spring = replace(spring, stiffness=value)
            elif key == "Sep":
                layout = replace(layout, layer_separation=value)
            elif key == "ecc":
                top["eccentricity"] = value
            elif key in ("preload", "lever_arm"):
                top[key] = value
            else:
                raise KeyError(f"unknown parameter {key!r}")
        return replace(self, bar=bar, spring=spring, layout=layout, **top)


@dataclass(frozen=True)
class LoadState:
    bending_angle: float
    head_force: float = 0.0
    tip_moment: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.bending_angle < math.pi / 2:
            raise DomainError(f"bending_angle must lie in [0, pi/2), got {self.bending_angle!r}")


def config_issues(config: MechanismConfig) -> list[ConfigIssue]:
    """Every violated invariant of ``config``; empty when valid."""
    issues: list[ConfigIssue] = []
    bar, spring, layout = config.bar, config.spring, config.layout
    _positive(issues, "bar.diameter", bar.diameter)
    _positive(issues, "bar.bendable_length", bar.bendable_length)
    _positive(issues, "bar.elastic_modulus", bar.elastic_modulus)

    # K = 0 is allowed: it is the spring-free reference mechanism
    if not (math.isfinite(spring.stiffness) and spring.stiffness >= 0):
        issues.append(ConfigIssue("spring.stiffness", "must be non-negative"))
    _positive(issues, "spring.free_length", spring.free_length)
    if not 0 < spring.max_compression < spring.free_length:
        issues.append(
            ConfigIssue("spring.max_compression", "must lie strictly between 0 and free_length")
        )

    if len(layout.bars_per_layer) < 1:
        issues.append(ConfigIssue("layout.bars_per_layer", "must have at least one layer"))
    if any(int(n) != n or n < 1 for n in layout.bars_per_layer):
        issues.append(ConfigIssue("layout.bars_per_layer", "entries must be integers >= 1"))
    _positive(issues, "layout.layer_separation", layout.layer_separation)

    if not (math.isfinite(config.preload) and config.preload >= 0):
        issues.append(ConfigIssue("preload", "must be non-negative"))
    _positive(issues, "lever_arm", config.lever_arm)
    if not (math.isfinite(config.eccentricity) and config.eccentricity >= 0):
        issues.append(ConfigIssue("eccentricity", "must be non-negative"))
    try:
        SpringMode(config.spring_mode)
    except ValueError:
        issues.append(ConfigIssue("spring_mode", "must be 'offset' or 'threshold'"))
    try:
        ForceTerm(config.force_term)
    except ValueError:
        issues.append(ConfigIssue("model.force_term", "must be 'printed' or 'consistent'"))

    sep = layout.layer_separation
    if not any(i.field in ("layout.layer_separation", "preload") for i in issues):
        worst = (layout.layer_count - 1) * sep * GUARD_ANGLE
        if config.preload + worst > spring.max_compression:
            issues.append(
                ConfigIssue(
                    "spring.solid_length",
                    f"preload + compression at 20 deg ({(config.preload + worst) / MM:.3f} mm)"
                    f" exceeds max_compression ({spring.max_compression / MM:.3f} mm)",
                )
            )
    if not any(i.field.startswith("bar.") for i in issues):
        if (layout.layer_count - 1) * sep * GUARD_ANGLE >= bar.bendable_length:
            issues.append(ConfigIssue("layout.layer_separation", "too large for the bar length"))
    return issues


def validate_config(config: MechanismConfig) -> MechanismConfig:
    """Return ``config`` unchanged, or raise :class:`ConfigError` listing all violations."""
    issues = config_issues(config)
    if issues:
        raise ConfigError(issues)
    return config


# --- config files -----------------------------------------------------------


def config_from_dict(doc: dict[str, Any]) -> MechanismConfig:
    """Build a config from the unit-suffixed document layout (mm, GPa, N/mm)."""
    try:
        b, s, lay = doc["bar"], doc["spring"], doc["layout"]
        pre = doc.get("preload", {})
        geo = doc.get("geometry", {})
        model = doc.get("model", {})
        bar = BarSpec(
            diameter=float(b["diameter_mm"]) * MM,
            bendable_length=float(b["bendable_length_mm"]) * MM,
            elastic_modulus=float(b["elastic_modulus_gpa"]) * GPA,
        )
        spring = SpringSpec(
            stiffness=float(s["stiffness_n_per_mm"]) * N_PER_MM,
            free_length=float(s["free_length_mm"]) * MM,
            max_compression=float(s["max_compression_mm"]) * MM,
        )
        layout = LayerLayout(
            bars_per_layer=tuple(int(n) for n in lay["bars_per_layer"]),
            layer_separation=float(lay["layer_separation_mm"]) * MM,
        )
        return MechanismConfig(
            bar=bar,
            spring=spring,
            layout=layout,
            preload=float(pre.get("preload_mm", 0.0)) * MM,
            spring_mode=SpringMode(s.get("mode", "offset")),
            lever_arm=float(geo.get("lever_arm_mm", 120.0)) * MM,
            eccentricity=float(geo.get("eccentricity_mm", 0.0)) * MM,
            force_term=ForceTerm(model.get("force_term", "printed")),
        )
    except ConfigError:
        raise
    except KeyError as exc:
        raise ConfigError([ConfigIssue(str(exc.args[0]), "is missing")]) from None
    except (TypeError, ValueError) as exc:
        raise ConfigError([ConfigIssue("document", f"has an invalid value: {exc}")]) from None


def config_to_dict(config: MechanismConfig) -> dict[str, Any]:
    return {
        "bar": {
            "diameter_mm": config.bar.diameter / MM,
            "bendable_length_mm": config.bar.bendable_length / MM,
            "elastic_modulus_gpa": config.bar.elastic_modulus / GPA,
        },
        "spring": {
            "stiffness_n_per_mm": config.spring.stiffness / N_PER_MM,
            "free_length_mm": config.spring.free_length / MM,
            "max_compression_mm": config.spring.max_compression / MM,
            "mode": SpringMode(config.spring_mode).value,
        },
        "layout": {
            "bars_per_layer": list(config.layout.bars_per_layer),
            "layer_separation_mm": config.layout.layer_separation / MM,
        },
        "preload": {"preload_mm": config.preload / MM},
        "geometry": {
            "lever_arm_mm": config.lever_arm / MM,
            "eccentricity_mm": config.eccentricity / MM,
        },
        "model": {"force_term": ForceTerm(config.force_term).value},
    }


def load_config(path: str | Path) -> MechanismConfig:
    """Read a TOML config file. Parsing is strict; validation is separate."""
    with open(path, "rb") as fh:
        try:
            doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError([ConfigIssue("document", f"is not valid TOML: {exc}")]) from None
    return config_from_dict(doc)


def prototype_default_config() -> MechanismConfig:
    """The shipped prototype config (``data/prototype_default.toml``)."""
    text = resources.files("flexmech").joinpath("data/prototype_default.toml").read_text()
    return config_from_dict(tomllib.loads(text))
