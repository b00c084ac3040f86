"""Model, oracle, calibration and design tools for a flexible-bar neck-support mechanism."""
__version__ = "0.1.0"

from .core import (
    BarSpec,
    ConfigError,
    DomainError,
    ForceTerm,
    LayerLayout,
    LoadState,
    MechanismConfig,
    SpringMode,
    SpringSpec,
    flexural_rigidity,
    load_config,
    prototype_default_config,
    second_moment_of_area,
    validate_config,
)
from .elastica import (
    BarSolution,
    bar_base_moment,
    gamma_integral,
    pure_moment_tip_angle,
    tip_force_from_angle,
    tip_shortening,
)
from .kernels import BACKEND
from .mechanism import MomentBreakdown, assistive_moment, moment_deflection_curve, tangent_stiffness

__all__ = [
    "BACKEND",
    "BarSolution",
    "BarSpec",
    "ConfigError",
    "DomainError",
    "ForceTerm",
    "LayerLayout",
    "LoadState",
    "MechanismConfig",
    "MomentBreakdown",
    "SpringMode",
    "SpringSpec",
    "assistive_moment",
    "bar_base_moment",
    "flexural_rigidity",
    "gamma_integral",
    "load_config",
    "moment_deflection_curve",
    "prototype_default_config",
    "pure_moment_tip_angle",
    "second_moment_of_area",
    "tangent_stiffness",
    "tip_force_from_angle",
    "tip_shortening",
    "validate_config",
]
