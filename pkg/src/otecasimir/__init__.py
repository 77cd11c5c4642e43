"""Casimir-Lifshitz pressure between 1D lamellar gratings, in and out of thermal equilibrium.

Sign convention throughout: pressures are forces per unit area on body 1
along the outward normal, so negative values mean attraction.  All quantities
are SI (metres, kelvin, rad/s, N/m^2).
"""

from .cache import OperatorCache
from .config import ConfigError, RunConfig, load_config, parse_config
from .geometry import GeometryError, GratingGeometry
from .materials import (
    BUILTIN_MATERIALS,
    MaterialError,
    OscillatorModel,
    TabulatedIndex,
    get_material,
    load_table,
)
from .neqforce import NeqError, ThermalState
from .pfa import PfaError, PlanarBody, SlabPair, lifshitz_matsubara, pfa_pressure, slab_pressure
from .quadrature import (
    TransitionError,
    convergence_scan,
    delta_spectrum,
    find_transition,
    integrate_delta,
    matsubara_eq,
    pressure,
)
from .results import PressureResult, QuadratureSpec

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_MATERIALS",
    "ConfigError",
    "GeometryError",
    "GratingGeometry",
    "MaterialError",
    "NeqError",
    "OperatorCache",
    "OscillatorModel",
    "PfaError",
    "PlanarBody",
    "PressureResult",
    "QuadratureSpec",
    "RunConfig",
    "SlabPair",
    "TabulatedIndex",
    "ThermalState",
    "TransitionError",
    "convergence_scan",
    "delta_spectrum",
    "find_transition",
    "get_material",
    "integrate_delta",
    "lifshitz_matsubara",
    "load_config",
    "load_table",
    "matsubara_eq",
    "parse_config",
    "pfa_pressure",
    "pressure",
    "slab_pressure",
    "__version__",
]
