"""Evolution of Lorentzian metrics coupled to spinor fields.

The package evolves a metric, a scalar transport field and a spinor as a
first-order symmetric hyperbolic system on a periodic spatial grid, starting
from constraint-checked initial surface data.
"""

__version__ = "0.1.0"

from .clifford import GammaRep, build_gamma
from .geometry import Grid, BackgroundMetric
from .constraints import InitialSurfaceData, check_initial_data
from .evolution import EvolutionConfig, System, build_initial_state, evolve
from .scenarios import SCENARIOS, get_scenario

__all__ = [
    "GammaRep",
    "build_gamma",
    "Grid",
    "BackgroundMetric",
    "InitialSurfaceData",
    "check_initial_data",
    "EvolutionConfig",
    "System",
    "build_initial_state",
    "evolve",
    "SCENARIOS",
    "get_scenario",
]
