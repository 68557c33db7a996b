from reachavoid.engine import ScenarioConfig, run_game
from reachavoid.geometry import ConvexRegion
from reachavoid.run_config import RunConfig, SolverConfig
from reachavoid.solver import solve_min_distance, solve_projection

try:
    from ._version import version as __version__
except ImportError:
    __version__ = "unknown version"


__all__ = [
    "ConvexRegion",
    "RunConfig",
    "ScenarioConfig",
    "SolverConfig",
    "run_game",
    "solve_min_distance",
    "solve_projection",
    "__version__",
]
