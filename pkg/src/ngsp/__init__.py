"""Single-pass solvers for 2D anisotropic eikonal / min-time HJB equations."""

from .grid import Grid, NodeIndex, Point, neighbors_n, neighbors_nd, node_position, snap_to_grid
from .speed import (ConfigurationError, ProblemSpec, SpeedField, UnitDirection,
                    anisotropy_coefficient, make_problem, speed, validate_bounds)
from .solve import HAVE_CORE, ValueField, solve
from .oum import oum_update, solve_oum
from .neighbor_gradient import (hamiltonian_minimizer, ngsp_update, ray_front_intersection,
                                solve_ngsp, update_gradient)

__version__ = "0.1.0"

__all__ = [
    "Grid", "NodeIndex", "Point", "neighbors_n", "neighbors_nd", "node_position", "snap_to_grid",
    "ConfigurationError", "ProblemSpec", "SpeedField", "UnitDirection", "anisotropy_coefficient",
    "make_problem", "speed", "validate_bounds", "HAVE_CORE", "ValueField", "solve",
    "oum_update", "solve_oum", "hamiltonian_minimizer", "ngsp_update", "ray_front_intersection",
    "solve_ngsp", "update_gradient", "__version__",
]
