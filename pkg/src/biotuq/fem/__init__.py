"""Conforming P2/P1 finite elements for the 2D linear Biot system."""
from .assembly import AssembledSystem, assemble, point_source_load, traction_load
from .mesh import MeshError, TriMesh, rectangle_mesh, unit_square_mesh
from .solver import (BiotScenario, BiotSolver, DisplacementBC, FieldSolution, PressureBC,
                     SingularSystemError, Traction, energy_diagnostic, solve_transient, step)
