"""H(div)-conforming solver for unsteady incompressible power-law flow.

Velocity: lowest-order face-moment (normal-continuous) vector elements,
pointwise divergence-free solutions.  Pressure: piecewise constants.
Viscous term: lifting-based discontinuous Galerkin discrete gradient of a
power-law flux.  Convection: upwind-free split plus a reinforced jump
penalty.  Time: implicit Euler with a Picard solve per step.
"""

from .forms import FluxParams, FormAssembler, power_law_flux
from .lifting import LiftingOperators
from .mesh import (
    SimplicialMesh,
    build_channel_mesh,
    build_structured_mesh,
    load_mesh,
    mesh_statistics,
    save_mesh,
)
from .solver import (
    BoundaryConditions,
    FlowSolver,
    PicardConfig,
    TimeConfig,
    run_simulation,
)
from .spaces import (
    FEFunction,
    PressureSpace,
    VelocitySpace,
    rt_interpolate,
)

__all__ = [
    "BoundaryConditions",
    "FEFunction",
    "FlowSolver",
    "FluxParams",
    "FormAssembler",
    "LiftingOperators",
    "PicardConfig",
    "PressureSpace",
    "SimplicialMesh",
    "TimeConfig",
    "VelocitySpace",
    "build_channel_mesh",
    "build_structured_mesh",
    "load_mesh",
    "mesh_statistics",
    "power_law_flux",
    "rt_interpolate",
    "run_simulation",
    "save_mesh",
]

__version__ = "0.1.0"
