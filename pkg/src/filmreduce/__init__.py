"""Numerical toolkit for thin-film dimension reduction of Saint Venant-Kirchhoff shells."""
from .elasticity import MaterialParams, cee, elasticity_contract, strain, svk_density
from .errors import (
    ChartSingular,
    ConfigInvalid,
    DegenerateFit,
    FilmReduceError,
    LineSearchStalled,
    NonFiniteEnergy,
    ThicknessTooLarge,
    UnsupportedChart,
)
from .expansion import (
    BoundaryCondition,
    DeformationExpansion,
    cascade_constraints,
    identity_expansion,
    random_q0_expansion,
    term_energies,
)
from .fields import Field2D, Field3D, Grid2D, Grid3D
from .geometry import Cylinder, Planar, SphereBand, frame, inv_derivs, jacobian_coeffs, parse_chart
from .harness import HSchedule, consistency_report, gamma_limit_check, series_fit
from .limit_energy import (
    EnergyVariant,
    FrozenData,
    MembraneState,
    el_residual,
    identity_state,
    j0_general,
    j0_specialized,
    random_state,
    reduced_functional,
)
from .rescaled_energy import EvalContext, energy_J
from .solver import SolveOptions, fd_gradient_check, minimize
from .tensor3 import QuadraticForm3, bform, qform

__version__ = "0.1.0"
