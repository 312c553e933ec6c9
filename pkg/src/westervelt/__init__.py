"""Structure-preserving mimetic finite differences for Westervelt's equation."""
from .kernels import BACKEND
from .mesh import GridError, TensorGrid, UniformPeriodicGrid1D, build_grid_1d
from .derham import DeRhamComplex, build_complex, reduce_0form, reduce_1form
from .model import (
    BranchError,
    DiscriminantNegative,
    SolverState,
    WesterveltParams,
    build_sound_speed_weights,
    dissipation_rate,
    hamiltonian,
    make_state,
    p_of_rho,
    rho_of_p,
)
from .integrator import ForcingSpec, SplitStepper, StepPlan, stability_bounds, stable_dt
from .diagnostics import ErrorReport, Recorder, TimeSeries, convergence_orders, spacetime_error, vorticity

__version__ = "0.1.0"
