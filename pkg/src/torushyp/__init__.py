"""Quasilinear strongly hyperbolic systems on the torus.

Symbol analysis, pseudospectral fields, a Picard-iteration solver with
continuation monitoring, and relativistic fluid models.
"""
from .errors import *  # noqa: F401,F403
from .models import (
    EquationOfState,
    boosted_speeds,
    bulk_inequalities,
    burgers_breaking_time,
    characteristic_speeds,
    check_admissible,
    euler_state,
    bulk_state,
    four_velocity,
    make_advection,
    make_bulk_viscous,
    make_burgers,
    make_constant_coefficient,
    make_relativistic_euler,
    make_sink,
    velocity_norm,
)
from .solver import (
    ContinuationStatus,
    DependenceTable,
    EnergyReport,
    IterateHistory,
    SolveConfig,
    SolveOutcome,
    Trajectory,
    continuous_dependence_probe,
    difference_norm,
    evolve_linear,
    linear_rhs,
    monitor_continuation,
    picard_solve,
    verify_energy_growth,
)
from .spectral import (
    QuantizedSymmetrizer,
    TorusField,
    TorusGrid,
    apply_quantized_symmetrizer,
    energy_functional,
    l2_norm,
    read_snapshot,
    sobolev_norm,
    tail_fraction,
    write_snapshot,
)
from .symbol import (
    AdmissibleRegion,
    Constraint,
    EigenStructure,
    HyperbolicityReport,
    SamplePlan,
    SystemDef,
    ToleranceSet,
    assemble_symbol,
    build_projections,
    build_symmetrizer,
    eigendecompose,
    scan_hyperbolicity,
    symbol_structure,
)

__version__ = "0.1.0"
