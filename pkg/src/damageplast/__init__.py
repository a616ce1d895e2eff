"""Rate-independent damage coupled with plasticity: incremental solver and checks."""

from .constitutive import MaterialParams
from .exceptions import (
    ConfigurationError,
    DomainError,
    OracleSizeError,
    SolverError,
    ValidationError,
)
from .energetics import (
    CompetitorSpec,
    VerificationReport,
    cleavage_reduction_check,
    condition_suite,
    diss_along,
    dissipation_distance,
    energy_balance_check,
    stability_check,
    verify_trajectory,
)
from .estimators import EnergeticVerifier, IncrementalEnergyMinimizer
from .fem import (
    EnergyBreakdown,
    StateFields,
    assemble_energy,
    assemble_power,
    build_mesh,
    elastic_solve,
)
from .scenario import (
    InitialState,
    Loading,
    MeshSpec,
    Scenario,
    SolverConfig,
    TimeGrid,
    TimeProfile,
    VerificationConfig,
)
from .oracle import oracle_minimize
from .scenario_io import parse_scenario, serialize_scenario, write_timeseries
from .solver import Trajectory, incremental_step, run_evolution, stationarity_residual
from .tensor import ConvexSetK, SubspaceS, SymTensor2, Tensor4

__version__ = "0.1.0"
