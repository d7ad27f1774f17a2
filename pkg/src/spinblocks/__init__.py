"""Open-system dynamics of spin-1/2 ensembles in the blocked collective
representation, with a brute-force full-space oracle for validation."""

from .irreps import (
    Degeneracy,
    EnsembleSpec,
    alpha,
    collective_dim,
    degeneracy,
    j_range,
)
from .states import (
    BlockedDensity,
    BlockedKet,
    cat_state,
    coherent_pole_state,
    dicke_state,
    expectation,
    fidelity,
    irrep_populations,
    ket_to_density,
    squeezing_parameter,
    trace,
    truncate,
    variance,
)
from .operators import (
    BlockOperator,
    LocalOperatorCoeffs,
    collective_op,
    counter_twisting_hamiltonian,
    symmetric_sum_collective,
)
from .liouvillian import (
    ChannelSpec,
    CompiledLiouvillian,
    apply_local_jump,
    collective_channel,
    collective_dissipator,
    g_scatter,
    liouvillian_apply,
    local_channel,
    symmetric_local_dissipator,
)
from .integrator import (
    PhysicalityError,
    TimeGrid,
    TrajectoryRecord,
    convergence_check,
    default_dt,
    evolve,
    rk4_step,
)

__version__ = "0.1.0"

__all__ = [
    "EnsembleSpec",
    "Degeneracy",
    "j_range",
    "degeneracy",
    "alpha",
    "collective_dim",
    "BlockedKet",
    "BlockedDensity",
    "dicke_state",
    "cat_state",
    "coherent_pole_state",
    "ket_to_density",
    "trace",
    "fidelity",
    "expectation",
    "variance",
    "irrep_populations",
    "squeezing_parameter",
    "truncate",
    "BlockOperator",
    "LocalOperatorCoeffs",
    "collective_op",
    "counter_twisting_hamiltonian",
    "symmetric_sum_collective",
    "ChannelSpec",
    "local_channel",
    "collective_channel",
    "g_scatter",
    "apply_local_jump",
    "symmetric_local_dissipator",
    "collective_dissipator",
    "liouvillian_apply",
    "CompiledLiouvillian",
    "TimeGrid",
    "TrajectoryRecord",
    "PhysicalityError",
    "rk4_step",
    "evolve",
    "convergence_check",
    "default_dt",
]
