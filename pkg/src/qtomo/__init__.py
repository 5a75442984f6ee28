"""Two-qubit state tomography toolkit.

Simulates Poisson coincidence counting over a projector set, fits states by
rank-restricted maximum likelihood with AIC rank selection, and evaluates
the information-geometric lower bound on the average Bures estimation
error.  The likelihood kernels run on a compiled core when available (see
``kernel_backend``) and on a pure-numpy fallback otherwise.
"""

from ._backend import backend_name as kernel_backend
from ._rng import derive_seed
from .errors import (
    ContractError,
    DegenerateParameterError,
    IllPosedBoundError,
    InvalidStateError,
    NoInformationError,
    NotInformationallyCompleteError,
    SingularModelError,
    TomographyError,
)
from .estimate import (
    FitOptions,
    MaiceResult,
    RankFit,
    aic,
    linear_inversion_init,
    maice_fit,
    mle_fit,
)
from .harness import (
    ExperimentConfig,
    ExperimentReport,
    PresetState,
    ReportRow,
    emit_report,
    make_preset,
    read_report,
    run_experiment,
    run_trial,
)
from .infogeo import (
    FisherBundle,
    classical_fisher,
    cr_bound_bures,
    empirical_covariance,
    fisher_bundle,
    fisher_from_rates,
    local_bures_quadratic,
    sld_fisher,
    sld_fisher_matrices,
    sld_operators,
    sld_operators_matrices,
)
from .measure import (
    CountRecord,
    ProjectorSet,
    default_projectors,
    expected_counts,
    grad_log_likelihood,
    log_likelihood,
    poisson_relative_entropy,
    read_count_file,
    sample_counts,
    write_count_file,
)
from .param import (
    FactorLayout,
    RankKParams,
    build_factor,
    d_C_d_theta,
    d_rho_d_theta,
    embed_params,
    param_count,
    project_to_rank,
    random_params,
    to_state,
)
from .qstate import (
    DensityMatrix,
    StateCharacter,
    binary_entropy,
    bures_distance,
    characterize,
    concurrence,
    entanglement_of_formation,
    fidelity,
    hermitian_eig,
    matrix_sqrt_psd,
    von_neumann_entropy,
)

__version__ = "0.1.0"

__all__ = [
    "ContractError",
    "CountRecord",
    "DegenerateParameterError",
    "DensityMatrix",
    "ExperimentConfig",
    "ExperimentReport",
    "FactorLayout",
    "FisherBundle",
    "FitOptions",
    "IllPosedBoundError",
    "InvalidStateError",
    "MaiceResult",
    "NoInformationError",
    "NotInformationallyCompleteError",
    "PresetState",
    "ProjectorSet",
    "RankFit",
    "RankKParams",
    "ReportRow",
    "SingularModelError",
    "StateCharacter",
    "TomographyError",
    "aic",
    "binary_entropy",
    "build_factor",
    "bures_distance",
    "characterize",
    "classical_fisher",
    "concurrence",
    "cr_bound_bures",
    "d_C_d_theta",
    "d_rho_d_theta",
    "default_projectors",
    "derive_seed",
    "embed_params",
    "emit_report",
    "empirical_covariance",
    "entanglement_of_formation",
    "expected_counts",
    "fidelity",
    "fisher_bundle",
    "fisher_from_rates",
    "grad_log_likelihood",
    "hermitian_eig",
    "kernel_backend",
    "linear_inversion_init",
    "local_bures_quadratic",
    "log_likelihood",
    "maice_fit",
    "make_preset",
    "matrix_sqrt_psd",
    "mle_fit",
    "param_count",
    "poisson_relative_entropy",
    "project_to_rank",
    "random_params",
    "read_count_file",
    "read_report",
    "run_experiment",
    "run_trial",
    "sample_counts",
    "sld_fisher",
    "sld_fisher_matrices",
    "sld_operators",
    "sld_operators_matrices",
    "to_state",
    "von_neumann_entropy",
    "write_count_file",
]
