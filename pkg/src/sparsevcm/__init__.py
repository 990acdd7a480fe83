"""Sparse high-dimensional varying coefficient regression by block LASSO."""
__version__ = "0.1.0"

from .basis import BasisSpec, basis_matrix, check_sum_bound, eval_basis, gram_phi
from .design import (
    Dataset,
    assemble_design,
    cone_condition_probe,
    gram,
    kronecker_gram,
    read_dataset_csv,
    restricted_eigs,
    write_dataset_csv,
)
from .experiments import ExperimentPlan, PenaltyOverrides, run_plan, slope_fit, support_metrics
from .model import (
    BlockLayout,
    CoefficientMatrix,
    TruthSpec,
    block_norm,
    generate_truth,
    l2_risk,
    reconstruct,
    risk_split,
    validate_truth,
)
from .solver import (
    FitResult,
    PenaltyConfig,
    SolverSettings,
    delta_hat,
    estimate_omega_max_1,
    fit,
    fit_constrained,
    kkt_residual,
    objective,
)
from .synth import (
    DictionarySpec,
    NoiseSpec,
    build_test_family,
    generate_dataset,
    greedy_packing,
    sample_dictionary,
    total_distance,
)
from .theory import TheoryBounds, delta_lower, delta_theorem2, delta_upper, n_low
