"""Mean-field variational inference for probabilistic integer submodular models."""

from .gme import (
    EstimateWithError,
    GradientEstimate,
    dr_certificate,
    gme_estimate,
    gme_exact,
    gradient_estimate,
    gradient_exact,
    hoeffding_samples,
)
from .inference import (
    ElboConfig,
    InferenceResult,
    Trajectory,
    block_ca,
    block_ca_update,
    elbo,
    lmo_shrunken_block,
    lmo_simplex_block,
    log_partition_bruteforce,
    shrunken_fw,
    two_phase_fw,
)
from .lattice import (
    CheckReport,
    LatticeDomain,
    check_dr_submodular,
    check_lattice_submodular,
    check_monotone,
    enumerate_domain,
    join,
    meet,
    multiset_difference,
)
from .marginals import ProductCategorical, clamp_block, entropy, entropy_gradient, sample
from .objectives import (
    FacilityWeights,
    ModularObjective,
    Objective,
    TableObjective,
    WeightedGraph,
    facility_location_objective,
    revenue_objective,
    synthetic_facility_weights,
    value_range,
)

__version__ = "0.1.0"
