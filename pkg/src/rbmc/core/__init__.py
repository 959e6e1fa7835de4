from .acceptance import (
    acceptance_matrix,
    acceptance_probability,
    augmented_invariant,
    augmented_transition_matrix,
    expected_acceptance_exact,
    mh_transition_matrix,
    proposal_matrix,
    rejection_second_moment_exact,
    target_probabilities,
)
from .catalog import (
    Catalog,
    builtin_targets_and_proposals,
    discrete_target,
    exponential_target,
    normal_target,
)
from .model import ReferenceKind, ReferenceMeasure, TargetModel
from .proposals import (
    DiscreteIndependence,
    DiscreteMatrixProposal,
    GaussianRandomWalk,
    IndependenceProposal,
    IndependentCauchy,
    IndependentExponential,
    IndependentGaussian,
    LangevinProposal,
    MixtureProposal,
    PointMassProposal,
    ProposalKernel,
)
from .rng import RngStreamSpec, exponential, open_unit
