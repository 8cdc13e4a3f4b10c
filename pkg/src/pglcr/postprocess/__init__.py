"""Label-switching correction, partition estimates and posterior summaries."""

from .partition import (
    CredibleBall,
    PartitionEstimate,
    PartitionTrace,
    canonical_labels,
    coclustering_matrix,
    credible_ball,
    expected_vi,
    minvi_point_estimate,
    variation_of_information,
)
from .relabel import (
    RelabelledTrace,
    align_to_reference,
    apply_permutations,
    rereference_beta,
    stephens_assign,
    stephens_relabel,
)
from .summaries import (
    CoefficientSummary,
    ThetaEstimate,
    adjusted_rand_index,
    class_proportions,
    coefficient_summary,
    hdi,
    posterior_inclusion_probabilities,
    posthoc_theta,
)

__all__ = [
    "CredibleBall",
    "PartitionEstimate",
    "PartitionTrace",
    "canonical_labels",
    "coclustering_matrix",
    "credible_ball",
    "expected_vi",
    "minvi_point_estimate",
    "variation_of_information",
    "RelabelledTrace",
    "align_to_reference",
    "apply_permutations",
    "rereference_beta",
    "stephens_assign",
    "stephens_relabel",
    "CoefficientSummary",
    "ThetaEstimate",
    "adjusted_rand_index",
    "class_proportions",
    "coefficient_summary",
    "hdi",
    "posterior_inclusion_probabilities",
    "posthoc_theta",
]
