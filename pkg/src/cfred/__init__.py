"""Conditional Frechet Distance toolkit.

Computes conditional Frechet Distance and companion text-to-image
evaluation metrics (FD, CMMD, CLIPScore) from precomputed embeddings,
ranks models, and measures agreement with human preference data.
"""

__version__ = "0.1.0"

from .linalg import (
    FeatureMatrix,
    GaussianMoments,
    JointMoments,
    accumulate_joint_moments,
    accumulate_moments,
    conditional_cov,
    pseudo_inverse,
    psd_sqrt,
    trace_sqrt_product,
)
from .metrics import (
    GroupedDataset,
    MetricReport,
    cfred_expectation_form,
    cfred_unconditional_form,
    clipscore,
    cmmd,
    frechet_distance,
    make_swap_dataset,
)
from .rank_eval import (
    HumanColumn,
    ModelScoreColumn,
    SampleScoreTensor,
    aggregate_sample_ranks,
    correlation,
    fit_linear_combo,
    per_item_rank_accuracy,
    rank_accuracy,
    rank_models,
    win_rate_matchup,
)
from .data_io import (
    DatasetManifest,
    RankingTable,
    emit_report,
    load_manifest,
    read_embedding,
    write_embedding,
)
from .synth import JointGaussianSpec, analytic_cfred, analytic_fd, sample_joint
from .harness import BackboneAttribute, CorrelationGrid, ablate, run_benchmark

__all__ = [
    "FeatureMatrix",
    "GaussianMoments",
    "JointMoments",
    "accumulate_moments",
    "accumulate_joint_moments",
    "psd_sqrt",
    "pseudo_inverse",
    "trace_sqrt_product",
    "conditional_cov",
    "MetricReport",
    "GroupedDataset",
    "frechet_distance",
    "cfred_unconditional_form",
    "cfred_expectation_form",
    "cmmd",
    "clipscore",
    "make_swap_dataset",
    "ModelScoreColumn",
    "HumanColumn",
    "SampleScoreTensor",
    "rank_models",
    "rank_accuracy",
    "per_item_rank_accuracy",
    "aggregate_sample_ranks",
    "correlation",
    "win_rate_matchup",
    "fit_linear_combo",
    "DatasetManifest",
    "RankingTable",
    "read_embedding",
    "write_embedding",
    "load_manifest",
    "emit_report",
    "JointGaussianSpec",
    "sample_joint",
    "analytic_cfred",
    "analytic_fd",
    "BackboneAttribute",
    "CorrelationGrid",
    "ablate",
    "run_benchmark",
]
