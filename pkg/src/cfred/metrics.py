"""Distribution distances and alignment scores over embedding matrices.

Four metrics: the Frechet distance between fitted Gaussians (covers FID
and its DINOv2 variant -- the backbone only changes the features, not
the arithmetic), the conditional Frechet distance in both its
expectation-over-conditions and unconditional-moments forms, the
kernel-MMD score CMMD, and CLIPScore.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DataError, DegenerateInputError, DimensionMismatchError, PairingError
from .linalg import (
    FeatureMatrix,
    GaussianMoments,
    JointMoments,
    accumulate_moments,
    conditional_cov,
    pseudo_inverse,
    trace_sqrt_product,
)

# CMMD constants: Gaussian RBF bandwidth and readability scaling.
CMMD_SIGMA = 10.0
CMMD_SCALE = 1000.0

# Tolerance for "built against the same condition embeddings" checks.
CONDITION_MATCH_TOL = 1e-9

LOWER_BETTER = "lower-better"
HIGHER_BETTER = "higher-better"


@dataclass(frozen=True)
class MetricReport:
    """One metric value with enough provenance to reproduce it."""

    metric_name: str
    value: float
    direction: str
    n_samples: int
    backbone_ids: tuple[str, ...] = ()
    seed: Optional[int] = None

    def __post_init__(self):
        if self.direction not in (LOWER_BETTER, HIGHER_BETTER):
            raise DataError(f"unknown direction {self.direction!r}")
        if not math.isfinite(self.value):
            raise DataError(f"metric {self.metric_name} has non-finite value {self.value}")


@dataclass(frozen=True)
class GroupedDataset:
    """Per-condition populations: (condition id, real rows, generated rows)."""

    groups: tuple

    def __post_init__(self):
        if len(self.groups) < 1:
            raise DataError("grouped dataset needs at least one group")
        seen = set()
        for cid, real, gen in self.groups:
            if cid in seen:
                raise DataError(f"duplicate condition id {cid!r}")
            seen.add(cid)
            if real.rows < 2 or gen.rows < 2:
                raise DegenerateInputError(
                    f"group {cid!r} needs >= 2 real and >= 2 generated rows"
                )
        object.__setattr__(self, "groups", tuple(self.groups))


def frechet_distance(a: GaussianMoments, b: GaussianMoments) -> float:
    """Squared 2-Wasserstein distance between two Gaussians.

    ||mu_a - mu_b||^2 + Tr(S_a) + Tr(S_b) - 2 Tr((S_a^{1/2} S_b S_a^{1/2})^{1/2}),
    clamped at 0 against eigensolver noise. Identical moments return
    exactly 0.0 without touching the eigensolver.
    """
    if a.dim != b.dim:
        raise DimensionMismatchError(f"moments have dims {a.dim} and {b.dim}")
    if np.array_equal(a.mean, b.mean) and np.array_equal(a.cov, b.cov):
        return 0.0
    diff = a.mean - b.mean
    value = (
        float(diff @ diff)
        + float(np.trace(a.cov))
        + float(np.trace(b.cov))
        - 2.0 * trace_sqrt_product(a.cov, b.cov)
    )
    return max(value, 0.0)


def _check_shared_conditions(real: JointMoments, gen: JointMoments) -> None:
    scale = max(1.0, float(np.max(np.abs(real.cov_xx))))
    if (
        float(np.max(np.abs(real.mean_x - gen.mean_x))) > CONDITION_MATCH_TOL * max(
            1.0, float(np.max(np.abs(real.mean_x)))
        )
        or float(np.max(np.abs(real.cov_xx - gen.cov_xx))) > CONDITION_MATCH_TOL * scale
    ):
        raise PairingError(
            "real and generated joint moments were not built against the same "
            "condition embeddings (mean_x / cov_xx disagree)"
        )


def cfred_unconditional_form(real: JointMoments, gen: JointMoments) -> float:
    """Conditional Frechet distance from unconditional block moments.

    ||mu_y - mu_yhat||^2
      + Tr[(S_yx - S_yhatx) S_xx^+ (S_xy - S_xyhat)]
      + Tr[S_yy|x] + Tr[S_yhatyhat|x] - 2 Tr((S_yy|x^{1/2} S_yhatyhat|x S_yy|x^{1/2})^{1/2})
    """
    if real.dim_x != gen.dim_x or real.dim_v != gen.dim_v:
        raise DimensionMismatchError("real and generated joint moments disagree in shape")
    _check_shared_conditions(real, gen)
    if (
        np.array_equal(real.mean_v, gen.mean_v)
        and np.array_equal(real.cov_vv, gen.cov_vv)
        and np.array_equal(real.cov_vx, gen.cov_vx)
    ):
        return 0.0
    diff_mu = real.mean_v - gen.mean_v
    diff_cross = real.cov_vx - gen.cov_vx
    pinv_xx = pseudo_inverse(real.cov_xx)
    cross_term = float(np.trace(diff_cross @ pinv_xx @ diff_cross.T))
    cond_real = conditional_cov(real)
    cond_gen = conditional_cov(gen)
    value = (
        float(diff_mu @ diff_mu)
        + cross_term
        + float(np.trace(cond_real))
        + float(np.trace(cond_gen))
        - 2.0 * trace_sqrt_product(cond_real, cond_gen)
    )
    return max(value, 0.0)


def cfred_expectation_form(data: GroupedDataset) -> float:
    """Conditional Frechet distance as the mean per-condition distance.

    Groups are weighted equally; the final mean uses the fixed group
    order, so results are reproducible regardless of parallelism.
    """
    distances = [
        frechet_distance(accumulate_moments(real), accumulate_moments(gen))
        for _, real, gen in data.groups
    ]
    return math.fsum(distances) / len(distances)


def _unit_rows(features, what: str) -> np.ndarray:
    arr = features.as_float64() if isinstance(features, FeatureMatrix) else np.asarray(
        features, dtype=np.float64
    )
    norms = np.linalg.norm(arr, axis=1)
    if np.any(norms == 0.0):
        row = int(np.argwhere(norms == 0.0)[0][0])
        raise DataError(f"{what} has a zero-norm row at index {row}")
    return arr / norms[:, None]


def cmmd(real, gen) -> float:
    """Scaled unbiased MMD^2 between row-normalized embedding sets.

    Gaussian RBF kernel with sigma=10, result multiplied by 1000. The
    unbiased estimator may legitimately be slightly negative; the value
    is reported as-is.
    """
    a = _unit_rows(real, "real features")
    b = _unit_rows(gen, "generated features")
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatchError(
            f"real has dim {a.shape[1]} but generated has dim {b.shape[1]}"
        )
    if a.shape[0] < 2 or b.shape[0] < 2:
        raise DegenerateInputError("cmmd needs at least 2 rows on each side")

    # Canonical argument order makes cmmd(a, b) == cmmd(b, a) bit-exact;
    # the estimator is symmetric, but BLAS summation order is not.
    if (b.shape, b.tobytes()) < (a.shape, a.tobytes()):
        a, b = b, a

    gamma = 1.0 / (2.0 * CMMD_SIGMA**2)

    def sqdist(u, v):
        d2 = (
            np.sum(u**2, axis=1)[:, None]
            + np.sum(v**2, axis=1)[None, :]
            - 2.0 * u @ v.T
        )
        return np.maximum(d2, 0.0)

    k_aa = np.exp(-gamma * sqdist(a, a))
    k_bb = np.exp(-gamma * sqdist(b, b))
    k_ab = np.exp(-gamma * sqdist(a, b))
    n, m = a.shape[0], b.shape[0]
    np.fill_diagonal(k_aa, 0.0)
    np.fill_diagonal(k_bb, 0.0)
    mmd2 = (
        k_aa.sum() / (n * (n - 1))
        + k_bb.sum() / (m * (m - 1))
        - 2.0 * k_ab.mean()
    )
    return float(CMMD_SCALE * mmd2)


def clipscore(text, gen) -> float:
    """100 * mean over pairs of max(0, cosine similarity)."""
    t = _unit_rows(text, "text features")
    g = _unit_rows(gen, "generated features")
    if t.shape[0] != g.shape[0]:
        raise PairingError(f"text has {t.shape[0]} rows but generated has {g.shape[0]}")
    if t.shape[1] != g.shape[1]:
        raise DimensionMismatchError(
            f"text dim {t.shape[1]} != generated dim {g.shape[1]}"
        )
    cos = np.sum(t * g, axis=1)
    return float(100.0 * np.mean(np.maximum(cos, 0.0)))


def make_swap_dataset(k: int, n_per_class: int):
    """Class-swap counterexample: aligned prompts, cyclically swapped images.

    x is the one-hot class embedding, y == x, and yhat assigns each
    sample the one-hot of the next class (mod k). The marginal
    distribution of yhat equals that of y -- the marginal Frechet
    distance is blind to the swap while the conditional distance is not.
    """
    if k < 2:
        raise DataError(f"need at least 2 classes, got {k}")
    if n_per_class < 2:
        raise DataError(f"need at least 2 samples per class, got {n_per_class}")
    eye = np.eye(k, dtype=np.float32)
    classes = np.repeat(np.arange(k), n_per_class)
    x = eye[classes]
    y = eye[classes]
    yhat = eye[(classes + 1) % k]
    return FeatureMatrix(x), FeatureMatrix(y), FeatureMatrix(yhat)
