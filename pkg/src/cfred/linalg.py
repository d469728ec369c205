"""Numerically hardened primitives shared by the distance metrics.

Everything here is pure and deterministic: moment accumulation over
feature matrices, the eigendecomposition-based PSD square root and
Moore-Penrose pseudo-inverse, the trace-of-square-root term common to
Frechet-style distances, and Gaussian conditioning.

Features are stored as float32 (the on-disk precision) but every
computation runs in float64; matrix square roots of high-dimensional
covariances are not trustworthy in single precision.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DataError,
    DegenerateInputError,
    DimensionMismatchError,
    NotPSDError,
    PairingError,
)

# Eigenvalues of a d x d covariance are accepted as "zero" down to
# -EIG_CLAMP_REL * trace / d; anything lower is treated as indefinite.
EIG_CLAMP_REL = 1e-8

# Relative eigenvalue cutoff for the pseudo-inverse.
PINV_RCOND = 1e-10

# Relative symmetry tolerance for matrix inputs.
SYM_RTOL = 1e-10


def _check_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))
        r, c = (bad[0][0], bad[0][1]) if bad.shape[1] == 2 else (int(bad[0][0]), 0)
        raise DataError(f"{what} contains a non-finite value at row {r}, col {c}")


def _check_symmetric(m: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Validate symmetry within SYM_RTOL and return the symmetrized copy."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatchError(f"{what} must be square, got shape {m.shape}")
    scale = max(float(np.max(np.abs(m))), 1.0)
    if float(np.max(np.abs(m - m.T))) > SYM_RTOL * scale:
        raise DataError(f"{what} is not symmetric within tolerance {SYM_RTOL}")
    return 0.5 * (m + m.T)


@dataclass(frozen=True)
class FeatureMatrix:
    """An n x d matrix of per-sample embeddings, row-major, f32 storage."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 2:
            raise DataError(f"feature matrix must be 2-D, got {arr.ndim}-D")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DataError(f"feature matrix must be at least 1x1, got {arr.shape}")
        _check_finite(arr, "feature matrix")
        object.__setattr__(self, "data", arr)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def as_float64(self) -> np.ndarray:
        return self.data.astype(np.float64)


@dataclass(frozen=True)
class GaussianMoments:
    """Mean vector and symmetric covariance of one feature population."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        cov = _check_symmetric(self.cov, "covariance")
        if cov.shape[0] != mean.shape[0]:
            raise DimensionMismatchError(
                f"mean has dim {mean.shape[0]} but covariance is {cov.shape[0]}x{cov.shape[0]}"
            )
        _check_finite(mean, "mean")
        _check_finite(cov, "covariance")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class JointMoments:
    """Block moments of a stacked (condition x, value v) population.

    Holds the mean of each part plus the three distinct covariance
    blocks; cov_xv is cov_vx transposed and is not stored.
    """

    mean_x: np.ndarray
    mean_v: np.ndarray
    cov_xx: np.ndarray
    cov_vv: np.ndarray
    cov_vx: np.ndarray

    def __post_init__(self):
        mean_x = np.asarray(self.mean_x, dtype=np.float64).reshape(-1)
        mean_v = np.asarray(self.mean_v, dtype=np.float64).reshape(-1)
        cov_xx = _check_symmetric(self.cov_xx, "cov_xx")
        cov_vv = _check_symmetric(self.cov_vv, "cov_vv")
        cov_vx = np.asarray(self.cov_vx, dtype=np.float64)
        d_x, d_v = mean_x.shape[0], mean_v.shape[0]
        if d_x < 1 or d_v < 1:
            raise DataError("joint moments need d_x >= 1 and d_v >= 1")
        if cov_xx.shape != (d_x, d_x) or cov_vv.shape != (d_v, d_v):
            raise DimensionMismatchError("covariance block shapes disagree with the means")
        if cov_vx.shape != (d_v, d_x):
            raise DimensionMismatchError(
                f"cov_vx must be {d_v}x{d_x}, got {cov_vx.shape}"
            )
        for arr, name in ((mean_x, "mean_x"), (mean_v, "mean_v"), (cov_vx, "cov_vx")):
            _check_finite(arr, name)
        object.__setattr__(self, "mean_x", mean_x)
        object.__setattr__(self, "mean_v", mean_v)
        object.__setattr__(self, "cov_xx", cov_xx)
        object.__setattr__(self, "cov_vv", cov_vv)
        object.__setattr__(self, "cov_vx", cov_vx)

    @property
    def dim_x(self) -> int:
        return self.mean_x.shape[0]

    @property
    def dim_v(self) -> int:
        return self.mean_v.shape[0]


def _rows(features) -> np.ndarray:
    if isinstance(features, FeatureMatrix):
        return features.as_float64()
    arr = np.asarray(features, dtype=np.float64)
    if arr.ndim != 2:
        raise DataError(f"expected a 2-D feature array, got {arr.ndim}-D")
    _check_finite(arr, "feature matrix")
    return arr


def accumulate_moments(features) -> GaussianMoments:
    """Sample mean and unbiased (n-1 divisor) covariance of the rows."""
    arr = _rows(features)
    n = arr.shape[0]
    if n < 2:
        raise DegenerateInputError(f"need at least 2 rows to estimate moments, got {n}")
    mean = arr.mean(axis=0)
    centered = arr - mean
    cov = centered.T @ centered / (n - 1)
    cov = 0.5 * (cov + cov.T)
    return GaussianMoments(mean=mean, cov=cov)


def accumulate_joint_moments(x, v) -> JointMoments:
    """Block moments of paired rows (x_i, v_i).

    Uses the empirical 1/n divisor for every block: a dataset that
    enumerates a finite population exactly then reproduces that
    population's covariance exactly, which keeps the conditional
    distance of constructed datasets at its hand-computable value.
    """
    ax, av = _rows(x), _rows(v)
    if ax.shape[0] != av.shape[0]:
        raise PairingError(
            f"x has {ax.shape[0]} rows but v has {av.shape[0]}; rows must pair 1:1"
        )
    n = ax.shape[0]
    if n < 2:
        raise DegenerateInputError(f"need at least 2 paired rows, got {n}")
    mean_x = ax.mean(axis=0)
    mean_v = av.mean(axis=0)
    cx = ax - mean_x
    cv = av - mean_v
    cov_xx = cx.T @ cx / n
    cov_vv = cv.T @ cv / n
    cov_vx = cv.T @ cx / n
    return JointMoments(
        mean_x=mean_x,
        mean_v=mean_v,
        cov_xx=0.5 * (cov_xx + cov_xx.T),
        cov_vv=0.5 * (cov_vv + cov_vv.T),
        cov_vx=cov_vx,
    )


def _clamped_eigh(m: np.ndarray, what: str) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition with small negative eigenvalues clamped to 0.

    Raises NotPSDError when an eigenvalue falls below
    -EIG_CLAMP_REL * trace / d, i.e. the matrix is genuinely indefinite
    rather than noisy.
    """
    d = m.shape[0]
    eigvals, eigvecs = np.linalg.eigh(m)
    threshold = -EIG_CLAMP_REL * max(float(np.trace(m)), 0.0) / d
    worst = float(eigvals[0])
    if worst < threshold:
        raise NotPSDError(
            f"{what} is not PSD: eigenvalue {worst} below clamp threshold {threshold}",
            worst_eigenvalue=worst,
        )
    return np.maximum(eigvals, 0.0), eigvecs


def psd_sqrt(m) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition."""
    sym = _check_symmetric(m, "psd_sqrt input")
    eigvals, eigvecs = _clamped_eigh(sym, "psd_sqrt input")
    root = (eigvecs * np.sqrt(eigvals)) @ eigvecs.T
    return 0.5 * (root + root.T)


def pseudo_inverse(m) -> np.ndarray:
    """Moore-Penrose pseudo-inverse of a symmetric matrix.

    Eigenvalues at or below PINV_RCOND times the largest eigenvalue are
    treated as exactly zero. A rank-zero input yields the zero matrix
    with a warning rather than an error.
    """
    sym = _check_symmetric(m, "pseudo_inverse input")
    eigvals, eigvecs = np.linalg.eigh(sym)
    lam_max = float(eigvals[-1])
    if lam_max <= 0.0:
        warnings.warn("pseudo_inverse of a rank-zero matrix; returning zeros")
        return np.zeros_like(sym)
    keep = eigvals > PINV_RCOND * lam_max
    inv_vals = np.where(keep, 1.0, 0.0) / np.where(keep, eigvals, 1.0)
    pinv = (eigvecs * inv_vals) @ eigvecs.T
    return 0.5 * (pinv + pinv.T)


def trace_sqrt_product(a, b) -> float:
    """Trace of (a^{1/2} b a^{1/2})^{1/2} for symmetric PSD a and b."""
    sa = _check_symmetric(a, "trace_sqrt_product a")
    sb = _check_symmetric(b, "trace_sqrt_product b")
    if sa.shape != sb.shape:
        raise DimensionMismatchError(
            f"operands must share a dimension, got {sa.shape} and {sb.shape}"
        )
    _clamped_eigh(sb, "trace_sqrt_product b")
    root_a = psd_sqrt(sa)
    inner = root_a @ sb @ root_a
    eigvals = np.linalg.eigvalsh(0.5 * (inner + inner.T))
    return float(np.sum(np.sqrt(np.maximum(eigvals, 0.0))))


def conditional_cov(joint: JointMoments) -> np.ndarray:
    """Residual covariance of v after Gaussian conditioning on x.

    cov_vv - cov_vx pinv(cov_xx) cov_xv; equals cov_vv when the cross
    block is zero and the zero matrix when v is a function of x.
    """
    pinv_xx = pseudo_inverse(joint.cov_xx)
    cond = joint.cov_vv - joint.cov_vx @ pinv_xx @ joint.cov_vx.T
    return 0.5 * (cond + cond.T)
