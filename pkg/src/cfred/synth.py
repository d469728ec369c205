"""Synthetic jointly-Gaussian triples and the closed-form oracle.

The sampler draws (condition x, real y, generated yhat) with exact,
user-specified block moments; y and yhat are conditionally independent
given x, which is the minimal joint model the unconditional-moments
formula constrains. The analytic functions evaluate the conditional and
marginal Frechet distances at the true parameters, giving estimators a
ground truth to converge to.

RNG: NumPy's Philox (4x64, 10 rounds), keyed as seed * 4 + stream with
stream 0 for x noise, 1 for y noise, 2 for yhat noise. The same keying
reproduces the streams in any implementation that ships Philox.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, NotPSDError
from .linalg import (
    EIG_CLAMP_REL,
    FeatureMatrix,
    GaussianMoments,
    JointMoments,
    _check_symmetric,
    pseudo_inverse,
    psd_sqrt,
)
from .metrics import cfred_unconditional_form, frechet_distance


def _stacked(cov_xx, cov_vv, cov_vx) -> np.ndarray:
    top = np.hstack([cov_xx, cov_vx.T])
    bottom = np.hstack([cov_vx, cov_vv])
    return np.vstack([top, bottom])


@dataclass(frozen=True)
class JointGaussianSpec:
    """Ground-truth block moments for (x, y) and (x, yhat)."""

    mean_x: np.ndarray
    mean_y: np.ndarray
    mean_yhat: np.ndarray
    cov_xx: np.ndarray
    cov_yy: np.ndarray
    cov_yhat: np.ndarray
    cov_yx: np.ndarray
    cov_yhatx: np.ndarray
    seed: int = 0

    def __post_init__(self):
        mean_x = np.asarray(self.mean_x, dtype=np.float64).reshape(-1)
        mean_y = np.asarray(self.mean_y, dtype=np.float64).reshape(-1)
        mean_yhat = np.asarray(self.mean_yhat, dtype=np.float64).reshape(-1)
        if mean_y.shape != mean_yhat.shape:
            raise DataError("mean_y and mean_yhat must share a dimension")
        cov_xx = _check_symmetric(self.cov_xx, "cov_xx")
        cov_yy = _check_symmetric(self.cov_yy, "cov_yy")
        cov_yhat = _check_symmetric(self.cov_yhat, "cov_yhat")
        cov_yx = np.asarray(self.cov_yx, dtype=np.float64)
        cov_yhatx = np.asarray(self.cov_yhatx, dtype=np.float64)
        d_x, d_y = mean_x.shape[0], mean_y.shape[0]
        if cov_yx.shape != (d_y, d_x) or cov_yhatx.shape != (d_y, d_x):
            raise DataError(f"cross blocks must be {d_y}x{d_x}")
        for cov_vv, cov_vx, name in (
            (cov_yy, cov_yx, "(x, y)"),
            (cov_yhat, cov_yhatx, "(x, yhat)"),
        ):
            stacked = _stacked(cov_xx, cov_vv, cov_vx)
            d = stacked.shape[0]
            eigvals = np.linalg.eigvalsh(stacked)
            threshold = -EIG_CLAMP_REL * max(float(np.trace(stacked)), 0.0) / d
            if float(eigvals[0]) < threshold:
                raise NotPSDError(
                    f"stacked covariance of {name} is not PSD "
                    f"(eigenvalue {float(eigvals[0])})",
                    worst_eigenvalue=float(eigvals[0]),
                )
        for field, value in (
            ("mean_x", mean_x),
            ("mean_y", mean_y),
            ("mean_yhat", mean_yhat),
            ("cov_xx", cov_xx),
            ("cov_yy", cov_yy),
            ("cov_yhat", cov_yhat),
            ("cov_yx", cov_yx),
            ("cov_yhatx", cov_yhatx),
        ):
            object.__setattr__(self, field, value)

    @property
    def dim_x(self) -> int:
        return self.mean_x.shape[0]

    @property
    def dim_y(self) -> int:
        return self.mean_y.shape[0]

    def real_moments(self) -> JointMoments:
        return JointMoments(self.mean_x, self.mean_y, self.cov_xx, self.cov_yy, self.cov_yx)

    def gen_moments(self) -> JointMoments:
        return JointMoments(
            self.mean_x, self.mean_yhat, self.cov_xx, self.cov_yhat, self.cov_yhatx
        )


def _stream(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.uint64(seed) * np.uint64(4) + np.uint64(index)))


def sample_joint(spec: JointGaussianSpec, n: int):
    """Draw n triples (x_i, y_i, yhat_i) with the spec's joint moments.

    y and yhat are built from x through the Gaussian regression
    decomposition v = mu_v + S_vx S_xx^+ (x - mu_x) + noise, with
    independent noise streams, so they are conditionally independent
    given x. Deterministic for a fixed spec seed.
    """
    if n < 2:
        raise DataError(f"need n >= 2 samples, got {n}")
    root_xx = psd_sqrt(spec.cov_xx)
    pinv_xx = pseudo_inverse(spec.cov_xx)

    eps_x = _stream(spec.seed, 0).standard_normal((n, spec.dim_x))
    x = spec.mean_x + eps_x @ root_xx

    def conditional_part(mean_v, cov_vv, cov_vx, stream_index):
        slope = cov_vx @ pinv_xx
        resid = cov_vv - slope @ cov_vx.T
        root_resid = psd_sqrt(0.5 * (resid + resid.T))
        eps = _stream(spec.seed, stream_index).standard_normal((n, mean_v.shape[0]))
        return mean_v + (x - spec.mean_x) @ slope.T + eps @ root_resid

    y = conditional_part(spec.mean_y, spec.cov_yy, spec.cov_yx, 1)
    yhat = conditional_part(spec.mean_yhat, spec.cov_yhat, spec.cov_yhatx, 2)
    return (
        FeatureMatrix(x.astype(np.float32)),
        FeatureMatrix(y.astype(np.float32)),
        FeatureMatrix(yhat.astype(np.float32)),
    )


def analytic_cfred(spec: JointGaussianSpec) -> float:
    """Conditional Frechet distance evaluated at the true parameters."""
    return cfred_unconditional_form(spec.real_moments(), spec.gen_moments())


def analytic_fd(spec: JointGaussianSpec) -> float:
    """Marginal Frechet distance between the spec's y and yhat Gaussians."""
    return frechet_distance(
        GaussianMoments(spec.mean_y, spec.cov_yy),
        GaussianMoments(spec.mean_yhat, spec.cov_yhat),
    )
