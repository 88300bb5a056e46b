"""Optimal covariance-weighted combination of two reduced-space Gaussians.

The fused estimate weights prior and measurement by their covariances:

    K       = S_prior (S_prior + S_meas)^-1
    a_fused = a_prior + K (a_meas - a_prior)
    S_fused = (I - K) S_prior

which minimizes the trace of the fused covariance. The gain is recomputed
per call; with N ~ 4 the inversion cost is negligible and the prior
covariance varies with azimuth anyway.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


def clip_psd(cov: np.ndarray) -> np.ndarray:
    """Symmetrize and clip negative eigenvalues so eigvalsh reports >= 0.

    Reconstruction after clipping can itself leave an eigenvalue a few ulp
    below zero, so the result is nudged by a diagonal shift until the
    reported spectrum is clean.
    """
    cov = 0.5 * (cov + cov.T)
    eigs, vecs = np.linalg.eigh(cov)
    if eigs.min() < 0.0:
        cov = (vecs * np.clip(eigs, 0.0, None)) @ vecs.T
        cov = 0.5 * (cov + cov.T)
    # eigvalsh (no vectors) is the arbiter: different LAPACK drivers can
    # disagree by a few ulp around zero. The shift must be at least one ulp
    # of the diagonal scale or the addition would not change the matrix.
    for _ in range(8):
        low = np.linalg.eigvalsh(cov).min()
        if low >= 0.0:
            break
        delta = max(-2.0 * low, np.spacing(np.abs(np.diag(cov)).max()))
        cov = cov + delta * np.eye(cov.shape[0])
    return cov


@dataclass
class GaussianReduced:
    """Mean/covariance pair in reduced modal coordinates.

    The covariance is symmetrized on construction; eigenvalues below
    -1e-10 * trace are rejected, small negative ones are clipped to zero.
    """

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.asarray(self.covariance, dtype=float)
        n = self.mean.size
        if cov.shape != (n, n):
            raise ValidationError(
                f"covariance must be {n}x{n}, got {cov.shape}"
            )
        cov = 0.5 * (cov + cov.T)
        eigs = np.linalg.eigvalsh(cov)
        scale = max(np.trace(cov), 1e-300)
        if eigs.min() < -1e-10 * scale:
            raise ValidationError(
                f"covariance not PSD: min eigenvalue {eigs.min():.3e}"
            )
        if eigs.min() < 0.0:
            cov = clip_psd(cov)
        self.covariance = cov

    @property
    def n(self) -> int:
        return self.mean.size


@dataclass
class FusionStats:
    """Running counters surfaced by the pipeline."""

    steps: int = 0
    regularized: int = 0


def fuse(prior: GaussianReduced, measurement: GaussianReduced,
         stats: FusionStats | None = None) -> tuple[GaussianReduced, np.ndarray]:
    """Fuse a prior and a measurement Gaussian; returns (fused, gain).

    A nearly singular innovation covariance (min eigenvalue below
    1e-14 * trace) is regularized with 1e-12 * trace on the diagonal and
    counted in ``stats.regularized``; this occurs when both sources claim
    near-zero variance, e.g. from sparsely populated training bins.
    """
    if prior.n != measurement.n:
        raise ValidationError(
            f"dimension mismatch: prior has {prior.n}, measurement {measurement.n}"
        )
    n = prior.n
    s_sum = prior.covariance + measurement.covariance
    tr = float(np.trace(s_sum))
    if stats is not None:
        stats.steps += 1
    if tr <= 0.0:
        # both sources fully certain: keep the prior, zero covariance
        gain = np.zeros((n, n))
        return GaussianReduced(prior.mean.copy(), np.zeros((n, n))), gain
    if np.linalg.eigvalsh(s_sum).min() <= 1e-14 * tr:
        s_sum = s_sum + (1e-12 * tr) * np.eye(n)
        if stats is not None:
            stats.regularized += 1
    # K = S_prior (S_prior + S_meas)^-1, via a solve on the symmetric sum
    gain = np.linalg.solve(s_sum, prior.covariance).T
    mean = prior.mean + gain @ (measurement.mean - prior.mean)
    cov = (np.eye(n) - gain) @ prior.covariance
    cov = 0.5 * (cov + cov.T)
    return GaussianReduced(mean, cov), gain
