"""Discrete inner product, POD of snapshot ensembles, and harmonic-mode fits.

The inner product between two stacked 3-component fields approximates the
length-normalized continuous one. On a uniform grid every station carries
weight 1/n_z; non-uniform grids fall back to trapezoidal weights on z/L_b
(both sets sum to one).

POD is computed through an SVD of the mean-centered, weight-scaled snapshot
matrix rather than by assembling the autocorrelation operator; the dense
eigendecomposition of that operator serves as the independent test oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import BladeGrid, SnapshotEnsemble
from .errors import NumericalError, ValidationError

_ORTHO_TOL = 1e-8


def station_weights(grid: BladeGrid) -> np.ndarray:
    """Quadrature weight per station; uniform 1/n_z on a uniform grid."""
    z = grid.z_norm
    dz = np.diff(z)
    if np.all(np.abs(dz - dz[0]) <= 1e-12):
        return np.full(grid.n_z, 1.0 / grid.n_z)
    w = np.zeros(grid.n_z)
    w[:-1] += 0.5 * dz
    w[1:] += 0.5 * dz
    return w


def dof_weights(grid: BladeGrid) -> np.ndarray:
    """Station weights tiled over the (x-block, y-block, z-block) row order."""
    return np.tile(station_weights(grid), 3)


def inner(v1, v2, grid: BladeGrid) -> float:
    """Discrete inner product of two stacked field vectors.

    Symmetric, bilinear, and positive semi-definite; unit-norm fields have
    inner(v, v) == 1.
    """
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    if v1.shape != (grid.n_dof,) or v2.shape != (grid.n_dof,):
        raise ValidationError(
            f"fields must have shape ({grid.n_dof},), got {v1.shape} and {v2.shape}"
        )
    return float(np.sum(v1 * v2 * dof_weights(grid)))


def _fix_signs(modes: np.ndarray) -> np.ndarray:
    """Flip columns so each mode's largest-magnitude entry is positive."""
    out = modes.copy()
    for n in range(out.shape[1]):
        i = int(np.argmax(np.abs(out[:, n])))
        if out[i, n] < 0:
            out[:, n] = -out[:, n]
    return out


@dataclass
class ModalBasis:
    """Mean field plus orthonormal spatial modes ranked by captured energy.

    Attributes
    ----------
    grid : BladeGrid
    mean_field : (3*n_z,) time-average of the ensemble
    modes : (3*n_z, N) columns orthonormal under :func:`inner`
    energies : (N,) non-increasing modal energies (m^2)
    n_modes : truncation order N
    total_energy : total fluctuation energy of the source ensemble, used for
        cumulative-fraction reporting
    """

    grid: BladeGrid
    mean_field: np.ndarray
    modes: np.ndarray
    energies: np.ndarray
    n_modes: int
    total_energy: float = field(default=0.0)

    def __post_init__(self):
        self.mean_field = np.asarray(self.mean_field, dtype=float)
        self.modes = np.asarray(self.modes, dtype=float)
        self.energies = np.asarray(self.energies, dtype=float)
        n_dof = self.grid.n_dof
        if self.mean_field.shape != (n_dof,):
            raise ValidationError("mean_field has wrong length")
        if self.modes.shape != (n_dof, self.n_modes):
            raise ValidationError("modes must be (3*n_z, N)")
        if self.energies.shape != (self.n_modes,):
            raise ValidationError("energies must have length N")
        if np.any(self.energies < -1e-14) or np.any(np.diff(self.energies) > 1e-14):
            raise ValidationError("energies must be non-negative and non-increasing")
        w = dof_weights(self.grid)
        gram = self.modes.T @ (self.modes * w[:, None])
        if not np.allclose(gram, np.eye(self.n_modes), atol=_ORTHO_TOL):
            raise ValidationError("mode columns are not orthonormal under inner()")
        if self.total_energy == 0.0:
            self.total_energy = float(np.sum(self.energies))


def pod_fit(ensemble: SnapshotEnsemble, n_modes: int) -> ModalBasis:
    """Fit a POD basis to a snapshot ensemble.

    Parameters
    ----------
    ensemble : SnapshotEnsemble
        Snapshot matrix D of shape (3*n_z, n_t); the row-mean is removed
        before the decomposition.
    n_modes : int
        Truncation order N, with 1 <= N <= min(3*n_z, n_t).

    Returns
    -------
    ModalBasis
        Modes orthonormal under the discrete inner product, energies
        lambda_n = s_n^2 / n_t sorted non-increasing, and a deterministic
        sign convention (largest-magnitude entry positive).
    """
    D = ensemble.D
    n_dof, n_t = D.shape
    if not 1 <= n_modes <= min(n_dof, n_t):
        raise ValidationError(
            f"n_modes must be in [1, {min(n_dof, n_t)}], got {n_modes}"
        )
    mean_field = D.mean(axis=1)
    X = D - mean_field[:, None]
    sqrt_w = np.sqrt(dof_weights(ensemble.grid))
    U, s, _ = np.linalg.svd(X * sqrt_w[:, None], full_matrices=False)
    energies_all = s**2 / n_t
    modes = _fix_signs(U[:, :n_modes] / sqrt_w[:, None])
    return ModalBasis(
        grid=ensemble.grid,
        mean_field=mean_field,
        modes=modes,
        energies=energies_all[:n_modes],
        n_modes=n_modes,
        total_energy=float(energies_all.sum()),
    )


def project(fields, basis: ModalBasis) -> np.ndarray:
    """Reduced coordinates: a_n = inner(field - mean_field, phi_n).

    Accepts a single field (3*n_z,) or a matrix of column fields
    (3*n_z, n_t); the result has matching shape (N,) or (N, n_t).
    """
    fields = np.asarray(fields, dtype=float)
    single = fields.ndim == 1
    cols = fields[:, None] if single else fields
    if cols.shape[0] != basis.grid.n_dof:
        raise ValidationError(
            f"field must have {basis.grid.n_dof} rows, got {cols.shape[0]}"
        )
    w = dof_weights(basis.grid)
    a = basis.modes.T @ ((cols - basis.mean_field[:, None]) * w[:, None])
    return a[:, 0] if single else a


def reconstruct(a, basis: ModalBasis, covariance=None):
    """Full field from reduced coordinates, optionally with a variance field.

    Returns mean_field + modes @ a. When a reduced covariance is supplied
    the pointwise variance diag(Phi Sigma Phi^T) is returned alongside as
    ``(field, variance)``.
    """
    a = np.asarray(a, dtype=float)
    if a.shape != (basis.n_modes,):
        raise ValidationError(f"a must have length {basis.n_modes}")
    fld = basis.mean_field + basis.modes @ a
    if covariance is None:
        return fld
    cov = np.asarray(covariance, dtype=float)
    if cov.shape != (basis.n_modes, basis.n_modes):
        raise ValidationError("covariance must be N x N")
    eigs = np.linalg.eigvalsh(0.5 * (cov + cov.T))
    if eigs.min() < -1e-8 * max(np.trace(cov), 1e-300):
        raise ValidationError("covariance is not positive semi-definite")
    var = np.einsum("ij,jk,ik->i", basis.modes, cov, basis.modes)
    return fld, var


@dataclass
class LnmResult:
    """Spatial shapes and amplitudes extracted at prescribed frequencies.

    ``shapes`` columns are unit-norm under the discrete inner product (zero
    when the record carries no energy at that frequency); ``amplitudes`` are
    the root-sum-square of the cosine/sine pair at each frequency.
    """

    frequencies: np.ndarray
    shapes: np.ndarray
    amplitudes: np.ndarray

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, dtype=float)
        self.shapes = np.asarray(self.shapes, dtype=float)
        self.amplitudes = np.asarray(self.amplitudes, dtype=float)
        if np.any(self.amplitudes < 0):
            raise ValidationError("amplitudes must be non-negative")


def lnm_amplitudes(ensemble: SnapshotEnsemble, frequencies) -> LnmResult:
    """Least-squares extraction of harmonic spatial structures from data.

    Given natural frequencies (rad/s), the temporal regressors are the
    unit-norm cos/sin pair at each frequency sampled on the record's time
    axis. The snapshot matrix is regressed onto those columns; spatial
    shapes are normalized under the discrete inner product and per-frequency
    amplitudes are the root-sum-square of the two column amplitudes.

    Parameters
    ----------
    ensemble : SnapshotEnsemble
    frequencies : sequence of float
        Distinct angular frequencies, each below pi*f_s (two samples per
        period).

    Raises
    ------
    NumericalError
        If the regressor Gram matrix has condition number above 1e12
        (frequencies too close for the record length).
    """
    freqs = np.atleast_1d(np.asarray(frequencies, dtype=float))
    if freqs.size == 0:
        raise ValidationError("need at least one frequency")
    if np.unique(freqs).size != freqs.size:
        raise ValidationError("frequencies must be distinct")
    if np.any(freqs <= 0):
        raise ValidationError("frequencies must be positive")
    if np.any(freqs >= np.pi * ensemble.f_s):
        raise ValidationError(
            "need at least 2 samples per period of the highest frequency"
        )

    t = ensemble.t
    cols = []
    for w in freqs:
        for wave in (np.cos(w * t), np.sin(w * t)):
            cols.append(wave / np.linalg.norm(wave))
    psi = np.column_stack(cols)

    gram = psi.T @ psi
    if np.linalg.cond(gram) > 1e12:
        raise NumericalError(
            "harmonic regressors are nearly collinear; use a longer record "
            "or better-separated frequencies"
        )
    coeffs = np.linalg.solve(gram, psi.T @ ensemble.D.T).T  # (3*n_z, 2*n_hat)

    grid = ensemble.grid
    shapes = np.zeros((grid.n_dof, freqs.size))
    amplitudes = np.zeros(freqs.size)
    for n in range(freqs.size):
        pair = coeffs[:, 2 * n : 2 * n + 2]
        norms = np.array([np.sqrt(max(inner(pair[:, j], pair[:, j], grid), 0.0))
                          for j in range(2)])
        amplitudes[n] = float(np.hypot(norms[0], norms[1]))
        if amplitudes[n] > 1e-300:
            j = int(np.argmax(norms))
            shapes[:, n] = pair[:, j] / norms[j]
    shapes = _fix_signs(shapes)
    return LnmResult(frequencies=freqs, shapes=shapes, amplitudes=amplitudes)


def write_modes_csv(basis: ModalBasis, path) -> None:
    """Export mean field and modes, one column per mode after the mean."""
    names = ["mean"] + [f"mode_{n + 1}" for n in range(basis.n_modes)]
    table = np.column_stack([basis.mean_field, basis.modes])
    np.savetxt(path, table, fmt="%.17e", delimiter=",",
               header=",".join(names), comments="")


def write_energies_csv(basis: ModalBasis, path) -> None:
    """Export (n, lambda, cumulative_fraction) rows."""
    total = basis.total_energy if basis.total_energy > 0 else 1.0
    cum = np.cumsum(basis.energies) / total
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("n,lambda,cumulative_fraction\n")
        for n in range(basis.n_modes):
            fh.write(f"{n + 1},{float(basis.energies[n])!r},{float(cum[n])!r}\n")
