"""Shared helpers: independent oracles and small builders used across tests."""

import numpy as np
import pytest

from bladesense import BladeGrid, ModalBasis
from bladesense.decomposition import dof_weights


def dense_pod_oracle(D, grid):
    """Brute-force POD: eigendecomposition of the discrete autocorrelation
    operator with quadrature weights, independent of the SVD route.

    Returns (energies, modes) sorted by decreasing energy; mode columns are
    orthonormal under the discrete inner product, without any sign fixing.
    """
    w = dof_weights(grid)
    X = D - D.mean(axis=1, keepdims=True)
    corr = X @ X.T / X.shape[1]
    sym = np.sqrt(w)[:, None] * corr * np.sqrt(w)[None, :]
    eigs, vecs = np.linalg.eigh(sym)
    order = np.argsort(eigs)[::-1]
    return eigs[order], vecs[:, order] / np.sqrt(w)[:, None]


def align_sign(candidate, reference):
    """Flip candidate columns to the reference's sign for comparison."""
    out = candidate.copy()
    for n in range(out.shape[1]):
        if np.dot(out[:, n], reference[:, n]) < 0:
            out[:, n] = -out[:, n]
    return out


def basis_from_modes(grid, modes, mean_field=None, energies=None):
    """Wrap known orthonormal modes into a ModalBasis (for controlled tests)."""
    modes = np.asarray(modes, dtype=float)
    n = modes.shape[1]
    return ModalBasis(
        grid=grid,
        mean_field=np.zeros(grid.n_dof) if mean_field is None else mean_field,
        modes=modes,
        energies=np.zeros(n) if energies is None else np.asarray(energies, float),
        n_modes=n,
        total_energy=1.0,
    )


def random_spd(rng, n, scale=1.0):
    m = rng.standard_normal((n, n))
    return scale * (m @ m.T + n * np.eye(n) * 0.05)


@pytest.fixture
def uniform_grid():
    return BladeGrid(z_norm=np.linspace(0.0, 1.0, 6), length_m=100.0)
