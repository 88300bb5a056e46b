"""Sensor placement by greedy pivoted QR and estimation from sparse readings.

A physical sensor at one station reports all three displacement components,
so the default pivoting candidate is the station: one candidate column per
station, stacking that station's three modal rows. Pivoting over single
scalar degrees of freedom instead is available as ``pivot="scalar"`` for
experimentation.

Measurement vectors group components per sensor: for placed stations
(s_1, s_2, ...) the layout is (ux(s_1), uy(s_1), uz(s_1), ux(s_2), ...),
matching the block-diagonal assembly of per-sensor noise covariances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decomposition import ModalBasis
from .errors import NumericalError, ValidationError
from .fusion import GaussianReduced

_COND_LIMIT = 1e12


def sensor_dof_rows(station_indices, n_z: int) -> np.ndarray:
    """Row indices into a stacked field for per-sensor (x, y, z) grouping."""
    stations = np.asarray(station_indices, dtype=int)
    return np.ravel(np.column_stack([stations, stations + n_z, stations + 2 * n_z]))


@dataclass(frozen=True)
class SensorSet:
    """Ordered optimal sensor stations plus the basis sampled at them.

    ``station_indices`` are sorted most-important-first (pivot order);
    ``sampled_basis`` holds the exact modal rows at those stations,
    3 rows per sensor.
    """

    station_indices: np.ndarray
    locations_norm: np.ndarray
    sampled_basis: np.ndarray
    sampled_mean: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "station_indices",
                           np.asarray(self.station_indices, dtype=int))
        if np.unique(self.station_indices).size != self.station_indices.size:
            raise ValidationError("sensor stations must be distinct")

    @property
    def n_sensors(self) -> int:
        return self.station_indices.size


@dataclass(frozen=True)
class NoiseModel:
    """Per-sensor 3x3 noise covariances and their block-diagonal assembly."""

    per_sensor: tuple
    assembled: np.ndarray
    _factor: np.ndarray

    @classmethod
    def from_matrices(cls, matrices) -> "NoiseModel":
        mats = []
        for p, m in enumerate(matrices):
            m = np.asarray(m, dtype=float)
            if m.shape != (3, 3):
                raise ValidationError(f"sensor {p}: covariance must be 3x3")
            if not np.allclose(m, m.T, atol=1e-12 * max(1.0, np.abs(m).max())):
                raise ValidationError(f"sensor {p}: covariance must be symmetric")
            m = 0.5 * (m + m.T)
            if np.linalg.eigvalsh(m).min() < -1e-12 * max(np.trace(m), 1e-300):
                raise ValidationError(f"sensor {p}: covariance must be PSD")
            mats.append(m)
        n = 3 * len(mats)
        assembled = np.zeros((n, n))
        factor = np.zeros((n, n))
        for p, m in enumerate(mats):
            sl = slice(3 * p, 3 * p + 3)
            assembled[sl, sl] = m
            eigs, vecs = np.linalg.eigh(m)
            factor[sl, sl] = vecs * np.sqrt(np.clip(eigs, 0.0, None))
        return cls(per_sensor=tuple(mats), assembled=assembled, _factor=factor)

    @classmethod
    def isotropic(cls, sigma: float, n_sensors: int) -> "NoiseModel":
        """Same scalar standard deviation on every component of every sensor."""
        if sigma < 0:
            raise ValidationError("sigma must be non-negative")
        return cls.from_matrices([np.eye(3) * sigma**2] * n_sensors)

    @classmethod
    def from_config(cls, spec, n_sensors: int) -> "NoiseModel":
        """Build from a JSON-style spec: scalar sigma or per-sensor matrices."""
        if isinstance(spec, (int, float)):
            return cls.isotropic(float(spec), n_sensors)
        if isinstance(spec, dict):
            if "sigma" in spec:
                return cls.isotropic(float(spec["sigma"]), n_sensors)
            if "per_sensor" in spec:
                mats = spec["per_sensor"]
                if len(mats) != n_sensors:
                    raise ValidationError(
                        f"noise config lists {len(mats)} sensors, expected {n_sensors}"
                    )
                return cls.from_matrices(mats)
        raise ValidationError("noise config must be a sigma or per-sensor matrices")


def _greedy_pivots(candidates: np.ndarray, count: int) -> list[int]:
    """Column-pivoted QR selection: repeatedly take the column with the
    largest residual norm (exact ties resolved to the lowest index) and
    deflate the remainder against it."""
    resid = candidates.astype(float).copy()
    n_cols = resid.shape[1]
    chosen: list[int] = []
    for _ in range(count):
        norms = np.linalg.norm(resid, axis=0)
        norms[chosen] = -1.0
        j = int(np.argmax(norms))  # argmax takes the first maximum: lowest index
        if norms[j] <= 0.0:
            # remaining candidates are numerically dependent; still pick the
            # lowest unselected index to honor the ordering contract
            j = min(set(range(n_cols)) - set(chosen))
        chosen.append(j)
        q = resid[:, j]
        nq = np.linalg.norm(q)
        if nq > 0.0:
            q = q / nq
            resid -= np.outer(q, q @ resid)
    return chosen


def place_sensors(basis: ModalBasis, n_sensors: int,
                  pivot: str = "station") -> SensorSet:
    """Choose sensor stations by rank-revealing QR on the modal basis.

    Parameters
    ----------
    basis : ModalBasis
    n_sensors : int
        Number of sensors n_P, between 1 and n_z. The working default is
        n_P = N.
    pivot : {"station", "scalar"}
        "station" pivots whole stations (each candidate column stacks the
        three component rows of one station). "scalar" pivots single
        degrees of freedom and maps each pivot back to its station,
        skipping stations already selected.

    Returns
    -------
    SensorSet
        Stations in decreasing order of importance.
    """
    n_z = basis.grid.n_z
    if not 1 <= n_sensors <= n_z:
        raise ValidationError(f"n_sensors must be in [1, {n_z}]")
    phi = basis.modes
    if pivot == "station":
        # candidate column i = modal rows of station i, all three components
        cands = np.concatenate(
            [phi[0 * n_z:1 * n_z].T, phi[1 * n_z:2 * n_z].T, phi[2 * n_z:3 * n_z].T],
            axis=0,
        )
        stations = _greedy_pivots(cands, n_sensors)
    elif pivot == "scalar":
        order = _greedy_pivots(phi.T, min(3 * n_z, 3 * n_sensors + 2 * n_z))
        stations = []
        for dof in order:
            s = dof % n_z
            if s not in stations:
                stations.append(s)
            if len(stations) == n_sensors:
                break
        if len(stations) < n_sensors:
            raise ValidationError("scalar pivoting could not fill the sensor count")
    else:
        raise ValidationError(f"unknown pivot mode: {pivot!r}")

    stations = np.asarray(stations, dtype=int)
    rows = sensor_dof_rows(stations, n_z)
    return SensorSet(
        station_indices=stations,
        locations_norm=basis.grid.z_norm[stations],
        sampled_basis=phi[rows, :],
        sampled_mean=basis.mean_field[rows],
    )


def observe(field, sensors: SensorSet, noise: NoiseModel | None = None,
            rng_seed=None) -> np.ndarray:
    """Sample a full field at the sensor stations, optionally adding noise.

    ``rng_seed`` may be an int or a numpy Generator (useful for streaming
    loops); the draw is deterministic for a fixed seed.
    """
    field = np.asarray(field, dtype=float)
    if field.ndim != 1 or field.shape[0] % 3 != 0:
        raise ValidationError("field must be a stacked 3-component vector")
    n_z = field.shape[0] // 3
    y = field[sensor_dof_rows(sensors.station_indices, n_z)].copy()
    if noise is not None:
        if len(noise.per_sensor) != sensors.n_sensors:
            raise ValidationError("noise model size differs from sensor count")
        rng = (rng_seed if isinstance(rng_seed, np.random.Generator)
               else np.random.default_rng(rng_seed))
        y += noise._factor @ rng.standard_normal(y.size)
    return y


def sparse_estimate(y, sensors: SensorSet, noise: NoiseModel,
                    mode: str = "gram_corrected") -> GaussianReduced:
    """Reduced coordinates (with covariance) from one measurement vector.

    gram_corrected solves the least-squares problem (S^T S)^-1 S^T, exact
    for noise-free data at full column rank; direct_projection applies the
    plain sampled projection (1/n_P) S^T, the literal discrete analogue of
    projecting observed fields on observed bases. In both modes the noise
    covariance propagates through the linear map actually applied:
    Sigma = G Gamma G^T.
    """
    y = np.asarray(y, dtype=float)
    S = sensors.sampled_basis
    if y.shape != (S.shape[0],):
        raise ValidationError(f"measurement must have length {S.shape[0]}")
    y_c = y - sensors.sampled_mean
    if mode == "gram_corrected":
        u, s, vt = np.linalg.svd(S, full_matrices=False)
        if s.min() <= 0 or s.max() / s.min() > _COND_LIMIT:
            raise NumericalError(
                "sampled basis is rank deficient; choose a different sensor set"
            )
        G = (vt.T / s) @ u.T
    elif mode == "direct_projection":
        G = S.T / sensors.n_sensors
    else:
        raise ValidationError(f"unknown estimation mode: {mode!r}")
    a = G @ y_c
    cov = G @ noise.assembled @ G.T
    return GaussianReduced(a, cov)


def write_sensors_csv(sensors: SensorSet, path) -> None:
    """Export (rank, station_index, z_norm) rows, most important first."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("rank,station_index,z_norm\n")
        for r, (i, z) in enumerate(zip(sensors.station_indices,
                                       sensors.locations_norm), start=1):
            fh.write(f"{r},{i},{float(z)!r}\n")
