"""Quasi-steady stochastic model of reduced coordinates over azimuth.

The rotor plane is split into uniform sectors; within each sector the
reduced coordinates collected over a whole operating condition (all seeds)
are summarized by their mean vector and covariance matrix. Every entry of
the mean and of the (unique upper-triangular) covariance entries is then
regressed onto a truncated Fourier series in azimuth, giving a smooth
periodic Gaussian prior conditioned on wind speed and turbulence intensity.

Covariances are the *centered* per-bin second moment with population
normalization; the non-centered variant (the raw second moment) is kept
behind ``centered=False`` for comparison. Evaluated covariances are
symmetrized and eigenvalue-clipped at zero, because fitting entries
independently does not preserve positive semi-definiteness between bins.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import TWO_PI, ConditionKey, azimuth_bin, wrap_angle
from .errors import ValidationError
from .fusion import GaussianReduced, clip_psd

#: Sector count giving 5-degree azimuthal resolution.
DEFAULT_N_THETA = 72
#: Fourier truncation order for mean and covariance entries.
DEFAULT_N_FOURIER = 6

#: Sentinel seed marking statistics aggregated over several realizations.
MERGED_SEED = -1


def bin_centers(n_theta: int) -> np.ndarray:
    return (np.arange(n_theta) + 0.5) * TWO_PI / n_theta


@dataclass
class BinStatistics:
    """Per-sector sample counts, mean vectors and covariance matrices.

    Empty sectors keep NaN statistics and a zero count; they are excluded
    from any downstream regression rather than treated as zeros. The
    condition's seed is ``MERGED_SEED`` when samples from several
    realizations were concatenated.
    """

    condition: ConditionKey
    n_theta: int
    counts: np.ndarray
    means: np.ndarray        # (n_theta, N)
    covariances: np.ndarray  # (n_theta, N, N)

    @property
    def occupied(self) -> np.ndarray:
        return self.counts > 0

    @property
    def n_modes(self) -> int:
        return self.means.shape[1]


def bin_statistics(a_series, theta_series, n_theta: int,
                   condition: ConditionKey | None = None,
                   centered: bool = True) -> BinStatistics:
    """Bin reduced coordinates by azimuth sector and summarize each bin.

    ``a_series`` is (N, n_t); ``theta_series`` the matching wrapped
    azimuths. Covariances use population normalization 1/n; with
    ``centered=False`` the raw (non-centered) second moment is stored
    instead.
    """
    a = np.atleast_2d(np.asarray(a_series, dtype=float))
    theta = np.asarray(theta_series, dtype=float)
    if a.shape[1] != theta.shape[0]:
        raise ValidationError(
            f"a_series has {a.shape[1]} samples but theta has {theta.shape[0]}"
        )
    n_modes = a.shape[0]
    idx = azimuth_bin(theta, n_theta)
    counts = np.bincount(idx, minlength=n_theta)
    means = np.full((n_theta, n_modes), np.nan)
    covs = np.full((n_theta, n_modes, n_modes), np.nan)
    for b in np.flatnonzero(counts):
        samples = a[:, idx == b]
        mu = samples.mean(axis=1)
        means[b] = mu
        centered_samples = samples - mu[:, None] if centered else samples
        covs[b] = (centered_samples @ centered_samples.T) / samples.shape[1]
    if condition is None:
        condition = ConditionKey(u_mean=1.0, ti=0.5, seed=MERGED_SEED)
    return BinStatistics(condition=condition, n_theta=n_theta,
                         counts=counts, means=means, covariances=covs)


def merge_condition_samples(parts) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate (a_series, theta_series) pairs from several seeds."""
    a = np.concatenate([np.atleast_2d(p[0]) for p in parts], axis=1)
    theta = np.concatenate([np.asarray(p[1], dtype=float) for p in parts])
    return a, theta


def fourier_design(theta, n_fourier: int) -> np.ndarray:
    """Regression matrix with columns (1, cos k*theta, sin k*theta)."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    cols = [np.ones_like(theta)]
    for k in range(1, n_fourier + 1):
        cols.append(np.cos(k * theta))
        cols.append(np.sin(k * theta))
    return np.column_stack(cols)


def fourier_eval(coeffs, theta):
    """Evaluate a truncated Fourier series; coeffs ordered (c0, c1, s1, ...).

    ``coeffs`` may be a single coefficient vector or a table with one series
    per row; theta may be scalar or array.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    n_fourier = (coeffs.shape[-1] - 1) // 2
    design = fourier_design(theta, n_fourier)
    out = coeffs @ design.T
    if np.isscalar(theta):
        return float(out) if coeffs.ndim == 1 else out[..., 0]
    return out


def fit_fourier(centers, values, n_fourier: int) -> tuple[np.ndarray, float]:
    """Ordinary least squares of per-bin scalars onto the Fourier regressors.

    Returns the coefficient vector (1 + 2*n_fourier,) and the residual norm.
    Requires at least as many bins as coefficients.
    """
    centers = np.asarray(centers, dtype=float)
    values = np.asarray(values, dtype=float)
    if centers.shape != values.shape or centers.ndim != 1:
        raise ValidationError("centers and values must be matching 1-D arrays")
    n_coeff = 1 + 2 * n_fourier
    if centers.size < n_coeff:
        raise ValidationError(
            f"need at least {n_coeff} non-empty bins for n_F={n_fourier}, "
            f"got {centers.size}"
        )
    design = fourier_design(centers, n_fourier)
    coeffs, _, _, _ = np.linalg.lstsq(design, values, rcond=None)
    residual = float(np.linalg.norm(design @ coeffs - values))
    return coeffs, residual


def _triu_index(n_modes: int):
    return np.triu_indices(n_modes)


@dataclass
class RomCondition:
    """Fourier coefficient tables of one (wind speed, TI) operating point."""

    u_mean: float
    ti: float
    mean_coeffs: np.ndarray  # (N, 1 + 2*n_F)
    cov_coeffs: np.ndarray   # (N*(N+1)/2, 1 + 2*n_F), row-major upper triangle


@dataclass
class AzimuthalRomModel:
    """Collection of per-condition Fourier tables plus evaluation metadata."""

    n_fourier: int
    n_theta: int
    conditions: list

    def __post_init__(self):
        for c in self.conditions:
            if not (np.all(np.isfinite(c.mean_coeffs))
                    and np.all(np.isfinite(c.cov_coeffs))):
                raise ValidationError(
                    f"non-finite ROM coefficients for (u={c.u_mean}, ti={c.ti})"
                )

    @property
    def n_modes(self) -> int:
        return self.conditions[0].mean_coeffs.shape[0]

    def ti_labels(self) -> np.ndarray:
        return np.unique([c.ti for c in self.conditions])


def fit_rom(stats_list, n_fourier: int = DEFAULT_N_FOURIER) -> AzimuthalRomModel:
    """Fit Fourier tables for every condition's binned statistics.

    One regression per mean entry and per unique covariance entry; empty
    bins are excluded. Errors from the underlying fits are re-raised with
    the condition and entry that produced them.
    """
    stats_list = list(stats_list)
    if not stats_list:
        raise ValidationError("no binned statistics supplied")
    n_theta = stats_list[0].n_theta
    conditions = []
    for st in stats_list:
        if st.n_theta != n_theta:
            raise ValidationError("all statistics must share the sector count")
        occ = st.occupied
        centers = bin_centers(n_theta)[occ]
        n_modes = st.n_modes
        label = f"(u={st.condition.u_mean}, ti={st.condition.ti})"
        mean_coeffs = np.zeros((n_modes, 1 + 2 * n_fourier))
        for n in range(n_modes):
            try:
                mean_coeffs[n], _ = fit_fourier(centers, st.means[occ, n], n_fourier)
            except ValidationError as err:
                raise ValidationError(f"{label} mean entry {n}: {err}") from err
        iu, ju = _triu_index(n_modes)
        cov_coeffs = np.zeros((iu.size, 1 + 2 * n_fourier))
        for r, (i, j) in enumerate(zip(iu, ju)):
            try:
                cov_coeffs[r], _ = fit_fourier(
                    centers, st.covariances[occ, i, j], n_fourier)
            except ValidationError as err:
                raise ValidationError(
                    f"{label} covariance entry ({i},{j}): {err}") from err
        conditions.append(RomCondition(
            u_mean=st.condition.u_mean, ti=st.condition.ti,
            mean_coeffs=mean_coeffs, cov_coeffs=cov_coeffs,
        ))
    conditions.sort(key=lambda c: (c.ti, c.u_mean))
    return AzimuthalRomModel(n_fourier=n_fourier, n_theta=n_theta,
                             conditions=conditions)


def evaluate_rom(model: AzimuthalRomModel, theta: float, u_filt: float,
                 ti: float) -> GaussianReduced:
    """Evaluate the prior Gaussian at an azimuth and operating point.

    The TI label is resolved to the nearest trained label; wind speed
    linearly interpolates the coefficient tables between the bracketing
    trained speeds (clamped at the range ends). The returned covariance is
    eigenvalue-clipped at zero.
    """
    if not model.conditions:
        raise ValidationError("ROM model has no trained conditions")
    theta = wrap_angle(float(theta))

    labels = model.ti_labels()
    ti_near = labels[int(np.argmin(np.abs(labels - ti)))]
    group = sorted((c for c in model.conditions if c.ti == ti_near),
                   key=lambda c: c.u_mean)
    speeds = np.array([c.u_mean for c in group])

    if u_filt <= speeds[0] or len(group) == 1:
        mean_tab, cov_tab = group[0].mean_coeffs, group[0].cov_coeffs
    elif u_filt >= speeds[-1]:
        mean_tab, cov_tab = group[-1].mean_coeffs, group[-1].cov_coeffs
    else:
        hi = int(np.searchsorted(speeds, u_filt))
        lo = hi - 1
        w = (u_filt - speeds[lo]) / (speeds[hi] - speeds[lo])
        mean_tab = (1 - w) * group[lo].mean_coeffs + w * group[hi].mean_coeffs
        cov_tab = (1 - w) * group[lo].cov_coeffs + w * group[hi].cov_coeffs

    mean = fourier_eval(mean_tab, theta)
    n_modes = mean_tab.shape[0]
    iu, ju = _triu_index(n_modes)
    cov = np.zeros((n_modes, n_modes))
    vals = fourier_eval(cov_tab, theta)
    cov[iu, ju] = vals
    cov[ju, iu] = vals
    return GaussianReduced(np.atleast_1d(mean), clip_psd(cov))


def save_rom(model: AzimuthalRomModel, path) -> None:
    """Persist the model as a single JSON document."""
    doc = {
        "n_F": model.n_fourier,
        "n_theta": model.n_theta,
        "conditions": [
            {
                "u_mean": c.u_mean,
                "ti": c.ti,
                "mean_coeffs": c.mean_coeffs.tolist(),
                "cov_coeffs": c.cov_coeffs.tolist(),
            }
            for c in model.conditions
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_rom(path) -> AzimuthalRomModel:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing ROM file: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    conditions = [
        RomCondition(
            u_mean=float(c["u_mean"]), ti=float(c["ti"]),
            mean_coeffs=np.asarray(c["mean_coeffs"], dtype=float),
            cov_coeffs=np.asarray(c["cov_coeffs"], dtype=float),
        )
        for c in doc["conditions"]
    ]
    return AzimuthalRomModel(n_fourier=int(doc["n_F"]),
                             n_theta=int(doc["n_theta"]),
                             conditions=conditions)
