"""Inference of sectional rotations from deflection coordinates.

Sectional rotation fields get their own POD basis; a per-condition linear
map sends deflection coordinates a(t) to torsional coordinates b(t). The
map depends on the operating point, so inference picks the nearest trained
condition (no interpolation between maps).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import BladeGrid, SnapshotEnsemble
from .decomposition import ModalBasis, pod_fit, write_modes_csv
from .errors import ValidationError

#: Torsional truncation: one more mode than the deflection basis.
DEFAULT_EXTRA_RANK = 1


def torsion_pod(tau_ensemble: SnapshotEnsemble, n_modes: int) -> ModalBasis:
    """POD basis of the sectional-rotation ensemble (delegates to pod_fit)."""
    return pod_fit(tau_ensemble, n_modes)


def fit_torsion_map(a_series, b_series) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares linear map M with b ~ M a; returns (M, per-row R^2).

    The minimum-norm solution is used, so coordinates of ``a`` that never
    move contribute zero columns. A rank-deficient coefficient series only
    triggers a warning, not an error.
    """
    A = np.atleast_2d(np.asarray(a_series, dtype=float))
    B = np.atleast_2d(np.asarray(b_series, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise ValidationError("a_series and b_series must share the time axis")
    if A.shape[1] < A.shape[0]:
        raise ValidationError("need at least as many samples as coordinates")
    M_t, _, rank, _ = np.linalg.lstsq(A.T, B.T, rcond=None)
    if rank < A.shape[0]:
        warnings.warn(
            f"deflection coordinates are rank deficient ({rank} < {A.shape[0]}); "
            "returning the minimum-norm map", stacklevel=2)
    M = M_t.T
    pred = M @ A
    ss_res = np.sum((B - pred) ** 2, axis=1)
    ss_tot = np.sum((B - B.mean(axis=1, keepdims=True)) ** 2, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = 1.0 - ss_res / ss_tot
    r2[ss_tot == 0.0] = np.where(ss_res[ss_tot == 0.0] <= 1e-30, 1.0, 0.0)
    return M, r2


@dataclass
class TorsionModel:
    """Torsional POD basis plus per-condition coupling maps keyed (u, ti)."""

    basis: ModalBasis
    maps: dict
    n_torsion: int

    def __post_init__(self):
        for key, M in self.maps.items():
            M = np.asarray(M, dtype=float)
            if M.shape[0] != self.n_torsion or not np.all(np.isfinite(M)):
                raise ValidationError(f"bad coupling map for condition {key}")
            self.maps[key] = M


def nearest_condition(maps: dict, u_mean: float, ti: float):
    """Nearest trained key: closest u_mean first, then closest ti."""
    if not maps:
        raise ValidationError("torsion model has no trained conditions")
    keys = list(maps.keys())
    du = np.array([abs(k[0] - u_mean) for k in keys])
    candidates = [k for k, d in zip(keys, du) if d == du.min()]
    return min(candidates, key=lambda k: (abs(k[1] - ti), k))


def infer_torsion(a, model: TorsionModel, condition) -> np.ndarray:
    """Torsion field tau = mean + Xi (M a) using the nearest trained map."""
    a = np.asarray(a, dtype=float)
    key = nearest_condition(model.maps, condition[0], condition[1])
    b = model.maps[key] @ a
    return model.basis.mean_field + model.basis.modes @ b


def save_torsion_model(model: TorsionModel, path, basis_filename=None) -> None:
    """Write the JSON document plus the referenced basis CSV next to it."""
    path = Path(path)
    basis_filename = basis_filename or (path.stem + "_basis.csv")
    write_modes_csv(model.basis, path.parent / basis_filename)
    doc = {
        "basis_file": basis_filename,
        "J": model.n_torsion,
        "conditions": [
            {"u_mean": k[0], "ti": k[1], "M": np.asarray(M).tolist()}
            for k, M in sorted(model.maps.items())
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_torsion_model(path, grid: BladeGrid) -> TorsionModel:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    table = np.loadtxt(path.parent / doc["basis_file"], delimiter=",",
                       skiprows=1, ndmin=2)
    mean_field = table[:, 0]
    modes = table[:, 1:]
    n_torsion = int(doc["J"])
    # energies are not persisted; store placeholder non-increasing values
    basis = ModalBasis(grid=grid, mean_field=mean_field, modes=modes,
                       energies=np.zeros(modes.shape[1]),
                       n_modes=modes.shape[1], total_energy=1.0)
    maps = {(float(c["u_mean"]), float(c["ti"])): np.asarray(c["M"], dtype=float)
            for c in doc["conditions"]}
    return TorsionModel(basis=basis, maps=maps, n_torsion=n_torsion)
