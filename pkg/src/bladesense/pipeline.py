"""End-to-end orchestration: decompose, place, fit, stream-estimate, report.

The estimation loop is streaming: at every time step the sensors are
sampled (with noise), the reduced coordinates are inferred, the azimuthal
prior is evaluated at the current angle and filtered wind speed, and the
two Gaussians are fused. Batch reporting (spectra, histograms, azimuthal
curves, coupling scatter) runs afterwards on the recorded traces.

Every figure-type artifact is emitted as an SVG plus a CSV twin holding the
exact plotted numbers; an ``artifacts.json`` index lists everything
written. A stage failure leaves a ``FAILED`` marker naming the stage.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import azimuthal_rom as rom_mod
from . import svgplot
from .azimuthal_rom import (AzimuthalRomModel, bin_statistics, bin_centers,
                            evaluate_rom, fit_rom, merge_condition_samples,
                            save_rom)
from .dataset import ConditionKey, SnapshotEnsemble, load_case, load_torsion
from .decomposition import (ModalBasis, lnm_amplitudes, pod_fit, project,
                            write_energies_csv, write_modes_csv)
from .errors import StageError, ValidationError
from .fusion import FusionStats, fuse
from .sensing import (NoiseModel, place_sensors, observe, sensor_dof_rows,
                      sparse_estimate, write_sensors_csv)
from .spectral import DEFAULT_SMOOTH, psd
from .torsion import TorsionModel, fit_torsion_map, infer_torsion, \
    save_torsion_model, torsion_pod

_COMPONENTS = ("ux", "uy", "uz")
_SOURCES = ("sparse", "rom", "fused")


@dataclass
class PipelineConfig:
    """Validated run settings; defaults follow the working configuration."""

    training: list
    evaluation: list
    out_dir: Path
    n_modes: int = 4
    n_sensors: int = 4
    n_theta: int = rom_mod.DEFAULT_N_THETA
    n_fourier: int = rom_mod.DEFAULT_N_FOURIER
    noise: object = 0.1
    estimation_mode: str = "gram_corrected"
    pivot: str = "station"
    centered_covariance: bool = True
    observation_fractions: tuple = (0.44, 0.68, 0.88)
    lnm_frequencies: tuple = ()
    torsion_rank: int | None = None
    seed: int = 0

    def validate(self) -> None:
        if not self.training:
            raise ValidationError("config lists no training cases")
        if not self.evaluation:
            raise ValidationError("config lists no evaluation cases")
        for p in list(self.training) + list(self.evaluation):
            if not Path(p).exists():
                raise ValidationError(f"referenced manifest does not exist: {p}")
        if self.n_modes < 1:
            raise ValidationError("n_modes must be >= 1")
        if self.n_modes > self.n_sensors:
            raise ValidationError("n_modes must not exceed n_sensors")
        if self.estimation_mode not in ("gram_corrected", "direct_projection"):
            raise ValidationError(f"unknown estimation mode {self.estimation_mode!r}")
        if self.pivot not in ("station", "scalar"):
            raise ValidationError(f"unknown pivot mode {self.pivot!r}")

    @classmethod
    def from_json(cls, path, seed=None, out_dir=None, pivot=None) -> "PipelineConfig":
        path = Path(path)
        if not path.exists():
            raise ValidationError(f"config file does not exist: {path}")
        with open(path, "r", encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as err:
                raise ValidationError(f"{path}: invalid JSON ({err})") from err
        base = path.parent

        def _paths(key):
            return [base / p for p in doc.get(key, [])]

        cfg = cls(
            training=_paths("training"),
            evaluation=_paths("evaluation"),
            out_dir=Path(out_dir) if out_dir else base / doc.get("out_dir", "results"),
            n_modes=int(doc.get("n_modes", 4)),
            n_sensors=int(doc.get("n_sensors", 4)),
            n_theta=int(doc.get("n_theta", rom_mod.DEFAULT_N_THETA)),
            n_fourier=int(doc.get("n_fourier", rom_mod.DEFAULT_N_FOURIER)),
            noise=doc.get("noise", 0.1),
            estimation_mode=doc.get("estimation_mode", "gram_corrected"),
            pivot=pivot or doc.get("pivot", "station"),
            centered_covariance=bool(doc.get("centered_covariance", True)),
            observation_fractions=tuple(doc.get("observation_fractions",
                                                (0.44, 0.68, 0.88))),
            lnm_frequencies=tuple(doc.get("lnm_frequencies", ())),
            torsion_rank=doc.get("torsion_rank"),
            seed=int(doc.get("seed", 0)) if seed is None else int(seed),
        )
        cfg.validate()
        return cfg


@dataclass
class _Context:
    config: PipelineConfig
    train: list = field(default_factory=list)       # (case_id, ensemble)
    evaluation: list = field(default_factory=list)  # (case_id, ensemble)
    basis: ModalBasis | None = None
    sensors: object = None
    noise_model: NoiseModel | None = None
    stats_list: list = field(default_factory=list)
    rom: AzimuthalRomModel | None = None
    fusion_stats: FusionStats = field(default_factory=FusionStats)
    traces: dict = field(default_factory=dict)      # case_id -> per-case arrays
    summary: dict = field(default_factory=dict)
    torsion_model: TorsionModel | None = None
    artifacts: list = field(default_factory=list)

    def emit(self, name: str) -> Path:
        self.artifacts.append(name)
        return self.config.out_dir / name


def _pooled(cases) -> SnapshotEnsemble:
    """Concatenate training ensembles into one matrix with a rebuilt clock."""
    first = cases[0][1]
    D = np.hstack([e.D for _, e in cases])
    n = D.shape[1]
    return SnapshotEnsemble(
        grid=first.grid, D=D, t=np.arange(n) / first.f_s,
        theta=np.concatenate([e.theta for _, e in cases]),
        omega=np.concatenate([e.omega for _, e in cases]),
        u_raw=np.concatenate([e.u_raw for _, e in cases]),
        u_filt=np.concatenate([e.u_filt for _, e in cases]),
        condition=first.condition, f_s=first.f_s,
    )


def _stage_load(ctx: _Context) -> None:
    for group, paths in (("train", ctx.config.training),
                         ("evaluation", ctx.config.evaluation)):
        for p in paths:
            grid, ensemble = load_case(p)
            getattr(ctx, group).append((Path(p).stem, ensemble))
    z0 = ctx.train[0][1].grid.z_norm
    for _, e in ctx.train + ctx.evaluation:
        if e.grid.z_norm.shape != z0.shape or np.any(e.grid.z_norm != z0):
            raise ValidationError("all cases must share the same grid")


def _stage_decompose(ctx: _Context) -> None:
    ctx.basis = pod_fit(_pooled(ctx.train), ctx.config.n_modes)
    write_modes_csv(ctx.basis, ctx.emit("modes.csv"))
    write_energies_csv(ctx.basis, ctx.emit("energies.csv"))
    if ctx.config.lnm_frequencies:
        _, e = ctx.train[0]
        centered = replace(e, D=e.D - e.D.mean(axis=1, keepdims=True))
        res = lnm_amplitudes(centered, ctx.config.lnm_frequencies)
        with open(ctx.emit("lnm_amplitudes.csv"), "w", encoding="utf-8") as fh:
            fh.write("n,omega_rad_s,amplitude\n")
            for n, (w, s) in enumerate(zip(res.frequencies, res.amplitudes), 1):
                fh.write(f"{n},{float(w)!r},{float(s)!r}\n")
        names = [f"shape_{n + 1}" for n in range(res.frequencies.size)]
        np.savetxt(ctx.emit("lnm_shapes.csv"), res.shapes, fmt="%.17e",
                   delimiter=",", header=",".join(names), comments="")


def _stage_sensors(ctx: _Context) -> None:
    ctx.sensors = place_sensors(ctx.basis, ctx.config.n_sensors,
                                pivot=ctx.config.pivot)
    ctx.noise_model = NoiseModel.from_config(ctx.config.noise,
                                             ctx.config.n_sensors)
    write_sensors_csv(ctx.sensors, ctx.emit("sensors.csv"))


def _stage_fit_rom(ctx: _Context) -> None:
    groups: dict = {}
    for _, e in ctx.train:
        a = project(e.D, ctx.basis)
        key = (e.condition.u_mean, e.condition.ti)
        groups.setdefault(key, []).append((a, e.theta))
    ctx.stats_list = []
    for (u_mean, ti), parts in sorted(groups.items()):
        a_all, theta_all = merge_condition_samples(parts)
        ctx.stats_list.append(bin_statistics(
            a_all, theta_all, ctx.config.n_theta,
            condition=ConditionKey(u_mean=u_mean, ti=ti,
                                   seed=rom_mod.MERGED_SEED),
            centered=ctx.config.centered_covariance,
        ))
    ctx.rom = fit_rom(ctx.stats_list, ctx.config.n_fourier)
    save_rom(ctx.rom, ctx.emit("rom.json"))


def _observation_stations(ctx: _Context) -> np.ndarray:
    z = ctx.basis.grid.z_norm
    return np.array([int(np.argmin(np.abs(z - f)))
                     for f in ctx.config.observation_fractions], dtype=int)


def _stage_estimate(ctx: _Context) -> None:
    cfg = ctx.config
    n_modes = cfg.n_modes
    obs_stations = _observation_stations(ctx)
    n_z = ctx.basis.grid.n_z
    obs_rows = sensor_dof_rows(obs_stations, n_z)
    cases_summary = {}
    for idx, (case_id, e) in enumerate(ctx.evaluation):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, idx]))
        n_t = e.n_t
        A = {src: np.empty((n_modes, n_t)) for src in _SOURCES}
        trace_fused = np.empty(n_t)
        for k in range(n_t):
            y = observe(e.D[:, k], ctx.sensors, ctx.noise_model, rng)
            meas = sparse_estimate(y, ctx.sensors, ctx.noise_model,
                                   cfg.estimation_mode)
            prior = evaluate_rom(ctx.rom, e.theta[k], e.u_filt[k],
                                 e.condition.ti)
            fused, _ = fuse(prior, meas, ctx.fusion_stats)
            A["sparse"][:, k] = meas.mean
            A["rom"][:, k] = prior.mean
            A["fused"][:, k] = fused.mean
            trace_fused[k] = np.trace(fused.covariance)

        a_proj = project(e.D, ctx.basis)
        mean_obs = ctx.basis.mean_field[obs_rows][:, None]
        phi_obs = ctx.basis.modes[obs_rows, :]
        fields = {src: mean_obs + phi_obs @ A[src] for src in _SOURCES}
        true_obs = e.D[obs_rows, :]

        names = ["t", "theta", "trace_fused_cov"]
        cols = [e.t, e.theta, trace_fused]
        for s_i, station in enumerate(obs_stations):
            for c_i, comp in enumerate(_COMPONENTS):
                row = 3 * s_i + c_i
                names.append(f"{comp}_s{station:03d}_true")
                cols.append(true_obs[row])
                for src in _SOURCES:
                    names.append(f"{comp}_s{station:03d}_{src}")
                    cols.append(fields[src][row])
        np.savetxt(ctx.emit(f"recon_{case_id}.csv"), np.column_stack(cols),
                   fmt="%.17e", delimiter=",", header=",".join(names),
                   comments="")

        stations_out = []
        for s_i, station in enumerate(obs_stations):
            rmse = {}
            for c_i, comp in enumerate(_COMPONENTS):
                row = 3 * s_i + c_i
                rmse[comp] = {
                    src: float(np.sqrt(np.mean(
                        (fields[src][row] - true_obs[row]) ** 2)))
                    for src in _SOURCES
                }
            stations_out.append({
                "station_index": int(station),
                "z_norm": float(ctx.basis.grid.z_norm[station]),
                "rmse": rmse,
            })
        reduced = {src: [float(r) for r in
                         np.sqrt(np.mean((A[src] - a_proj) ** 2, axis=1))]
                   for src in _SOURCES}
        reduced_total = {src: float(np.sqrt(np.mean((A[src] - a_proj) ** 2)))
                         for src in _SOURCES}
        cases_summary[case_id] = {
            "n_steps": int(n_t),
            "stations": stations_out,
            "reduced_rmse": reduced,
            "reduced_rmse_total": reduced_total,
        }
        ctx.traces[case_id] = {
            "A": A, "a_proj": a_proj, "trace_fused": trace_fused,
            "true_obs": true_obs, "fields": fields,
            "obs_stations": obs_stations, "ensemble": e,
        }

    ctx.summary = {
        "cases": cases_summary,
        "fusion": {"steps": ctx.fusion_stats.steps,
                   "regularized": ctx.fusion_stats.regularized},
        "settings": {
            "n_modes": cfg.n_modes, "n_sensors": cfg.n_sensors,
            "n_theta": cfg.n_theta, "n_fourier": cfg.n_fourier,
            "estimation_mode": cfg.estimation_mode, "pivot": cfg.pivot,
            "seed": cfg.seed,
        },
    }
    with open(ctx.emit("error_summary.json"), "w", encoding="utf-8") as fh:
        json.dump(ctx.summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _stage_torsion(ctx: _Context) -> None:
    def _manifest_has_torsion(path) -> bool:
        with open(path, "r", encoding="utf-8") as fh:
            return "torsion_file" in json.load(fh)

    train_tau = [(Path(p).stem, load_torsion(p)) for p in ctx.config.training
                 if _manifest_has_torsion(p)]
    if not train_tau:
        return
    rank = ctx.config.torsion_rank or ctx.config.n_modes + 1
    tau_basis = torsion_pod(_pooled(train_tau), rank)

    groups: dict = {}
    by_id = dict(ctx.train)
    for case_id, tau_e in train_tau:
        a = project(by_id[case_id].D, ctx.basis)
        b = project(tau_e.D, tau_basis)
        key = (tau_e.condition.u_mean, tau_e.condition.ti)
        groups.setdefault(key, []).append((a, b))
    maps = {}
    fit_quality = {}
    for key, parts in sorted(groups.items()):
        a_all = np.hstack([p[0] for p in parts])
        b_all = np.hstack([p[1] for p in parts])
        M, r2 = fit_torsion_map(a_all, b_all)
        maps[key] = M
        fit_quality[f"u={key[0]},ti={key[1]}"] = [float(v) for v in r2]
    ctx.torsion_model = TorsionModel(basis=tau_basis, maps=maps,
                                     n_torsion=rank)
    save_torsion_model(ctx.torsion_model, ctx.emit("torsion_model.json"),
                       basis_filename="torsion_basis.csv")
    ctx.artifacts.append("torsion_basis.csv")

    eval_summary = {}
    obs_stations = _observation_stations(ctx)
    obs_rows = sensor_dof_rows(obs_stations, ctx.basis.grid.n_z)
    for case_id, e in ctx.evaluation:
        manifest = next(p for p in ctx.config.evaluation
                        if Path(p).stem == case_id)
        if not _manifest_has_torsion(manifest):
            continue
        tau_e = load_torsion(manifest)
        a_series = ctx.traces[case_id]["A"]["fused"] if case_id in ctx.traces \
            else project(e.D, ctx.basis)
        cond = (e.condition.u_mean, e.condition.ti)
        tau_hat = np.column_stack([
            infer_torsion(a_series[:, k], ctx.torsion_model, cond)
            for k in range(a_series.shape[1])
        ])
        true_obs = tau_e.D[obs_rows, :]
        est_obs = tau_hat[obs_rows, :]
        names, cols = ["t", "theta"], [e.t, e.theta]
        per_station = []
        for s_i, station in enumerate(obs_stations):
            comp_stats = {}
            for c_i, comp in enumerate(("taux", "tauy", "tauz")):
                row = 3 * s_i + c_i
                names.append(f"{comp}_s{station:03d}_true")
                cols.append(true_obs[row])
                names.append(f"{comp}_s{station:03d}_fused")
                cols.append(est_obs[row])
                resid = est_obs[row] - true_obs[row]
                ss_tot = float(np.sum((true_obs[row] - true_obs[row].mean()) ** 2))
                r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 0.0
                comp_stats[comp] = {
                    "rmse": float(np.sqrt(np.mean(resid ** 2))),
                    "r_squared": r2,
                }
            per_station.append({"station_index": int(station),
                                "components": comp_stats})
        np.savetxt(ctx.emit(f"torsion_recon_{case_id}.csv"),
                   np.column_stack(cols), fmt="%.17e", delimiter=",",
                   header=",".join(names), comments="")
        eval_summary[case_id] = per_station

    with open(ctx.emit("torsion_summary.json"), "w", encoding="utf-8") as fh:
        json.dump({"fit_r_squared": fit_quality, "evaluation": eval_summary},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")


def _fd_edges(x: np.ndarray) -> np.ndarray:
    """Freedman-Diaconis bin edges with degenerate-data fallbacks."""
    x = np.asarray(x, dtype=float)
    lo, hi = float(x.min()), float(x.max())
    if hi <= lo:
        return np.array([lo - 0.5, lo + 0.5])
    q75, q25 = np.percentile(x, [75.0, 25.0])
    iqr = q75 - q25
    if iqr <= 0:
        n_bins = max(1, int(np.ceil(np.sqrt(x.size))))
    else:
        width = 2.0 * iqr / np.cbrt(x.size)
        n_bins = int(np.clip(np.ceil((hi - lo) / width), 1, 200))
    return np.linspace(lo, hi, n_bins + 1)


def _write_table(path, names, cols) -> None:
    np.savetxt(path, np.column_stack(cols), fmt="%.17e", delimiter=",",
               header=",".join(names), comments="")


def _stage_report(ctx: _Context) -> None:
    case_id, e = ctx.evaluation[0]
    trace = ctx.traces[case_id]
    n_z = e.grid.n_z
    f_1p = float(np.mean(e.omega)) / (2.0 * np.pi)

    # spectra of the tip signals, raw and smoothed
    tip = n_z - 1
    for c_i, comp in enumerate(_COMPONENTS):
        signal = e.D[c_i * n_z + tip, :]
        f_hat, raw = psd(signal, e.f_s, f_1p, smooth=None)
        if signal.size >= DEFAULT_SMOOTH[0]:
            _, smoothed = psd(signal, e.f_s, f_1p, smooth=DEFAULT_SMOOTH)
        else:
            smoothed = raw
        base = f"psd_{case_id}_{comp}"
        _write_table(ctx.emit(base + ".csv"),
                     ["f_hat", "power_raw", "power_smoothed"],
                     [f_hat, raw, smoothed])
        svgplot.line_plot(
            ctx.emit(base + ".svg"),
            [("raw", f_hat, raw), ("smoothed", f_hat, smoothed)],
            title=f"PSD of tip {comp} ({case_id})",
            xlabel="f / f1P", ylabel="power", log_y=True)

    # histograms of true vs fused at the first observation station
    station = int(trace["obs_stations"][0])
    for c_i, comp in enumerate(_COMPONENTS):
        true_sig = trace["true_obs"][c_i]
        fused_sig = trace["fields"]["fused"][c_i]
        edges = _fd_edges(np.concatenate([true_sig, fused_sig]))
        h_true, _ = np.histogram(true_sig, bins=edges)
        h_fused, _ = np.histogram(fused_sig, bins=edges)
        base = f"hist_{case_id}_{comp}"
        _write_table(ctx.emit(base + ".csv"),
                     ["bin_left", "bin_right", "count_true", "count_fused"],
                     [edges[:-1], edges[1:], h_true, h_fused])
        svgplot.histogram_plot(
            ctx.emit(base + ".svg"), edges,
            [("true", h_true), ("fused", h_fused)],
            title=f"{comp} at station {station} ({case_id})",
            xlabel=f"{comp} (m)")

    # azimuthal mean +/- sigma: binned data against the fitted model
    st = ctx.stats_list[0]
    centers = bin_centers(st.n_theta)
    occ = st.occupied
    rom_eval = [evaluate_rom(ctx.rom, th, st.condition.u_mean,
                             st.condition.ti) for th in centers]
    for n in range(ctx.config.n_modes):
        data_mean = st.means[occ, n]
        data_std = np.sqrt(np.maximum(st.covariances[occ, n, n], 0.0))
        rom_mean = np.array([g.mean[n] for g in rom_eval])
        rom_std = np.array([np.sqrt(max(g.covariance[n, n], 0.0))
                            for g in rom_eval])
        base = f"azimuthal_mode{n + 1}"
        _write_table(ctx.emit(base + ".csv"),
                     ["theta_center", "data_mean", "data_std",
                      "rom_mean", "rom_std"],
                     [centers[occ], data_mean, data_std,
                      rom_mean[occ], rom_std[occ]])
        svgplot.line_plot(
            ctx.emit(base + ".svg"),
            [("data mean", centers[occ], data_mean),
             ("data +1s", centers[occ], data_mean + data_std),
             ("data -1s", centers[occ], data_mean - data_std),
             ("model mean", centers[occ], rom_mean[occ]),
             ("model +1s", centers[occ], rom_mean[occ] + rom_std[occ]),
             ("model -1s", centers[occ], rom_mean[occ] - rom_std[occ])],
            title=f"Azimuthal statistics, mode {n + 1}",
            xlabel="theta (rad)", ylabel=f"a_{n + 1}")

    # modal coupling scatter (out-of-phase pairs), subsampled for the SVG
    a_proj = trace["a_proj"]
    pairs = [(0, 1)]
    if ctx.config.n_modes >= 4:
        pairs += [(0, 3), (1, 3)]
    stride = max(1, a_proj.shape[1] // 2000)
    for i, j in pairs:
        xi, yj = a_proj[i, ::stride], a_proj[j, ::stride]
        base = f"coupling_{case_id}_a{i + 1}_a{j + 1}"
        _write_table(ctx.emit(base + ".csv"),
                     [f"a{i + 1}", f"a{j + 1}"], [xi, yj])
        svgplot.scatter_plot(ctx.emit(base + ".svg"), xi, yj,
                             title=f"a{i + 1} vs a{j + 1} ({case_id})",
                             xlabel=f"a{i + 1}", ylabel=f"a{j + 1}")

    # reconstruction trace at the first observation station, flapwise
    base = f"trace_{case_id}_ux"
    series = [("true", e.t, trace["true_obs"][0])]
    series += [(src, e.t, trace["fields"][src][0]) for src in _SOURCES]
    _write_table(ctx.emit(base + ".csv"),
                 ["t", "true", "sparse", "rom", "fused"],
                 [e.t, trace["true_obs"][0], trace["fields"]["sparse"][0],
                  trace["fields"]["rom"][0], trace["fields"]["fused"][0]])
    svgplot.line_plot(ctx.emit(base + ".svg"), series,
                      title=f"ux at station {int(trace['obs_stations'][0])} "
                            f"({case_id})",
                      xlabel="t (s)", ylabel="ux (m)")


def _stage_index(ctx: _Context) -> None:
    listing = sorted(set(ctx.artifacts))
    with open(ctx.config.out_dir / "artifacts.json", "w",
              encoding="utf-8") as fh:
        json.dump({"files": listing}, fh, indent=2, sort_keys=True)
        fh.write("\n")


_STAGES = {
    "load": _stage_load,
    "decompose": _stage_decompose,
    "sensors": _stage_sensors,
    "fit-rom": _stage_fit_rom,
    "estimate": _stage_estimate,
    "torsion": _stage_torsion,
    "report": _stage_report,
    "index": _stage_index,
}

COMMAND_PLANS = {
    "decompose": ("load", "decompose", "index"),
    "sensors": ("load", "decompose", "sensors", "index"),
    "fit-rom": ("load", "decompose", "fit-rom", "index"),
    "estimate": ("load", "decompose", "sensors", "fit-rom", "estimate",
                 "index"),
    "torsion": ("load", "decompose", "torsion", "index"),
    "report": ("load", "decompose", "sensors", "fit-rom", "estimate",
               "report", "index"),
    "pipeline": ("load", "decompose", "sensors", "fit-rom", "estimate",
                 "torsion", "report", "index"),
}


def run_pipeline(config: PipelineConfig, plan: str = "pipeline") -> dict:
    """Run the stages of ``plan`` and return a result summary.

    On any stage failure a ``FAILED`` marker naming the stage is written to
    the output directory and a :class:`StageError` wrapping the original
    exception is raised.
    """
    config.validate()
    if plan not in COMMAND_PLANS:
        raise ValidationError(f"unknown plan {plan!r}")
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    marker = out / "FAILED"
    if marker.exists():
        marker.unlink()
    ctx = _Context(config=config)
    for name in COMMAND_PLANS[plan]:
        try:
            _STAGES[name](ctx)
        except Exception as err:
            with open(marker, "w", encoding="utf-8") as fh:
                fh.write(f"stage: {name}\nerror: {err}\n")
            raise StageError(name, err) from err
    return {
        "out_dir": str(out),
        "artifacts": sorted(set(ctx.artifacts)),
        "summary": ctx.summary,
    }
