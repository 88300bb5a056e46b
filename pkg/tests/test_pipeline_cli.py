import json

import numpy as np
import pytest

from bladesense.cli import main
from bladesense.pipeline import PipelineConfig, run_pipeline
from bladesense.errors import StageError, ValidationError

SYNTH_CONFIG = {
    "grid": {"n_z": 8, "L_b": 100.0},
    "training": [
        {"name": "tr_a", "u_mean": 8.4, "ti": 0.10, "seeds": [0, 1],
         "duration_s": 8.0, "f_s": 40.0},
        {"name": "tr_b", "u_mean": 10.6, "ti": 0.10, "seeds": [0],
         "duration_s": 8.0, "f_s": 40.0},
    ],
    "evaluation": [
        {"name": "ev", "u_mean": 10.6, "ti": 0.10, "seeds": [5],
         "duration_s": 5.0, "f_s": 40.0},
    ],
    "pipeline": {"noise": 0.1, "seed": 0},
}


@pytest.fixture(scope="session")
def quickstart(tmp_path_factory):
    root = tmp_path_factory.mktemp("quickstart")
    cfg = root / "synth.json"
    cfg.write_text(json.dumps(SYNTH_CONFIG))
    assert main(["synth", "--config", str(cfg), "--out", str(root / "cases"),
                 "--seed", "0"]) == 0
    pipeline_cfg = root / "cases" / "pipeline_config.json"
    out = root / "results"
    assert main(["pipeline", "--config", str(pipeline_cfg),
                 "--out", str(out)]) == 0
    return pipeline_cfg, out


class TestPipelineRun:
    def test_all_declared_artifacts_exist(self, quickstart):
        _, out = quickstart
        listing = json.loads((out / "artifacts.json").read_text())["files"]
        assert listing, "artifact index is empty"
        for name in listing:
            assert (out / name).exists(), name
        assert not (out / "FAILED").exists()

    def test_core_artifacts_present(self, quickstart):
        _, out = quickstart
        for name in ("modes.csv", "energies.csv", "sensors.csv", "rom.json",
                     "error_summary.json", "torsion_model.json",
                     "torsion_summary.json"):
            assert (out / name).exists(), name

    def test_tabular_artifacts_parse_numerically(self, quickstart):
        _, out = quickstart
        sensors = np.loadtxt(out / "sensors.csv", delimiter=",", skiprows=1,
                             ndmin=2)
        assert sensors.shape == (4, 3)
        assert np.all((sensors[:, 2] >= 0) & (sensors[:, 2] <= 1))
        energies = np.loadtxt(out / "energies.csv", delimiter=",", skiprows=1,
                              ndmin=2)
        assert np.all(np.diff(energies[:, 0]) == 1)  # mode index
        assert np.all(np.diff(energies[:, 1]) <= 0)  # non-increasing energy
        assert np.all(np.diff(energies[:, 2]) >= 0)  # cumulative fraction
        modes = np.loadtxt(out / "modes.csv", delimiter=",", skiprows=1,
                           ndmin=2)
        assert modes.shape[1] == 5  # mean column + 4 modes

    def test_every_svg_has_csv_twin(self, quickstart):
        _, out = quickstart
        svgs = list(out.glob("*.svg"))
        assert svgs
        for svg in svgs:
            assert svg.with_suffix(".csv").exists(), svg.name

    def test_error_summary_three_way_comparison(self, quickstart):
        _, out = quickstart
        summary = json.loads((out / "error_summary.json").read_text())
        assert summary["cases"]
        for case in summary["cases"].values():
            for station in case["stations"]:
                for comp in ("ux", "uy", "uz"):
                    rmse = station["rmse"][comp]
                    assert set(rmse) == {"sparse", "rom", "fused"}
                    assert all(v >= 0 for v in rmse.values())
            assert set(case["reduced_rmse"]) == {"sparse", "rom", "fused"}

    def test_trace_of_fused_covariance_logged(self, quickstart):
        _, out = quickstart
        recon = next(out.glob("recon_*.csv"))
        header = recon.read_text().splitlines()[0].split(",")
        assert "trace_fused_cov" in header
        col = header.index("trace_fused_cov")
        data = np.loadtxt(recon, delimiter=",", skiprows=1)
        assert np.all(data[:, col] >= 0.0)

    def test_determinism_byte_identical(self, quickstart, tmp_path):
        pipeline_cfg, out = quickstart
        out2 = tmp_path / "again"
        assert main(["pipeline", "--config", str(pipeline_cfg),
                     "--out", str(out2)]) == 0
        for name in json.loads((out / "artifacts.json").read_text())["files"]:
            assert (out / name).read_bytes() == (out2 / name).read_bytes(), name

    def test_stage_subcommands(self, quickstart, tmp_path):
        pipeline_cfg, _ = quickstart
        expectations = {
            "decompose": ["modes.csv", "energies.csv"],
            "sensors": ["sensors.csv"],
            "fit-rom": ["rom.json"],
            "estimate": ["error_summary.json"],
            "torsion": ["torsion_model.json", "torsion_summary.json"],
            "report": ["error_summary.json", "artifacts.json"],
        }
        for cmd, files in expectations.items():
            out = tmp_path / cmd
            assert main([cmd, "--config", str(pipeline_cfg),
                         "--out", str(out)]) == 0, cmd
            for name in files:
                assert (out / name).exists(), f"{cmd}: {name}"

    def test_pivot_scalar_flag(self, quickstart, tmp_path):
        pipeline_cfg, _ = quickstart
        out = tmp_path / "scalar"
        assert main(["sensors", "--config", str(pipeline_cfg),
                     "--out", str(out), "--pivot-scalar"]) == 0
        assert (out / "sensors.csv").exists()


class TestFailureModes:
    def test_missing_manifest_fails_before_compute(self, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({
            "training": ["missing_case.json"],
            "evaluation": ["missing_case.json"],
        }))
        assert main(["pipeline", "--config", str(cfg),
                     "--out", str(tmp_path / "out")]) == 2
        # validation precedes stage execution: no failure marker, no artifacts
        assert not (tmp_path / "out" / "FAILED").exists()

    def test_missing_config_flag(self):
        assert main(["pipeline"]) == 2

    def test_nonexistent_config_path(self, tmp_path):
        assert main(["pipeline", "--config", str(tmp_path / "none.json")]) == 2

    def test_numerical_error_exit_code(self, quickstart, tmp_path):
        pipeline_cfg, _ = quickstart
        doc = json.loads(pipeline_cfg.read_text())
        doc["lnm_frequencies"] = [1.0, 1.0 + 1e-9]  # collinear regressors
        bad_cfg = pipeline_cfg.parent / "bad_lnm.json"
        bad_cfg.write_text(json.dumps(doc))
        out = tmp_path / "out"
        assert main(["decompose", "--config", str(bad_cfg),
                     "--out", str(out)]) == 3
        marker = (out / "FAILED").read_text()
        assert "decompose" in marker

    def test_stage_error_carries_stage_name(self, quickstart, tmp_path):
        pipeline_cfg, _ = quickstart
        config = PipelineConfig.from_json(pipeline_cfg,
                                          out_dir=tmp_path / "o")
        config.n_sensors = 4
        config.noise = {"per_sensor": [np.eye(3).tolist()] * 3}  # wrong count
        with pytest.raises(StageError, match="sensors"):
            run_pipeline(config, plan="pipeline")
        assert (tmp_path / "o" / "FAILED").exists()


class TestConfigValidation:
    def test_n_modes_bounded_by_sensors(self, quickstart):
        pipeline_cfg, _ = quickstart
        doc = json.loads(pipeline_cfg.read_text())
        doc["n_modes"] = 6
        doc["n_sensors"] = 4
        bad = pipeline_cfg.parent / "bad_nm.json"
        bad.write_text(json.dumps(doc))
        with pytest.raises(ValidationError, match="n_sensors"):
            PipelineConfig.from_json(bad)

    def test_unknown_estimation_mode(self, quickstart):
        pipeline_cfg, _ = quickstart
        doc = json.loads(pipeline_cfg.read_text())
        doc["estimation_mode"] = "wild"
        bad = pipeline_cfg.parent / "bad_mode.json"
        bad.write_text(json.dumps(doc))
        with pytest.raises(ValidationError, match="estimation mode"):
            PipelineConfig.from_json(bad)
