import numpy as np
import pytest

from bladesense import (fit_torsion_map, infer_torsion, load_torsion_model,
                        save_torsion_model, torsion_pod)
from bladesense.errors import ValidationError
from bladesense.synthetic import demo_grid, orthonormal_polynomial_modes
from bladesense.torsion import TorsionModel, nearest_condition

from conftest import align_sign, basis_from_modes, dense_pod_oracle


class TestFitTorsionMap:
    def test_exact_linear_relation_recovered(self):
        rng = np.random.default_rng(0)
        M0 = rng.standard_normal((5, 4))
        a = rng.standard_normal((4, 200))
        M, r2 = fit_torsion_map(a, M0 @ a)
        assert np.allclose(M, M0, atol=1e-10)
        assert np.allclose(r2, 1.0, atol=1e-10)

    def test_independent_target_has_no_fit(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((4, 10**4))
        b = rng.standard_normal((3, 10**4))
        _, r2 = fit_torsion_map(a, b)
        assert np.all(r2 < 0.1)

    def test_zero_coordinate_gives_zero_column(self):
        rng = np.random.default_rng(2)
        a = rng.standard_normal((3, 100))
        a[1, :] = 0.0
        with pytest.warns(UserWarning, match="rank deficient"):
            M, _ = fit_torsion_map(a, rng.standard_normal((2, 100)))
        assert np.allclose(M[:, 1], 0.0, atol=1e-12)

    def test_rank_deficiency_warns(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((3, 100))
        a[2, :] = a[1, :]  # dependent coordinates
        with pytest.warns(UserWarning, match="rank deficient"):
            fit_torsion_map(a, rng.standard_normal((2, 100)))

    def test_scale_equivariance(self):
        rng = np.random.default_rng(4)
        a = rng.standard_normal((3, 120))
        b = rng.standard_normal((4, 120))
        M1, _ = fit_torsion_map(a, b)
        M2, _ = fit_torsion_map(2.5 * a, b)
        assert np.allclose(M2, M1 / 2.5, atol=1e-12)

    def test_refit_consistency(self):
        rng = np.random.default_rng(5)
        M0 = rng.standard_normal((4, 3))
        a = rng.standard_normal((3, 150))
        M1, _ = fit_torsion_map(a, M0 @ a)
        M2, _ = fit_torsion_map(a, M1 @ a)
        assert np.allclose(M1, M2, atol=1e-10)

    def test_too_few_samples(self):
        with pytest.raises(ValidationError):
            fit_torsion_map(np.zeros((4, 3)), np.zeros((2, 3)))


class TestInferTorsion:
    def _model(self):
        grid = demo_grid(n_z=6)
        modes = orthonormal_polynomial_modes(grid, 3)
        basis = basis_from_modes(grid, modes,
                                 mean_field=np.linspace(0, 0.2, grid.n_dof))
        maps = {
            (8.0, 0.05): np.zeros((3, 2)),
            (12.0, 0.05): np.ones((3, 2)),
            (12.0, 0.15): 2 * np.ones((3, 2)),
        }
        return TorsionModel(basis=basis, maps=maps, n_torsion=3)

    def test_zero_map_returns_mean(self):
        model = self._model()
        out = infer_torsion(np.array([1.0, 2.0]), model, (8.0, 0.05))
        assert np.allclose(out, model.basis.mean_field)

    def test_nearest_condition_selection(self):
        model = self._model()
        assert nearest_condition(model.maps, 8.5, 0.10) == (8.0, 0.05)
        assert nearest_condition(model.maps, 11.0, 0.14) == (12.0, 0.15)
        assert nearest_condition(model.maps, 12.0, 0.05) == (12.0, 0.05)

    def test_untrained_wind_speed_uses_nearest(self):
        model = self._model()
        a = np.array([0.5, -0.5])
        out_near = infer_torsion(a, model, (9.2, 0.05))
        out_lo = infer_torsion(a, model, (8.0, 0.05))
        assert np.array_equal(out_near, out_lo)

    def test_empty_model_rejected(self):
        model = self._model()
        model.maps.clear()
        with pytest.raises(ValidationError, match="no trained conditions"):
            infer_torsion(np.zeros(2), model, (10.0, 0.1))

    def test_construct_and_recover_roundtrip(self):
        rng = np.random.default_rng(9)
        grid = demo_grid(n_z=8)
        xi = orthonormal_polynomial_modes(grid, 3)
        basis = basis_from_modes(grid, xi)
        M0 = rng.standard_normal((3, 2))
        a_series = rng.standard_normal((2, 300))
        tau = xi @ (M0 @ a_series)  # zero-mean torsion field
        b_series = xi.T @ (tau * np.tile(np.full(grid.n_z, 1 / grid.n_z), 3)[:, None])
        M, _ = fit_torsion_map(a_series, b_series)
        model = TorsionModel(basis=basis, maps={(10.0, 0.1): M}, n_torsion=3)
        for k in range(0, 300, 50):
            field = infer_torsion(a_series[:, k], model, (10.0, 0.1))
            assert np.allclose(field, tau[:, k], atol=1e-8)


class TestTorsionPod:
    def test_matches_dense_oracle(self, uniform_grid):
        import bladesense
        rng = np.random.default_rng(11)
        D = rng.standard_normal((uniform_grid.n_dof, 30))
        n_t = D.shape[1]
        ens = bladesense.SnapshotEnsemble(
            grid=uniform_grid, D=D, t=np.arange(n_t) / 10.0,
            theta=np.zeros(n_t), omega=np.ones(n_t),
            u_raw=np.full(n_t, 9.0), u_filt=np.full(n_t, 9.0),
            condition=bladesense.ConditionKey(9.0, 0.1, 0), f_s=10.0)
        basis = torsion_pod(ens, 5)
        eigs, modes = dense_pod_oracle(D, uniform_grid)
        assert np.allclose(basis.energies, eigs[:5], rtol=1e-10, atol=1e-14)
        aligned = align_sign(modes[:, :5], basis.modes)
        assert np.allclose(aligned, basis.modes, atol=1e-10)


class TestPersistence:
    def test_save_load_roundtrip(self, tmp_path):
        grid = demo_grid(n_z=6)
        modes = orthonormal_polynomial_modes(grid, 3)
        basis = basis_from_modes(grid, modes)
        maps = {(10.0, 0.1): np.arange(6, dtype=float).reshape(3, 2)}
        model = TorsionModel(basis=basis, maps=maps, n_torsion=3)
        path = tmp_path / "torsion.json"
        save_torsion_model(model, path)
        back = load_torsion_model(path, grid)
        assert back.n_torsion == 3
        assert np.allclose(back.maps[(10.0, 0.1)], maps[(10.0, 0.1)])
        assert np.allclose(back.basis.modes, basis.modes, atol=1e-15)
