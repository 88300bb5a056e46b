"""Sparse-sensor reconstruction of rotating-blade deflection fields."""

from .azimuthal_rom import (AzimuthalRomModel, BinStatistics, bin_statistics,
                            evaluate_rom, fit_fourier, fit_rom, load_rom,
                            save_rom)
from .dataset import (BladeGrid, ConditionKey, SnapshotEnsemble, azimuth_bin,
                      load_case, load_torsion, save_case, smooth_wind,
                      wrap_angle)
from .decomposition import (LnmResult, ModalBasis, inner, lnm_amplitudes,
                            pod_fit, project, reconstruct)
from .errors import NumericalError, SchemaError, StageError, ValidationError
from .fusion import FusionStats, GaussianReduced, fuse
from .pipeline import PipelineConfig, run_pipeline
from .sensing import (NoiseModel, SensorSet, observe, place_sensors,
                      sparse_estimate)
from .spectral import psd
from .synthetic import (GroundTruth, SyntheticCaseSpec, TorsionTwin,
                        blade_demo_modes, demo_grid, demo_spec, generate_case,
                        orthonormal_polynomial_modes)
from .torsion import (TorsionModel, fit_torsion_map, infer_torsion,
                      load_torsion_model, save_torsion_model, torsion_pod)

__version__ = "0.1.0"
