"""Near-field array localization and sensing toolkit.

Simulation of spherical-wavefront array snapshots for fixed and moving
targets, subspace and filtering estimators, and theoretical accuracy and
resolution limits, all behind a deterministic seeded harness.
"""

__version__ = "0.1.0"

from .geometry import (ArrayGeometry, SymmetricULA, Waveform, symmetric_ula, ula,
                       SPEED_OF_LIGHT)
from .model import (MotionState, NoiseModel, SnapshotMatrix, TargetState,
                    doppler_vector, exact_distance, far_field_steering,
                    farfield_distance, fraunhofer_distance, fresnel_distance,
                    fresnel_validity_radius, near_field_steering,
                    radiating_field_gain, synthesize_fixed, synthesize_moving)
from .grids import LocationGrid, SpectrumGrid
from .subspace import (CovarianceEstimate, SubspaceDecomposition, eig_decompose,
                       estimate_num_targets, find_peaks, fit_subspace_multi,
                       music_spectrum_noise, sample_covariance, spectrum_single)
from .symmetric import modified_music
from .tracking import (FilterState, Measurement, ekf_step, estimate_source_signal,
                       observation_at,
                       jacobian_obs, jacobian_state, kalman_gain_gd,
                       moving_dml_single, observation_fn, state_transition, track)
from .analysis import (CrbResult, ambiguity, crb_bounds, crb_r, crb_theta,
                       fim_numerical, fresnel_integrals,
                       hpmw_direction, hpmw_distance, lambda1, lambda2,
                       threshold_distance)
from .scenario import Scenario, parse_scenario
from .runner import run

__all__ = [name for name in dir() if not name.startswith("_")]
