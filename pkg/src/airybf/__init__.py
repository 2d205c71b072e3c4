"""Obstructed near-field propagation and Airy-beamforming transmission simulator."""

__version__ = "0.1.0"

from .errors import ConfigError, NumericalError
from .scene import (ArrayGeometry, Obstacle, PropagationGrid, Scenario, Scene,
                    load_scenario, make_grid, scenario_from_dict, wavelength_from_ghz)
from .propagation import (ChannelMatrix, FieldPlane, GainMap, TransferSpectrum,
                          asm_step, build_kernel, channel_matrix, deposit, field_map,
                          load_channel, march, propagate, rs_step_direct, save_channel)
from .wavefront import (AiryParams, Codebook, CodebookSpec, Codeword, airy_ai,
                        airy_amplitude, airy_codeword, build_codebook, decay_grid,
                        export_codebook, focused_codeword, focusing_phase, radius_grid,
                        scaling_grid, steered_codeword, theta_grid)
from .hybrid import (AltminResult, DftDictionary, HybridBeamformer, OmpResult,
                     altmin_analog, dft_dictionary, effective_channel, export_beamformer,
                     omp_codeword, phase_project, power_allocate, zf_digital)
from .training import (BeamSelection, TrainingConfig, UserSelection, exhaustive_search,
                       export_selection, hierarchical_search, measure_power, sweep_powers,
                       training_overhead)
from .evaluation import (RATE_CSV_HEADER, RateReport, baseline_pipeline, gain_bound,
                         mrt_codeword, perfect_csi_digital, perfect_csi_hybrid, sum_rate,
                         target_matrix, user_rate)
