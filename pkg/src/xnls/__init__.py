"""Spectral solver for nonlinear Schrodinger models driven by a rapidly
oscillating Coulomb potential, and for their time-averaged limits."""

from .grid import Grid
from .errors import (ConfigError, DivergingFlowError, GroundStateError,
                     NumericalBreakdownError, SuiteFailure,
                     UnexpectedBlowupError, XnlsError)
from .spectral import (fft_forward, fft_inverse, gauge_inverse, gauge_transform,
                       gaussian_mollify, hartree_potential, kinetic_propagate,
                       l2_norm, spectral_translate)
from .potentials import (PotentialSpec, ShiftSpec, averaged_coulomb_field,
                         averaged_counterpart, averaged_lattice_field,
                         averaged_trap_field, b_of_t, fast_counterpart,
                         lattice_field, mollified_coulomb_at,
                         mollified_coulomb_field, step_time_integral, trap_field)
from .bloch import (BlochBandTable, bloch_decompose, bloch_reconstruct,
                    bloch_step, build_band_table, write_band_csv)
from .diagnostics import (BlowupDetector, DiagnosticsRecord, RunRecord,
                          compute_diagnostics, convergence_rates, h1_seminorm,
                          mass, run_distance, window_average)
from .propagator import (EvolutionConfig, EvolutionState, evolve, lie_step,
                         potential_phase_step, strang_step)
from .groundstate import GroundStateResult, imaginary_time_ground_state
from .scenarios import (ScenarioConfig, load_scenario, parse_scenario,
                        run_blowup_suite, run_convergence_suite,
                        run_lattice_scenario, run_scenario,
                        run_stability_sweep, run_td_scenario,
                        run_trap_scenario, scenario_to_dict)

__version__ = "0.1.0"
