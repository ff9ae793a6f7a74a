"""squeezebeam: 1-D coupled-mode simulation of atom-laser outcoupling from a
Bose-Einstein condensate by a quantized optical probe, with quantum-statistics
transfer observables."""

__version__ = "1.0.0"

from .model import (AdiabaticityWarning, ComplexField, CoupledModeModel, DetectorSpec,
                    DetuningBreakdown, Grid, GridTooNarrowError, PhysicalParams,
                    build_model, calibrate_kappa, condensate_ground_state,
                    coupling_profile, momentum_transfer, optimal_pump_rabi_estimate,
                    probe_input_amplitude, recoil_velocity, resonance_detuning,
                    transit_time, trap_width)
from .dynamics import (BoundaryContactWarning, EvolutionConfig, ModePairState,
                       NonFiniteFieldError, ProbeStepWarning, Trajectory, atomic_rhs,
                       evolve, initial_state, resolve_gauge, rk4_time_step,
                       solve_probe_envelope)
from .observables import (BeamStatistics, CoherentState, CommutatorResidual, DirectMoments,
                          FockState, OpticalMoments, OpticalStateSpec,
                          SqueezedCoherentState, TransferFractionWarning, TruncationError,
                          VacuumInputError, attenuation_factor, beam_statistics,
                          commutator_residual, densities, detector_fraction, fano,
                          optical_moments, optical_moments_fock_basis)
from .experiment import (Scenario, ScenarioError, ScenarioResult, SweepRecord, SweepResult,
                         SweepSpec, min_vfock_over_time, reference_scenario, run_scenario,
                         scenario_with_value, sweep)
from .config import (ConfigDocument, ConfigError, parse_config, parse_optical_state,
                     serialize, to_scenario, to_sweep_spec)

__all__ = [name for name in dir() if not name.startswith("_")]
