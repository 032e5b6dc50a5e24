"""Fast, calibratable energy model for MVMs on 1T1R RRAM crossbars."""

__version__ = "0.1.0"

from .cellmodel import (CalibrationFit, CellModel, PulseSpec, cell_pulse_energy,
                        fit_cell_params, load_cell_model, store_cell_model)
from .encoding import PulseTrain, Signedness, decode_accumulate, encode_inputs
from .energy import EnergyReport, mvm_energy, per_mac_energy
from .errors import (CalibrationError, CalibrationQualityError, ConvergenceError, DecodeError,
                     DomainError, FitError, SchemaError, XbarError)
from .mapping import (ConductanceTile, MappingKind, MappingScheme, decode_weights, map_bias,
                      map_differential, map_weights, scale_factor)
from .mvmunit import (MvmRequest, XbarOp, analog_readout, execute_mvm, prepare, run_vectors,
                      tile_matrix)
from .solver import (CrossbarCircuit, SolveResult, build_circuit, equivalent_conductance,
                     solve_dense_oracle, solve_fast)
from .workload import ConvSpec, gen_synthetic_weights, gen_validation_set, im2col

__all__ = [
    "CalibrationError", "CalibrationFit", "CalibrationQualityError", "CellModel",
    "ConductanceTile", "ConvSpec", "ConvergenceError", "CrossbarCircuit", "DecodeError",
    "DomainError", "EnergyReport", "FitError", "MappingKind", "MappingScheme", "MvmRequest",
    "PulseSpec", "PulseTrain", "SchemaError", "Signedness", "SolveResult", "XbarError",
    "XbarOp", "analog_readout", "build_circuit", "cell_pulse_energy", "decode_accumulate",
    "decode_weights", "encode_inputs", "equivalent_conductance", "execute_mvm",
    "fit_cell_params", "gen_synthetic_weights", "gen_validation_set", "im2col",
    "load_cell_model", "map_bias", "map_differential", "map_weights", "mvm_energy",
    "per_mac_energy", "prepare", "run_vectors", "scale_factor", "solve_dense_oracle",
    "solve_fast", "store_cell_model", "tile_matrix",
]
