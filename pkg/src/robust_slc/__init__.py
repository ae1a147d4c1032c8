"""Robust control-pulse design for small superconducting-qubit models by
training on a grid of fluctuation samples and testing on random ones."""

from .evaluation import TestReport, monte_carlo_fidelity, sweep_bound, sweep_sample_count
from .models import (QubitModel, assemble_hamiltonian, build_model, coupled_charge_qubits,
                     coupled_phase_qubits, single_charge_qubit)
from .optimizer import ControlField, OptimizationConfig, TrainingResult, clamp, gradient, initial_field, objective, train
from .quantum import evolve, fidelity, pauli, step_propagator, tensor
from .sampling import FluctuationParameter, TruncatedGaussianSpec, grid_values, training_grid

__version__ = "0.1.0"
