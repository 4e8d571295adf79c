"""
Experiment module - Deutsch-Jozsa pipeline assembly and classification.
"""

import logging
from typing import List

import numpy as np

from .noise import default_model, ensemble_run, relax
from .pulses import compile_program, dj_program
from .spin import evolve
from .states import (
    BACKWARD_CYCLE,
    FORWARD_CYCLE,
    permute_populations,
    permuted_inputs,
    prepare_input,
    temporal_average,
)
from .types import (
    ORACLE_CLASSES,
    ComplexArray,
    DensityMatrix,
    ExperimentConfig,
    InconclusiveError,
    RelaxationParams,
    SpinSimException,
    TemporalAverage,
    Verdict,
)

logger = logging.getLogger(__name__)

__all__ = [
    "ORACLE_CLASSES",
    "classify",
    "dj_program",
    "evolve_input",
    "pure_fraction_scaling",
    "run_experiment",
    "run_temporal_average",
    "signal_observable",
]

INCONCLUSIVE_FRACTION = 0.05
NORM_FLOOR = 1e-12


def _check_seed(config: ExperimentConfig) -> None:
    if config.noise_enabled and config.noise.seed is None:
        raise SpinSimException(
            "noise is enabled but no seed was given", "SEED_REQUIRED"
        )


def evolve_input(config: ExperimentConfig, rho0: DensityMatrix) -> DensityMatrix:
    """Run one prepared state through the configured oracle."""
    if config.noise_enabled:
        return ensemble_run(config, default_model(config), initial=rho0)
    u = compile_program(dj_program(config.oracle, config.tau, config.system), config.system)
    return evolve(rho0, u)


def run_temporal_average(config: ExperimentConfig) -> TemporalAverage:
    """Three runs from the cyclically permuted thermal populations, summed."""
    _check_seed(config)
    recovery = config.noise.recovery_delay if config.noise_enabled else None
    if recovery is None:
        return temporal_average([evolve_input(config, rho0) for rho0 in permuted_inputs(config)])

    # Each run starts from what the previous one left behind, relaxed for
    # the recovery delay; coherences are assumed gone by then.
    params = RelaxationParams.from_system(config.system, config.polarizations)
    start = permuted_inputs(config)[0]
    finals: List[DensityMatrix] = []
    for cycle in ((), FORWARD_CYCLE, BACKWARD_CYCLE):
        if finals:
            relaxed = relax(finals[-1], recovery, params)
            start = DensityMatrix(np.diag(relaxed.populations).astype(np.complex128), "full")
        finals.append(evolve_input(config, permute_populations(start, cycle)))
    return temporal_average(finals)


def run_experiment(config: ExperimentConfig) -> DensityMatrix:
    """Pre-readout state of one Deutsch-Jozsa run.

    For temporal averaging the returned state is the sum of the three runs
    divided by three.
    """
    _check_seed(config)
    if config.input_mode == "temporal_average":
        average = run_temporal_average(config)
        summed = average.effective.entries
        return DensityMatrix(summed / np.real(np.trace(summed)), "full")
    return evolve_input(config, prepare_input(config))


def signal_observable(dim: int) -> ComplexArray:
    """Iz of the first spin restricted to the work spins being all |0>."""
    rest = dim // 2
    ground = np.zeros((rest, rest), dtype=np.complex128)
    ground[0, 0] = 1.0
    return np.kron(np.diag([0.5, -0.5]).astype(np.complex128), ground)


def classify(final: DensityMatrix, input_qubit: int = 0) -> Verdict:
    """Constant when the input spin ends where it started, balanced when flipped.

    `input_qubit` is the known starting value of the input spin.
    """
    if input_qubit not in (0, 1):
        raise SpinSimException("input_qubit must be 0 or 1", "INVALID_CONFIG")
    deviation = final.deviation().entries
    norm = float(np.linalg.norm(deviation))
    m = float(np.real(np.trace(deviation @ signal_observable(final.dim))))
    if norm < NORM_FLOOR or abs(m) < INCONCLUSIVE_FRACTION * norm:
        raise InconclusiveError(
            "input-spin polarization is below the decision threshold",
            details={"polarization": m, "deviation_norm": norm},
        )
    positive = m > 0
    if input_qubit == 1:
        positive = not positive
    return "constant" if positive else "balanced"


def pure_fraction_scaling(n_qubits: int, z: float) -> float:
    """N * Z**-N: how the pure-state signal fraction shrinks with N spins."""
    if n_qubits < 1:
        raise SpinSimException("n_qubits must be >= 1", "INVALID_CONFIG")
    if z < 1:
        raise SpinSimException("partition function z must be >= 1", "INVALID_CONFIG")
    return n_qubits * z ** (-n_qubits)
