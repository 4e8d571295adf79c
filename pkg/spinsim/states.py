"""
State preparation - thermal equilibrium, population permutation and
temporal averaging into an effective pure state.
"""

import logging
from typing import Sequence, Tuple

import numpy as np
from scipy import constants

from .types import (
    DensityMatrix,
    ExperimentConfig,
    FloatArray,
    SpinSimException,
    SpinSystem,
    TemporalAverage,
)

logger = logging.getLogger(__name__)

# Cycles fixing |00>: each listed population moves to the next label.
FORWARD_CYCLE: Tuple[str, ...] = ("01", "10", "11")
BACKWARD_CYCLE: Tuple[str, ...] = ("01", "11", "10")

GYROMAGNETIC_RATIO_H_TO_C = 4.0
DEFAULT_TEMPERATURE = 298.15
DEFAULT_REFERENCE_HZ = 499_755_169.0


def default_polarizations(
    system: SpinSystem, temperature: float, reference_hz: float
) -> Tuple[float, ...]:
    """h*nu/kT for the first spin; later spins a quarter of it (1H:13C)."""
    proton = constants.h * reference_hz / (constants.k * temperature)
    return (proton,) + tuple(
        proton / GYROMAGNETIC_RATIO_H_TO_C for _ in range(system.n_spins - 1)
    )


def thermal_populations(polarizations: Sequence[float]) -> FloatArray:
    """Normalized 1 + sum_k m_k p_k over the computational basis, first spin most significant."""
    n = len(polarizations)
    populations = np.ones(2 ** n)
    for index in range(2 ** n):
        bits = format(index, f"0{n}b")
        for bit, p in zip(bits, polarizations):
            m = 0.5 if bit == "0" else -0.5
            populations[index] += m * p
    return populations / populations.sum()


def thermal_state(system: SpinSystem, polarizations: Sequence[float]) -> DensityMatrix:
    """High-temperature equilibrium: n_i proportional to 1 + sum_k m_k p_k."""
    if len(polarizations) != system.n_spins:
        raise SpinSimException(
            "thermal_state: one polarization per spin is required", "POLARIZATION_RANGE"
        )
    for label, p in zip(system.spin_labels, polarizations):
        if not 0 <= p < 0.01:
            raise SpinSimException(
                f"polarization {p!r} of spin {label} is outside the high-temperature range [0, 0.01)",
                "POLARIZATION_RANGE",
                details={"spin": label, "polarization": p},
            )
    populations = thermal_populations(polarizations)
    return DensityMatrix(np.diag(populations).astype(np.complex128), "full")


def permute_populations(rho: DensityMatrix, cycle: Sequence[str]) -> DensityMatrix:
    """Cyclically move diagonal populations; the all-zero state is never touched."""
    if not rho.is_diagonal():
        raise SpinSimException(
            "permute_populations needs a diagonal state", "NOT_DIAGONAL"
        )
    if not cycle:
        return rho
    n_bits = int(np.log2(rho.dim))
    labels = list(cycle)
    zero = "0" * n_bits
    if len(set(labels)) != len(labels) or any(
        len(label) != n_bits or set(label) - {"0", "1"} or label == zero for label in labels
    ):
        raise SpinSimException(
            f"bad population cycle {tuple(cycle)!r}", "INVALID_CONFIG"
        )
    old = rho.populations
    new = old.copy()
    for i, label in enumerate(labels):
        target = labels[(i + 1) % len(labels)]
        new[int(target, 2)] = old[int(label, 2)]
    return DensityMatrix(np.diag(new).astype(np.complex128), rho.form)


def temporal_average(rhos: Sequence[DensityMatrix]) -> TemporalAverage:
    """Sum three experiments and split the sum into alpha*I plus delta*(pure-like part).

    The eigenvalue farthest from the median is alpha + delta; alpha is the
    mean of the others.
    """
    if len(rhos) != 3:
        raise SpinSimException("temporal_average needs exactly three states", "INVALID_CONFIG")
    dims = {rho.dim for rho in rhos}
    if len(dims) != 1:
        raise SpinSimException("temporal_average: dimension mismatch", "DIMENSION_MISMATCH")
    total = rhos[0].entries + rhos[1].entries + rhos[2].entries
    total = (total + total.conj().T) / 2

    diagonal = np.real(np.diag(total))
    if np.max(np.abs(total - np.diag(np.diag(total)))) == 0:
        eigenvalues = diagonal
    else:
        eigenvalues = np.linalg.eigvalsh(total)
    median = float(np.median(eigenvalues))
    lone = int(np.argmax(np.abs(eigenvalues - median)))
    rest = np.delete(eigenvalues, lone)
    alpha = float(np.mean(rest))
    delta = float(eigenvalues[lone]) - alpha

    form = "deviation" if all(r.form == "deviation" for r in rhos) else "unnormalized"
    logger.debug("temporal average: alpha=%r delta=%r", alpha, delta)
    return TemporalAverage(alpha, delta, DensityMatrix(total, form))


def effective_pure(average: TemporalAverage) -> DensityMatrix:
    """(sum - alpha I) / delta: the pure-state-equivalent part of the sum."""
    if average.delta == 0:
        raise SpinSimException(
            "temporal average carries no signal (delta = 0)", "INVALID_STATE"
        )
    d = average.effective.dim
    entries = (average.effective.entries - average.alpha * np.eye(d)) / average.delta
    return DensityMatrix(entries, "unnormalized")


def prepare_input(config: ExperimentConfig) -> DensityMatrix:
    """Initial state for a single-run input mode."""
    mode = config.input_mode
    if mode.startswith("pure_"):
        return DensityMatrix.basis(mode[len("pure_"):])
    if mode == "thermal":
        return thermal_state(config.system, config.polarizations)
    raise SpinSimException(
        f"input mode {mode!r} is not a single prepared state", "INVALID_CONFIG"
    )


def permuted_inputs(config: ExperimentConfig) -> Tuple[DensityMatrix, DensityMatrix, DensityMatrix]:
    """The thermal state and its two cyclic permutations."""
    thermal = thermal_state(config.system, config.polarizations)
    return (
        thermal,
        permute_populations(thermal, FORWARD_CYCLE),
        permute_populations(thermal, BACKWARD_CYCLE),
    )
