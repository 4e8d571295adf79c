"""
Spin-core module - operators, Hamiltonians, propagators and states.

Dense complex linear algebra for small spin-1/2 systems. The first spin label
is the most significant tensor factor, so for two spins the basis order is
|00>, |01>, |10>, |11> with |ab> = |a>_A |b>_B.
"""

import logging
import math
from functools import reduce
from typing import Dict, Sequence

import numpy as np
from scipy.linalg import expm

from .types import (
    Axis,
    ComplexArray,
    DensityMatrix,
    OperatorMatrix,
    SpinSimException,
    SpinSystem,
)

logger = logging.getLogger(__name__)

IDENTITY2: ComplexArray = np.eye(2, dtype=np.complex128)
PAULI: Dict[str, ComplexArray] = {
    "i": IDENTITY2,
    "x": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


def embed_at(n_spins: int, index: int, single: ComplexArray) -> ComplexArray:
    """Tensor a 2x2 operator at position `index` with identities elsewhere."""
    factors = [single if k == index else IDENTITY2 for k in range(n_spins)]
    return reduce(np.kron, factors)


def embed(system: SpinSystem, spin: str, single: ComplexArray) -> ComplexArray:
    """Tensor a 2x2 operator on `spin` with identities on every other spin."""
    return embed_at(system.n_spins, system.index(spin), single)


def pauli_product(labels: Sequence[str]) -> ComplexArray:
    """Kronecker product of Pauli matrices named by "i", "x", "y", "z"."""
    return reduce(np.kron, [PAULI[label] for label in labels])


def angular_momentum(system: SpinSystem, spin: str, axis: Axis) -> OperatorMatrix:
    """Single-spin angular momentum I = sigma/2 embedded in the full space."""
    if axis not in ("x", "y", "z"):
        raise SpinSimException(f"unknown axis {axis!r}", "INVALID_CONFIG")
    return OperatorMatrix(embed(system, spin, PAULI[axis] / 2), "hermitian")


def hamiltonian(system: SpinSystem) -> OperatorMatrix:
    """Rotating-frame Hamiltonian in rad/s: Zeeman offsets plus weak scalar coupling."""
    iz = [angular_momentum(system, label, "z").entries for label in system.spin_labels]
    h = np.zeros((system.dim, system.dim), dtype=np.complex128)
    for k in range(system.n_spins):
        h -= 2 * math.pi * system.larmor_offset[k] * iz[k]
        for m in range(k + 1, system.n_spins):
            h += 2 * math.pi * system.j_coupling[k][m] * (iz[k] @ iz[m])
    return OperatorMatrix(h, "hermitian")


def free_propagator(h: OperatorMatrix, duration: float) -> OperatorMatrix:
    """U = exp(-i h t); closed form when h is diagonal."""
    if duration < 0:
        raise SpinSimException(
            f"negative evolution time {duration!r}",
            "NEGATIVE_DURATION",
            details={"duration": duration},
        )
    if h.role != "hermitian":
        raise SpinSimException("free_propagator needs a Hermitian generator", "NOT_HERMITIAN")
    entries = h.entries
    diagonal = np.diag(entries)
    if np.array_equal(entries, np.diag(diagonal)):
        return OperatorMatrix(np.diag(np.exp(-1j * diagonal * duration)), "unitary")
    return OperatorMatrix(expm(-1j * entries * duration), "unitary")


def rf_rotation(
    system: SpinSystem, spin: str, phase_axis: float, flip_angle: float
) -> OperatorMatrix:
    """exp(-i theta (cos phi Ix + sin phi Iy)) on one spin, identity elsewhere."""
    half = flip_angle / 2
    generator = math.cos(phase_axis) * PAULI["x"] + math.sin(phase_axis) * PAULI["y"]
    single = math.cos(half) * IDENTITY2 - 1j * math.sin(half) * generator
    return OperatorMatrix(embed(system, spin, single), "unitary")


def evolve(rho: DensityMatrix, u: OperatorMatrix) -> DensityMatrix:
    """rho -> U rho U^dagger."""
    if rho.dim != u.dim:
        raise SpinSimException(
            f"state dimension {rho.dim} does not match operator dimension {u.dim}",
            "DIMENSION_MISMATCH",
        )
    if u.role != "unitary":
        u = OperatorMatrix(u.entries, "unitary")
    out = u.entries @ rho.entries @ u.entries.conj().T
    return DensityMatrix((out + out.conj().T) / 2, rho.form)


def expectation(rho: DensityMatrix, obs: OperatorMatrix) -> complex:
    """Tr(rho obs)."""
    if rho.dim != obs.dim:
        raise SpinSimException(
            f"state dimension {rho.dim} does not match observable dimension {obs.dim}",
            "DIMENSION_MISMATCH",
        )
    return complex(np.trace(rho.entries @ obs.entries))


def phase_distance(u: OperatorMatrix, v: OperatorMatrix) -> float:
    """min over theta of ||U - e^{i theta} V||_F, phase taken from V^dagger U."""
    if u.dim != v.dim:
        raise SpinSimException("phase_distance: dimension mismatch", "DIMENSION_MISMATCH")
    overlap = v.entries.conj().T @ u.entries
    pivot = overlap.flat[int(np.argmax(np.abs(overlap)))]
    if abs(pivot) == 0:
        return float(np.linalg.norm(u.entries - v.entries))
    phase = pivot / abs(pivot)
    return float(np.linalg.norm(u.entries - phase * v.entries))


def equivalent(u: OperatorMatrix, v: OperatorMatrix, tol: float = 1e-9) -> bool:
    """True when U equals V up to a global phase."""
    return phase_distance(u, v) < tol


def pure_state(amplitudes: Sequence[complex]) -> DensityMatrix:
    """|psi><psi| for a normalized amplitude vector."""
    psi = np.asarray(amplitudes, dtype=np.complex128)
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise SpinSimException("pure_state: zero vector", "INVALID_STATE")
    psi = psi / norm
    return DensityMatrix(np.outer(psi, psi.conj()), "full")
