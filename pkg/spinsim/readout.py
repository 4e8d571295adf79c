"""
Readout module - FID synthesis, spectra, line integrals and state tomography.

The detected signal of spin k is V(t) = Tr[rho(t) (-i sigma_x - sigma_y)_k]
after the readout pulse. With that operator a spin sitting in |0> before an
X readout gives a real, positive spectral line.
"""

import logging
from functools import lru_cache
from itertools import product
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .spin import embed, evolve, hamiltonian, pauli_product, rf_rotation
from .types import (
    ComplexArray,
    DensityMatrix,
    Fid,
    FloatArray,
    InconclusiveError,
    LineIntegrals,
    PulseEvent,
    ReadoutSettings,
    SpinSimException,
    SpinSystem,
    Spectrum,
    TomographyResult,
    Verdict,
)

logger = logging.getLogger(__name__)

# -i sigma_x - sigma_y = -2i |1><0|
DETECTION: ComplexArray = np.array([[0, 0], [-2j, 0]], dtype=np.complex128)

READOUT_CHOICES: Tuple[str, ...] = ("none", "X", "Y")
READOUT_PAIRS: Tuple[Tuple[str, str], ...] = tuple(product(READOUT_CHOICES, repeat=2))
PAULI_BASIS: Tuple[Tuple[str, str], ...] = tuple(
    pair for pair in product("ixyz", repeat=2) if pair != ("i", "i")
)
RELATIVE_THRESHOLD = 0.05

ReadoutPulse = Union[PulseEvent, Sequence[PulseEvent], None]


def _readout_events(spin: str, readout_pulse: ReadoutPulse) -> Tuple[PulseEvent, ...]:
    if readout_pulse is None:
        return (PulseEvent.rotation("X", spin),)
    if isinstance(readout_pulse, PulseEvent):
        return (readout_pulse,)
    return tuple(readout_pulse)


def synth_fid(
    rho0: DensityMatrix,
    system: SpinSystem,
    spin: str,
    n_samples: int = 4096,
    dwell: float = 5e-4,
    readout_pulse: ReadoutPulse = None,
    *,
    t2_decay: bool = False,
    snr: Optional[float] = None,
    rng: Optional[np.random.Generator] = None,
) -> Fid:
    """Sample the detected signal of `spin` after the readout pulse(s).

    `readout_pulse=None` applies the default X on the detected spin; an empty
    sequence applies nothing. With `snr` set, complex Gaussian receiver noise
    is added so that a fully polarized reference line has that peak SNR.
    """
    index = system.index(spin)
    if rho0.dim != system.dim:
        raise SpinSimException("state does not match the spin system", "DIMENSION_MISMATCH")
    if n_samples < 1 or not dwell > 0:
        raise SpinSimException("need n_samples >= 1 and dwell > 0", "INVALID_CONFIG")

    rho = rho0
    for event in _readout_events(spin, readout_pulse):
        if event.kind != "pulse":
            raise SpinSimException("readout events must be pulses", "INVALID_CONFIG")
        rho = evolve(rho, rf_rotation(system, event.spin or "", event.phase_angle, event.flip_angle))

    energies, vectors = np.linalg.eigh(hamiltonian(system).entries)
    r = vectors.conj().T @ rho.entries @ vectors
    o = vectors.conj().T @ embed(system, spin, DETECTION) @ vectors
    weights = r * o.T
    gaps = energies[:, None] - energies[None, :]
    active = np.nonzero(weights)
    t = np.arange(n_samples, dtype=np.float64) * dwell
    samples = np.exp(-1j * np.outer(t, gaps[active])) @ weights[active]
    if samples.shape != t.shape:
        samples = np.zeros(n_samples, dtype=np.complex128)

    decay = np.exp(-t / system.t2[index]) if t2_decay else np.ones_like(t)
    samples = samples * decay

    if snr is not None:
        if rng is None:
            raise SpinSimException("receiver noise needs a seeded generator", "SEED_REQUIRED")
        d = rho0.dim
        scale = float(np.linalg.norm(rho0.deviation().entries)) * np.sqrt(d / (d - 1))
        sigma = scale * abs(decay.sum()) / (snr * np.sqrt(n_samples))
        noise = rng.normal(size=n_samples) + 1j * rng.normal(size=n_samples)
        samples = samples + noise * (sigma / np.sqrt(2))

    return Fid(
        samples=np.asarray(samples, dtype=np.complex128),
        dwell=dwell,
        detected_spin=spin,
        carrier_offset=system.larmor_offset[index],
    )


def spectrum(fid: Fid, line_broadening: float = 0.0) -> Spectrum:
    """Zero-filled DFT, scaled so the amplitudes sum to the first FID point."""
    n = len(fid.samples)
    n_fft = 1 << max(0, (n - 1).bit_length())
    apodization = np.exp(-np.pi * line_broadening * fid.times)
    amplitudes = np.fft.fftshift(np.fft.fft(fid.samples * apodization, n_fft)) / n_fft
    frequencies = np.fft.fftshift(np.fft.fftfreq(n_fft, fid.dwell))
    return Spectrum(
        amplitudes=amplitudes.astype(np.complex128),
        frequency_axis=frequencies.astype(np.float64),
        detected_spin=fid.detected_spin,
    )


def line_integrals(
    spec: Spectrum, j_hz: float, window: int = 5, center: float = 0.0
) -> LineIntegrals:
    """Complex integrals over +-`window` bins around center -+ J/2.

    The low line (center - J/2) belongs to the coupled partner in |0>. Each
    window is a grid of bin-spaced frequencies centered on the exact line
    position, evaluated from the time samples behind `spec`, so a line that
    falls between FFT bins keeps its phase.
    """
    freq = spec.frequency_axis
    n = len(freq)
    resolution = spec.resolution
    lines = (center - abs(j_hz) / 2, center + abs(j_hz) / 2)
    for line in lines:
        if line < freq[0] or line > freq[-1]:
            raise SpinSimException(
                f"line at {line:.3f} Hz lies outside the spectral width",
                "LINE_OUT_OF_RANGE",
            )
        if line - window * resolution < freq[0] or line + window * resolution > freq[-1]:
            raise SpinSimException(
                f"integration window around {line:.3f} Hz runs off the spectrum",
                "LINE_OUT_OF_RANGE",
            )
    if abs(j_hz) <= 2 * window * resolution:
        raise SpinSimException(
            f"lines {abs(j_hz)} Hz apart overlap with a +-{window} bin window",
            "WINDOW_OVERLAP",
            details={"j_hz": j_hz, "resolution_hz": resolution, "window": window},
        )
    # amplitudes = fft(y) / n, so this is y / n
    scaled = np.fft.ifft(np.fft.ifftshift(spec.amplitudes))
    times = np.arange(n, dtype=np.float64) / (n * resolution)
    offsets = np.arange(-window, window + 1, dtype=np.float64) * resolution
    comb = np.exp(-2j * np.pi * np.outer(offsets, times)).sum(axis=0)
    low, high = (
        complex(np.dot(np.exp(-2j * np.pi * line * times) * comb, scaled)) for line in lines
    )
    return low, high


def classify_spectrum(low: complex, high: complex, threshold: float = 0.0) -> Verdict:
    """Positive low line means constant, negative means balanced."""
    value = low.real
    if abs(value) <= threshold or abs(value) < RELATIVE_THRESHOLD * (abs(low) + abs(high)):
        raise InconclusiveError(
            "spectral line is below the decision threshold",
            details={"low": [low.real, low.imag], "high": [high.real, high.imag]},
        )
    return "constant" if value > 0 else "balanced"


# ---------------------------------------------------------------------------
# Tomography
# ---------------------------------------------------------------------------


def readout_events(pair: Tuple[str, str], labels: Sequence[str]) -> Tuple[PulseEvent, ...]:
    return tuple(
        PulseEvent.rotation(axis, label) for axis, label in zip(pair, labels) if axis != "none"
    )


def _measure_pair(
    rho: DensityMatrix,
    system: SpinSystem,
    pair: Tuple[str, str],
    settings: ReadoutSettings,
    t2_decay: bool,
    snr: Optional[Mapping[str, float]],
    rngs: Optional[List[np.random.Generator]],
) -> Tuple[List[float], Dict[str, List[float]]]:
    events = readout_events(pair, system.spin_labels)
    j = system.j_coupling[0][1]
    values: List[float] = []
    integrals: Dict[str, List[float]] = {}
    for k, label in enumerate(system.spin_labels):
        fid = synth_fid(
            rho,
            system,
            label,
            settings.n_samples,
            settings.dwell,
            events,
            t2_decay=t2_decay,
            snr=snr.get(label) if snr else None,
            rng=rngs[k] if rngs else None,
        )
        low, high = line_integrals(
            spectrum(fid, settings.line_broadening),
            j,
            settings.window_bins,
            system.larmor_offset[k],
        )
        row = [low.real, low.imag, high.real, high.imag]
        values.extend(row)
        integrals[label] = row
    return values, integrals


def _spawn(seed: Optional[int], count: int, needed: bool) -> Optional[List[np.random.Generator]]:
    if not needed:
        return None
    if seed is None:
        raise SpinSimException("receiver noise needs a seed", "SEED_REQUIRED")
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def _check_two_spins(system: SpinSystem) -> None:
    if system.n_spins != 2:
        raise SpinSimException("tomography is defined for two spins", "DIMENSION_MISMATCH")


def acquire(
    rho: DensityMatrix,
    system: SpinSystem,
    settings: ReadoutSettings,
    t2_decay: bool = False,
    snr: Optional[Mapping[str, float]] = None,
    seed: Optional[int] = None,
) -> FloatArray:
    """Line-integral vector of all nine readout experiments on one state."""
    _check_two_spins(system)
    rngs = _spawn(seed, 2 * len(READOUT_PAIRS), bool(snr))
    values: List[float] = []
    for k, pair in enumerate(READOUT_PAIRS):
        row, _ = _measure_pair(
            rho, system, pair, settings, t2_decay, snr, rngs[2 * k: 2 * k + 2] if rngs else None
        )
        values.extend(row)
    return np.asarray(values, dtype=np.float64)


@lru_cache(maxsize=8)
def response_matrix(system: SpinSystem, settings: ReadoutSettings, t2_decay: bool = False) -> FloatArray:
    """Noise-free acquisition of each traceless Pauli product, one column each."""
    columns = [
        acquire(DensityMatrix(pauli_product(labels) / 4, "deviation"), system, settings, t2_decay)
        for labels in PAULI_BASIS
    ]
    matrix = np.column_stack(columns)
    matrix.setflags(write=False)
    return matrix


def reconstruct_deviation(
    measurements: FloatArray,
    system: SpinSystem,
    settings: ReadoutSettings,
    t2_decay: bool = False,
) -> DensityMatrix:
    """Linear inversion of the line-integral vector to a traceless Hermitian matrix."""
    response = response_matrix(system, settings, t2_decay)
    rank = int(np.linalg.matrix_rank(response))
    logger.debug("tomography response rank %d", rank)
    if rank < len(PAULI_BASIS):
        raise SpinSimException(
            f"readout set spans only {rank} of {len(PAULI_BASIS)} parameters",
            "SINGULAR_INVERSION",
        )
    coefficients, *_ = np.linalg.lstsq(response, np.asarray(measurements), rcond=None)
    deviation = sum(
        c * pauli_product(labels) / 4 for c, labels in zip(coefficients, PAULI_BASIS)
    )
    deviation = (deviation + np.conj(deviation).T) / 2
    deviation = deviation - np.trace(deviation) / system.dim * np.eye(system.dim)
    return DensityMatrix(deviation, "deviation")


def relative_error(measured: ComplexArray, theory: ComplexArray) -> float:
    """||measured - theory||_F / ||theory||_F."""
    norm = float(np.linalg.norm(theory))
    if norm == 0:
        raise SpinSimException("theory matrix is zero", "INVALID_STATE")
    return float(np.linalg.norm(measured - theory)) / norm


def tomography(
    prep: Callable[[], DensityMatrix],
    system: SpinSystem,
    theory: DensityMatrix,
    settings: Optional[ReadoutSettings] = None,
    t2_decay: bool = False,
    snr: Optional[Mapping[str, float]] = None,
    seed: Optional[int] = None,
) -> TomographyResult:
    """Nine readout experiments, linear inversion, and the error against `theory`.

    `prep` is called once per experiment. The reconstruction is rescaled so
    its deviation has the same norm as the theory's.
    """
    _check_two_spins(system)
    settings = settings or ReadoutSettings()
    rngs = _spawn(seed, 2 * len(READOUT_PAIRS), bool(snr))
    values: List[float] = []
    integrals: Dict[str, Dict[str, List[float]]] = {}
    for k, pair in enumerate(READOUT_PAIRS):
        row, per_spin = _measure_pair(
            prep(), system, pair, settings, t2_decay, snr, rngs[2 * k: 2 * k + 2] if rngs else None
        )
        values.extend(row)
        integrals["/".join(pair)] = {label: v for label, v in per_spin.items()}

    measured = reconstruct_deviation(np.asarray(values), system, settings, t2_decay)
    ideal = theory.deviation()
    measured_norm = float(np.linalg.norm(measured.entries))
    if measured_norm == 0:
        raise InconclusiveError("tomography measured no signal")
    scale = float(np.linalg.norm(ideal.entries)) / measured_norm
    deviation = DensityMatrix(scale * measured.entries, "deviation")
    background = np.eye(system.dim) / system.dim
    epsilon = relative_error(deviation.entries + background, ideal.entries + background)
    logger.debug("tomography epsilon %.3g (scale %.4g)", epsilon, scale)
    return TomographyResult(
        deviation=deviation,
        theory=ideal,
        epsilon=epsilon,
        scale=scale,
        line_integrals=integrals,
    )
