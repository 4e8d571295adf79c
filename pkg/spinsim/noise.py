"""
Noise module - relaxation channels, RF inhomogeneity ensembles and the
calibration experiments (nutation, inversion recovery, CPMG) that measure
them back from simulated data.
"""

import logging
import math
from functools import lru_cache
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq, curve_fit

from .pulses import apply_program, dj_program
from .spin import (
    angular_momentum,
    embed_at,
    evolve,
    expectation,
    free_propagator,
    hamiltonian,
    rf_rotation,
)
from .states import (
    DEFAULT_REFERENCE_HZ,
    DEFAULT_TEMPERATURE,
    default_polarizations,
    prepare_input,
    thermal_populations,
    thermal_state,
)
from .types import (
    CalibrationError,
    CalibrationReport,
    ComplexArray,
    DensityMatrix,
    ExperimentConfig,
    FloatArray,
    RelaxationParams,
    RfInhomogeneityModel,
    SpinSimException,
    SpinSystem,
)

logger = logging.getLogger(__name__)

NUTATION_POINTS = 121
NUTATION_SPAN = 3.0


# ---------------------------------------------------------------------------
# Relaxation
# ---------------------------------------------------------------------------


def single_spin_kraus(
    duration: float, t1: float, t2: float, polarization: float = 0.0
) -> List[ComplexArray]:
    """Generalized amplitude damping followed by phase damping.

    Populations relax toward (1 + p/2)/2 in |0> at rate 1/t1; coherences decay
    as exp(-t/t2).
    """
    gamma = 1.0 - math.exp(-duration / t1)
    ground = (1.0 + polarization / 2) / 2
    keep = math.sqrt(1.0 - gamma)
    damping = [
        math.sqrt(ground) * np.array([[1, 0], [0, keep]], dtype=np.complex128),
        math.sqrt(ground) * np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=np.complex128),
        math.sqrt(1 - ground) * np.array([[keep, 0], [0, 1]], dtype=np.complex128),
        math.sqrt(1 - ground) * np.array([[0, 0], [math.sqrt(gamma), 0]], dtype=np.complex128),
    ]
    # Clamp guards exp(-2t/t2 + t/t1) rounding above 1 when t2 == 2*t1.
    lam = min(1.0, max(0.0, 1.0 - math.exp(-2 * duration / t2 + duration / t1)))
    dephasing = [
        np.array([[1, 0], [0, math.sqrt(1 - lam)]], dtype=np.complex128),
        np.array([[0, 0], [0, math.sqrt(lam)]], dtype=np.complex128),
    ]
    return [e @ k for e in dephasing for k in damping]


class RelaxationMap(NamedTuple):
    """Per-spin channel `superop` (row-major vec) around the thermal state `equilibrium`."""
    superop: ComplexArray
    equilibrium: ComplexArray


def equilibrium_state(params: RelaxationParams) -> ComplexArray:
    """Linearized thermal state; maximally mixed without polarizations."""
    n = len(params.t1)
    populations = thermal_populations(params.polarization or (0.0,) * n)
    return np.diag(populations).astype(np.complex128)


def relaxation_map(params: RelaxationParams, duration: float) -> RelaxationMap:
    """Per-spin T1/T2 relaxation with the linearized thermal state as fixed point.

    The product of single-spin channels settles on a product state, which
    differs from the linearized thermal state at second order in the
    polarizations. Applying it to rho - rho_eq removes that difference.
    """
    n = len(params.t1)
    dim = 2 ** n
    total = np.eye(dim ** 2, dtype=np.complex128)
    for index in range(n):
        polarization = params.polarization[index] if params.polarization else 0.0
        step = np.zeros_like(total)
        for k in single_spin_kraus(duration, params.t1[index], params.t2[index], polarization):
            full = embed_at(n, index, k)
            step += np.kron(full, full.conj())
        total = step @ total
    return RelaxationMap(total, equilibrium_state(params))


def apply_relaxation(rho: DensityMatrix, channel: RelaxationMap) -> DensityMatrix:
    """rho_eq + S(rho - rho_eq), with rho_eq scaled to the trace of `rho`."""
    dim = rho.dim
    if channel.superop.shape[0] != dim ** 2:
        raise SpinSimException(
            "relaxation parameters do not match the state dimension", "DIMENSION_MISMATCH"
        )
    if rho.form == "deviation":
        target = channel.equilibrium - np.eye(dim) / dim
    else:
        target = channel.equilibrium * np.trace(rho.entries)
    shifted = (rho.entries - target).reshape(-1)
    out = (channel.superop @ shifted).reshape(dim, dim) + target
    return DensityMatrix((out + out.conj().T) / 2, rho.form)


def relax(rho: DensityMatrix, duration: float, params: RelaxationParams) -> DensityMatrix:
    """Per-spin T1/T2 channel applied for `duration` seconds."""
    if duration < 0:
        raise SpinSimException(
            f"negative relaxation time {duration!r}", "NEGATIVE_DURATION"
        )
    if duration == 0:
        return rho
    return apply_relaxation(rho, relaxation_map(params, duration))


# ---------------------------------------------------------------------------
# RF inhomogeneity
# ---------------------------------------------------------------------------


def noisy_system(config: ExperimentConfig) -> SpinSystem:
    """The configured system with carrier offsets applied when noise is on."""
    if config.noise_enabled and config.noise.carrier_offset:
        return config.system.with_offsets(config.noise.carrier_offset)
    return config.system


def ensemble_run(
    config: ExperimentConfig,
    model: RfInhomogeneityModel,
    initial: Optional[DensityMatrix] = None,
) -> DensityMatrix:
    """Weight-averaged final state over RF amplitude classes, with relaxation.

    Members are combined in ascending scale order.
    """
    system = noisy_system(config)
    program = dj_program(config.oracle, config.tau, system)
    rho0 = initial if initial is not None else prepare_input(config)
    params = RelaxationParams.from_system(system, config.polarizations)

    cache: Dict[float, RelaxationMap] = {}

    def relaxation(rho: DensityMatrix, elapsed: float) -> DensityMatrix:
        if elapsed not in cache:
            cache[elapsed] = relaxation_map(params, elapsed)
        return apply_relaxation(rho, cache[elapsed])

    members = model.ordered()
    logger.debug("ensemble run %s: %d members", config.oracle, len(members))
    total = np.zeros((rho0.dim, rho0.dim), dtype=np.complex128)
    for scale, weight in members:
        final = apply_program(
            rho0,
            program,
            system,
            flip_scale=scale,
            pulse_width=config.noise.pulse_width,
            relaxation=relaxation,
        )
        total += weight * final.entries
    total *= 1.0 / sum(w for _, w in members)
    return DensityMatrix((total + total.conj().T) / 2, rho0.form)


def nutation_signal(
    model: RfInhomogeneityModel, pulse_power: float, widths: Sequence[float]
) -> FloatArray:
    """Transverse signal after a single pulse of each width, ensemble averaged."""
    w = np.asarray(widths, dtype=np.float64)
    scales = np.asarray(model.scales)
    weights = np.asarray(model.weights)
    return np.sin(pulse_power * np.outer(w, scales)) @ weights


def _damped_sine(u: FloatArray, amplitude: float, decay: float, omega: float) -> FloatArray:
    return amplitude * np.exp(-u / decay) * np.sin(omega * u)


def fit_nutation_envelope(
    model: RfInhomogeneityModel, pulse_power: float, target: float
) -> float:
    """Fitted exponential time constant (seconds) of the nutation envelope.

    The fit runs over widths 0..3*target, in units of `target`.
    """
    u = np.linspace(0.0, NUTATION_SPAN, NUTATION_POINTS)
    signal = nutation_signal(model, pulse_power, u * target)
    p0 = (1.0, 1.0, pulse_power * model.mean_scale * target)
    try:
        popt, _ = curve_fit(
            _damped_sine,
            u,
            signal,
            p0=p0,
            bounds=([0.0, 1e-3, 0.0], [10.0, 1e6, np.inf]),
            maxfev=20000,
        )
    except (RuntimeError, ValueError) as e:
        raise CalibrationError(f"nutation envelope fit failed: {e}") from e
    decay = float(popt[1])
    if math.exp(-NUTATION_SPAN / decay) > 0.99:
        raise CalibrationError(
            "nutation envelope shows no decay; the RF distribution is too narrow",
            details={"fitted_decay": decay * target, "points": len(model.scales)},
        )
    return decay * target


@lru_cache(maxsize=32)
def calibrate_inhomogeneity(
    target_time_constant: float,
    pulse_power: float,
    center: float = 1.0,
    points: int = 21,
) -> RfInhomogeneityModel:
    """Lorentzian RF distribution whose nutation envelope decays with `target_time_constant`."""
    if not target_time_constant > 0:
        raise SpinSimException("target time constant must be > 0", "INVALID_CONFIG")
    if not pulse_power > 0:
        raise SpinSimException("pulse power must be > 0", "INVALID_CONFIG")

    def mismatch(width: float) -> float:
        model = RfInhomogeneityModel.lorentzian(center, width, points)
        return fit_nutation_envelope(model, pulse_power, target_time_constant) - target_time_constant

    nominal = 1.0 / (pulse_power * target_time_constant)
    try:
        width = brentq(mismatch, 0.3 * nominal, 3.0 * nominal, xtol=1e-6 * nominal)
    except ValueError as e:
        raise CalibrationError(
            f"no RF width reproduces a {target_time_constant!r} s envelope: {e}"
        ) from e
    logger.debug("calibrated RF width %.5f for %.3g s envelope", width, target_time_constant)
    return RfInhomogeneityModel.lorentzian(center, float(width), points, target_time_constant)


def default_model(config: ExperimentConfig) -> RfInhomogeneityModel:
    """Calibrated ensemble centred on the configured flip-angle scale."""
    noise = config.noise
    return calibrate_inhomogeneity(
        noise.envelope_time_constant,
        noise.pulse_power,
        noise.flip_angle_scale,
        noise.ensemble_size,
    )


# ---------------------------------------------------------------------------
# T1 / T2 measurement
# ---------------------------------------------------------------------------


def _default_polarizations(system: SpinSystem) -> Tuple[float, ...]:
    return default_polarizations(system, DEFAULT_TEMPERATURE, DEFAULT_REFERENCE_HZ)


def inversion_recovery_curve(
    system: SpinSystem,
    spin: str,
    delays: Sequence[float],
    polarizations: Optional[Sequence[float]] = None,
) -> FloatArray:
    """<Iz> of `spin` after pi - delay, starting from thermal equilibrium."""
    pols = tuple(polarizations) if polarizations is not None else _default_polarizations(system)
    params = RelaxationParams.from_system(system, pols)
    rho = thermal_state(system, pols)
    rho = evolve(rho, rf_rotation(system, spin, 0.0, math.pi))
    iz = angular_momentum(system, spin, "z")
    return np.array(
        [expectation(relax(rho, float(d), params), iz).real for d in delays],
        dtype=np.float64,
    )


def _recovery(t: FloatArray, m_eq: float, t1: float) -> FloatArray:
    return m_eq * (1.0 - 2.0 * np.exp(-t / t1))


def inversion_recovery(
    system: SpinSystem,
    spin: str,
    delays: Optional[Sequence[float]] = None,
    polarizations: Optional[Sequence[float]] = None,
) -> float:
    """Fitted T1 of `spin` from a simulated inversion-recovery series."""
    t1_true = system.t1[system.index(spin)]
    if delays is None:
        delays = [0.0] + list(np.geomspace(0.1 * t1_true, 3.0 * t1_true, 12))
    if len(delays) < 4 or any(d < 0 for d in delays):
        raise SpinSimException(
            "inversion recovery needs at least four non-negative delays", "INVALID_CONFIG"
        )
    t = np.asarray(delays, dtype=np.float64)
    signal = inversion_recovery_curve(system, spin, t, polarizations)
    peak = float(np.max(np.abs(signal)))
    if peak == 0:
        raise CalibrationError(f"no longitudinal signal on spin {spin}")
    try:
        popt, _ = curve_fit(
            _recovery,
            t,
            signal / peak,
            p0=(1.0, float(np.median(t[t > 0])) if np.any(t > 0) else 1.0),
            bounds=([0.0, 1e-9], [np.inf, np.inf]),
        )
    except (RuntimeError, ValueError) as e:
        raise CalibrationError(f"inversion recovery fit failed for spin {spin}: {e}") from e
    logger.debug("inversion recovery %s: T1 = %.4g s", spin, popt[1])
    return float(popt[1])


def cpmg_curve(
    system: SpinSystem,
    spin: str,
    echo_spacing: float,
    echo_counts: Sequence[int],
    polarizations: Optional[Sequence[float]] = None,
) -> FloatArray:
    """Transverse magnitude |<I+>| after 90x - (d - 180y - d)^n for each n."""
    if not echo_spacing > 0:
        raise SpinSimException("echo spacing must be > 0", "NEGATIVE_DURATION")
    counts = sorted(int(n) for n in echo_counts)
    if not counts or counts[0] < 0:
        raise SpinSimException("echo counts must be non-negative", "INVALID_CONFIG")

    pols = tuple(polarizations) if polarizations is not None else _default_polarizations(system)
    params = RelaxationParams.from_system(system, pols)
    half = echo_spacing / 2
    h = hamiltonian(system)
    delay = free_propagator(h, half)
    refocus = rf_rotation(system, spin, math.pi / 2, math.pi)
    relax_half = relaxation_map(params, half)
    detector = (
        angular_momentum(system, spin, "x").entries
        + 1j * angular_momentum(system, spin, "y").entries
    )

    rho = evolve(thermal_state(system, pols), rf_rotation(system, spin, 0.0, math.pi / 2))
    values: Dict[int, float] = {}
    done = 0
    for target in counts:
        while done < target:
            rho = apply_relaxation(evolve(rho, delay), relax_half)
            rho = evolve(rho, refocus)
            rho = apply_relaxation(evolve(rho, delay), relax_half)
            done += 1
        values[target] = float(abs(np.trace(rho.entries @ detector)))
    return np.array([values[int(n)] for n in echo_counts], dtype=np.float64)


def _decay(t: FloatArray, amplitude: float, t2: float) -> FloatArray:
    return amplitude * np.exp(-t / t2)


def cpmg(
    system: SpinSystem,
    spin: str,
    echo_spacing: Optional[float] = None,
    echo_counts: Optional[Sequence[int]] = None,
    polarizations: Optional[Sequence[float]] = None,
) -> float:
    """Fitted T2 of `spin` from a simulated CPMG echo train.

    The default spacing 2/J keeps both J-split components of the coherence
    in phase at every echo.
    """
    t2_true = system.t2[system.index(spin)]
    if echo_spacing is None:
        j = max((abs(v) for row in system.j_coupling for v in row), default=0.0)
        echo_spacing = 2.0 / j if j > 0 else t2_true / 100
    if echo_counts is None:
        n_max = max(4, int(math.ceil(2 * t2_true / echo_spacing)))
        echo_counts = [int(n) for n in np.unique(np.linspace(0, n_max, 16).astype(int))]
    if echo_spacing > 0.1 * t2_true:
        logger.warning(
            "echo spacing %.3g s is not small against T2 = %.3g s", echo_spacing, t2_true
        )
    counts = np.asarray(echo_counts, dtype=np.float64)
    signal = cpmg_curve(system, spin, echo_spacing, echo_counts, polarizations)
    peak = float(np.max(signal))
    if peak == 0:
        raise CalibrationError(f"no transverse signal on spin {spin}")
    t = counts * echo_spacing
    try:
        popt, _ = curve_fit(
            _decay,
            t,
            signal / peak,
            p0=(1.0, float(np.max(t)) / 2 or 1.0),
            bounds=([0.0, 1e-9], [np.inf, np.inf]),
        )
    except (RuntimeError, ValueError) as e:
        raise CalibrationError(f"CPMG fit failed for spin {spin}: {e}") from e
    t2 = float(popt[1])
    t1 = system.t1[system.index(spin)]
    if t2 > 2 * t1:
        logger.warning("fitted T2 %.4g s of spin %s exceeds 2*T1", t2, spin)
    logger.debug("CPMG %s: T2 = %.4g s", spin, t2)
    return t2


def run_calibration(config: ExperimentConfig) -> CalibrationReport:
    """Nutation envelope, inversion recovery and CPMG for every spin."""
    noise = config.noise
    model = calibrate_inhomogeneity(
        noise.envelope_time_constant, noise.pulse_power, 1.0, noise.ensemble_size
    )
    envelope = fit_nutation_envelope(model, noise.pulse_power, noise.envelope_time_constant)
    system = config.system
    pols = config.polarizations
    t1 = {label: inversion_recovery(system, label, polarizations=pols) for label in system.spin_labels}
    t2 = {label: cpmg(system, label, polarizations=pols) for label in system.spin_labels}
    width = (model.scales[-1] - model.scales[0]) / 10 if len(model.scales) > 1 else 0.0
    return CalibrationReport(t1=t1, t2=t2, envelope_time_constant=envelope, rf_width=width, model=model)
