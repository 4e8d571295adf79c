"""
Type definitions for the spinsim package.
All types are fully annotated for mypy strict mode.
"""

import math
from dataclasses import dataclass, field
from typing import (
    Any,
    Dict,
    Generic,
    List,
    Literal,
    Mapping,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
    TypeVar,
    Union,
)

import numpy as np
import numpy.typing as npt

T = TypeVar("T")

ComplexArray = npt.NDArray[np.complex128]
FloatArray = npt.NDArray[np.float64]

Axis = Literal["x", "y", "z"]
OperatorRole = Literal["hermitian", "unitary", "general"]
StateForm = Literal["full", "deviation", "unnormalized"]
Verdict = Literal["constant", "balanced"]

ORACLES: Tuple[str, ...] = ("f1", "f2", "f3", "f4")
ORACLE_CLASSES: Dict[str, Verdict] = {
    "f1": "constant",
    "f2": "constant",
    "f3": "balanced",
    "f4": "balanced",
}
INPUT_MODES: Tuple[str, ...] = (
    "pure_00",
    "pure_01",
    "pure_10",
    "pure_11",
    "thermal",
    "temporal_average",
)

# Phase of each named rotation axis in the x-y plane.
AXIS_PHASES: Dict[str, float] = {
    "X": 0.0,
    "Y": math.pi / 2,
    "Xbar": math.pi,
    "Ybar": 3 * math.pi / 2,
}
SYMBOLIC_DELAYS: Tuple[str, ...] = ("tau", "tau/2")

# Input spin, then work spin (proton and carbon in chloroform).
DEFAULT_RECEIVER_SNR: Tuple[float, ...] = (4300.0, 35.0)

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-12
TRACE_TOL = 1e-12
EIGENVALUE_FLOOR = -1e-10


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------


@dataclass
class SpinSimError:
    """Standard error type for all spinsim operations."""
    message: str
    status: Optional[int] = None
    code: Optional[str] = None
    details: Optional[Dict[str, Any]] = None


@dataclass
class SpinSimResponse(Generic[T]):
    """Standard response type for all spinsim async operations.
    Uses Result pattern - never raises exceptions."""
    data: Optional[T]
    error: Optional[SpinSimError]


class SpinSimException(Exception):
    """Raised by the numerical core. `status` is the CLI exit status it maps to."""

    def __init__(
        self,
        message: str,
        code: str = "INTERNAL_ERROR",
        status: int = 1,
        details: Optional[Dict[str, Any]] = None,
    ) -> None:
        super().__init__(message)
        self.message = message
        self.code = code
        self.status = status
        self.details = details

    def to_error(self) -> SpinSimError:
        """Convert to the error envelope used by the async client."""
        return SpinSimError(
            message=self.message,
            status=self.status,
            code=self.code,
            details=self.details,
        )


class PulseParseError(SpinSimException):
    """Malformed pulse program. `offset` is the character offset of the failure."""

    def __init__(self, message: str, offset: int, code: str = "PARSE_ERROR") -> None:
        super().__init__(
            f"{message} (at offset {offset})",
            code=code,
            status=1,
            details={"offset": offset},
        )
        self.offset = offset


class InconclusiveError(SpinSimException):
    """The measured signal is too weak to decide constant versus balanced."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message, code="INCONCLUSIVE", status=2, details=details)


class CalibrationError(SpinSimException):
    """A calibration fit did not converge or the data show no usable decay."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message, code="FIT_FAILED", status=2, details=details)


# ---------------------------------------------------------------------------
# Spin system and matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpinSystem:
    """Static description of a small coupled spin system.

    Args:
        spin_labels: Ordered spin identifiers; the first label is the most
            significant tensor factor
        larmor_offset: Rotating-frame residual offset per spin in Hz
        j_coupling: Symmetric scalar coupling matrix in Hz
        t1: Longitudinal relaxation time per spin in seconds
        t2: Transverse relaxation time per spin in seconds
    """
    spin_labels: Tuple[str, ...]
    larmor_offset: Tuple[float, ...]
    j_coupling: Tuple[Tuple[float, ...], ...]
    t1: Tuple[float, ...]
    t2: Tuple[float, ...]

    def __post_init__(self) -> None:
        n = len(self.spin_labels)
        if n < 1:
            raise SpinSimException("SpinSystem: at least one spin is required", "INVALID_SYSTEM")
        if len(set(self.spin_labels)) != n:
            raise SpinSimException("SpinSystem: spin labels must be unique", "INVALID_SYSTEM")
        for name in ("larmor_offset", "t1", "t2"):
            if len(getattr(self, name)) != n:
                raise SpinSimException(
                    f"SpinSystem: {name} needs one entry per spin", "INVALID_SYSTEM"
                )
        if len(self.j_coupling) != n or any(len(row) != n for row in self.j_coupling):
            raise SpinSimException("SpinSystem: j_coupling must be n x n", "INVALID_SYSTEM")
        for i in range(n):
            if self.j_coupling[i][i] != 0:
                raise SpinSimException(
                    "SpinSystem: j_coupling diagonal must be zero", "INVALID_SYSTEM"
                )
            for j in range(i + 1, n):
                if self.j_coupling[i][j] != self.j_coupling[j][i]:
                    raise SpinSimException(
                        "SpinSystem: j_coupling must be symmetric", "INVALID_SYSTEM"
                    )
        for label, t1, t2 in zip(self.spin_labels, self.t1, self.t2):
            if not (t1 > 0 and t2 > 0):
                raise SpinSimException(
                    f"SpinSystem: relaxation times of spin {label} must be positive",
                    "INVALID_SYSTEM",
                    details={"spin": label, "t1": t1, "t2": t2},
                )
            if t2 > 2 * t1:
                raise SpinSimException(
                    f"SpinSystem: spin {label} violates t2 <= 2*t1",
                    "INVALID_SYSTEM",
                    details={"spin": label, "t1": t1, "t2": t2},
                )

    @property
    def n_spins(self) -> int:
        return len(self.spin_labels)

    @property
    def dim(self) -> int:
        return 2 ** self.n_spins

    def index(self, label: str) -> int:
        """Position of a spin label, raising UNKNOWN_SPIN when absent."""
        try:
            return self.spin_labels.index(label)
        except ValueError:
            raise SpinSimException(
                f"unknown spin {label!r}; system has {', '.join(self.spin_labels)}",
                "UNKNOWN_SPIN",
                details={"spin": label},
            ) from None

    def coupling(self, a: str, b: str) -> float:
        return self.j_coupling[self.index(a)][self.index(b)]

    def offset(self, label: str) -> float:
        return self.larmor_offset[self.index(label)]

    def with_offsets(self, extra: Mapping[str, float]) -> "SpinSystem":
        """Copy with additional per-spin frequency offsets in Hz."""
        for label in extra:
            self.index(label)
        offsets = tuple(
            off + float(extra.get(label, 0.0))
            for label, off in zip(self.spin_labels, self.larmor_offset)
        )
        return SpinSystem(self.spin_labels, offsets, self.j_coupling, self.t1, self.t2)

    def with_relaxation(
        self, t1: Mapping[str, float], t2: Mapping[str, float]
    ) -> "SpinSystem":
        """Copy with T1/T2 replaced for the named spins."""
        for label in (*t1, *t2):
            self.index(label)
        return SpinSystem(
            self.spin_labels,
            self.larmor_offset,
            self.j_coupling,
            tuple(float(t1.get(label, v)) for label, v in zip(self.spin_labels, self.t1)),
            tuple(float(t2.get(label, v)) for label, v in zip(self.spin_labels, self.t2)),
        )

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "SpinSystem":
        """Build from `{"spins": [{"label", "offset_hz", "t1_s", "t2_s"}], "j_hz": {"A-B": J}}`."""
        spins = doc.get("spins")
        if not isinstance(spins, list) or not spins:
            raise SpinSimException("SpinSystem: 'spins' must be a non-empty list", "INVALID_SYSTEM")
        try:
            labels = tuple(str(s["label"]) for s in spins)
            offsets = tuple(float(s.get("offset_hz", 0.0)) for s in spins)
            t1 = tuple(float(s["t1_s"]) for s in spins)
            t2 = tuple(float(s["t2_s"]) for s in spins)
        except (KeyError, TypeError, ValueError) as e:
            raise SpinSimException(f"SpinSystem: malformed spin entry: {e}", "INVALID_SYSTEM") from e

        n = len(labels)
        j = [[0.0] * n for _ in range(n)]
        for pair, value in (doc.get("j_hz") or {}).items():
            parts = str(pair).split("-")
            if len(parts) != 2 or parts[0] == parts[1]:
                raise SpinSimException(f"SpinSystem: bad coupling key {pair!r}", "INVALID_SYSTEM")
            if parts[0] not in labels or parts[1] not in labels:
                raise SpinSimException(
                    f"SpinSystem: coupling {pair!r} names an unknown spin", "UNKNOWN_SPIN"
                )
            a, b = labels.index(parts[0]), labels.index(parts[1])
            j[a][b] = j[b][a] = float(value)
        return cls(labels, offsets, tuple(tuple(row) for row in j), t1, t2)

    def to_dict(self) -> Dict[str, Any]:
        couplings: Dict[str, float] = {}
        for a in range(self.n_spins):
            for b in range(a + 1, self.n_spins):
                if self.j_coupling[a][b] != 0:
                    couplings[f"{self.spin_labels[a]}-{self.spin_labels[b]}"] = self.j_coupling[a][b]
        return {
            "spins": [
                {"label": label, "offset_hz": off, "t1_s": t1, "t2_s": t2}
                for label, off, t1, t2 in zip(
                    self.spin_labels, self.larmor_offset, self.t1, self.t2
                )
            ],
            "j_hz": couplings,
        }


def _check_square(entries: ComplexArray, owner: str) -> None:
    if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
        raise SpinSimException(f"{owner}: matrix must be square", "DIMENSION_MISMATCH")
    d = entries.shape[0]
    if d < 2 or d & (d - 1):
        raise SpinSimException(f"{owner}: dimension {d} is not a power of two", "DIMENSION_MISMATCH")


def _hermitian_defect(entries: ComplexArray) -> float:
    scale = max(1.0, float(np.max(np.abs(entries))))
    return float(np.max(np.abs(entries - entries.conj().T))) / scale


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Dense complex 2^N x 2^N operator with a role flag."""
    entries: ComplexArray
    role: OperatorRole = "general"

    def __post_init__(self) -> None:
        entries = np.array(self.entries, dtype=np.complex128)
        _check_square(entries, "OperatorMatrix")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        if self.role == "hermitian" and _hermitian_defect(entries) > HERMITIAN_TOL:
            raise SpinSimException("OperatorMatrix: not Hermitian", "NOT_HERMITIAN")
        if self.role == "unitary":
            defect = np.linalg.norm(entries @ entries.conj().T - np.eye(entries.shape[0]))
            if defect > UNITARY_TOL:
                raise SpinSimException(
                    "OperatorMatrix: not unitary",
                    "NOT_UNITARY",
                    details={"defect": float(defect)},
                )

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])

    @property
    def dagger(self) -> "OperatorMatrix":
        return OperatorMatrix(self.entries.conj().T, self.role)

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        if other.dim != self.dim:
            raise SpinSimException("OperatorMatrix: dimension mismatch", "DIMENSION_MISMATCH")
        role: OperatorRole = (
            "unitary" if self.role == "unitary" and other.role == "unitary" else "general"
        )
        return OperatorMatrix(self.entries @ other.entries, role)

    @classmethod
    def identity(cls, dim: int) -> "OperatorMatrix":
        return cls(np.eye(dim, dtype=np.complex128), "unitary")


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """System state.

    `full` states have unit trace and no negative eigenvalues, `deviation`
    states are traceless, and `unnormalized` states are Hermitian with any
    trace (sums of experiments).
    """
    entries: ComplexArray
    form: StateForm = "full"

    def __post_init__(self) -> None:
        entries = np.array(self.entries, dtype=np.complex128)
        _check_square(entries, "DensityMatrix")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        if _hermitian_defect(entries) > HERMITIAN_TOL:
            raise SpinSimException("DensityMatrix: not Hermitian", "NOT_HERMITIAN")
        trace = complex(np.trace(entries))
        if self.form == "full":
            if abs(trace - 1.0) > TRACE_TOL:
                raise SpinSimException(
                    f"DensityMatrix: full state has trace {trace.real!r}", "INVALID_STATE"
                )
            lowest = float(np.linalg.eigvalsh(entries)[0])
            if lowest < EIGENVALUE_FLOOR:
                raise SpinSimException(
                    f"DensityMatrix: negative eigenvalue {lowest!r}", "INVALID_STATE"
                )
        elif self.form == "deviation" and abs(trace) > TRACE_TOL:
            raise SpinSimException(
                f"DensityMatrix: deviation has trace {trace!r}", "INVALID_STATE"
            )

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])

    @property
    def populations(self) -> FloatArray:
        return np.real(np.diag(self.entries)).astype(np.float64)

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.entries)))

    def deviation(self) -> "DensityMatrix":
        """The traceless part rho - Tr(rho) I / d."""
        background = np.trace(self.entries) / self.dim
        return DensityMatrix(self.entries - background * np.eye(self.dim), "deviation")

    def is_diagonal(self, tol: float = 1e-10) -> bool:
        off = self.entries - np.diag(np.diag(self.entries))
        return bool(np.max(np.abs(off)) <= tol)

    @classmethod
    def basis(cls, bits: str) -> "DensityMatrix":
        """Pure computational basis state such as "01"."""
        if not bits or any(b not in "01" for b in bits):
            raise SpinSimException(f"bad basis label {bits!r}", "INVALID_STATE")
        entries = np.zeros((2 ** len(bits),) * 2, dtype=np.complex128)
        index = int(bits, 2)
        entries[index, index] = 1.0
        return cls(entries, "full")

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim, dtype=np.complex128) / dim, "full")


# ---------------------------------------------------------------------------
# Pulse programs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PulseEvent:
    """A phased spin-selective rotation or a free-evolution delay.

    Rotations carry either a named `axis` (X, Y, Xbar, Ybar) or an explicit
    `phase` in radians. Delays carry a symbol ("tau", "tau/2") or seconds.
    """
    kind: Literal["pulse", "delay"]
    spin: Optional[str] = None
    axis: Optional[str] = None
    phase: Optional[float] = None
    flip_angle: float = math.pi / 2
    delay: Union[str, float, None] = None

    def __post_init__(self) -> None:
        if self.kind == "pulse":
            if not self.spin:
                raise SpinSimException("PulseEvent: pulse needs a spin", "INVALID_CONFIG")
            if (self.axis is None) == (self.phase is None):
                raise SpinSimException(
                    "PulseEvent: give exactly one of axis or phase", "INVALID_CONFIG"
                )
            if self.axis is not None and self.axis not in AXIS_PHASES:
                raise SpinSimException(f"PulseEvent: unknown axis {self.axis!r}", "INVALID_CONFIG")
            if not 0 < self.flip_angle <= 2 * math.pi:
                raise SpinSimException(
                    "PulseEvent: flip angle must lie in (0, 2*pi]", "INVALID_CONFIG"
                )
        elif self.kind == "delay":
            if isinstance(self.delay, str):
                if self.delay not in SYMBOLIC_DELAYS:
                    raise SpinSimException(
                        f"PulseEvent: unknown delay symbol {self.delay!r}", "INVALID_CONFIG"
                    )
            elif self.delay is None:
                raise SpinSimException("PulseEvent: delay needs a duration", "INVALID_CONFIG")
            elif not self.delay >= 0:
                raise SpinSimException(
                    f"PulseEvent: negative delay {self.delay!r}", "NEGATIVE_DURATION"
                )
        else:
            raise SpinSimException(f"PulseEvent: unknown kind {self.kind!r}", "INVALID_CONFIG")

    @classmethod
    def rotation(cls, axis: str, spin: str, flip_angle: float = math.pi / 2) -> "PulseEvent":
        return cls(kind="pulse", spin=spin, axis=axis, flip_angle=flip_angle)

    @classmethod
    def phased(cls, spin: str, phase: float, flip_angle: float = math.pi / 2) -> "PulseEvent":
        return cls(kind="pulse", spin=spin, phase=phase, flip_angle=flip_angle)

    @classmethod
    def wait(cls, delay: Union[str, float]) -> "PulseEvent":
        return cls(kind="delay", delay=delay)

    @property
    def phase_angle(self) -> float:
        if self.axis is not None:
            return AXIS_PHASES[self.axis]
        return float(self.phase or 0.0)

    def seconds(self, tau: Optional[float]) -> float:
        """Resolved delay length in seconds."""
        if self.kind != "delay":
            return 0.0
        if isinstance(self.delay, str):
            if tau is None:
                raise SpinSimException(
                    f"symbolic delay {self.delay!r} needs a value for tau", "UNRESOLVED_TAU"
                )
            return tau if self.delay == "tau" else tau / 2
        return float(self.delay or 0.0)


PulseGroup = Tuple[PulseEvent, ...]


@dataclass(frozen=True)
class PulseProgram:
    """Parsed pulse sequence: groups of events applied left to right."""
    groups: Tuple[PulseGroup, ...] = ()
    tau: Optional[float] = None

    def __post_init__(self) -> None:
        if any(len(g) == 0 for g in self.groups):
            raise SpinSimException("PulseProgram: empty group", "INVALID_CONFIG")
        if self.tau is not None and not self.tau >= 0:
            raise SpinSimException("PulseProgram: tau must be >= 0", "NEGATIVE_DURATION")

    @property
    def events(self) -> Tuple[PulseEvent, ...]:
        return tuple(e for g in self.groups for e in g)

    @property
    def pulse_count(self) -> int:
        return sum(1 for e in self.events if e.kind == "pulse")

    @property
    def has_symbolic_delays(self) -> bool:
        return any(isinstance(e.delay, str) for e in self.events)

    def concat(self, other: "PulseProgram") -> "PulseProgram":
        """`self` followed by `other` in time."""
        tau = self.tau if self.tau is not None else other.tau
        return PulseProgram(self.groups + other.groups, tau)

    def with_tau(self, tau: Optional[float]) -> "PulseProgram":
        return PulseProgram(self.groups, tau)

    def to_dict(self) -> Dict[str, Any]:
        def event(e: PulseEvent) -> Dict[str, Any]:
            if e.kind == "pulse":
                return {
                    "kind": "pulse",
                    "spin": e.spin,
                    "axis": e.axis,
                    "phase": e.phase_angle,
                    "flip_angle": e.flip_angle,
                }
            return {"kind": "delay", "delay": e.delay}

        return {
            "groups": [[event(e) for e in g] for g in self.groups],
            "tau_s": self.tau,
        }


# ---------------------------------------------------------------------------
# Experiment and noise configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseSettings:
    """Knobs for the noisy ensemble and acquisition.

    Args:
        seed: RNG seed, required whenever noise is enabled
        envelope_time_constant: Target nutation envelope decay in seconds
        ensemble_size: Number of RF amplitude classes in the ensemble
        pulse_width: Nominal pi/2 pulse width in seconds
        flip_angle_scale: Centre of the RF amplitude distribution
        receiver_noise: Add Gaussian receiver noise to acquired FIDs
        receiver_snr: Per-spin signal-to-noise ratio of the reference line;
            spins left out take DEFAULT_RECEIVER_SNR by position
        carrier_offset: Per-spin carrier frequency error in Hz
        recovery_delay: Relaxation time between repeated experiments, None
            for full recovery
    """
    seed: Optional[int] = None
    envelope_time_constant: float = 200e-6
    ensemble_size: int = 21
    pulse_width: float = 12.5e-6
    flip_angle_scale: float = 0.94
    receiver_noise: bool = False
    receiver_snr: Dict[str, float] = field(default_factory=dict)
    carrier_offset: Dict[str, float] = field(default_factory=dict)
    recovery_delay: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.envelope_time_constant > 0:
            raise SpinSimException("noise: envelope time constant must be > 0", "INVALID_CONFIG")
        if self.ensemble_size < 1:
            raise SpinSimException("noise: ensemble size must be >= 1", "INVALID_CONFIG")
        if not self.pulse_width >= 0:
            raise SpinSimException("noise: pulse width must be >= 0", "NEGATIVE_DURATION")
        if not self.flip_angle_scale > 0:
            raise SpinSimException("noise: flip angle scale must be > 0", "INVALID_CONFIG")
        if any(not snr > 0 for snr in self.receiver_snr.values()):
            raise SpinSimException("noise: receiver SNR must be > 0", "INVALID_CONFIG")
        if self.recovery_delay is not None and not self.recovery_delay >= 0:
            raise SpinSimException("noise: recovery delay must be >= 0", "NEGATIVE_DURATION")

    @property
    def pulse_power(self) -> float:
        """Nominal nutation rate in rad/s of a pi/2 pulse of `pulse_width`."""
        return (math.pi / 2) / self.pulse_width

    def snr_by_spin(self, labels: Sequence[str]) -> Dict[str, float]:
        """Receiver SNR for every label, configured values first."""
        last = len(DEFAULT_RECEIVER_SNR) - 1
        snr = {label: DEFAULT_RECEIVER_SNR[min(k, last)] for k, label in enumerate(labels)}
        snr.update(self.receiver_snr)
        return snr


@dataclass(frozen=True)
class ExperimentConfig:
    """One Deutsch-Jozsa run.

    Args:
        system: The spin system
        oracle: One of f1..f4
        input_mode: pure_00/01/10/11, thermal or temporal_average
        noise_enabled: Interleave relaxation and the RF ensemble
        temperature: Sample temperature in kelvin
        field_polarization: Per-spin hbar*omega/kT; empty derives it from
            `temperature` and `reference_hz`
        tau: Override for the symbolic delay tau in seconds
        reference_hz: Proton spectrometer frequency
        noise: Noise knobs
    """
    system: SpinSystem
    oracle: str = "f1"
    input_mode: str = "pure_00"
    noise_enabled: bool = False
    temperature: float = 298.15
    field_polarization: Tuple[float, ...] = ()
    tau: Optional[float] = None
    reference_hz: float = 499_755_169.0
    noise: NoiseSettings = field(default_factory=NoiseSettings)

    def __post_init__(self) -> None:
        if self.oracle not in ORACLES:
            raise SpinSimException(
                f"unknown oracle {self.oracle!r}; expected one of {', '.join(ORACLES)}",
                "UNKNOWN_ORACLE",
            )
        if self.input_mode not in INPUT_MODES:
            raise SpinSimException(
                f"unknown input mode {self.input_mode!r}; expected one of {', '.join(INPUT_MODES)}",
                "INVALID_CONFIG",
            )
        if self.input_mode.startswith("pure_") and self.system.n_spins != 2:
            raise SpinSimException("pure inputs need a two-spin system", "INVALID_CONFIG")
        if not self.temperature > 0:
            raise SpinSimException("temperature must be > 0 K", "INVALID_CONFIG")
        if not self.reference_hz > 0:
            raise SpinSimException("reference frequency must be > 0", "INVALID_CONFIG")
        if self.field_polarization:
            if len(self.field_polarization) != self.system.n_spins:
                raise SpinSimException(
                    "field_polarization needs one entry per spin", "POLARIZATION_RANGE"
                )
            if any(not 0 <= p < 0.01 for p in self.field_polarization):
                raise SpinSimException(
                    "polarizations must lie in [0, 0.01)", "POLARIZATION_RANGE"
                )
        if self.tau is not None and not self.tau >= 0:
            raise SpinSimException("tau must be >= 0", "NEGATIVE_DURATION")

    @property
    def polarizations(self) -> Tuple[float, ...]:
        if self.field_polarization:
            return self.field_polarization
        from .states import default_polarizations

        return default_polarizations(self.system, self.temperature, self.reference_hz)


@dataclass(frozen=True)
class ReadoutSettings:
    """Acquisition and spectral processing knobs."""
    n_samples: int = 4096
    dwell: float = 5e-4
    window_bins: int = 5
    line_broadening: float = 0.0
    threshold: float = 0.0

    def __post_init__(self) -> None:
        if self.n_samples < 1:
            raise SpinSimException("readout: n_samples must be >= 1", "INVALID_CONFIG")
        if not self.dwell > 0:
            raise SpinSimException("readout: dwell must be > 0", "INVALID_CONFIG")
        if self.window_bins < 0:
            raise SpinSimException("readout: window must be >= 0 bins", "INVALID_CONFIG")
        if not self.line_broadening >= 0 or not self.threshold >= 0:
            raise SpinSimException(
                "readout: line broadening and threshold must be >= 0", "INVALID_CONFIG"
            )


@dataclass(frozen=True)
class RelaxationParams:
    """Per-spin relaxation constants and equilibrium polarizations."""
    t1: Tuple[float, ...]
    t2: Tuple[float, ...]
    polarization: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if len(self.t1) != len(self.t2):
            raise SpinSimException("RelaxationParams: t1/t2 length mismatch", "INVALID_SYSTEM")
        if self.polarization and len(self.polarization) != len(self.t1):
            raise SpinSimException(
                "RelaxationParams: polarization length mismatch", "INVALID_SYSTEM"
            )
        for t1, t2 in zip(self.t1, self.t2):
            if not (t1 > 0 and t2 > 0) or t2 > 2 * t1:
                raise SpinSimException(
                    "RelaxationParams: need t1, t2 > 0 and t2 <= 2*t1", "INVALID_SYSTEM"
                )

    @classmethod
    def from_system(
        cls, system: SpinSystem, polarizations: Sequence[float] = ()
    ) -> "RelaxationParams":
        return cls(system.t1, system.t2, tuple(float(p) for p in polarizations))


@dataclass(frozen=True)
class RfInhomogeneityModel:
    """Discrete distribution of RF amplitude scale factors."""
    scales: Tuple[float, ...]
    weights: Tuple[float, ...]
    envelope_time_constant: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.scales:
            raise SpinSimException("RF distribution is empty", "EMPTY_DISTRIBUTION")
        if len(self.scales) != len(self.weights):
            raise SpinSimException("RF distribution: scales/weights mismatch", "INVALID_CONFIG")
        if any(not s > 0 for s in self.scales):
            raise SpinSimException("RF distribution: scale factors must be > 0", "INVALID_CONFIG")
        if any(not w >= 0 for w in self.weights) or abs(sum(self.weights) - 1.0) > 1e-9:
            raise SpinSimException(
                "RF distribution: weights must be >= 0 and sum to 1", "INVALID_CONFIG"
            )

    def ordered(self) -> List[Tuple[float, float]]:
        """(scale, weight) pairs in ascending scale order."""
        return sorted(zip(self.scales, self.weights))

    @property
    def mean_scale(self) -> float:
        return float(np.dot(self.scales, self.weights))

    @classmethod
    def single(cls, scale: float = 1.0) -> "RfInhomogeneityModel":
        return cls((scale,), (1.0,))

    @classmethod
    def lorentzian(
        cls,
        center: float,
        width: float,
        points: int = 21,
        envelope_time_constant: Optional[float] = None,
    ) -> "RfInhomogeneityModel":
        """Lorentzian weights over `center + width * x`, x in [-5, 5]."""
        if points < 1:
            raise SpinSimException("RF distribution is empty", "EMPTY_DISTRIBUTION")
        x = np.linspace(-5.0, 5.0, points) if points > 1 else np.zeros(1)
        weights = 1.0 / (1.0 + x ** 2)
        weights = weights / weights.sum()
        return cls(
            tuple(float(s) for s in center + width * x),
            tuple(float(w) for w in weights),
            envelope_time_constant,
        )


class TemporalAverage(NamedTuple):
    """Sum of three experiments split into background and signal."""
    alpha: float
    delta: float
    effective: DensityMatrix


# ---------------------------------------------------------------------------
# Readout
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Fid:
    """Sampled free induction decay."""
    samples: ComplexArray
    dwell: float
    detected_spin: str
    carrier_offset: float = 0.0

    def __post_init__(self) -> None:
        if not self.dwell > 0:
            raise SpinSimException("Fid: dwell must be > 0", "INVALID_CONFIG")

    @property
    def times(self) -> FloatArray:
        return np.arange(len(self.samples), dtype=np.float64) * self.dwell


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Fourier transformed FID; frequencies in Hz relative to the carrier."""
    amplitudes: ComplexArray
    frequency_axis: FloatArray
    detected_spin: str = ""

    @property
    def resolution(self) -> float:
        return float(self.frequency_axis[1] - self.frequency_axis[0])


LineIntegrals = Tuple[complex, complex]


@dataclass(frozen=True)
class TomographyResult:
    """Reconstructed state and its error against theory.

    `deviation` is the reconstructed traceless part rescaled to the theory's
    norm; `normalized` adds back the I/d background.
    """
    deviation: DensityMatrix
    theory: DensityMatrix
    epsilon: float
    scale: float
    line_integrals: Dict[str, Dict[str, List[float]]] = field(default_factory=dict)

    @property
    def normalized(self) -> ComplexArray:
        d = self.deviation.dim
        return self.deviation.entries + np.eye(d) / d

    @property
    def pure_population(self) -> float:
        return float(np.real(self.normalized[0, 0]))

    @property
    def max_off_diagonal(self) -> float:
        rho = self.normalized
        return float(np.max(np.abs(rho - np.diag(np.diag(rho)))))


@dataclass(frozen=True)
class CalibrationReport:
    """Constants fitted back from simulated calibration experiments."""
    t1: Dict[str, float]
    t2: Dict[str, float]
    envelope_time_constant: float
    rf_width: float
    model: RfInhomogeneityModel

    def to_dict(self) -> Dict[str, Any]:
        return {
            "t1_s": dict(self.t1),
            "t2_s": dict(self.t2),
            "envelope_time_constant_s": self.envelope_time_constant,
            "rf_distribution": {
                "width": self.rf_width,
                "scales": list(self.model.scales),
                "weights": list(self.model.weights),
            },
        }


@dataclass
class RunManifest:
    """Record of one CLI invocation and the artifacts it wrote."""
    command: str
    config_path: Optional[str]
    seed: Optional[int]
    output_dir: str
    checksums: Dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "config_path": self.config_path,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "checksums": dict(sorted(self.checksums.items())),
        }


# Type aliases for common response types
StateResponse = SpinSimResponse[DensityMatrix]
VerdictResponse = SpinSimResponse[Verdict]
SpectrumResponse = SpinSimResponse[Spectrum]
TomographyResponse = SpinSimResponse[TomographyResult]
