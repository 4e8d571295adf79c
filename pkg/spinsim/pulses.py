"""
Pulse-seq module - parse, render and compile pulse programs.

Programs are written in the usual NMR shorthand, for example
"tau/2 - X(B) X(B) - tau/2 - X(B) X(B)". Dashes separate groups and are only
there for readability; within a group tokens apply in written order.
"""

import logging
import math
from dataclasses import replace
from functools import lru_cache
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from lark import Lark, Token, Transformer
from lark.exceptions import UnexpectedInput

from .spin import evolve, free_propagator, hamiltonian, rf_rotation
from .types import (
    ORACLES,
    DensityMatrix,
    OperatorMatrix,
    PulseEvent,
    PulseGroup,
    PulseParseError,
    PulseProgram,
    SpinSimException,
    SpinSystem,
)

logger = logging.getLogger(__name__)

GRAMMAR_PATH = Path(__file__).parent / "grammars" / "pulse.lark"
PRESET_DIR = Path(__file__).parent / "presets"

# Presets and the bracketing pulses name the input spin A and the work spin B.
PRESET_LABELS: Tuple[str, str] = ("A", "B")

# Bracketing pulses around the oracle: Hadamard-like Y/Ybar rotations.
PREPARE_TEXT = "Y(A) Ybar(B)"
UNROTATE_TEXT = "Ybar(A) Y(B)"

_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6}

Relaxation = Callable[[DensityMatrix, float], DensityMatrix]


def _seconds(literal: str) -> float:
    for unit in ("ms", "us", "s"):
        if literal.endswith(unit):
            return float(literal[: -len(unit)]) * _UNITS[unit]
    raise ValueError(f"duration without unit: {literal!r}")


class _ProgramTransformer(Transformer[Token, Tuple[PulseGroup, ...]]):
    """Turns the parse tree into PulseEvent groups."""

    def program(self, groups: List[PulseGroup]) -> Tuple[PulseGroup, ...]:
        return tuple(groups)

    def group(self, events: List[PulseEvent]) -> PulseGroup:
        return tuple(events)

    def rotation(self, children: List[Token]) -> PulseEvent:
        axis, spin = children
        return PulseEvent.rotation(str(axis), str(spin))

    def symbolic_delay(self, children: List[Token]) -> PulseEvent:
        return PulseEvent.wait(str(children[0]))

    def literal_delay(self, children: List[Token]) -> PulseEvent:
        return PulseEvent.wait(_seconds(str(children[0])))


@lru_cache(maxsize=1)
def _create_parser() -> Lark:
    return Lark(GRAMMAR_PATH.read_text(encoding="utf-8"), start="program", parser="lalr")


def parse(
    text: str,
    system: Optional[SpinSystem] = None,
    tau: Optional[float] = None,
) -> PulseProgram:
    """Parse pulse notation into a PulseProgram.

    Spin labels are checked against `system` when one is given.
    """
    try:
        tree = _create_parser().parse(text)
    except UnexpectedInput as e:
        offset = e.pos_in_stream if isinstance(e.pos_in_stream, int) else len(text)
        raise PulseParseError(f"cannot parse pulse program: {_describe(e)}", offset) from e

    if system is not None:
        for rotation in tree.find_data("rotation"):
            spin = rotation.children[1]
            if isinstance(spin, Token) and str(spin) not in system.spin_labels:
                raise PulseParseError(
                    f"unknown spin {str(spin)!r}",
                    spin.start_pos if spin.start_pos is not None else 0,
                    code="UNKNOWN_SPIN",
                )

    groups = _ProgramTransformer().transform(tree)
    return PulseProgram(groups, tau)


def _describe(error: UnexpectedInput) -> str:
    token = getattr(error, "token", None)
    if token is not None:
        if token.type == "$END":
            return "unexpected end of input"
        return f"unexpected token {str(token)!r}"
    char = getattr(error, "char", None)
    if char is not None:
        return f"unexpected character {char!r}"
    return type(error).__name__


def render_event(event: PulseEvent) -> str:
    if event.kind == "delay":
        if isinstance(event.delay, str):
            return event.delay
        return f"{float(event.delay or 0.0)!r}s"
    if event.axis is None or event.flip_angle != math.pi / 2:
        raise SpinSimException(
            "only named pi/2 rotations have a text form", "UNRENDERABLE"
        )
    return f"{event.axis}({event.spin})"


def render(program: PulseProgram) -> str:
    """Inverse of parse for grammar-expressible programs."""
    return " - ".join(" ".join(render_event(e) for e in group) for group in program.groups)


@lru_cache(maxsize=None)
def _preset_text(name: str) -> str:
    if name not in ORACLES:
        raise SpinSimException(
            f"unknown oracle {name!r}; expected one of {', '.join(ORACLES)}",
            "UNKNOWN_ORACLE",
        )
    return (PRESET_DIR / f"{name}.pulse").read_text(encoding="utf-8")


def _dj_labels(system: SpinSystem) -> Tuple[str, str]:
    if system.n_spins < 2:
        raise SpinSimException(
            f"oracles need an input and a work spin; system has {', '.join(system.spin_labels)}",
            "INVALID_SYSTEM",
        )
    return system.spin_labels[0], system.spin_labels[1]


def _rename(event: PulseEvent, mapping: Dict[str, str]) -> PulseEvent:
    if event.spin is None or event.spin not in mapping:
        return event
    return replace(event, spin=mapping[event.spin])


def relabel(program: PulseProgram, labels: Sequence[str]) -> PulseProgram:
    """Rename spins by position: PRESET_LABELS[k] becomes labels[k]."""
    mapping = dict(zip(PRESET_LABELS, labels))
    groups = tuple(tuple(_rename(e, mapping) for e in g) for g in program.groups)
    return PulseProgram(groups, program.tau)


def load_preset(name: str, system: Optional[SpinSystem] = None) -> PulseProgram:
    """The shipped oracle program f1..f4, on the spins of `system` when given."""
    program = parse(_preset_text(name))
    if system is None:
        return program
    return relabel(program, _dj_labels(system))


def dj_program(
    oracle: str, tau: Optional[float] = None, system: Optional[SpinSystem] = None
) -> PulseProgram:
    """Preparation pulses, oracle, then un-rotation, as one program."""
    program = parse(PREPARE_TEXT).concat(load_preset(oracle)).concat(parse(UNROTATE_TEXT))
    if system is not None:
        program = relabel(program, _dj_labels(system))
    return program.with_tau(tau)


def default_tau(system: SpinSystem) -> Optional[float]:
    """1/(2J) for the first two spins, None when they are uncoupled."""
    if system.n_spins < 2:
        return None
    j = system.j_coupling[0][1]
    if j == 0:
        return None
    return 1.0 / (2.0 * abs(j))


def resolve_tau(program: PulseProgram, system: Optional[SpinSystem]) -> Optional[float]:
    if program.tau is not None:
        return program.tau
    tau = default_tau(system) if system is not None else None
    if tau is None and program.has_symbolic_delays:
        raise SpinSimException(
            "program uses tau but no coupling defines it; set tau explicitly",
            "UNRESOLVED_TAU",
        )
    return tau


def event_propagator(
    event: PulseEvent,
    system: SpinSystem,
    h: OperatorMatrix,
    tau: Optional[float],
    flip_scale: float = 1.0,
) -> OperatorMatrix:
    if event.kind == "pulse":
        return rf_rotation(
            system, event.spin or "", event.phase_angle, event.flip_angle * flip_scale
        )
    return free_propagator(h, event.seconds(tau))


def compile_program(
    program: PulseProgram, system: SpinSystem, flip_scale: float = 1.0
) -> OperatorMatrix:
    """Product of event propagators; the leftmost event acts first."""
    tau = resolve_tau(program, system)
    h = hamiltonian(system)
    for event in program.events:
        if event.kind == "pulse":
            system.index(event.spin or "")
    u = OperatorMatrix.identity(system.dim)
    for event in program.events:
        u = event_propagator(event, system, h, tau, flip_scale) @ u
    logger.debug("compiled %d events (tau=%s)", len(program.events), tau)
    return u


def duration(
    program: PulseProgram,
    system: Optional[SpinSystem] = None,
    pulse_width: float = 0.0,
) -> float:
    """Wall-clock length: resolved delays plus `pulse_width` per pulse."""
    if pulse_width < 0:
        raise SpinSimException("pulse width must be >= 0", "NEGATIVE_DURATION")
    tau = resolve_tau(program, system)
    delays = sum(e.seconds(tau) for e in program.events)
    return delays + pulse_width * program.pulse_count


def apply_program(
    rho: DensityMatrix,
    program: PulseProgram,
    system: SpinSystem,
    flip_scale: float = 1.0,
    pulse_width: float = 0.0,
    relaxation: Optional[Relaxation] = None,
) -> DensityMatrix:
    """Step a state through a program, relaxing across delays and pulse widths."""
    tau = resolve_tau(program, system)
    h = hamiltonian(system)
    for event in program.events:
        rho = evolve(rho, event_propagator(event, system, h, tau, flip_scale))
        if relaxation is None:
            continue
        elapsed = pulse_width if event.kind == "pulse" else event.seconds(tau)
        if elapsed > 0:
            rho = relaxation(rho, elapsed)
    return rho
