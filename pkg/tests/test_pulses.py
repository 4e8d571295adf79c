"""
Pulse-program parser and compiler tests.
"""

import math
from typing import Callable

import numpy as np
import pytest

from spinsim.pulses import (
    compile_program,
    dj_program,
    duration,
    load_preset,
    parse,
    relabel,
    render,
)
from spinsim.spin import equivalent, evolve
from spinsim.types import (
    DensityMatrix,
    OperatorMatrix,
    PulseEvent,
    PulseParseError,
    PulseProgram,
    SpinSimException,
    SpinSystem,
)

IDENTITY = OperatorMatrix(np.eye(4), "unitary")
NOT_B = OperatorMatrix(np.kron(np.eye(2), [[0, 1], [1, 0]]), "unitary")
CNOT = OperatorMatrix(
    np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]), "unitary"
)

F1_TEXT = "tau/2 - X(B) X(B) - tau/2 - X(B) X(B)"
F3_TEXT = "Y(B) - tau - Ybar(B) X(B) - Ybar(A) Xbar(A) Y(A)"


class TestParse:
    """Text to PulseProgram."""

    def test_f1_groups(self) -> None:
        """The f1 string gives four groups."""
        program = parse(F1_TEXT)
        assert len(program.groups) == 4
        assert program.groups[0] == (PulseEvent.wait("tau/2"),)
        assert program.groups[1] == (PulseEvent.rotation("X", "B"),) * 2
        assert program.groups[3] == (PulseEvent.rotation("X", "B"),) * 2

    def test_empty_program(self, system: SpinSystem) -> None:
        """Empty text is the identity."""
        program = parse("")
        assert program.groups == ()
        assert equivalent(compile_program(program, system), IDENTITY)

    def test_presets_match_text(self) -> None:
        """Shipped presets carry the documented strings."""
        assert load_preset("f1") == parse(F1_TEXT)
        assert load_preset("f3") == parse(F3_TEXT)

    def test_literal_durations(self) -> None:
        """Units s, ms and us are understood."""
        program = parse("1ms 20us 0.5s 1e-3s")
        assert [e.delay for e in program.events] == pytest.approx([1e-3, 20e-6, 0.5, 1e-3])

    def test_comments_ignored(self) -> None:
        """Hash comments run to end of line."""
        assert parse("# header\nX(A)  # tail") == parse("X(A)")

    def test_bad_token_offset(self) -> None:
        """Unknown axis fails with the character offset."""
        with pytest.raises(PulseParseError) as info:
            parse("X(A) Z(A)")
        assert info.value.code == "PARSE_ERROR"
        assert info.value.offset == 5
        assert "offset 5" in info.value.message

    def test_dangling_separator(self) -> None:
        """A trailing dash is a syntax error."""
        with pytest.raises(PulseParseError) as info:
            parse("X(A) -")
        assert info.value.code == "PARSE_ERROR"

    def test_unknown_spin(self, system: SpinSystem) -> None:
        """Spin labels are checked against the system."""
        with pytest.raises(PulseParseError) as info:
            parse("X(A) Y(C)", system)
        assert info.value.code == "UNKNOWN_SPIN"
        assert info.value.offset == 7

    def test_round_trip(self, program_factory: Callable[[int], PulseProgram]) -> None:
        """parse(render(p)) == p over 500 generated programs."""
        for seed in range(500):
            program = program_factory(seed)
            assert parse(render(program)) == program, render(program)

    def test_render_rejects_arbitrary_phase(self) -> None:
        """Phase-only pulses have no text form."""
        program = PulseProgram(((PulseEvent.phased("A", 0.3),),))
        with pytest.raises(SpinSimException) as info:
            render(program)
        assert info.value.code == "UNRENDERABLE"


class TestCompile:
    """Programs to unitaries."""

    def test_f1_is_identity(self, system: SpinSystem) -> None:
        """f1 compiles to I up to phase."""
        assert equivalent(compile_program(load_preset("f1"), system), IDENTITY)

    def test_f2_flips_b(self, system: SpinSystem) -> None:
        """f2 inverts B and leaves A alone."""
        assert equivalent(compile_program(load_preset("f2"), system), NOT_B)

    def test_f3_is_cnot(self, system: SpinSystem) -> None:
        """f3 compiles to controlled-NOT with A as control."""
        assert equivalent(compile_program(load_preset("f3"), system), CNOT)

    def test_f4_is_inverted_cnot(self, system: SpinSystem) -> None:
        """f4 is f3 followed by a bit flip on B."""
        assert equivalent(compile_program(load_preset("f4"), system), NOT_B @ CNOT)

    def test_concatenation_composes(
        self, system: SpinSystem, program_factory: Callable[[int], PulseProgram]
    ) -> None:
        """compile(P1 then P2) = compile(P2) compile(P1), phases included."""
        for seed in range(50):
            first, second = program_factory(seed), program_factory(seed + 1000)
            joined = compile_program(first.concat(second), system)
            composed = compile_program(second, system) @ compile_program(first, system)
            np.testing.assert_allclose(joined.entries, composed.entries, atol=1e-10)

    def test_tau_override(self, system: SpinSystem) -> None:
        """A wrong tau breaks the controlled-NOT."""
        wrong = load_preset("f3").with_tau(1 / (4 * 215.0))
        assert not equivalent(compile_program(wrong, system), CNOT)

    def test_unresolved_tau(self) -> None:
        """Symbolic delays need a coupling or an explicit tau."""
        uncoupled = SpinSystem(("A", "B"), (0.0, 0.0), ((0.0, 0.0), (0.0, 0.0)), (1.0, 1.0), (1.0, 1.0))
        with pytest.raises(SpinSimException) as info:
            compile_program(parse("tau"), uncoupled)
        assert info.value.code == "UNRESOLVED_TAU"

    def test_unknown_spin_at_compile(self, system: SpinSystem) -> None:
        """Unchecked programs still fail on unknown spins."""
        with pytest.raises(SpinSimException) as info:
            compile_program(parse("X(C)"), system)
        assert info.value.code == "UNKNOWN_SPIN"

    def test_dj_program_text(self) -> None:
        """Preparation, oracle and un-rotation in order."""
        assert render(dj_program("f1")) == (
            "Y(A) Ybar(B) - tau/2 - X(B) X(B) - tau/2 - X(B) X(B) - Ybar(A) Y(B)"
        )

    def test_dj_program_on_system_labels(self, hc_system: SpinSystem) -> None:
        """Presets and bracketing pulses follow the system's first two spins."""
        assert render(dj_program("f1", system=hc_system)) == (
            "Y(H) Ybar(C) - tau/2 - X(C) X(C) - tau/2 - X(C) X(C) - Ybar(H) Y(C)"
        )
        assert render(load_preset("f3", hc_system)) == "Y(C) - tau - Ybar(C) X(C) - Ybar(H) Xbar(H) Y(H)"

    def test_relabel_is_simultaneous(self) -> None:
        """Swapping the two labels does not collapse them onto one spin."""
        assert render(relabel(parse("X(A) Y(B)"), ("B", "A"))) == "X(B) Y(A)"

    def test_relabelled_oracles(self, hc_system: SpinSystem) -> None:
        """Renamed programs compile to the same unitaries."""
        assert equivalent(compile_program(load_preset("f3", hc_system), hc_system), CNOT)
        assert equivalent(compile_program(load_preset("f4", hc_system), hc_system), NOT_B @ CNOT)

    def test_single_spin_system(self) -> None:
        """Oracles need two spins."""
        lone = SpinSystem.from_dict({"spins": [{"label": "H", "t1_s": 1.0, "t2_s": 0.5}]})
        with pytest.raises(SpinSimException) as info:
            dj_program("f1", system=lone)
        assert info.value.code == "INVALID_SYSTEM"

    @pytest.mark.parametrize("oracle,bits", [("f1", "00"), ("f2", "00"), ("f3", "10"), ("f4", "10")])
    def test_dj_on_ground_state(self, system: SpinSystem, oracle: str, bits: str) -> None:
        """|00> ends in |00> for constant oracles and |10> for balanced ones."""
        final = evolve(DensityMatrix.basis("00"), compile_program(dj_program(oracle), system))
        np.testing.assert_allclose(final.populations, DensityMatrix.basis(bits).populations, atol=1e-9)

    def test_unknown_oracle(self) -> None:
        """Only f1..f4 exist."""
        with pytest.raises(SpinSimException) as info:
            dj_program("f9")
        assert info.value.code == "UNKNOWN_ORACLE"


class TestDuration:
    """Wall-clock lengths."""

    def test_f1(self, system: SpinSystem) -> None:
        """Two tau/2 delays: 2.33 ms at J = 215 Hz."""
        assert duration(load_preset("f1"), system) == pytest.approx(2 / (4 * 215.0))

    def test_f3(self, system: SpinSystem) -> None:
        """One tau delay."""
        assert duration(load_preset("f3"), system) == pytest.approx(1 / (2 * 215.0))

    def test_empty(self) -> None:
        """No events, no time."""
        assert duration(parse("")) == 0.0

    def test_finite_pulses_under_seven_ms(self, system: SpinSystem) -> None:
        """The whole algorithm with 12.5 us pulses stays under 7 ms."""
        for oracle in ("f1", "f2", "f3", "f4"):
            program = dj_program(oracle)
            total = duration(program, system, 12.5e-6)
            assert total < 7e-3
            assert total == pytest.approx(duration(program, system) + 12.5e-6 * program.pulse_count)

    def test_negative_literal_rejected(self) -> None:
        """Negative waits are rejected when built."""
        with pytest.raises(SpinSimException) as info:
            PulseEvent.wait(-1e-3)
        assert info.value.code == "NEGATIVE_DURATION"

    def test_flip_angle_range(self) -> None:
        """Flip angles must lie in (0, 2 pi]."""
        with pytest.raises(SpinSimException):
            PulseEvent.rotation("X", "A", flip_angle=3 * math.pi)
