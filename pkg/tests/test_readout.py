"""
Readout tests: FIDs, spectra, line integrals and nine-experiment tomography.
"""

from dataclasses import replace
from typing import Callable

import numpy as np
import pytest

from spinsim.pipeline import run_spectrum, run_tomography
from spinsim.readout import (
    READOUT_PAIRS,
    acquire,
    classify_spectrum,
    line_integrals,
    reconstruct_deviation,
    relative_error,
    spectrum,
    synth_fid,
)
from spinsim.spin import PAULI
from spinsim.types import (
    DensityMatrix,
    ExperimentConfig,
    Fid,
    InconclusiveError,
    NoiseSettings,
    ReadoutSettings,
    SpinSimException,
    SpinSystem,
)

J = 215.0
# 220.5 bins of the default acquisition, so both lines sit halfway between bins
HALF_BIN_J = 441 / (4096 * 5e-4)


def lines_of(rho: DensityMatrix, system: SpinSystem, spin: str = "A") -> tuple:
    return line_integrals(spectrum(synth_fid(rho, system, spin)), J)


def with_coupling(system: SpinSystem, j_hz: float) -> SpinSystem:
    return replace(system, j_coupling=((0.0, j_hz), (j_hz, 0.0)))


def random_deviation(rng: np.random.Generator) -> DensityMatrix:
    m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    h = (m + m.conj().T) / 2
    return DensityMatrix(h - np.trace(h) / 4 * np.eye(4), "deviation")


class TestLines:
    """Where and with what sign each state shows up."""

    def test_partner_in_zero_gives_positive_low_line(self, system: SpinSystem) -> None:
        """|00> read on A: positive real line at -J/2, nothing at +J/2."""
        low, high = lines_of(DensityMatrix.basis("00"), system)
        assert low.real > 0.7
        assert abs(low.imag) < 0.1
        assert abs(high) < 0.01

    def test_partner_in_one_gives_high_line(self, system: SpinSystem) -> None:
        """|01> read on A: the line moves to +J/2."""
        low, high = lines_of(DensityMatrix.basis("01"), system)
        assert high.real > 0.7
        assert abs(low) < 0.01

    def test_excited_spin_is_negative(self, system: SpinSystem) -> None:
        """|10> read on A: negative low line."""
        low, _ = lines_of(DensityMatrix.basis("10"), system)
        assert low.real < -0.7

    def test_carbon_readout(self, system: SpinSystem) -> None:
        """|00> read on B: positive low line."""
        low, high = lines_of(DensityMatrix.basis("00"), system, "B")
        assert low.real > 0.7
        assert abs(high) < 0.01

    def test_line_between_bins_keeps_its_phase(self, system: SpinSystem) -> None:
        """J/2 = 220.16 bins: the low line is the full, real amplitude."""
        low, high = lines_of(DensityMatrix.basis("00"), system)
        assert low.real == pytest.approx(1.0, abs=1e-6)
        assert abs(low.imag) < 1e-6
        assert abs(high) < 0.01

    def test_half_bin_line(self, system: SpinSystem) -> None:
        """A line halfway between two bins is still read in full."""
        shifted = with_coupling(system, HALF_BIN_J)
        low, high = line_integrals(
            spectrum(synth_fid(DensityMatrix.basis("00"), shifted, "A")), HALF_BIN_J
        )
        assert low.real == pytest.approx(1.0, abs=1e-6)
        assert abs(low.imag) < 1e-6
        assert abs(high) < 1e-6

    def test_maximally_mixed_is_silent(self, system: SpinSystem) -> None:
        """No deviation, no lines."""
        low, high = lines_of(DensityMatrix.maximally_mixed(4), system)
        assert abs(low) < 1e-12
        assert abs(high) < 1e-12

    def test_no_readout_pulse_no_signal(self, system: SpinSystem) -> None:
        """Populations alone give no transverse signal."""
        fid = synth_fid(DensityMatrix.basis("00"), system, "A", readout_pulse=())
        np.testing.assert_allclose(fid.samples, 0, atol=1e-12)


class TestSpectrum:
    """DFT conventions."""

    def test_amplitudes_sum_to_first_point(self, rng: np.random.Generator) -> None:
        """Sum over the spectrum equals x[0], also with zero filling."""
        samples = rng.normal(size=1000) + 1j * rng.normal(size=1000)
        spec = spectrum(Fid(samples, 1e-3, "A"))
        assert len(spec.amplitudes) == 1024
        assert complex(spec.amplitudes.sum()) == pytest.approx(complex(samples[0]), abs=1e-12)

    def test_negative_rotation_peaks_at_negative_frequency(self) -> None:
        """exp(-2 pi i f t) lands at -f."""
        t = np.arange(1024) * 1e-3
        spec = spectrum(Fid(np.exp(-2j * np.pi * 50.0 * t), 1e-3, "A"))
        peak = spec.frequency_axis[int(np.argmax(np.abs(spec.amplitudes)))]
        assert peak == pytest.approx(-50.0, abs=spec.resolution)

    def test_broadening_keeps_sum(self, system: SpinSystem) -> None:
        """Line broadening lowers the peak but not the integral over the spectrum."""
        fid = synth_fid(DensityMatrix.basis("00"), system, "A")
        sharp = spectrum(fid)
        broad = spectrum(fid, line_broadening=5.0)
        assert np.max(np.abs(broad.amplitudes)) < np.max(np.abs(sharp.amplitudes))
        assert complex(broad.amplitudes.sum()) == pytest.approx(complex(sharp.amplitudes.sum()))

    def test_line_separation_is_j(self, system: SpinSystem) -> None:
        """Peaks of |00> and |01> on A sit J apart, each within one bin of -+J/2."""
        peaks = []
        for basis in ("00", "01"):
            spec = spectrum(synth_fid(DensityMatrix.basis(basis), system, "A"))
            peaks.append(spec.frequency_axis[int(np.argmax(np.abs(spec.amplitudes)))])
        low, high = peaks
        assert low == pytest.approx(-J / 2, abs=spec.resolution)
        assert high == pytest.approx(J / 2, abs=spec.resolution)
        assert high - low == pytest.approx(J, abs=spec.resolution)

    def test_window_overlap(self, system: SpinSystem) -> None:
        """Two lines closer than the window are rejected."""
        spec = spectrum(synth_fid(DensityMatrix.basis("00"), system, "A"))
        with pytest.raises(SpinSimException) as info:
            line_integrals(spec, 2.0)
        assert info.value.code == "WINDOW_OVERLAP"

    def test_line_out_of_range(self, system: SpinSystem) -> None:
        """Lines beyond Nyquist are rejected."""
        spec = spectrum(synth_fid(DensityMatrix.basis("00"), system, "A"))
        with pytest.raises(SpinSimException) as info:
            line_integrals(spec, 5000.0)
        assert info.value.code == "LINE_OUT_OF_RANGE"

    def test_noise_requires_generator(self, system: SpinSystem) -> None:
        """Receiver noise without a generator is refused."""
        with pytest.raises(SpinSimException) as info:
            synth_fid(DensityMatrix.basis("00"), system, "A", snr=100.0)
        assert info.value.code == "SEED_REQUIRED"

    def test_seeded_noise_is_reproducible(self, system: SpinSystem) -> None:
        """Same seed, same samples."""
        rho = DensityMatrix.basis("00")
        a = synth_fid(rho, system, "A", snr=50.0, rng=np.random.default_rng(3))
        b = synth_fid(rho, system, "A", snr=50.0, rng=np.random.default_rng(3))
        np.testing.assert_array_equal(a.samples, b.samples)


class TestClassifySpectrum:
    """Sign of the low line."""

    def test_positive_is_constant(self) -> None:
        """Positive low line."""
        assert classify_spectrum(0.78 + 0.01j, 0.003 + 0j) == "constant"

    def test_negative_is_balanced(self) -> None:
        """Negative low line."""
        assert classify_spectrum(-0.78 + 0j, 0.003 + 0j) == "balanced"

    def test_zero_is_inconclusive(self) -> None:
        """Nothing to read."""
        with pytest.raises(InconclusiveError):
            classify_spectrum(0j, 0j)

    def test_small_against_partner_line(self) -> None:
        """A low line under 5% of the total is inconclusive."""
        with pytest.raises(InconclusiveError):
            classify_spectrum(0.01 + 0j, 0.5 + 0j)

    def test_absolute_threshold(self) -> None:
        """Lines at or below the threshold are inconclusive."""
        with pytest.raises(InconclusiveError):
            classify_spectrum(0.78 + 0j, 0j, threshold=0.9)


class TestPipelineSpectrum:
    """Oracle runs read out on the input spin."""

    @pytest.mark.parametrize("oracle,verdict", [("f1", "constant"), ("f2", "constant"), ("f3", "balanced"), ("f4", "balanced")])
    def test_pure_input(
        self, make_config: Callable[..., ExperimentConfig], readout: ReadoutSettings, oracle: str, verdict: str
    ) -> None:
        """Spectral and matrix verdicts agree with the oracle class."""
        run = run_spectrum(make_config(oracle=oracle), readout)
        assert run.verdict == verdict
        assert run.matrix_verdict == verdict
        assert run.expected == verdict

    @pytest.mark.parametrize("oracle,verdict", [("f1", "constant"), ("f2", "constant"), ("f3", "balanced"), ("f4", "balanced")])
    def test_thermal_input(
        self, make_config: Callable[..., ExperimentConfig], readout: ReadoutSettings, oracle: str, verdict: str
    ) -> None:
        """Thermal input shows both lines and both verdicts agree."""
        run = run_spectrum(make_config(oracle=oracle, input_mode="thermal"), readout)
        low, high = run.lines
        assert abs(low) > 0
        assert abs(high) > 0.1 * abs(low)
        assert run.verdict == verdict
        assert run.matrix_verdict == verdict

    def test_half_bin_coupling_keeps_spectral_verdict(
        self, system: SpinSystem, make_config: Callable[..., ExperimentConfig], readout: ReadoutSettings
    ) -> None:
        """Lines between bins give the same verdict as the density matrix."""
        run = run_spectrum(make_config(system=with_coupling(system, HALF_BIN_J)), readout)
        assert run.lines[0].real == pytest.approx(1.0, abs=1e-6)
        assert run.verdict == "constant"
        assert run.matrix_verdict == "constant"

    def test_input_one_is_inverted(self, make_config: Callable[..., ExperimentConfig], readout: ReadoutSettings) -> None:
        """pure_10 reads inverted lines and inverts the verdict back."""
        run = run_spectrum(make_config(oracle="f3", input_mode="pure_10"), readout)
        assert run.lines[0].real > 0
        assert run.verdict == "balanced"

    def test_work_spin_input_is_inconclusive(
        self, make_config: Callable[..., ExperimentConfig], readout: ReadoutSettings
    ) -> None:
        """pure_01 leaves no verdict."""
        run = run_spectrum(make_config(oracle="f1", input_mode="pure_01"), readout)
        assert run.verdict is None
        assert run.matrix_verdict is None

    def test_carbon_detection_has_no_spectral_verdict(
        self, make_config: Callable[..., ExperimentConfig], readout: ReadoutSettings
    ) -> None:
        """Only the input spin carries a spectral verdict."""
        run = run_spectrum(make_config(oracle="f1"), readout, "B")
        assert run.verdict is None
        assert run.fid.detected_spin == "B"
        assert run.matrix_verdict == "constant"

    def test_receiver_noise_verdict(
        self, noisy_config: Callable[..., ExperimentConfig], readout: ReadoutSettings
    ) -> None:
        """The default proton SNR leaves the verdict intact."""
        run = run_spectrum(noisy_config("f3", receiver_noise=True), readout)
        assert run.verdict == "balanced"

    def test_receiver_noise_on_other_labels(self, hc_system: SpinSystem, readout: ReadoutSettings) -> None:
        """Default SNRs follow spin position, so renamed spins still acquire."""
        noise = NoiseSettings(seed=11, receiver_noise=True)
        assert noise.snr_by_spin(hc_system.spin_labels) == {"H": 4300.0, "C": 35.0}
        config = ExperimentConfig(hc_system, oracle="f3", noise_enabled=True, noise=noise)
        run = run_spectrum(config, readout)
        assert run.fid.detected_spin == "H"
        assert run.verdict == "balanced"
        assert run.matrix_verdict == "balanced"


class TestTomography:
    """Linear inversion from nine readout experiments."""

    def test_nine_experiments(self) -> None:
        """{none, X, Y} on each spin."""
        assert len(READOUT_PAIRS) == 9
        assert ("none", "none") in READOUT_PAIRS

    def test_round_trip(self, system: SpinSystem, readout: ReadoutSettings, rng: np.random.Generator) -> None:
        """100 random deviations reconstruct to 1e-8."""
        for _ in range(100):
            rho = random_deviation(rng)
            out = reconstruct_deviation(acquire(rho, system, readout), system, readout)
            assert np.linalg.norm(out.entries - rho.entries) < 1e-8

    def test_noiseless_f1(self, make_config: Callable[..., ExperimentConfig], readout: ReadoutSettings) -> None:
        """The ideal f1 output reconstructs as the |00> deviation."""
        result = run_tomography(make_config(oracle="f1"), readout)
        assert result.epsilon < 1e-6
        assert result.pure_population == pytest.approx(1.0, abs=1e-6)
        assert set(result.line_integrals) == {"/".join(p) for p in READOUT_PAIRS}

    def test_noiseless_thermal(self, make_config: Callable[..., ExperimentConfig], readout: ReadoutSettings) -> None:
        """Small thermal deviations reconstruct just as well."""
        result = run_tomography(make_config(oracle="f3", input_mode="thermal"), readout)
        assert result.epsilon < 1e-6

    def test_noisy_brackets(self, noisy_config: Callable[..., ExperimentConfig], readout: ReadoutSettings) -> None:
        """Calibrated noise gives a few percent error, not more."""
        result = run_tomography(noisy_config("f1"), readout)
        assert 0.99 <= result.pure_population <= 1.03
        assert result.max_off_diagonal < 0.1
        assert 0.05 <= result.epsilon <= 0.20

    def test_relative_error(self) -> None:
        """Frobenius ratio, invariant under common scaling."""
        a = np.diag([1.0, 0, 0, 0])
        b = np.diag([0.9, 0.1, 0, 0])
        assert relative_error(b, a) == pytest.approx(np.sqrt(0.02))
        assert relative_error(3 * b, 3 * a) == pytest.approx(relative_error(b, a))

    def test_zero_theory(self) -> None:
        """No reference, no error metric."""
        with pytest.raises(SpinSimException):
            relative_error(np.eye(2), np.zeros((2, 2)))

    def test_pauli_x_on_a_is_seen(self, system: SpinSystem, readout: ReadoutSettings) -> None:
        """A transverse A deviation shows up without any readout pulse."""
        rho = DensityMatrix(np.kron(PAULI["x"], PAULI["i"]) / 4, "deviation")
        values = acquire(rho, system, readout)
        assert np.max(np.abs(values[:4])) > 0.1
