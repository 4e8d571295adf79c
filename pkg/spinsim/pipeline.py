"""
End-to-end runs shared by the CLI and the async client: evolve, acquire,
transform, integrate and classify.
"""

import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .experiment import classify, run_experiment, run_temporal_average
from .noise import noisy_system
from .readout import classify_spectrum, line_integrals, spectrum, synth_fid, tomography
from .states import effective_pure
from .types import (
    ORACLE_CLASSES,
    DensityMatrix,
    ExperimentConfig,
    Fid,
    InconclusiveError,
    LineIntegrals,
    ReadoutSettings,
    Spectrum,
    TomographyResult,
    Verdict,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DjRun:
    """Everything one Deutsch-Jozsa run produced.

    Verdicts are None when the corresponding reading was inconclusive.
    """
    config: ExperimentConfig
    final: DensityMatrix
    fid: Fid
    spectrum: Spectrum
    lines: LineIntegrals
    verdict: Optional[Verdict]
    matrix_verdict: Optional[Verdict]

    @property
    def expected(self) -> Verdict:
        return ORACLE_CLASSES[self.config.oracle]


def input_qubit(config: ExperimentConfig) -> int:
    """Known starting value of the input spin for the configured mode."""
    return 1 if config.input_mode in ("pure_10", "pure_11") else 0


def _invert(verdict: Verdict) -> Verdict:
    return "balanced" if verdict == "constant" else "constant"


def acquire_fid(
    final: DensityMatrix,
    config: ExperimentConfig,
    readout: ReadoutSettings,
    spin: Optional[str] = None,
) -> Fid:
    """FID of `spin` (default the input spin) after the standard X readout."""
    system = noisy_system(config)
    spin = spin or system.spin_labels[0]
    receiver = config.noise_enabled and config.noise.receiver_noise
    rng = None
    if receiver and config.noise.seed is not None:
        rng = np.random.default_rng(np.random.SeedSequence(config.noise.seed).spawn(1)[0])
    return synth_fid(
        final,
        system,
        spin,
        readout.n_samples,
        readout.dwell,
        t2_decay=config.noise_enabled,
        snr=config.noise.snr_by_spin(system.spin_labels).get(spin) if receiver else None,
        rng=rng,
    )


def run_spectrum(
    config: ExperimentConfig, readout: ReadoutSettings, spin: Optional[str] = None
) -> DjRun:
    """Run the oracle and read it out on `spin`; verdicts only for the input spin."""
    system = noisy_system(config)
    spin = spin or system.spin_labels[0]
    final = run_experiment(config)
    fid = acquire_fid(final, config, readout, spin)
    spec = spectrum(fid, readout.line_broadening)
    j = system.coupling(system.spin_labels[0], system.spin_labels[1])
    lines = line_integrals(spec, j, readout.window_bins, system.offset(spin))

    verdict: Optional[Verdict] = None
    matrix_verdict: Optional[Verdict] = None
    flip = input_qubit(config) == 1
    if spin == system.spin_labels[0]:
        try:
            verdict = classify_spectrum(lines[0], lines[1], readout.threshold)
            if flip:
                verdict = _invert(verdict)
        except InconclusiveError as e:
            logger.warning("%s: spectral reading inconclusive (%s)", config.oracle, e.message)
    try:
        matrix_verdict = classify(final, input_qubit(config))
    except InconclusiveError as e:
        logger.warning("%s: density-matrix reading inconclusive (%s)", config.oracle, e.message)
    logger.debug(
        "%s %s: low=%r high=%r verdict=%s", config.oracle, config.input_mode, lines[0], lines[1], verdict
    )
    return DjRun(config, final, fid, spec, lines, verdict, matrix_verdict)


def run_dj(config: ExperimentConfig, readout: ReadoutSettings) -> DjRun:
    """Deutsch-Jozsa with the input spin detected."""
    return run_spectrum(config, readout)


def theory_state(config: ExperimentConfig) -> DensityMatrix:
    """Noiseless output the tomography is compared against."""
    ideal = replace(config, noise_enabled=False)
    if config.input_mode == "temporal_average":
        ideal = replace(ideal, input_mode="pure_00")
    return run_experiment(ideal)


def run_tomography(config: ExperimentConfig, readout: ReadoutSettings) -> TomographyResult:
    """Nine-experiment tomography of the oracle output."""
    system = noisy_system(config)
    if config.input_mode == "temporal_average":
        final = effective_pure(run_temporal_average(config))
    else:
        final = run_experiment(config)
    receiver = config.noise_enabled and config.noise.receiver_noise
    return tomography(
        lambda: final,
        system,
        theory_state(config),
        readout,
        t2_decay=config.noise_enabled,
        snr=config.noise.snr_by_spin(system.spin_labels) if receiver else None,
        seed=config.noise.seed,
    )
