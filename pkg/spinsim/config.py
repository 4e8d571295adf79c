"""
Configuration loading.

A JSON document describes the spin system, the experiment, the noise knobs
and the readout. Resolution order: an explicit path, then the
SPINSIM_CONFIG environment variable, then built-in chloroform defaults.
"""

import json
import logging
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from .types import (
    ExperimentConfig,
    NoiseSettings,
    ReadoutSettings,
    SpinSimException,
    SpinSystem,
)

logger = logging.getLogger(__name__)

ENV_VAR = "SPINSIM_CONFIG"

# 13C-labelled chloroform: proton A, carbon B.
DEFAULT_SYSTEM_DOC: Dict[str, Any] = {
    "spins": [
        {"label": "A", "offset_hz": 0.0, "t1_s": 19.0, "t2_s": 7.0},
        {"label": "B", "offset_hz": 0.0, "t1_s": 25.0, "t2_s": 0.3},
    ],
    "j_hz": {"A-B": 215.0},
}


@dataclass(frozen=True)
class SimulationConfig:
    """Everything a command needs: the experiment and the readout."""
    experiment: ExperimentConfig
    readout: ReadoutSettings = field(default_factory=ReadoutSettings)
    source: Optional[str] = None

    @property
    def system(self) -> SpinSystem:
        return self.experiment.system

    def with_overrides(self, **changes: Any) -> "SimulationConfig":
        """Copy with ExperimentConfig fields replaced; `seed` goes to the noise settings."""
        experiment = self.experiment
        if "seed" in changes:
            seed = changes.pop("seed")
            if seed is not None:
                experiment = replace(experiment, noise=replace(experiment.noise, seed=seed))
        changes = {k: v for k, v in changes.items() if v is not None}
        if changes:
            experiment = replace(experiment, **changes)
        return replace(self, experiment=experiment)


def default_config() -> SimulationConfig:
    return SimulationConfig(ExperimentConfig(SpinSystem.from_dict(DEFAULT_SYSTEM_DOC)))


def _section(doc: Mapping[str, Any], key: str) -> Mapping[str, Any]:
    value = doc.get(key) or {}
    if not isinstance(value, Mapping):
        raise SpinSimException(f"config: '{key}' must be an object", "INVALID_CONFIG")
    return value


def _per_spin(value: Any, name: str) -> Dict[str, float]:
    if value is None:
        return {}
    if not isinstance(value, Mapping):
        raise SpinSimException(f"config: '{name}' must map spin labels to numbers", "INVALID_CONFIG")
    return {str(k): float(v) for k, v in value.items()}


def _noise(doc: Mapping[str, Any]) -> NoiseSettings:
    defaults = NoiseSettings()
    seed = doc.get("seed")
    recovery = doc.get("recovery_delay_s")
    snr = _per_spin(doc.get("receiver_snr"), "noise.receiver_snr")
    return NoiseSettings(
        seed=None if seed is None else int(seed),
        envelope_time_constant=float(doc.get("envelope_time_constant_s", defaults.envelope_time_constant)),
        ensemble_size=int(doc.get("ensemble_size", defaults.ensemble_size)),
        pulse_width=float(doc.get("pulse_width_s", defaults.pulse_width)),
        flip_angle_scale=float(doc.get("flip_angle_scale", defaults.flip_angle_scale)),
        receiver_noise=bool(doc.get("receiver_noise", defaults.receiver_noise)),
        receiver_snr=snr,
        carrier_offset=_per_spin(doc.get("carrier_offset_hz"), "noise.carrier_offset_hz"),
        recovery_delay=None if recovery is None else float(recovery),
    )


def _polarizations(system: SpinSystem, value: Any) -> Tuple[float, ...]:
    pols = _per_spin(value, "experiment.polarizations")
    if not pols:
        return ()
    missing = [label for label in system.spin_labels if label not in pols]
    if missing:
        raise SpinSimException(
            f"config: polarizations missing for {', '.join(missing)}", "POLARIZATION_RANGE"
        )
    return tuple(pols[label] for label in system.spin_labels)


def config_from_dict(doc: Mapping[str, Any], source: Optional[str] = None) -> SimulationConfig:
    """Build a SimulationConfig from a parsed JSON document."""
    if not isinstance(doc, Mapping):
        raise SpinSimException("config: top level must be an object", "INVALID_CONFIG")
    try:
        system = SpinSystem.from_dict(doc if "spins" in doc else {**DEFAULT_SYSTEM_DOC, **doc})
        exp = _section(doc, "experiment")
        noise = _section(doc, "noise")
        relax_t1 = _per_spin(noise.get("t1_s"), "noise.t1_s")
        relax_t2 = _per_spin(noise.get("t2_s"), "noise.t2_s")
        if relax_t1 or relax_t2:
            system = system.with_relaxation(relax_t1, relax_t2)
        readout_doc = _section(doc, "readout")
        tau = exp.get("tau_s")
        experiment = ExperimentConfig(
            system=system,
            oracle=str(exp.get("oracle", "f1")),
            input_mode=str(exp.get("input_mode", "pure_00")),
            noise_enabled=bool(noise.get("enabled", False)),
            temperature=float(exp.get("temperature_k", 298.15)),
            field_polarization=_polarizations(system, exp.get("polarizations")),
            tau=None if tau is None else float(tau),
            reference_hz=float(exp.get("reference_hz", 499_755_169.0)),
            noise=_noise(noise),
        )
        readout = ReadoutSettings(
            n_samples=int(readout_doc.get("n_samples", 4096)),
            dwell=float(readout_doc.get("dwell_s", 5e-4)),
            window_bins=int(readout_doc.get("window_bins", 5)),
            line_broadening=float(readout_doc.get("line_broadening_hz", 0.0)),
            threshold=float(readout_doc.get("threshold", 0.0)),
        )
    except SpinSimException:
        raise
    except (TypeError, ValueError, AttributeError) as e:
        raise SpinSimException(f"config: {e}", "INVALID_CONFIG") from e
    return SimulationConfig(experiment, readout, source)


def load_config(path: Optional[Union[str, Path]] = None) -> SimulationConfig:
    """Load from `path`, else $SPINSIM_CONFIG, else the defaults."""
    chosen = path if path is not None else os.environ.get(ENV_VAR) or None
    if chosen is None:
        logger.debug("no config file given; using defaults")
        return default_config()
    source = str(chosen)
    try:
        with open(source, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError as e:
        raise SpinSimException(f"config file not found: {source}", "INVALID_CONFIG") from e
    except (OSError, json.JSONDecodeError) as e:
        raise SpinSimException(f"cannot read config {source}: {e}", "INVALID_CONFIG") from e
    logger.debug("loaded config from %s", source)
    return config_from_dict(doc, source)
