"""
Shared fixtures: the chloroform spin system, experiment configs and a random
pulse-program generator.
"""

import random
from dataclasses import replace
from typing import Callable

import numpy as np
import pytest

from spinsim.config import DEFAULT_SYSTEM_DOC, SimulationConfig, default_config
from spinsim.types import (
    ExperimentConfig,
    NoiseSettings,
    PulseEvent,
    PulseProgram,
    ReadoutSettings,
    SpinSystem,
)

pytest_plugins = ("pytest_asyncio",)

AXES = ("X", "Y", "Xbar", "Ybar")


@pytest.fixture
def system() -> SpinSystem:
    """Proton A, carbon B, J = 215 Hz."""
    return SpinSystem.from_dict(DEFAULT_SYSTEM_DOC)


@pytest.fixture
def hc_system() -> SpinSystem:
    """The chloroform system with the spins named H and C."""
    return SpinSystem.from_dict(
        {
            "spins": [
                {"label": "H", "offset_hz": 0.0, "t1_s": 19.0, "t2_s": 7.0},
                {"label": "C", "offset_hz": 0.0, "t1_s": 25.0, "t2_s": 0.3},
            ],
            "j_hz": {"H-C": 215.0},
        }
    )


@pytest.fixture
def readout() -> ReadoutSettings:
    """Default acquisition: 4096 points at 0.5 ms."""
    return ReadoutSettings()


@pytest.fixture
def make_config(system: SpinSystem) -> Callable[..., ExperimentConfig]:
    """Factory for ExperimentConfig with keyword overrides."""

    def factory(**changes: object) -> ExperimentConfig:
        return replace(ExperimentConfig(system), **changes)  # type: ignore[arg-type]

    return factory


@pytest.fixture
def noisy_config(system: SpinSystem) -> Callable[..., ExperimentConfig]:
    """Factory for seeded noisy configs."""

    def factory(oracle: str = "f1", input_mode: str = "pure_00", **noise: object) -> ExperimentConfig:
        settings = replace(NoiseSettings(seed=11), **noise)  # type: ignore[arg-type]
        return ExperimentConfig(
            system, oracle=oracle, input_mode=input_mode, noise_enabled=True, noise=settings
        )

    return factory


@pytest.fixture
def simulation() -> SimulationConfig:
    """Default simulation config."""
    return default_config()


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded numpy generator."""
    return np.random.default_rng(20240611)


def random_program(seed: int, labels: tuple = ("A", "B")) -> PulseProgram:
    """Grammar-expressible program: named pi/2 rotations, symbols and literal delays."""
    gen = random.Random(seed)
    groups = []
    for _ in range(gen.randint(1, 5)):
        group = []
        for _ in range(gen.randint(1, 4)):
            roll = gen.random()
            if roll < 0.6:
                group.append(PulseEvent.rotation(gen.choice(AXES), gen.choice(labels)))
            elif roll < 0.8:
                group.append(PulseEvent.wait(gen.choice(("tau", "tau/2"))))
            else:
                group.append(PulseEvent.wait(gen.choice((0.0, 1e-5, 2.5e-3, 0.125, 3.0))))
        groups.append(tuple(group))
    return PulseProgram(tuple(groups))


@pytest.fixture
def program_factory() -> Callable[[int], PulseProgram]:
    """Seeded random program generator."""
    return random_program
