"""
spinsim - two-spin NMR quantum computer simulator

Pulse-level simulation of the Deutsch-Jozsa algorithm on a coupled
proton/carbon pair: pulse-program parsing and compilation, thermal and
temporally averaged inputs, relaxation and RF inhomogeneity, FID synthesis,
spectral classification and state tomography.

Example usage:
    from spinsim import SpinSimClient

    async with SpinSimClient() as client:
        # Density-matrix verdict for one oracle
        result = await client.experiment("f3").input("thermal").classify()

        # Spectrum with relaxation and the RF ensemble
        result = await client.experiment("f1").noise().seed(7).spectrum()

        # All four oracles at once
        verdicts = await client.run_all("temporal_average")

Synchronous use goes through the modules directly:
    from spinsim.pulses import parse, compile_program
    u = compile_program(parse("Y(B) - tau - Ybar(B) X(B)"), system)
"""

from .client import ExperimentBuilder, SpinSimClient
from .config import SimulationConfig, load_config
from .types import (
    DensityMatrix,
    ExperimentConfig,
    OperatorMatrix,
    PulseProgram,
    SpinSimError,
    SpinSimException,
    SpinSimResponse,
    SpinSystem,
)

__version__ = "1.0.0"

__all__ = [
    "SpinSimClient",
    "ExperimentBuilder",
    "SimulationConfig",
    "load_config",
    "SpinSimResponse",
    "SpinSimError",
    "SpinSimException",
    "SpinSystem",
    "DensityMatrix",
    "OperatorMatrix",
    "PulseProgram",
    "ExperimentConfig",
]
