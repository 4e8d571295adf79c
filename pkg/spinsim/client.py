"""
SpinSimClient - async facade over the simulator.

Numerical work runs in a thread pool. Terminal methods never raise; they
return a SpinSimResponse with either data or an error.
"""

import asyncio
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, Optional, TypeVar

from .config import SimulationConfig, default_config
from .experiment import classify, run_experiment
from .noise import run_calibration
from .pipeline import DjRun, input_qubit, run_spectrum, run_tomography
from .pulses import parse
from .types import (
    ORACLES,
    CalibrationReport,
    DensityMatrix,
    PulseProgram,
    SpinSimError,
    SpinSimException,
    SpinSimResponse,
    StateResponse,
    TomographyResponse,
    TomographyResult,
    Verdict,
    VerdictResponse,
)

logger = logging.getLogger(__name__)

R = TypeVar("R")


class ExperimentBuilder:
    """Fluent description of one Deutsch-Jozsa run; nothing runs until a terminal is awaited."""

    def __init__(self, client: "SpinSimClient", oracle: str) -> None:
        self._client = client
        self._changes: Dict[str, Any] = {"oracle": oracle}
        self._seed: Optional[int] = None
        self._spin: Optional[str] = None

    def input(self, mode: str) -> "ExperimentBuilder":
        """Input mode: pure_00/01/10/11, thermal or temporal_average."""
        self._changes["input_mode"] = mode
        return self

    def noise(self, enabled: bool = True) -> "ExperimentBuilder":
        self._changes["noise_enabled"] = enabled
        return self

    def seed(self, seed: int) -> "ExperimentBuilder":
        self._seed = seed
        return self

    def tau(self, seconds: float) -> "ExperimentBuilder":
        """Override the symbolic delay."""
        self._changes["tau"] = seconds
        return self

    def detect(self, spin: str) -> "ExperimentBuilder":
        """Spin observed by `spectrum()`."""
        self._spin = spin
        return self

    def _config(self) -> SimulationConfig:
        return self._client.config.with_overrides(seed=self._seed, **self._changes)

    async def run(self) -> StateResponse:
        """Pre-readout density matrix."""

        def work() -> DensityMatrix:
            return run_experiment(self._config().experiment)

        return await self._client._submit(work)

    async def classify(self) -> VerdictResponse:
        """Verdict read from the final density matrix."""

        def work() -> Verdict:
            experiment = self._config().experiment
            return classify(run_experiment(experiment), input_qubit(experiment))

        return await self._client._submit(work)

    async def spectrum(self) -> SpinSimResponse[DjRun]:
        """Full run with FID, spectrum, line integrals and both verdicts."""

        def work() -> DjRun:
            config = self._config()
            return run_spectrum(config.experiment, config.readout, self._spin)

        return await self._client._submit(work)

    async def tomography(self) -> TomographyResponse:
        def work() -> TomographyResult:
            config = self._config()
            return run_tomography(config.experiment, config.readout)

        return await self._client._submit(work)


class SpinSimClient:
    """
    Main spinsim client class.

    Example:
        async with SpinSimClient() as client:
            result = await client.experiment("f3").input("thermal").classify()
    """

    def __init__(self, config: Optional[SimulationConfig] = None, max_workers: int = 4) -> None:
        """
        Initialize the client.

        Args:
            config: Simulation configuration (default: built-in chloroform system)
            max_workers: Size of the worker thread pool
        """
        if max_workers < 1:
            raise ValueError("SpinSimClient: max_workers must be >= 1")
        self.config = config or default_config()
        self._pool = ThreadPoolExecutor(max_workers=max_workers, thread_name_prefix="spinsim")

    async def _submit(self, work: Callable[[], R]) -> SpinSimResponse[R]:
        loop = asyncio.get_running_loop()
        try:
            data = await loop.run_in_executor(self._pool, work)
            return SpinSimResponse(data=data, error=None)
        except SpinSimException as e:
            logger.debug("request failed: %s (%s)", e.message, e.code)
            return SpinSimResponse(data=None, error=e.to_error())
        except Exception as e:
            logger.exception("unexpected failure")
            return SpinSimResponse(
                data=None,
                error=SpinSimError(message=str(e), status=1, code="INTERNAL_ERROR"),
            )

    def experiment(self, oracle: str) -> ExperimentBuilder:
        """Start describing a run of oracle f1..f4."""
        return ExperimentBuilder(self, oracle)

    async def parse(self, text: str) -> SpinSimResponse[PulseProgram]:
        """Parse pulse-program text against the configured system."""
        return await self._submit(lambda: parse(text, self.config.system, self.config.experiment.tau))

    async def calibrate(self) -> SpinSimResponse[CalibrationReport]:
        """Nutation, inversion recovery and CPMG fits for the configured system."""
        return await self._submit(lambda: run_calibration(self.config.experiment))

    async def run_all(self, input_mode: Optional[str] = None) -> Dict[str, VerdictResponse]:
        """Classify every oracle concurrently."""
        builders = []
        for oracle in ORACLES:
            builder = self.experiment(oracle)
            if input_mode is not None:
                builder.input(input_mode)
            builders.append(builder)
        results = await asyncio.gather(*(b.classify() for b in builders))
        return dict(zip(ORACLES, results))

    async def close(self) -> None:
        """Shut down the worker pool."""
        self._pool.shutdown(wait=True)

    async def __aenter__(self) -> "SpinSimClient":
        """Async context manager entry."""
        return self

    async def __aexit__(
        self,
        exc_type: Any,
        exc_val: Any,
        exc_tb: Any,
    ) -> None:
        """Async context manager exit."""
        await self.close()
