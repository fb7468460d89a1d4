import math
import os
from pathlib import Path
from typing import Final, Literal

from pydantic import BaseModel, ConfigDict, Field, NonNegativeFloat, PositiveFloat, PositiveInt, field_validator

ASSETS_PATH: Final = Path(__file__).parent.parent / "assets"

# Defaults pinned to the published experiment: lambda = 1, receiver line r2 = 5.
DEFAULT_K0: Final = 2.0 * math.pi
DEFAULT_M: Final = 400
DEFAULT_D: Final = 200
DEFAULT_R_M: Final = 5.0
DEFAULT_R_S: Final = 4.0
DEFAULT_TRUNCATION: Final = 12
DEFAULT_EPS_K: Final = 1e-3
DEFAULT_MIN_SINGULAR: Final = 1e-12
DEFAULT_OVERSAMPLE: Final = 2
DEFAULT_ORIENTATION: Final = -math.pi / 2

THREADS_ENV: Final = "BEAMDT_THREADS"
LOG_LEVEL_ENV: Final = "BEAMDT_LOG_LEVEL"

LogLevel = Literal["DEBUG", "INFO", "WARNING", "ERROR"]


class SimulationConfig(BaseModel):
    """Acquisition parameters of a simulated measurement run.

    Attributes
    ----------
    m : int
        Size of the detector-frequency grid (and of the reconstruction lattice).
    d : int
        Number of rotation angles.
    k0 : float
        Angular wavenumber.
    r_m : float
        Offset of the detector line ``r2 = r_M``.
    eps_k : float
        Relative clamp of the k-grid, ``|k| <= (1 - eps_k) k0``.
    oversample : int
        Object-grid refinement of the simulation relative to ``m``.
    angular_oversample : int
        Refinement of the inner plane-wave quadrature relative to ``d``.
    noise_percent : float
        Relative noise level in percent.
    seed : int
        Seed of the noise stream.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    m: PositiveInt = Field(default=DEFAULT_M, description="Detector frequency grid size (even).", examples=[400, 128])
    d: PositiveInt = Field(default=DEFAULT_D, description="Number of rotation angles (even).", examples=[200, 100])
    k0: PositiveFloat = Field(default=DEFAULT_K0, description="Angular wavenumber 2*pi/lambda.")
    r_m: PositiveFloat = Field(default=DEFAULT_R_M, description="Detector line offset.")
    eps_k: float = Field(default=DEFAULT_EPS_K, ge=0.0, lt=1.0, description="Relative k-grid clamp.")
    oversample: PositiveInt = Field(default=DEFAULT_OVERSAMPLE, description="Object grid refinement factor.")
    angular_oversample: PositiveInt = Field(default=DEFAULT_OVERSAMPLE, description="Inner angle refinement factor.")
    noise_percent: NonNegativeFloat = Field(default=0.0, description="Relative noise level in percent.")
    seed: int = Field(default=0, ge=0, lt=2**64, description="Seed of the noise stream.")

    @field_validator("m", "d")
    @classmethod
    def _require_even(cls, v: int) -> int:
        if v % 2:
            raise ValueError(f"Grid sizes must be even, got {v}")
        return v


class RuntimeSettings(BaseModel):
    """Process-wide runtime knobs, read from the environment and overridable by CLI flags."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    threads: PositiveInt | None = Field(
        default=None,
        description=f"Worker cap for data-parallel loops; mirrors ${THREADS_ENV}. None means all cores.",
    )
    log_level: LogLevel = Field(default="WARNING", description=f"Root log level; mirrors ${LOG_LEVEL_ENV}.")

    @classmethod
    def from_env(cls) -> "RuntimeSettings":
        raw_threads = os.environ.get(THREADS_ENV, "").strip()
        raw_level = os.environ.get(LOG_LEVEL_ENV, "").strip().upper()
        return cls.model_validate(
            {
                "threads": int(raw_threads) if raw_threads else None,
                "log_level": raw_level or "WARNING",
            }
        )
