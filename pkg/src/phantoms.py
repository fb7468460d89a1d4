"""Object-domain sampling lattices, complex images and disk phantoms."""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Final

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, field_validator

from src.config import DEFAULT_M, DEFAULT_R_S
from src.errors import FileFormatError, GridMismatchError, SupportError
from src.kspace_geometry import centered_indices

log = logging.getLogger(__name__)

ComplexArray = NDArray[np.complex128]

_SUPPORT_TOL: Final = 1e-12


class ObjectGrid(BaseModel):
    """Square lattice ``(2 r_s / M) (j1, j2)``, ``j1, j2 in {-M/2, ..., M/2 - 1}``."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    m: PositiveInt = Field(default=DEFAULT_M, description="Samples per axis (even).", examples=[400, 128])
    r_s: PositiveFloat = Field(default=DEFAULT_R_S, description="Support half-width.", examples=[4.0])

    @field_validator("m")
    @classmethod
    def _require_even(cls, v: int) -> int:
        if v % 2:
            raise ValueError(f"Grid size M must be even, got {v}")
        return v

    @property
    def spacing(self) -> float:
        return 2.0 * self.r_s / self.m

    @property
    def pixel_area(self) -> float:
        return self.spacing**2

    def axis(self) -> NDArray[np.float64]:
        """Coordinates along one axis; index ``M/2`` is the origin."""
        return self.spacing * centered_indices(self.m)

    def points(self) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """Coordinate arrays ``(r1, r2)`` of shape ``(M, M)``, ``j1`` along axis 0."""
        x = self.axis()
        r1, r2 = np.meshgrid(x, x, indexing="ij")
        return r1, r2


@dataclass(frozen=True)
class ComplexImage:
    """Complex samples of a function on an :class:`ObjectGrid`; read-only."""

    grid: ObjectGrid
    values: ComplexArray = field(repr=False)

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=np.complex128)
        if arr.shape != (self.grid.m, self.grid.m):
            raise GridMismatchError(f"image shape {arr.shape} does not match grid M={self.grid.m}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def zeros(cls, grid: ObjectGrid) -> "ComplexImage":
        return cls(grid=grid, values=np.zeros((grid.m, grid.m), dtype=np.complex128))

    def require_same_grid(self, other: "ComplexImage") -> None:
        if self.grid != other.grid:
            raise GridMismatchError(f"grids differ: {self.grid} vs {other.grid}")


class DiskSpec(BaseModel):
    """One indicator disk ``amplitude * 1_{|r - center| < radius}``."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    center: tuple[float, float] = Field(default=(0.0, 0.0), description="Disk centre (r1, r2).")
    radius: PositiveFloat = Field(description="Disk radius.", examples=[1.5, 0.35])
    amplitude: complex = Field(default=1.0 + 0.0j, description="Value inside the disk.")


# Host disk with two inclusions of different contrast. At unit wavelength k0 * 1.5 < 12, so the
# angular spectrum of g(k, .) fits inside the default truncation.
TWO_INCLUSION_PRESET: Final = (
    DiskSpec(center=(0.0, 0.0), radius=1.5, amplitude=1.0),
    DiskSpec(center=(-0.6, 0.4), radius=0.35, amplitude=1.5),
    DiskSpec(center=(0.5, -0.4), radius=0.25, amplitude=0.5),
)


def _check_support(grid: ObjectGrid, disk: DiskSpec) -> None:
    reach = float(np.hypot(*disk.center)) + disk.radius
    if reach > grid.r_s * (1.0 + _SUPPORT_TOL):
        raise SupportError(
            f"disk centre={disk.center} radius={disk.radius} leaves the support disk of radius r_s={grid.r_s}"
        )


def disk_phantom(grid: ObjectGrid, d: float, amplitude: complex = 1.0) -> ComplexImage:
    """Indicator of the centred disk of radius ``d`` scaled by ``amplitude`` (centre-point pixel test).

    Raises
    ------
    SupportError
        If ``d > r_s``.
    """
    if d <= 0:
        raise SupportError(f"disk radius must be positive, got {d}")
    return two_inclusion_phantom(grid, [DiskSpec(radius=d, amplitude=amplitude)])


def two_inclusion_phantom(grid: ObjectGrid, spec: Sequence[DiskSpec] = TWO_INCLUSION_PRESET) -> ComplexImage:
    """Paint disks in order; later disks overwrite earlier ones where they overlap.

    Raises
    ------
    SupportError
        If any disk is not contained in ``B_{r_s}``.
    """
    for disk in spec:
        _check_support(grid, disk)

    r1, r2 = grid.points()
    values = np.zeros((grid.m, grid.m), dtype=np.complex128)
    for disk in spec:
        inside = np.hypot(r1 - disk.center[0], r2 - disk.center[1]) < disk.radius
        values[inside] = disk.amplitude
    log.debug("Rasterised %d disk(s) on M=%d, r_s=%g", len(spec), grid.m, grid.r_s)
    return ComplexImage(grid=grid, values=values)


def load_disk_specs_csv(path: Path) -> list[DiskSpec]:
    """Read disks from ``c1,c2,radius,re,im`` rows (header optional).

    Raises
    ------
    FileFormatError
        If the file cannot be parsed.
    """
    try:
        with path.open(encoding="utf-8") as fh:
            first = fh.readline().strip().lower()
        table = np.loadtxt(path, delimiter=",", ndmin=2, skiprows=1 if first.startswith("c1") else 0)
    except (OSError, ValueError) as exc:
        log.exception("Failed to read disk table %s", path)
        raise FileFormatError(f"cannot read disk table {path}: {exc}") from exc

    if table.size == 0:
        return []
    if table.shape[1] != 5:
        raise FileFormatError(f"{path}: expected columns c1,c2,radius,re,im, got {table.shape[1]} columns")
    return [
        DiskSpec(center=(float(c1), float(c2)), radius=float(rad), amplitude=complex(re, im))
        for c1, c2, rad, re, im in table
    ]
