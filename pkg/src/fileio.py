"""Binary grid/measurement files, plot-ready CSV tables and the acquisition sidecar.

Layouts (little-endian)::

    BDTG  "BDTG" u8=1 u32 M f64 r_s                      then M*M   complex128 (j1 slow, j2 fast)
    BDTM  "BDTM" u8=1 u32 M u32 D f64 k0 f64 r_M f64 eps_k then M_k*D complex128 (k slow, theta fast)

``M_k`` is the number of k-grid points surviving the ``|k| <= (1 - eps_k) k0`` clamp.
"""

import logging
import struct
from pathlib import Path
from typing import Final

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field, NonNegativeFloat, PositiveInt, ValidationError

from src.beam_profiles import BeamSettings
from src.errors import FileFormatError
from src.forward_model import FdtReport, MeasurementSet
from src.inversion import PicardTable
from src.kspace_geometry import WaveContext
from src.metrics import MetricReport
from src.phantoms import ComplexImage, ObjectGrid

log = logging.getLogger(__name__)

VERSION: Final = 1
GRID_MAGIC: Final = b"BDTG"
MEAS_MAGIC: Final = b"BDTM"
_GRID_HEADER: Final = struct.Struct("<4sBId")
_MEAS_HEADER: Final = struct.Struct("<4sBIIddd")
_VALUE_DTYPE: Final = np.dtype("<c16")


def _write_bytes(path: Path, payload: bytes) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        path.write_bytes(payload)
    except OSError as exc:
        log.exception("Failed to write %s", path)
        raise RuntimeError(f"Failed to write file: {path}") from exc
    return path


def _read_bytes(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except OSError as exc:
        log.exception("Failed to read %s", path)
        raise FileFormatError(f"cannot read {path}: {exc}") from exc


def _unpack_header(raw: bytes, header: struct.Struct, magic: bytes, path: Path) -> tuple[object, ...]:
    if len(raw) < header.size:
        raise FileFormatError(f"{path}: file too short for a {magic.decode()} header")
    fields = header.unpack_from(raw)
    if fields[0] != magic:
        raise FileFormatError(f"{path}: bad magic {fields[0]!r}, expected {magic!r}")
    if fields[1] != VERSION:
        raise FileFormatError(f"{path}: unsupported version {fields[1]}")
    return tuple(fields[2:])


def _payload(raw: bytes, offset: int, count: int, path: Path) -> np.ndarray:
    expected = offset + _VALUE_DTYPE.itemsize * count
    if len(raw) != expected:
        raise FileFormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    return np.frombuffer(raw, dtype=_VALUE_DTYPE, count=count, offset=offset).astype(np.complex128)


def write_grid(img: ComplexImage, path: Path) -> Path:
    header = _GRID_HEADER.pack(GRID_MAGIC, VERSION, img.grid.m, img.grid.r_s)
    out = _write_bytes(path, header + img.values.astype(_VALUE_DTYPE).tobytes())
    log.info("Grid written: %s (M=%d, r_s=%g)", path, img.grid.m, img.grid.r_s)
    return out


def read_grid(path: Path) -> ComplexImage:
    """Read a BDTG file.

    Raises
    ------
    FileFormatError
        On a bad magic, version or length.
    """
    raw = _read_bytes(path)
    m, r_s = _unpack_header(raw, _GRID_HEADER, GRID_MAGIC, path)
    assert isinstance(m, int) and isinstance(r_s, float)  # noqa: S101
    try:
        grid = ObjectGrid(m=m, r_s=r_s)
    except ValidationError as exc:
        raise FileFormatError(f"{path}: invalid grid header: {exc}") from exc
    values = _payload(raw, _GRID_HEADER.size, m * m, path).reshape(m, m)
    return ComplexImage(grid=grid, values=values)


def write_measurements(ms: MeasurementSet, path: Path) -> Path:
    header = _MEAS_HEADER.pack(MEAS_MAGIC, VERSION, ms.m, ms.d, ms.k0, ms.r_m, ms.eps_k)
    out = _write_bytes(path, header + ms.values.astype(_VALUE_DTYPE).tobytes())
    log.info("Measurements written: %s (%dx%d)", path, ms.m_k, ms.d)
    return out


def read_measurements(path: Path) -> MeasurementSet:
    """Read a BDTM file.

    Raises
    ------
    FileFormatError
        On a bad magic, version, lattice or length.
    """
    raw = _read_bytes(path)
    m, d, k0, r_m, eps_k = _unpack_header(raw, _MEAS_HEADER, MEAS_MAGIC, path)
    assert isinstance(m, int) and isinstance(d, int)  # noqa: S101
    assert isinstance(k0, float) and isinstance(r_m, float) and isinstance(eps_k, float)  # noqa: S101
    try:
        m_k = WaveContext(k0=k0, eps_k=eps_k).k_grid(m).size
    except (ValidationError, ValueError) as exc:
        raise FileFormatError(f"{path}: invalid lattice header: {exc}") from exc
    values = _payload(raw, _MEAS_HEADER.size, m_k * d, path).reshape(m_k, d)
    return MeasurementSet(m=m, d=d, k0=k0, r_m=r_m, eps_k=eps_k, values=values)


def _write_csv(path: Path, header: str, columns: list[ArrayLike]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        np.savetxt(path, np.column_stack(columns), delimiter=",", header=header, comments="", fmt="%.17g")
    except OSError as exc:
        log.exception("Failed to write %s", path)
        raise RuntimeError(f"Failed to write CSV: {path}") from exc
    log.info("CSV written: %s", path)
    return path


def write_picard_csv(table: PicardTable, path: Path) -> Path:
    return _write_csv(path, "n,abs_a,abs_m,abs_ratio", [table.n, table.abs_a, table.abs_m, table.abs_ratio])


def write_line_csv(r1: ArrayLike, values: ArrayLike, path: Path) -> Path:
    v = np.asarray(values, dtype=np.complex128)
    return _write_csv(path, "r1,re,im", [r1, v.real, v.imag])


def write_compare_csv(report: MetricReport, path: Path) -> Path:
    return _write_csv(path, "psnr,rmse,ssim", [[report.psnr], [report.rmse], [report.ssim]])


class AcquisitionInfo(BaseModel):
    """Sidecar stored as ``<measurement>.json`` next to a BDTM file."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    beam: BeamSettings = Field(description="Beam used to generate the data.")
    noise_percent: NonNegativeFloat = Field(default=0.0, description="Relative noise level in percent.")
    seed: int = Field(default=0, ge=0, description="Seed of the noise stream.")
    oversample: PositiveInt = Field(default=1, description="Object grid refinement used by the simulation.")
    angular_oversample: PositiveInt = Field(default=1, description="Inner angular refinement of the simulation.")
    phantom: str = Field(default="", description="Phantom preset name or source file.")


def sidecar_path(measurement_path: Path) -> Path:
    return measurement_path.with_name(measurement_path.name + ".json")


def write_sidecar(info: AcquisitionInfo, measurement_path: Path) -> Path:
    path = sidecar_path(measurement_path)
    _write_bytes(path, info.model_dump_json(indent=2).encode("utf-8"))
    log.debug("Sidecar written: %s", path)
    return path


def read_sidecar(measurement_path: Path) -> AcquisitionInfo | None:
    """Return the sidecar of a measurement file, or ``None`` when absent or unreadable."""
    path = sidecar_path(measurement_path)
    if not path.exists():
        return None
    try:
        return AcquisitionInfo.model_validate_json(path.read_text(encoding="utf-8"))
    except (OSError, ValidationError):
        log.warning("Ignoring unreadable sidecar %s", path)
        return None


def write_fdt_csv(report: FdtReport, path: Path) -> Path:
    return _write_csv(
        path,
        "k,lhs_re,lhs_im,rhs_re,rhs_im",
        [report.k, report.lhs.real, report.lhs.imag, report.rhs.real, report.rhs.imag],
    )
