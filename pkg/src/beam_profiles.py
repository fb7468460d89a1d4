"""Beam profiles on the unit circle, their angular Fourier coefficients and the incident field.

A beam is the superposition ``u_inc(r) = int a(s) exp(i k0 r.s) ds`` of plane waves with
directions ``s(phi) = (cos phi, sin phi)``. Every profile is defined in a *downward* frame
(nominal propagation direction ``-pi/2``) and rotated to its ``orientation``.

Fourier convention used throughout the package::

    e_n(phi) = exp(-i n phi)
    a_n      = (1 / 2pi) int a(phi) exp(-i n phi) dphi  ~  (1 / D) sum_{phi in S_D} a(phi) exp(-i n phi)
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Annotated, Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, field_validator, model_validator
from scipy import fft as sp_fft

from src.config import DEFAULT_ORIENTATION
from src.errors import DomainError, FileFormatError
from src.kspace_geometry import WaveContext, angle_grid, direction, wrap_angle

log = logging.getLogger(__name__)

ComplexArray = NDArray[np.complex128]

_HALF_PLANE_TOL = 1e-12
_NODE_TOL = 1e-9
_DOWNWARD = -math.pi / 2


class BeamProfile(BaseModel, ABC):
    """Amplitude function ``a`` on the circle, rotated to ``orientation``."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    orientation: float = Field(
        default=DEFAULT_ORIENTATION,
        description="Nominal propagation direction in radians; -pi/2 means downward.",
        examples=[-math.pi / 2, math.pi / 2],
    )

    @abstractmethod
    def _downward(self, phi: NDArray[np.float64]) -> ComplexArray:
        """Evaluate the profile in its downward frame at wrapped angles."""

    def evaluate(self, phi: ArrayLike) -> ComplexArray:
        shift = self.orientation - _DOWNWARD
        return self._downward(wrap_angle(np.asarray(phi, dtype=np.float64) - shift))

    def describe(self) -> str:
        return f"{type(self).__name__}(orientation={self.orientation:.6g})"


class GaussianProfile(BeamProfile):
    """Half-space Gaussian ``exp(-A s1^2)`` for ``s2 < 0`` and zero for ``s2 > 0``.

    The profile is not mass-normalised: comparing different ``A`` compares different total
    amplitudes. On the boundary ``s2 = 0`` it takes the midpoint value ``exp(-A s1^2) / 2``.
    """

    kind: Literal["gaussian"] = "gaussian"
    a: PositiveFloat = Field(description="Width parameter A; larger A narrows the angular profile.", examples=[10, 80])

    def _downward(self, phi: NDArray[np.float64]) -> ComplexArray:
        sin_phi = np.sin(phi)
        core = np.exp(-self.a * np.cos(phi) ** 2)
        weight = np.where(sin_phi < -_HALF_PLANE_TOL, 1.0, np.where(np.abs(sin_phi) <= _HALF_PLANE_TOL, 0.5, 0.0))
        return (weight * core).astype(np.complex128)

    def describe(self) -> str:
        return f"gaussian(A={self.a:g}, orientation={self.orientation:.6g})"


class UniformArcProfile(BeamProfile):
    """Constant ``amplitude`` on the arc ``[phi_lo, phi_hi]`` of the downward frame, zero elsewhere.

    An arc of length ``>= 2 pi`` covers the whole circle.
    """

    kind: Literal["uniform_arc"] = "uniform_arc"
    phi_lo: float = Field(default=-math.pi, description="Start of the arc (radians).")
    phi_hi: float = Field(default=math.pi, description="End of the arc (radians).")
    amplitude: complex = Field(default=1.0 + 0.0j, description="Constant value on the arc.")

    @model_validator(mode="after")
    def _check_arc(self) -> "UniformArcProfile":
        if self.phi_hi <= self.phi_lo:
            raise ValueError(f"phi_hi must exceed phi_lo, got [{self.phi_lo}, {self.phi_hi}]")
        return self

    def _downward(self, phi: NDArray[np.float64]) -> ComplexArray:
        length = self.phi_hi - self.phi_lo
        if length >= 2 * math.pi:
            return np.full(phi.shape, self.amplitude, dtype=np.complex128)
        offset = np.mod(phi - self.phi_lo, 2 * math.pi)
        return np.where(offset <= length, self.amplitude, 0.0).astype(np.complex128)

    def describe(self) -> str:
        return f"uniform_arc([{self.phi_lo:.6g}, {self.phi_hi:.6g}], amplitude={self.amplitude})"


class TabulatedProfile(BeamProfile):
    """Profile given by complex samples on the uniform grid ``phi0 + 2 pi j / D``.

    Off the nodes the samples are joined by periodic trigonometric interpolation (the Nyquist
    term as a cosine), so the profile is band-limited to ``|n| <= D/2``.
    """

    kind: Literal["tabulated"] = "tabulated"
    values: tuple[complex, ...] = Field(description="Samples a(phi_j), length D (even).")
    phi0: float = Field(default=-math.pi, description="Angle of the first sample.")

    @field_validator("values")
    @classmethod
    def _check_even(cls, v: tuple[complex, ...]) -> tuple[complex, ...]:
        if len(v) < 2 or len(v) % 2:
            raise ValueError(f"tabulated profiles need an even number (>= 2) of samples, got {len(v)}")
        return v

    def _downward(self, phi: NDArray[np.float64]) -> ComplexArray:
        samples = np.asarray(self.values, dtype=np.complex128)
        d = samples.size
        step = 2 * math.pi / d
        position = np.mod(phi - self.phi0, 2 * math.pi) / step
        nearest = np.rint(position)
        on_node = np.abs(position - nearest) * step <= _NODE_TOL

        out = np.empty(phi.shape, dtype=np.complex128)
        out[on_node] = samples[nearest[on_node].astype(np.int64) % d]
        off = ~on_node
        if np.any(off):
            coeffs = sp_fft.fft(samples) / d
            n = sp_fft.fftfreq(d, 1.0 / d)
            t = position[off] * step
            basis = np.exp(1j * np.outer(t, n))
            nyquist = d // 2
            basis[:, nyquist] = np.cos(nyquist * t)
            out[off] = basis @ coeffs
        return out

    @property
    def d(self) -> int:
        return len(self.values)


class CombinedProfile(BeamProfile):
    """Linear combination ``sum_i c_i a_i`` of other profiles."""

    kind: Literal["combined"] = "combined"
    terms: tuple[tuple[complex, "AnyProfile"], ...] = Field(description="(weight, profile) pairs.")

    def _downward(self, phi: NDArray[np.float64]) -> ComplexArray:
        out = np.zeros(phi.shape, dtype=np.complex128)
        for weight, term in self.terms:
            out += weight * term.evaluate(phi)
        return out

    def describe(self) -> str:
        parts = ", ".join(f"{w}*{t.describe()}" for w, t in self.terms)
        return f"combined({parts})"


AnyProfile = Annotated[
    GaussianProfile | UniformArcProfile | TabulatedProfile | CombinedProfile,
    Field(discriminator="kind"),
]
CombinedProfile.model_rebuild()


@dataclass(frozen=True)
class AngularCoefficients:
    """Fourier coefficients ``a_n`` for ``n = -N..N``, stored in increasing ``n``."""

    n_max: int
    values: ComplexArray = field(repr=False)

    def __post_init__(self) -> None:
        if self.n_max < 0:
            raise ValueError(f"n_max must be >= 0, got {self.n_max}")
        arr = np.array(self.values, dtype=np.complex128)
        if arr.shape != (2 * self.n_max + 1,):
            raise ValueError(f"expected {2 * self.n_max + 1} coefficients, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def indices(self) -> NDArray[np.int64]:
        return np.arange(-self.n_max, self.n_max + 1)

    def __getitem__(self, n: int) -> complex:
        if abs(n) > self.n_max:
            raise IndexError(f"coefficient index {n} outside -{self.n_max}..{self.n_max}")
        return complex(self.values[n + self.n_max])


def profile_eval(b: BeamProfile, phi: ArrayLike) -> ComplexArray:
    return b.evaluate(phi)


def angular_spectrum(samples: ArrayLike) -> ComplexArray:
    """All discrete coefficients ``(1/D) sum v(phi_j) exp(-i n phi_j)`` for ``n in I_D``, increasing ``n``.

    ``samples`` are the values on ``S_D``; a leading batch axis is allowed.
    """
    v = np.asarray(samples, dtype=np.complex128)
    d = v.shape[-1]
    n = np.arange(d) - d // 2
    spectrum = sp_fft.fft(v, axis=-1)[..., n % d] / d
    return np.asarray(spectrum * np.where(n % 2, -1.0, 1.0))


def angular_coefficients(b: BeamProfile, n_max: int, d: int) -> AngularCoefficients:
    """Rectangle-rule coefficients ``a_n``, ``|n| <= n_max``, from samples of ``b`` on ``S_D``.

    Raises
    ------
    DomainError
        If ``D < 4 N + 4``.
    """
    if n_max < 0:
        raise DomainError(f"truncation must be >= 0, got {n_max}")
    if d < 4 * n_max + 4:
        raise DomainError(f"quadrature grid D={d} too coarse for N={n_max}; need D >= {4 * n_max + 4}")
    spectrum = angular_spectrum(b.evaluate(angle_grid(d)))
    centre = d // 2
    return AngularCoefficients(n_max=n_max, values=spectrum[centre - n_max : centre + n_max + 1])


def rotate_profile(b: BeamProfile, theta: float) -> BeamProfile:
    """Return the profile ``phi -> b(phi - theta)``."""
    return b.model_copy(update={"orientation": b.orientation + theta})


def combine_profiles(terms: list[tuple[complex, BeamProfile]]) -> CombinedProfile:
    return CombinedProfile(terms=tuple((complex(w), p) for w, p in terms))


def plane_wave_profile(direction_angle: float, d: int) -> TabulatedProfile:
    """Discrete plane-wave stand-in on ``S_D``: weight ``D / 2pi`` at the node nearest ``direction_angle``.

    The quadrature ``(2pi/D) sum a(phi) exp(i k0 r.s(phi))`` then reduces to a single plane wave.
    The profile's orientation is the snapped node.
    """
    nodes = angle_grid(d)
    idx = int(np.argmin(np.abs(wrap_angle(nodes - direction_angle))))
    if abs(float(wrap_angle(nodes[idx] - direction_angle))) > _NODE_TOL:
        log.warning("Plane-wave direction %.6g snapped to grid node %.6g (D=%d)", direction_angle, nodes[idx], d)
    values = [0j] * d
    values[idx] = complex(d / (2 * math.pi))
    shift = float(nodes[idx]) - _DOWNWARD
    phi0 = float(wrap_angle(nodes[0] - shift))
    return TabulatedProfile(values=tuple(values), phi0=phi0, orientation=float(nodes[idx]))


def incident_field(b: BeamProfile, r: ArrayLike, ctx: WaveContext, d: int) -> ComplexArray:
    """``u_inc(r) = (2pi/D) sum_{phi in S_D} a(phi) exp(i k0 r.s(phi))`` at points ``r`` (shape ``(..., 2)``)."""
    phi = angle_grid(d)
    weights = b.evaluate(phi) * (2 * math.pi / d)
    pts = np.asarray(r, dtype=np.float64)
    phase = pts @ direction(phi).T
    return np.asarray(np.exp(1j * ctx.k0 * phase) @ weights)


def load_tabulated_csv(path: Path, *, orientation: float = DEFAULT_ORIENTATION) -> TabulatedProfile:
    """Read a ``phi,re,im`` table with strictly increasing, uniformly spaced angles covering ``2pi``.

    Raises
    ------
    FileFormatError
        If the table is malformed or its spacing differs from ``2 pi / D``.
    """
    try:
        skip = _header_rows(path)
        table = np.loadtxt(path, delimiter=",", ndmin=2, comments="#", skiprows=skip)
    except (OSError, ValueError) as exc:
        log.exception("Failed to read profile table %s", path)
        raise FileFormatError(f"cannot read profile table {path}: {exc}") from exc

    if table.shape[1] != 3:
        raise FileFormatError(f"{path}: expected columns phi,re,im, got {table.shape[1]} columns")
    phi = table[:, 0]
    d = phi.size
    if d < 2 or d % 2:
        raise FileFormatError(f"{path}: number of samples must be even and >= 2, got {d}")
    spacing = np.diff(phi)
    if np.any(spacing <= 0):
        raise FileFormatError(f"{path}: angles must be strictly increasing")
    if not np.allclose(spacing, 2 * math.pi / d, rtol=0.0, atol=1e-9):
        raise FileFormatError(f"{path}: angle spacing must be 2*pi/{d}")

    values = tuple(complex(re, im) for re, im in zip(table[:, 1], table[:, 2], strict=True))
    log.debug("Loaded tabulated profile with D=%d from %s", d, path)
    return TabulatedProfile(values=values, phi0=float(phi[0]), orientation=orientation)


def save_tabulated_csv(profile: TabulatedProfile, path: Path) -> Path:
    phi = profile.phi0 + 2 * math.pi / profile.d * np.arange(profile.d)
    samples = np.asarray(profile.values, dtype=np.complex128)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(
        path,
        np.column_stack([phi, samples.real, samples.imag]),
        delimiter=",",
        header="phi,re,im",
        comments="",
        fmt="%.17g",
    )
    log.info("Profile table written: %s", path)
    return path


def _header_rows(path: Path) -> int:
    with path.open(encoding="utf-8") as fh:
        first = fh.readline().strip().lower()
    return 1 if first.startswith("phi") else 0


class BeamSettings(BaseModel):
    """User-facing beam choice, resolved to a profile on a given angle grid by :meth:`build`."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["gaussian", "planewave", "table"] = Field(default="gaussian", description="Beam family.")
    a: PositiveFloat = Field(default=10.0, description="Gaussian width parameter A.", examples=[10, 80])
    table: Path | None = Field(default=None, description="CSV file with phi,re,im rows (kind='table').")
    orientation: float = Field(default=DEFAULT_ORIENTATION, description="Nominal propagation direction.")

    @model_validator(mode="after")
    def _check_table(self) -> "BeamSettings":
        if self.kind == "table" and self.table is None:
            raise ValueError("kind='table' requires a table path")
        return self

    def build(self, d: int) -> BeamProfile:
        """Profile for a quadrature on ``S_D``; the plane-wave stand-in depends on ``D``."""
        if self.kind == "gaussian":
            return GaussianProfile(a=self.a, orientation=self.orientation)
        if self.kind == "planewave":
            return plane_wave_profile(self.orientation, d)
        assert self.table is not None  # noqa: S101
        return load_tabulated_csv(self.table, orientation=self.orientation)

    def describe(self) -> str:
        if self.kind == "gaussian":
            return f"gaussian A={self.a:g}"
        if self.kind == "planewave":
            return "planewave"
        return f"table {self.table}"
