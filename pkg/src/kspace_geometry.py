"""Pure k-space geometry of the rotating-beam measurement setup.

All functions are vectorised over numpy arrays and stateless. Angles are in radians,
frequencies in the units of ``k0``.
"""

import logging
import math
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat

from src.config import DEFAULT_EPS_K, DEFAULT_K0
from src.errors import DomainError

log = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
IntArray = NDArray[np.int64]

_CLOSURE_TOL = 1e-12


class WaveContext(BaseModel):
    """Monochromatic wave parameters shared by every stage of the pipeline.

    The wavelength is derived, ``lambda = 2*pi / k0``, so the two can never disagree.
    ``eps_k`` clamps every detector-frequency grid to ``|k| <= (1 - eps_k) k0``, since
    ``kappa(k) -> 0`` makes the Jacobian and the ``1/kappa`` prefactor blow up at the band edge.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    k0: PositiveFloat = Field(
        default=DEFAULT_K0,
        description="Angular wavenumber (radians per unit length).",
        examples=[2 * math.pi],
    )
    eps_k: float = Field(
        default=DEFAULT_EPS_K,
        ge=0.0,
        lt=1.0,
        description="Relative margin keeping sampled frequencies away from |k| = k0.",
        examples=[1e-3],
    )

    @classmethod
    def from_wavelength(cls, wavelength: float, *, eps_k: float = DEFAULT_EPS_K) -> "WaveContext":
        if wavelength <= 0:
            raise DomainError(f"wavelength must be positive, got {wavelength}")
        return cls(k0=2 * math.pi / wavelength, eps_k=eps_k)

    @property
    def wavelength(self) -> float:
        return 2 * math.pi / self.k0

    @property
    def k_max(self) -> float:
        return (1.0 - self.eps_k) * self.k0

    def k_grid(self, m: int) -> FloatArray:
        """Detector frequencies ``(2 k0 / M) I_M`` restricted to the clamped band."""
        if m < 2 or m % 2:
            raise ValueError(f"k-grid size must be an even integer >= 2, got {m}")
        k = (2.0 * self.k0 / m) * centered_indices(m)
        return k[np.abs(k) <= self.k_max]


class KPhiPoint(NamedTuple):
    """A point ``(k, phi)`` of the measurement manifold U."""

    k: float
    phi: float


def centered_indices(n: int) -> FloatArray:
    """The index set ``I_n = {-n/2, ..., n/2 - 1}`` as floats."""
    return np.arange(n, dtype=np.float64) - n // 2


def angle_grid(d: int) -> FloatArray:
    """Uniform angle grid ``S_D = (2 pi / D) I_D`` in ``[-pi, pi)``."""
    if d < 2 or d % 2:
        raise ValueError(f"angle grid size must be an even integer >= 2, got {d}")
    return (2.0 * math.pi / d) * centered_indices(d)


def wrap_angle(phi: ArrayLike) -> FloatArray:
    """Map angles to ``[-pi, pi)``."""
    return np.mod(np.asarray(phi, dtype=np.float64) + math.pi, 2.0 * math.pi) - math.pi


def direction(phi: ArrayLike) -> FloatArray:
    """Unit vectors ``s(phi) = (cos phi, sin phi)`` stacked along the last axis."""
    phi_arr = np.asarray(phi, dtype=np.float64)
    return np.stack([np.cos(phi_arr), np.sin(phi_arr)], axis=-1)


def kappa(k: ArrayLike, ctx: WaveContext) -> FloatArray:
    """``kappa(k) = sqrt(k0^2 - k^2)`` for ``|k| < k0``.

    Evaluated as ``sqrt((k0 - k)(k0 + k))`` to avoid cancellation near the band edge.

    Raises
    ------
    DomainError
        If any ``|k| >= k0``.
    """
    k_arr = np.asarray(k, dtype=np.float64)
    if np.any(np.abs(k_arr) >= ctx.k0):
        raise DomainError(f"kappa requires |k| < k0 = {ctx.k0}; got max |k| = {np.max(np.abs(k_arr))}")
    return np.sqrt((ctx.k0 - k_arr) * (ctx.k0 + k_arr))


def wave_vector(k: ArrayLike, ctx: WaveContext) -> FloatArray:
    """``h(k) = (k, kappa(k))``; always of norm ``k0``."""
    k_arr = np.asarray(k, dtype=np.float64)
    return np.stack([k_arr, kappa(k_arr, ctx)], axis=-1)


def map_t(k: ArrayLike, phi: ArrayLike, ctx: WaveContext) -> FloatArray:
    """Coverage map ``T(k, phi) = h(k) - k0 s(phi)``; inputs broadcast against each other."""
    k_arr, phi_arr = np.broadcast_arrays(np.asarray(k, dtype=np.float64), np.asarray(phi, dtype=np.float64))
    return wave_vector(k_arr, ctx) - ctx.k0 * direction(phi_arr)


def jacobian_det(k: ArrayLike, phi: ArrayLike, ctx: WaveContext) -> FloatArray:
    """``det grad T(k, phi) = k0 (k / kappa(k) sin phi - cos phi)``."""
    k_arr, phi_arr = np.broadcast_arrays(np.asarray(k, dtype=np.float64), np.asarray(phi, dtype=np.float64))
    return ctx.k0 * (k_arr / kappa(k_arr, ctx) * np.sin(phi_arr) - np.cos(phi_arr))


def banach_indicatrix(phi: ArrayLike) -> IntArray:
    """Number of preimages ``Card(T^-1(T(k, phi)))``: 2 for ``phi in [-pi, 0)``, else 1.

    The null sets ``y = 0`` and ``|y| = 2 k0`` get the generic value of their half.
    """
    wrapped = wrap_angle(phi)
    return np.where(wrapped < 0.0, 2, 1).astype(np.int64)


def backprojection_weights(k: ArrayLike, phi: ArrayLike, ctx: WaveContext) -> FloatArray:
    """Change-of-variables weight ``|det grad T| / Card(T^-1(T))`` of the backpropagation integral."""
    k_arr, phi_arr = np.broadcast_arrays(np.asarray(k, dtype=np.float64), np.asarray(phi, dtype=np.float64))
    return np.abs(jacobian_det(k_arr, phi_arr, ctx)) / banach_indicatrix(phi_arr)


def lattice_weights(k: ArrayLike, phi: ArrayLike, ctx: WaveContext, m: int) -> FloatArray:
    """Quadrature weights of the backpropagation sum on the lattice ``k x phi``, shape ``(len(k), len(phi))``.

    ``|det grad T| = k0^2 |cos(phi + asin(k/k0))| / kappa(k)`` has an integrable ``1/kappa`` singularity
    at the band edge. Each row is therefore rescaled by ``kappa(k_j) * (asin(hi/k0) - asin(lo/k0)) / dk``,
    the exact integral of ``1/kappa`` over its cell ``[lo, hi]`` of width ``dk = 2 k0 / m``, and the
    outermost cells reach out to ``-k0`` and ``k0``. Multiplied by ``dk * 2pi / D`` the weights sum to the
    area of ``T(U)`` up to the angular rule.
    """
    k_arr = np.asarray(k, dtype=np.float64)
    phi_arr = np.asarray(phi, dtype=np.float64)
    if k_arr.ndim != 1 or k_arr.size == 0 or np.any(np.diff(k_arr) <= 0):
        raise ValueError("lattice weights need a non-empty increasing 1D k-grid")
    dk = 2.0 * ctx.k0 / m
    lo = k_arr - dk / 2
    hi = k_arr + dk / 2
    lo[0] = -ctx.k0
    hi[-1] = ctx.k0
    cell = np.arcsin(np.clip(hi / ctx.k0, -1.0, 1.0)) - np.arcsin(np.clip(lo / ctx.k0, -1.0, 1.0))
    rows = kappa(k_arr, ctx) * cell / dk
    return backprojection_weights(k_arr[:, None], phi_arr[None, :], ctx) * rows[:, None]


def coverage_contains(y: ArrayLike, ctx: WaveContext) -> NDArray[np.bool_]:
    """Whether ``y`` lies in the closure of the frequency coverage ``T(U)``.

    ``T(U)`` is the upper half disk of radius ``2 k0`` joined with the two disks of radius ``k0``
    centred at ``(+-k0, 0)``.
    """
    y_arr = np.asarray(y, dtype=np.float64)
    tol = _CLOSURE_TOL * ctx.k0
    y1, y2 = y_arr[..., 0], y_arr[..., 1]
    in_big = np.hypot(y1, y2) <= 2.0 * ctx.k0 + tol
    upper = y2 >= -tol
    right = np.hypot(y1 - ctx.k0, y2) <= ctx.k0 + tol
    left = np.hypot(y1 + ctx.k0, y2) <= ctx.k0 + tol
    return np.asarray(in_big & (upper | right | left))
