"""Two-step inversion: angular TSVD deconvolution followed by filtered backpropagation.

Step 1 inverts the rotation operator ``(A g)(theta) = (2pi/D) sum_phi a(phi - theta) g(phi)``,
which is diagonal in ``e_n(phi) = exp(-i n phi)`` with eigenvalues ``2 pi a_n``. Step 2 maps
the recovered ``g(k, phi) ~ Ff(T(k, phi))`` back to the object grid.
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, NonNegativeFloat, NonNegativeInt
from scipy import fft as sp_fft

from src.beam_profiles import AngularCoefficients, BeamProfile, angular_coefficients
from src.config import DEFAULT_MIN_SINGULAR, DEFAULT_TRUNCATION
from src.errors import DomainError, EmptySpectrumError, GridMismatchError
from src.forward_model import KSpaceSamples, MeasurementSet
from src.kspace_geometry import WaveContext, angle_grid, lattice_weights, map_t
from src.parallel import map_chunks
from src.phantoms import ComplexImage, ObjectGrid

log = logging.getLogger(__name__)

ComplexArray = NDArray[np.complex128]
FloatArray = NDArray[np.float64]

_BACKPROJECTION_BUDGET = 1 << 21


class TsvdConfig(BaseModel):
    """Truncation of the singular system used in step 1."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    truncation: NonNegativeInt = Field(
        default=DEFAULT_TRUNCATION,
        description="Half-width N: only |n| <= N enter the solution.",
        examples=[12, 0],
    )
    min_singular: NonNegativeFloat = Field(
        default=DEFAULT_MIN_SINGULAR,
        description="Coefficients with |a_n| <= min_singular are dropped even inside the band.",
        examples=[1e-12],
    )


@dataclass(frozen=True)
class PicardTable:
    """Rows ``(n, |a_n|, |m_n|, |m_n / a_n|)`` for ``n = -N..N`` at frequency ``k``.

    ``abs_ratio`` is ``inf`` where ``a_n = 0``.
    """

    k: float
    n: NDArray[np.int64] = field(repr=False)
    abs_a: FloatArray = field(repr=False)
    abs_m: FloatArray = field(repr=False)
    abs_ratio: FloatArray = field(repr=False)

    def __post_init__(self) -> None:
        size = len(self.n)
        if size % 2 != 1 or any(len(col) != size for col in (self.abs_a, self.abs_m, self.abs_ratio)):
            raise GridMismatchError("Picard columns must share one odd length 2N+1")

    @property
    def n_max(self) -> int:
        return (len(self.n) - 1) // 2


class SweepPoint(NamedTuple):
    """Step-1 diagnostics for one truncation level."""

    truncation: int
    residual: float
    solution_norm: float


def _harmonics(n: NDArray[np.int64], d: int) -> ComplexArray:
    """Matrix ``E[j, i] = e_{n_i}(phi_j)`` on ``S_D``."""
    return np.exp(-1j * np.outer(angle_grid(d), n))


def _lag_samples(b: BeamProfile, d: int) -> ComplexArray:
    return b.evaluate(2 * math.pi / d * np.arange(d))


def apply_operator(g: ArrayLike, kernel: BeamProfile | AngularCoefficients) -> ComplexArray:
    """Apply ``A`` along the last axis of ``g`` (samples on ``S_D``).

    A :class:`BeamProfile` kernel gives the discrete cyclic convolution; an
    :class:`AngularCoefficients` kernel gives the diagonal form ``sum 2pi a_n <g, e_n> e_n``
    restricted to ``|n| <= N``.

    Raises
    ------
    GridMismatchError
        If the coefficient band does not fit on the grid of ``g``.
    """
    values = np.asarray(g, dtype=np.complex128)
    d = values.shape[-1]
    if isinstance(kernel, AngularCoefficients):
        _check_band(kernel.n_max, d)
        basis = _harmonics(kernel.indices, d)
        projected = measurement_coefficients(values, kernel.n_max)
        return np.asarray((2 * math.pi * kernel.values * projected) @ basis.T)

    kernel_hat = d * sp_fft.ifft(_lag_samples(kernel, d))
    return np.asarray((2 * math.pi / d) * sp_fft.ifft(sp_fft.fft(values, axis=-1) * kernel_hat, axis=-1))


def apply_adjoint(h: ArrayLike, kernel: BeamProfile | AngularCoefficients) -> ComplexArray:
    """Adjoint ``(A* h)(phi) = (2pi/D) sum_theta conj(a(phi - theta)) h(theta)``.

    The inner product is ``<g, h> = (1/D) sum g conj(h)`` on ``S_D``.
    """
    values = np.asarray(h, dtype=np.complex128)
    d = values.shape[-1]
    if isinstance(kernel, AngularCoefficients):
        _check_band(kernel.n_max, d)
        basis = _harmonics(kernel.indices, d)
        projected = measurement_coefficients(values, kernel.n_max)
        return np.asarray((2 * math.pi * np.conj(kernel.values) * projected) @ basis.T)

    kernel_hat = sp_fft.fft(np.conj(_lag_samples(kernel, d)))
    return np.asarray((2 * math.pi / d) * sp_fft.ifft(sp_fft.fft(values, axis=-1) * kernel_hat, axis=-1))


def _check_band(n_max: int, d: int) -> None:
    if 2 * n_max + 1 > d:
        raise DomainError(f"truncation N={n_max} needs 2N+1 <= D, got D={d}")


def measurement_coefficients(values: ArrayLike, n_max: int) -> ComplexArray:
    """``m_n = (1/D) sum_theta m(theta) exp(i n theta)`` for ``|n| <= N`` along the last axis."""
    arr = np.asarray(values, dtype=np.complex128)
    d = arr.shape[-1]
    _check_band(n_max, d)
    n = np.arange(-n_max, n_max + 1)
    sign = np.where(n % 2, -1.0, 1.0)
    return np.asarray(sp_fft.ifft(arr, axis=-1)[..., n % d] * sign)


def svd_coefficients(ms: MeasurementSet, k_index: int, n_max: int) -> ComplexArray:
    """Angular coefficients ``m_n(k)`` of one measurement row, ``n = -N..N``.

    Raises
    ------
    DomainError
        If ``2N + 1 > D``.
    """
    return measurement_coefficients(ms.values[k_index], n_max)


def _band(coeffs: AngularCoefficients, n_max: int) -> ComplexArray:
    if coeffs.n_max < n_max:
        raise GridMismatchError(f"coefficients cover |n| <= {coeffs.n_max}, need {n_max}")
    centre = coeffs.n_max
    return coeffs.values[centre - n_max : centre + n_max + 1]


def tsvd_solve(ms: MeasurementSet, coeffs: AngularCoefficients, cfg: TsvdConfig) -> KSpaceSamples:
    """Truncated-SVD solution ``g_N = sum_{|n|<=N, |a_n|>floor} m_n / (2pi a_n) e_n`` for every k.

    Raises
    ------
    EmptySpectrumError
        If every ``|a_n|`` in the band is at or below ``min_singular``.
    """
    n_max = cfg.truncation
    a = _band(coeffs, n_max)
    keep = np.abs(a) > cfg.min_singular
    if not keep.any():
        raise EmptySpectrumError(
            f"all |a_n| for |n| <= {n_max} are <= min_singular={cfg.min_singular:g}; "
            "lower --min-singular or check the beam profile"
        )
    if not keep.all():
        log.warning("Dropped %d coefficient(s) with |a_n| <= %g", int((~keep).sum()), cfg.min_singular)

    data = measurement_coefficients(ms.values, n_max)
    solution = np.zeros_like(data)
    solution[:, keep] = data[:, keep] / (2 * math.pi * a[keep])
    basis = _harmonics(np.arange(-n_max, n_max + 1), ms.d)
    log.debug("TSVD: N=%d, kept %d of %d coefficient(s), %d row(s)", n_max, int(keep.sum()), keep.size, ms.m_k)
    return KSpaceSamples.on_lattice_of(ms, solution @ basis.T)


def picard_table(ms: MeasurementSet, coeffs: AngularCoefficients, k_index: int, n_max: int) -> PicardTable:
    a = np.abs(_band(coeffs, n_max))
    m_abs = np.abs(svd_coefficients(ms, k_index, n_max))
    ratio = np.divide(m_abs, a, out=np.full_like(m_abs, np.inf), where=a > 0)
    return PicardTable(
        k=float(ms.k[k_index]),
        n=np.arange(-n_max, n_max + 1),
        abs_a=a,
        abs_m=m_abs,
        abs_ratio=ratio,
    )


def conventional_kspace(ms: MeasurementSet, a0: complex, orientation: float) -> KSpaceSamples:
    """Plane-wave reading of the data: ``g(k, theta + psi) = m(k, theta) / (2pi a_0)``.

    ``psi`` is the beam's nominal direction; it is rounded to the nearest multiple of ``2pi/D``.
    """
    if a0 == 0:
        raise EmptySpectrumError("a_0 = 0: the beam carries no mean amplitude for conventional DT")
    exact = orientation * ms.d / (2 * math.pi)
    shift = round(exact)
    if abs(exact - shift) > 1e-9:
        log.warning("Beam orientation %.6g is not on the angle grid; shifting by %d sample(s)", orientation, shift)
    return KSpaceSamples.on_lattice_of(ms, np.roll(ms.values, shift, axis=1) / (2 * math.pi * a0))


def backpropagate(g: KSpaceSamples, grid: ObjectGrid, ctx: WaveContext | None = None) -> ComplexImage:
    """Filtered backpropagation ``f(r) = (2 k0 / (M D)) sum g e^{i T.r} |det grad T| / Card``.

    The weights come from :func:`~src.kspace_geometry.lattice_weights`, which integrate the
    ``1/kappa`` factor of the Jacobian over each k-cell. The exponential separates over the two
    axes of ``grid``; lattice points are processed in fixed-size chunks whose partial images are
    summed in order.

    Raises
    ------
    GridMismatchError
        If ``ctx`` disagrees with the lattice of ``g``.
    """
    lattice_ctx = g.ctx
    if ctx is not None and ctx != lattice_ctx:
        raise GridMismatchError(f"wave context {ctx} differs from the k-space lattice {lattice_ctx}")

    kk, pp = np.meshgrid(g.k, g.phi, indexing="ij")
    targets = map_t(kk, pp, lattice_ctx).reshape(-1, 2)
    weighted = (g.values * lattice_weights(g.k, g.phi, lattice_ctx, g.m)).ravel()
    x = grid.axis()

    def _chunk(sl: slice) -> ComplexArray:
        e1 = np.exp(1j * np.outer(targets[sl, 0], x))
        e2 = np.exp(1j * np.outer(targets[sl, 1], x))
        return np.asarray((e1.T * weighted[sl]) @ e2)

    image = np.zeros((grid.m, grid.m), dtype=np.complex128)
    for part in map_chunks(_chunk, weighted.size, max(16, _BACKPROJECTION_BUDGET // grid.m)):
        image += part
    image *= 2 * lattice_ctx.k0 / (g.m * g.d)
    log.debug("Backpropagated %d lattice point(s) onto M=%d", weighted.size, grid.m)
    return ComplexImage(grid=grid, values=image)


def reconstruct(
    ms: MeasurementSet,
    b: BeamProfile,
    cfg: TsvdConfig,
    grid: ObjectGrid,
    *,
    conventional: bool = False,
) -> ComplexImage:
    """Full pipeline: coefficients of ``b`` on ``S_D``, per-k TSVD, then backpropagation.

    With ``conventional=True`` step 1 is replaced by the plane-wave reading of the data.
    """
    if conventional:
        a0 = angular_coefficients(b, 0, ms.d)[0]
        g = conventional_kspace(ms, a0, b.orientation)
    else:
        coeffs = angular_coefficients(b, cfg.truncation, ms.d)
        g = tsvd_solve(ms, coeffs, cfg)
    return backpropagate(g, grid, ms.ctx)


def step1_residual(ms: MeasurementSet, b: BeamProfile, g: KSpaceSamples) -> FloatArray:
    """Per-row residual ``||A g - m||`` of step 1 (plain Euclidean norm over theta)."""
    if g.values.shape != ms.values.shape:
        raise GridMismatchError("k-space samples and measurements live on different lattices")
    return np.asarray(np.linalg.norm(apply_operator(g.values, b) - ms.values, axis=1))


def tsvd_sweep(
    ms: MeasurementSet, b: BeamProfile, truncations: Sequence[int], *, min_singular: float = DEFAULT_MIN_SINGULAR
) -> list[SweepPoint]:
    """Residual and solution norm of step 1 for each truncation level."""
    if not truncations:
        return []
    coeffs = angular_coefficients(b, max(truncations), ms.d)
    points: list[SweepPoint] = []
    for n in truncations:
        g = tsvd_solve(ms, coeffs, TsvdConfig(truncation=n, min_singular=min_singular))
        residual = float(np.linalg.norm(step1_residual(ms, b, g)))
        points.append(SweepPoint(truncation=n, residual=residual, solution_norm=float(np.linalg.norm(g.values))))
        log.debug("Sweep N=%d: residual %.4g", n, residual)
    return points
