"""Forward models: NDFT measurement synthesis, the direct Born field and measurement noise.

``simulate_measurements`` is the production path. ``born_field_direct`` convolves with the
outgoing Green's function ``(i/4) H0(k0 |r|)`` and serves as an independent oracle;
``fdt_check`` compares both through the Fourier diffraction relation on a detector line.
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from typing import Final, Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import fft as sp_fft, special
from scipy.signal import windows

from src.beam_profiles import BeamProfile, BeamSettings, incident_field
from src.config import DEFAULT_D, SimulationConfig
from src.errors import DomainError, GridMismatchError, SingularityError, SupportError
from src.kspace_geometry import WaveContext, angle_grid, centered_indices, kappa, map_t
from src.parallel import map_chunks
from src.phantoms import ComplexImage, DiskSpec, ObjectGrid, two_inclusion_phantom

log = logging.getLogger(__name__)

ComplexArray = NDArray[np.complex128]
FloatArray = NDArray[np.float64]

# Upper bound on complex entries of one chunk's kernel matrix.
_KERNEL_BUDGET: Final = 1 << 21
_SINGULAR_TOL: Final = 1e-9


def _chunk_for(width: int) -> int:
    return max(16, _KERNEL_BUDGET // max(width, 1))


def _even(name: str, value: int) -> None:
    if value < 2 or value % 2:
        raise GridMismatchError(f"{name} must be an even integer >= 2, got {value}")


@dataclass(frozen=True)
class MeasurementSet:
    """Data ``m(k, theta)`` on the clamped k-grid (rows) times ``S_D`` (columns)."""

    m: int
    d: int
    k0: float
    r_m: float
    eps_k: float
    values: ComplexArray = field(repr=False)

    def __post_init__(self) -> None:
        _even("M", self.m)
        _even("D", self.d)
        arr = np.array(self.values, dtype=np.complex128)
        expected = (self.ctx.k_grid(self.m).size, self.d)
        if arr.shape != expected:
            raise GridMismatchError(f"measurement shape {arr.shape} does not match lattice {expected}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def ctx(self) -> WaveContext:
        return WaveContext(k0=self.k0, eps_k=self.eps_k)

    @property
    def k(self) -> FloatArray:
        return self.ctx.k_grid(self.m)

    @property
    def theta(self) -> FloatArray:
        return angle_grid(self.d)

    @property
    def m_k(self) -> int:
        return int(self.values.shape[0])

    def with_values(self, values: ArrayLike) -> "MeasurementSet":
        return replace(self, values=np.asarray(values, dtype=np.complex128))


@dataclass(frozen=True)
class KSpaceSamples:
    """Values ``g(k, phi) ~ Ff(T(k, phi))`` on the same lattice as a :class:`MeasurementSet`."""

    m: int
    d: int
    k0: float
    eps_k: float
    values: ComplexArray = field(repr=False)

    def __post_init__(self) -> None:
        _even("M", self.m)
        _even("D", self.d)
        arr = np.array(self.values, dtype=np.complex128)
        expected = (self.ctx.k_grid(self.m).size, self.d)
        if arr.shape != expected:
            raise GridMismatchError(f"k-space sample shape {arr.shape} does not match lattice {expected}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def on_lattice_of(cls, ms: MeasurementSet, values: ArrayLike) -> "KSpaceSamples":
        return cls(m=ms.m, d=ms.d, k0=ms.k0, eps_k=ms.eps_k, values=np.asarray(values))

    @property
    def ctx(self) -> WaveContext:
        return WaveContext(k0=self.k0, eps_k=self.eps_k)

    @property
    def k(self) -> FloatArray:
        return self.ctx.k_grid(self.m)

    @property
    def phi(self) -> FloatArray:
        return angle_grid(self.d)

    def __add__(self, other: "KSpaceSamples") -> "KSpaceSamples":
        if (self.m, self.d, self.k0, self.eps_k) != (other.m, other.d, other.k0, other.eps_k):
            raise GridMismatchError("k-space samples live on different lattices")
        return replace(self, values=self.values + other.values)


@dataclass(frozen=True)
class FdtReport:
    """Both sides of the Fourier diffraction relation at the compared frequencies."""

    k: FloatArray = field(repr=False)
    lhs: ComplexArray = field(repr=False)
    rhs: ComplexArray = field(repr=False)
    relative_error: float
    line_extent: float
    samples: int


def ndft2(img: ComplexImage, targets: ArrayLike) -> ComplexArray:
    """Exact 2D NDFT ``(1/2pi) h^2 sum_j f(r_j) exp(-i r_j . y)`` at every target ``y``.

    ``targets`` has shape ``(..., 2)``; the result has shape ``(...)``. The sum is separable
    over the two lattice axes and only rows and columns of ``f`` with nonzero entries enter.
    """
    y = np.asarray(targets, dtype=np.float64)
    out_shape = y.shape[:-1]
    flat = y.reshape(-1, 2)

    nonzero = img.values != 0
    rows = np.flatnonzero(nonzero.any(axis=1))
    cols = np.flatnonzero(nonzero.any(axis=0))
    if rows.size == 0 or flat.shape[0] == 0:
        return np.zeros(out_shape, dtype=np.complex128)

    x = img.grid.axis()
    x1, x2 = x[rows], x[cols]
    f = img.values[np.ix_(rows, cols)]

    def _chunk(sl: slice) -> ComplexArray:
        e1 = np.exp(-1j * np.outer(flat[sl, 0], x1))
        e2 = np.exp(-1j * np.outer(flat[sl, 1], x2))
        return np.asarray(((e1 @ f) * e2).sum(axis=1))

    total = flat.shape[0]
    chunk = _chunk_for(max(rows.size, cols.size))
    log.debug("ndft2: %d target(s), %dx%d active pixels", total, rows.size, cols.size)
    values = np.concatenate(list(map_chunks(_chunk, total, chunk)))
    return (img.grid.pixel_area / (2 * math.pi)) * values.reshape(out_shape)


def simulate_measurements(
    img: ComplexImage,
    b: BeamProfile,
    m: int,
    d: int,
    ctx: WaveContext,
    r_m: float,
    *,
    angular_oversample: int = 1,
    method: Literal["fft", "direct"] = "fft",
) -> MeasurementSet:
    """Synthesise ``m(k, theta) = (2pi/D_s) sum_{phi in S_Ds} a(phi - theta) Ff(T(k, phi))``.

    The inner plane-wave quadrature runs on ``D_s = angular_oversample * D`` angles and the
    rotations ``theta`` on ``S_D``, a subset of ``S_Ds``. ``Ff`` is evaluated once per
    ``(k, phi)`` and reused for every rotation; the angular sum is a cyclic correlation.

    Parameters
    ----------
    img
        Scattering potential; its grid is the simulation grid.
    b
        Beam profile.
    m, d
        Sizes of the k-grid and of the rotation grid (even).
    ctx
        Wave parameters and k-grid clamp.
    r_m
        Detector line offset; must exceed ``img.grid.r_s``.
    angular_oversample
        Refinement of the inner quadrature.
    method
        ``"fft"`` for the fast cyclic correlation, ``"direct"`` for the explicit double sum.

    Returns
    -------
    MeasurementSet

    Raises
    ------
    SupportError
        If ``r_m <= r_s``.
    GridMismatchError
        If ``m`` or ``d`` is not even.
    """
    if r_m <= img.grid.r_s:
        raise SupportError(f"detector line r_M={r_m} must lie outside the support r_s={img.grid.r_s}")
    _even("M", m)
    _even("D", d)
    if angular_oversample < 1:
        raise GridMismatchError(f"angular_oversample must be >= 1, got {angular_oversample}")

    ds = angular_oversample * d
    k = ctx.k_grid(m)
    phi = angle_grid(ds)
    spectrum = ndft2(img, map_t(k[:, None], phi[None, :], ctx))

    if method == "fft":
        lag = b.evaluate(2 * math.pi / ds * np.arange(ds))
        kernel_hat = ds * sp_fft.ifft(lag)
        correlated = sp_fft.ifft(sp_fft.fft(spectrum, axis=1) * kernel_hat[None, :], axis=1)
        values = correlated[:, ::angular_oversample]
    elif method == "direct":
        kernel = b.evaluate(phi[:, None] - angle_grid(d)[None, :])
        values = spectrum @ kernel
    else:
        raise ValueError(f"unknown simulation method {method!r}")

    log.debug("Simulated %dx%d measurements (D_s=%d, method=%s)", k.size, d, ds, method)
    return MeasurementSet(
        m=m, d=d, k0=ctx.k0, r_m=r_m, eps_k=ctx.eps_k, values=(2 * math.pi / ds) * np.asarray(values)
    )


def simulate(img: ComplexImage, beam: BeamSettings, cfg: SimulationConfig) -> MeasurementSet:
    """Simulate and add noise for an image given on its own (simulation) grid."""
    if img.grid.m == cfg.m:
        log.warning(
            "Phantom grid M=%d equals the measurement lattice; simulate from a preset to avoid an inverse crime",
            cfg.m,
        )
    ctx = WaveContext(k0=cfg.k0, eps_k=cfg.eps_k)
    profile = beam.build(cfg.angular_oversample * cfg.d)
    ms = simulate_measurements(
        img, profile, cfg.m, cfg.d, ctx, cfg.r_m, angular_oversample=cfg.angular_oversample
    )
    return add_noise(ms, cfg.noise_percent, cfg.seed)


def simulate_from_disks(
    disks: Sequence[DiskSpec], r_s: float, beam: BeamSettings, cfg: SimulationConfig
) -> MeasurementSet:
    """Rasterise ``disks`` on an ``oversample * M`` grid and simulate from it."""
    grid = ObjectGrid(m=cfg.oversample * cfg.m, r_s=r_s)
    img = two_inclusion_phantom(grid, disks)
    return simulate(img, beam, cfg)


def add_noise(ms: MeasurementSet, percent: float, seed: int) -> MeasurementSet:
    """Return ``m + delta xi`` with ``||m_delta - m|| / ||m|| = percent / 100``.

    ``xi`` is standard complex Gaussian (independent real and imaginary parts of variance 1/2)
    drawn from a Philox stream keyed by ``seed``.
    """
    if percent < 0:
        raise DomainError(f"noise percent must be >= 0, got {percent}")
    if percent == 0:
        return ms.with_values(ms.values.copy())

    norm_m = float(np.linalg.norm(ms.values))
    if norm_m == 0.0:
        log.warning("Noise requested for all-zero measurements; data left unchanged")
        return ms.with_values(ms.values.copy())

    rng = np.random.Generator(np.random.Philox(seed))
    real = rng.standard_normal(ms.values.shape)
    imag = rng.standard_normal(ms.values.shape)
    xi = (real + 1j * imag) / math.sqrt(2.0)
    delta = (percent / 100.0) * norm_m / float(np.linalg.norm(xi))
    log.debug("Added %.4g%% noise (seed=%d, delta=%.4g)", percent, seed, delta)
    return ms.with_values(ms.values + delta * xi)


def hankel_h0_1(x: ArrayLike) -> ComplexArray:
    """``H0^(1)(x) = J0(x) + i Y0(x)`` for ``x > 0``."""
    x_arr = np.asarray(x, dtype=np.float64)
    if np.any(x_arr <= 0):
        raise DomainError("the Hankel function H0^(1) requires x > 0")
    return np.asarray(special.hankel1(0, x_arr), dtype=np.complex128)


def born_field_direct(
    img: ComplexImage, b: BeamProfile, eval_points: ArrayLike, ctx: WaveContext, d: int = DEFAULT_D
) -> ComplexArray:
    """Born scattered field ``u(r) = h^2 sum_j (i/4) H0(k0 |r - r_j|) f(r_j) u_inc(r_j)``.

    Raises
    ------
    SingularityError
        If an evaluation point coincides with a pixel where ``f != 0``.
    """
    pts = np.asarray(eval_points, dtype=np.float64)
    out_shape = pts.shape[:-1]
    flat = pts.reshape(-1, 2)

    j1, j2 = np.nonzero(img.values)
    if j1.size == 0 or flat.shape[0] == 0:
        return np.zeros(out_shape, dtype=np.complex128)

    x = img.grid.axis()
    src = np.column_stack([x[j1], x[j2]])
    weights = 0.25j * img.grid.pixel_area * img.values[j1, j2] * incident_field(b, src, ctx, d)
    tol = _SINGULAR_TOL * img.grid.spacing

    def _chunk(sl: slice) -> ComplexArray:
        dist = np.hypot(flat[sl, 0, None] - src[None, :, 0], flat[sl, 1, None] - src[None, :, 1])
        if np.any(dist <= tol):
            raise SingularityError("evaluation point coincides with a source pixel of the scattering potential")
        return np.asarray(special.hankel1(0, ctx.k0 * dist) @ weights)

    total = flat.shape[0]
    log.debug("Born field: %d point(s), %d source pixel(s)", total, j1.size)
    values = np.concatenate(list(map_chunks(_chunk, total, _chunk_for(j1.size))))
    return values.reshape(out_shape)


def line_points(r2: float, extent: float, samples: int) -> FloatArray:
    """Detector line ``r1 = extent (2/L) I_L`` at height ``r2``, shape ``(L, 2)``."""
    _even("L", samples)
    r1 = extent * (2.0 / samples) * centered_indices(samples)
    return np.column_stack([r1, np.full_like(r1, r2)])


def line_fourier_transform(r1: ArrayLike, values: ArrayLike, k: ArrayLike, *, taper: float = 0.5) -> ComplexArray:
    """Unitary 1D transform ``(1/sqrt(2pi)) sum w(r1) v(r1) exp(-i k r1) dr`` of uniform line samples.

    ``taper`` is the Tukey fraction of the line that is smoothly rolled off (0 disables it).
    """
    r = np.asarray(r1, dtype=np.float64)
    v = np.asarray(values, dtype=np.complex128)
    if r.size < 2 or r.shape != v.shape:
        raise GridMismatchError("line samples and positions must be 1D arrays of equal length >= 2")
    steps = np.diff(r)
    step = float(steps.mean())
    if not np.allclose(steps, step, rtol=1e-9, atol=0.0):
        raise GridMismatchError("line samples must be uniformly spaced")
    window = windows.tukey(r.size, alpha=taper, sym=True) if taper > 0 else np.ones(r.size)
    kernel = np.exp(-1j * np.outer(np.asarray(k, dtype=np.float64), r))
    return np.asarray(kernel @ (window * v)) * step / math.sqrt(2 * math.pi)


def fdt_check(
    img: ComplexImage,
    b: BeamProfile,
    ctx: WaveContext,
    r_m: float,
    line_extent: float,
    samples: int,
    *,
    d: int = DEFAULT_D,
    m: int = 128,
    band: float = 0.8,
    taper: float = 0.5,
) -> FdtReport:
    """Compare the line transform of the Born field on ``r2 = r_M`` with the diffraction relation.

    The right-hand side is ``sqrt(pi/2) i exp(i kappa r_M) / kappa * (2pi/D) sum_phi a(phi) Ff(h(k) - k0 s(phi))``.
    Both sides use the same angular quadrature on ``S_D``; the discrepancy is the relative L2 error
    over ``|k| <= band * k0`` of the k-grid of size ``m``.
    """
    if r_m <= img.grid.r_s:
        raise SupportError(f"detector line r_M={r_m} must lie outside the support r_s={img.grid.r_s}")
    if line_extent < 4 * img.grid.r_s:
        log.warning(
            "Line extent %.3g < 4 r_s = %.3g; truncation of the line will dominate the discrepancy",
            line_extent,
            4 * img.grid.r_s,
        )

    pts = line_points(r_m, line_extent, samples)
    field_on_line = born_field_direct(img, b, pts, ctx, d)

    k_all = ctx.k_grid(m)
    k = k_all[np.abs(k_all) <= band * ctx.k0]
    lhs = line_fourier_transform(pts[:, 0], field_on_line, k, taper=taper)

    phi = angle_grid(d)
    weights = b.evaluate(phi) * (2 * math.pi / d)
    spectrum = ndft2(img, map_t(k[:, None], phi[None, :], ctx))
    kap = kappa(k, ctx)
    rhs = math.sqrt(math.pi / 2) * 1j * np.exp(1j * kap * r_m) / kap * (spectrum @ weights)

    norm_rhs = float(np.linalg.norm(rhs))
    norm_diff = float(np.linalg.norm(lhs - rhs))
    if norm_rhs == 0.0:
        error = 0.0 if norm_diff == 0.0 else math.inf
    else:
        error = norm_diff / norm_rhs
    log.info("FDT check: relative discrepancy %.4g over %d frequencies (extent %.3g)", error, k.size, line_extent)
    return FdtReport(k=k, lhs=lhs, rhs=rhs, relative_error=error, line_extent=line_extent, samples=samples)
