"""Image quality metrics for complex reconstructions.

PSNR and RMSE use the complex modulus of the difference; SSIM works on real parts with a
Gaussian window (sigma 1.5, 11x11 support), ``K1 = 0.01``, ``K2 = 0.03`` and the dynamic range
of the reference image ``u``.
"""

import logging
import math
from dataclasses import dataclass
from typing import Final

import numpy as np
from skimage.metrics import structural_similarity

from src.errors import DomainError
from src.phantoms import ComplexImage

log = logging.getLogger(__name__)

SSIM_SIGMA: Final = 1.5
SSIM_WINDOW: Final = 11


@dataclass(frozen=True)
class MetricReport:
    psnr: float
    rmse: float
    ssim: float

    def as_row(self) -> tuple[float, float, float]:
        return (self.psnr, self.rmse, self.ssim)


def _mean_square(u: ComplexImage, v: ComplexImage) -> float:
    u.require_same_grid(v)
    return float(np.mean(np.abs(u.values - v.values) ** 2))


def psnr(u: ComplexImage, v: ComplexImage) -> float:
    """``10 log10(max|u|^2 / mean|u - v|^2)`` with ``u`` the reference; ``inf`` when ``u == v``.

    Raises
    ------
    GridMismatchError
        If the images live on different grids.
    """
    mse = _mean_square(u, v)
    peak = float(np.max(np.abs(u.values)) ** 2)
    if mse == 0.0:
        return math.inf
    if peak == 0.0:
        return -math.inf
    return 10.0 * math.log10(peak / mse)


def rmse(u: ComplexImage, v: ComplexImage) -> float:
    return math.sqrt(_mean_square(u, v))


def ssim(u: ComplexImage, v: ComplexImage) -> float:
    """Mean structural similarity of the real parts.

    Raises
    ------
    GridMismatchError
        If the images live on different grids.
    DomainError
        If the grid is smaller than the 11x11 window.
    """
    u.require_same_grid(v)
    if u.grid.m < SSIM_WINDOW:
        raise DomainError(f"SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got M={u.grid.m}")
    ref = np.ascontiguousarray(u.values.real)
    data_range = float(ref.max() - ref.min())
    if data_range == 0.0:
        log.debug("Reference image is constant; SSIM uses unit dynamic range")
        data_range = 1.0
    return float(
        structural_similarity(
            ref,
            np.ascontiguousarray(v.values.real),
            data_range=data_range,
            gaussian_weights=True,
            sigma=SSIM_SIGMA,
            use_sample_covariance=False,
        )
    )


def compare(u: ComplexImage, v: ComplexImage) -> MetricReport:
    report = MetricReport(psnr=psnr(u, v), rmse=rmse(u, v), ssim=ssim(u, v))
    log.info("PSNR %.2f dB, RMSE %.4g, SSIM %.4f", report.psnr, report.rmse, report.ssim)
    return report
