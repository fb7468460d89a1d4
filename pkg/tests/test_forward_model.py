from __future__ import annotations

import logging
import math

import numpy as np
import pytest
from scipy import special

from src.beam_profiles import BeamProfile, BeamSettings, GaussianProfile, combine_profiles, plane_wave_profile
from src.config import SimulationConfig
from src.errors import DomainError, GridMismatchError, SingularityError, SupportError
from src.forward_model import (
    KSpaceSamples,
    MeasurementSet,
    add_noise,
    born_field_direct,
    fdt_check,
    hankel_h0_1,
    line_fourier_transform,
    line_points,
    ndft2,
    simulate,
    simulate_from_disks,
    simulate_measurements,
)
from src.kspace_geometry import WaveContext
from src.phantoms import ComplexImage, DiskSpec, ObjectGrid, disk_phantom


@pytest.fixture()
def random_image(rng: np.random.Generator) -> ComplexImage:
    """Complex image on a coarse grid with a few zero rows."""
    grid = ObjectGrid(m=8, r_s=2.0)
    values = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    values[0] = 0
    values[:, 5] = 0
    return ComplexImage(grid=grid, values=values)


def _brute_ndft(img: ComplexImage, y: np.ndarray) -> np.ndarray:
    r1, r2 = img.grid.points()
    phase = np.exp(-1j * (np.multiply.outer(y[..., 0], r1) + np.multiply.outer(y[..., 1], r2)))
    return (phase * img.values).sum(axis=(-2, -1)) * img.grid.pixel_area / (2 * math.pi)


def test_ndft2_matches_direct_sum(random_image: ComplexImage, rng: np.random.Generator) -> None:
    """It should equal the plain double sum at arbitrary targets."""
    y = rng.uniform(-12, 12, (7, 3, 2))
    assert np.allclose(ndft2(random_image, y), _brute_ndft(random_image, y), rtol=1e-12, atol=1e-13)


def test_ndft2_of_zero_image(small_grid: ObjectGrid) -> None:
    """It should return zeros with the target shape."""
    out = ndft2(ComplexImage.zeros(small_grid), np.ones((4, 5, 2)))
    assert out.shape == (4, 5)
    assert not out.any()


def test_ndft2_hermitian_for_real_images(small_disk: ComplexImage, rng: np.random.Generator) -> None:
    """It should satisfy Ff(-y) = conj(Ff(y)) for real f."""
    y = rng.uniform(-4 * math.pi, 4 * math.pi, (200, 2))
    forward = ndft2(small_disk, y)
    assert np.allclose(ndft2(small_disk, -y), np.conj(forward), rtol=0, atol=1e-12 * np.abs(forward).max())


def test_ndft2_at_origin_is_mass(small_disk: ComplexImage) -> None:
    """It should give h^2 sum f / 2pi at y = 0."""
    expected = small_disk.values.sum() * small_disk.grid.pixel_area / (2 * math.pi)
    assert complex(ndft2(small_disk, np.zeros(2))) == pytest.approx(expected)


@pytest.mark.parametrize("oversample", [1, 2])
def test_fft_and_direct_simulation_agree(
    small_disk: ComplexImage, gaussian10: GaussianProfile, ctx: WaveContext, oversample: int
) -> None:
    """It should give the same data with the cyclic correlation and the explicit double sum."""
    fast = simulate_measurements(small_disk, gaussian10, 32, 16, ctx, 5.0, angular_oversample=oversample)
    slow = simulate_measurements(
        small_disk, gaussian10, 32, 16, ctx, 5.0, angular_oversample=oversample, method="direct"
    )
    assert fast.values.shape == (31, 16)
    assert np.allclose(fast.values, slow.values, rtol=1e-10, atol=1e-12 * np.abs(slow.values).max())


def test_simulation_is_linear_in_object(
    small_grid: ObjectGrid, gaussian10: GaussianProfile, ctx: WaveContext, rng: np.random.Generator
) -> None:
    """It should map c1 f1 + c2 f2 to c1 m1 + c2 m2."""
    f1 = disk_phantom(small_grid, 2.0)
    f2 = ComplexImage(grid=small_grid, values=rng.standard_normal((32, 32)) * (np.abs(f1.values) > 0))
    combo = ComplexImage(grid=small_grid, values=2.0 * f1.values - 0.5j * f2.values)

    def sim(img: ComplexImage) -> np.ndarray:
        return simulate_measurements(img, gaussian10, 16, 8, ctx, 5.0).values

    expected = 2.0 * sim(f1) - 0.5j * sim(f2)
    assert np.allclose(sim(combo), expected, rtol=0, atol=1e-12 * np.abs(expected).max())


def test_simulation_is_linear_in_beam(
    small_disk: ComplexImage, gaussian10: GaussianProfile, gaussian80: GaussianProfile, ctx: WaveContext
) -> None:
    """It should map a linear combination of beams to the same combination of data."""
    combined = combine_profiles([(1.5, gaussian10), (-2j, gaussian80)])

    def sim(b: BeamProfile) -> np.ndarray:
        return simulate_measurements(small_disk, b, 16, 8, ctx, 5.0).values

    expected = 1.5 * sim(gaussian10) - 2j * sim(gaussian80)
    assert np.allclose(sim(combined), expected, rtol=0, atol=1e-12 * np.abs(expected).max())


def test_simulation_rejects_line_inside_support(small_disk: ComplexImage, gaussian10: GaussianProfile) -> None:
    """It should require r_M > r_s."""
    with pytest.raises(SupportError):
        simulate_measurements(small_disk, gaussian10, 16, 8, WaveContext(), 4.0)


def test_simulation_rejects_odd_sizes(small_disk: ComplexImage, gaussian10: GaussianProfile) -> None:
    """It should require even M and D."""
    with pytest.raises(GridMismatchError):
        simulate_measurements(small_disk, gaussian10, 15, 8, WaveContext(), 5.0)


def test_plane_wave_and_gaussian_data_differ(ctx: WaveContext) -> None:
    """It should produce clearly different rows at theta = 0 for a wide beam and a plane wave."""
    img = disk_phantom(ObjectGrid(m=64, r_s=4.0), 3.0)
    d = 64
    plane = simulate_measurements(img, plane_wave_profile(-math.pi / 2, d), 64, d, ctx, 5.0)
    beam = simulate_measurements(img, GaussianProfile(a=10.0), 64, d, ctx, 5.0)
    row_plane, row_beam = plane.values[:, d // 2], beam.values[:, d // 2]
    assert np.linalg.norm(row_plane - row_beam) / np.linalg.norm(row_plane) > 0.25


def test_simulate_warns_about_shared_grid(small_disk: ComplexImage, caplog: pytest.LogCaptureFixture) -> None:
    """It should warn when the phantom grid equals the measurement lattice."""
    cfg = SimulationConfig(m=32, d=8, angular_oversample=1)
    with caplog.at_level(logging.WARNING):
        ms = simulate(small_disk, BeamSettings(a=10), cfg)
    assert "inverse crime" in caplog.text
    assert ms.d == 8


def test_simulate_from_disks_uses_refined_grid(caplog: pytest.LogCaptureFixture) -> None:
    """It should rasterise on a finer grid and keep the measurement lattice."""
    cfg = SimulationConfig(m=16, d=8, oversample=2, angular_oversample=2, noise_percent=1.0, seed=3)
    with caplog.at_level(logging.WARNING):
        ms = simulate_from_disks([DiskSpec(radius=2.0)], 4.0, BeamSettings(kind="planewave"), cfg)
    assert "inverse crime" not in caplog.text
    assert (ms.m, ms.d, ms.m_k) == (16, 8, 15)


def test_noise_has_exact_relative_norm(small_disk: ComplexImage, gaussian10: GaussianProfile) -> None:
    """It should scale the perturbation to exactly percent / 100 of the data norm."""
    ms = simulate_measurements(small_disk, gaussian10, 16, 8, WaveContext(), 5.0)
    noisy = add_noise(ms, 5.0, 42)
    ratio = np.linalg.norm(noisy.values - ms.values) / np.linalg.norm(ms.values)
    assert ratio == pytest.approx(0.05, rel=1e-12)


def test_noise_is_deterministic(small_disk: ComplexImage, gaussian10: GaussianProfile) -> None:
    """It should depend only on the seed."""
    ms = simulate_measurements(small_disk, gaussian10, 16, 8, WaveContext(), 5.0)
    assert np.array_equal(add_noise(ms, 5.0, 7).values, add_noise(ms, 5.0, 7).values)
    assert not np.array_equal(add_noise(ms, 5.0, 7).values, add_noise(ms, 5.0, 8).values)


def test_zero_noise_returns_copy(small_disk: ComplexImage, gaussian10: GaussianProfile) -> None:
    """It should leave the data unchanged at 0 %."""
    ms = simulate_measurements(small_disk, gaussian10, 16, 8, WaveContext(), 5.0)
    out = add_noise(ms, 0.0, 1)
    assert out is not ms
    assert np.array_equal(out.values, ms.values)


def test_noise_on_zero_data(caplog: pytest.LogCaptureFixture) -> None:
    """It should warn and return zeros when the data vanish."""
    ctx = WaveContext()
    ms = MeasurementSet(m=8, d=4, k0=ctx.k0, r_m=5.0, eps_k=ctx.eps_k, values=np.zeros((7, 4)))
    with caplog.at_level(logging.WARNING):
        out = add_noise(ms, 5.0, 1)
    assert not out.values.any()
    assert "all-zero" in caplog.text


def test_negative_noise_rejected(small_disk: ComplexImage, gaussian10: GaussianProfile) -> None:
    """It should reject a negative noise level."""
    ms = simulate_measurements(small_disk, gaussian10, 16, 8, WaveContext(), 5.0)
    with pytest.raises(DomainError):
        add_noise(ms, -1.0, 0)


def test_measurement_set_checks_lattice() -> None:
    """It should reject values whose shape does not match the clamped k-grid."""
    with pytest.raises(GridMismatchError, match="lattice"):
        MeasurementSet(m=8, d=4, k0=2 * math.pi, r_m=5.0, eps_k=1e-3, values=np.zeros((8, 4)))


def test_kspace_samples_add_requires_same_lattice() -> None:
    """It should add samples on one lattice and refuse mixed lattices."""
    a = KSpaceSamples(m=8, d=4, k0=2 * math.pi, eps_k=1e-3, values=np.ones((7, 4)))
    b = KSpaceSamples(m=8, d=6, k0=2 * math.pi, eps_k=1e-3, values=np.ones((7, 6)))
    assert np.array_equal((a + a).values, 2 * np.ones((7, 4)))
    with pytest.raises(GridMismatchError):
        a + b


def test_hankel_known_value() -> None:
    """It should return J0(1) + i Y0(1)."""
    assert complex(hankel_h0_1(1.0)) == pytest.approx(0.7651976865579666 + 0.08825696421567696j, rel=1e-14)


def test_hankel_large_argument_asymptotics() -> None:
    """It should approach sqrt(2 / (pi x)) exp(i (x - pi/4))."""
    x = np.array([200.0, 500.0, 1000.0])
    asymptotic = np.sqrt(2 / (math.pi * x)) * np.exp(1j * (x - math.pi / 4))
    rel = np.abs(hankel_h0_1(x) - asymptotic) / np.abs(asymptotic)
    assert np.all(rel < 1 / x)


def test_hankel_wronskian() -> None:
    """It should satisfy J1 Y0 - J0 Y1 = 2 / (pi x)."""
    x = np.linspace(0.1, 50, 300)
    h0 = hankel_h0_1(x)
    wronskian = special.j1(x) * h0.imag - h0.real * special.y1(x)
    assert np.allclose(wronskian, 2 / (math.pi * x), rtol=1e-10)


@pytest.mark.parametrize("x", [0.0, -1.0])
def test_hankel_rejects_nonpositive(x: float) -> None:
    """It should raise DomainError for x <= 0."""
    with pytest.raises(DomainError):
        hankel_h0_1(x)


def test_born_field_of_single_pixel(small_grid: ObjectGrid, ctx: WaveContext) -> None:
    """It should equal h^2 (i/4) H0(k0 |r|) for a unit pixel lit by a unit plane wave."""
    values = np.zeros((32, 32), dtype=complex)
    values[16, 16] = 1.0
    img = ComplexImage(grid=small_grid, values=values)
    u = born_field_direct(img, plane_wave_profile(-math.pi / 2, 64), np.array([[0.0, 3.0], [2.0, -1.0]]), ctx, 64)
    dist = np.array([3.0, math.sqrt(5.0)])
    expected = small_grid.pixel_area * 0.25j * special.hankel1(0, ctx.k0 * dist)
    assert np.allclose(u, expected, rtol=1e-12)


def test_born_field_rejects_point_on_source(small_disk: ComplexImage, gaussian10: GaussianProfile) -> None:
    """It should raise SingularityError on a pixel with f != 0."""
    with pytest.raises(SingularityError):
        born_field_direct(small_disk, gaussian10, np.array([[0.0, 0.0]]), WaveContext(), 32)


def test_born_field_solves_helmholtz_off_support(ctx: WaveContext, gaussian10: GaussianProfile) -> None:
    """It should satisfy (Laplace + k0^2) u = -f u_inc = 0 where f vanishes, up to stencil error."""
    img = disk_phantom(ObjectGrid(m=16, r_s=1.0), 0.5, 0.05)
    h = 1e-3
    centres = np.array([[0.0, 3.0], [1.5, -1.2], [-2.0, 0.4], [0.0, 5.0]])
    offsets = np.array([[0, 0], [h, 0], [-h, 0], [0, h], [0, -h]])
    u = born_field_direct(img, gaussian10, centres[:, None, :] + offsets[None, :, :], ctx, 64)
    laplacian = (u[:, 1] + u[:, 2] + u[:, 3] + u[:, 4] - 4 * u[:, 0]) / h**2
    residual = np.abs(laplacian + ctx.k0**2 * u[:, 0])
    assert np.all(residual <= 1e-4 * ctx.k0**2 * np.abs(u[:, 0]))


def test_ndft2_of_disk_matches_airy_pattern(rng: np.random.Generator) -> None:
    """It should follow d J1(d |y|) / |y| for a disk of radius d up to |y| = 2 k0."""
    d = 1.0
    img = disk_phantom(ObjectGrid(m=400, r_s=2.0), d)
    radius = np.linspace(0.0, 4 * math.pi, 41)
    angle = rng.uniform(-math.pi, math.pi, radius.size)
    y = radius[:, None] * np.column_stack([np.cos(angle), np.sin(angle)])
    safe = np.where(radius > 0, radius, 1.0)
    exact = np.where(radius > 0, d * special.j1(d * safe) / safe, d**2 / 2)
    assert np.all(np.abs(ndft2(img, y) - exact) <= 0.02 * d**2 / 2)


def test_line_points_layout() -> None:
    """It should sample [-extent, extent) at height r2."""
    pts = line_points(5.0, 4.0, 8)
    assert pts.shape == (8, 2)
    assert pts[0, 0] == -4.0
    assert pts[4, 0] == 0.0
    assert np.all(pts[:, 1] == 5.0)


def test_line_transform_of_gaussian() -> None:
    """It should reproduce the unitary transform exp(-k^2 / 2) of exp(-r^2 / 2)."""
    r1 = line_points(0.0, 20.0, 2048)[:, 0]
    k = np.linspace(-3, 3, 13)
    out = line_fourier_transform(r1, np.exp(-(r1**2) / 2), k, taper=0.0)
    assert np.allclose(out, np.exp(-(k**2) / 2), atol=1e-12)


def test_line_transform_requires_uniform_samples() -> None:
    """It should refuse irregular positions."""
    with pytest.raises(GridMismatchError, match="uniformly"):
        line_fourier_transform(np.array([0.0, 1.0, 3.0]), np.ones(3), np.zeros(1))


def test_fdt_check_small_disk(ctx: WaveContext, gaussian10: GaussianProfile) -> None:
    """It should match both sides of the diffraction relation within 5 %."""
    img = disk_phantom(ObjectGrid(m=64, r_s=2.0), 1.0, 0.05)
    report = fdt_check(img, gaussian10, ctx, 5.0, 40.0, 2048)
    assert report.relative_error <= 0.05
    assert np.all(np.abs(report.k) <= 0.8 * ctx.k0)
    assert report.lhs.shape == report.rhs.shape == report.k.shape


def test_fdt_check_warns_on_short_line(
    ctx: WaveContext, gaussian10: GaussianProfile, caplog: pytest.LogCaptureFixture
) -> None:
    """It should warn when the line is shorter than 4 r_s."""
    img = disk_phantom(ObjectGrid(m=16, r_s=2.0), 1.0, 0.05)
    with caplog.at_level(logging.WARNING):
        fdt_check(img, gaussian10, ctx, 5.0, 6.0, 64, d=32, m=16)
    assert "truncation" in caplog.text
