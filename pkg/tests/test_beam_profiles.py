from __future__ import annotations

import logging
import math
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import integrate

from src.beam_profiles import (
    AngularCoefficients,
    BeamSettings,
    GaussianProfile,
    TabulatedProfile,
    UniformArcProfile,
    angular_coefficients,
    angular_spectrum,
    combine_profiles,
    incident_field,
    load_tabulated_csv,
    plane_wave_profile,
    profile_eval,
    rotate_profile,
    save_tabulated_csv,
)
from src.errors import DomainError, FileFormatError
from src.kspace_geometry import WaveContext, angle_grid


def _quad_coefficient(a: float, n: int) -> complex:
    """(1/2pi) int over the lower half circle of exp(-A cos^2) exp(-i n phi)."""

    def real(phi: float) -> float:
        return math.exp(-a * math.cos(phi) ** 2) * math.cos(n * phi)

    def imag(phi: float) -> float:
        return -math.exp(-a * math.cos(phi) ** 2) * math.sin(n * phi)

    re, _ = integrate.quad(real, -math.pi, 0.0, limit=200, epsabs=1e-14, epsrel=1e-13)
    im, _ = integrate.quad(imag, -math.pi, 0.0, limit=200, epsabs=1e-14, epsrel=1e-13)
    return complex(re, im) / (2 * math.pi)


def test_gaussian_values_in_downward_frame() -> None:
    """It should peak at -pi/2, vanish on the upper half and halve on the boundary."""
    b = GaussianProfile(a=10.0)
    values = profile_eval(b, [-math.pi / 2, math.pi / 2, 0.0, -math.pi])
    assert values[0] == pytest.approx(1.0)
    assert values[1] == 0
    assert values[2] == pytest.approx(0.5 * math.exp(-10.0))
    assert values[3] == pytest.approx(0.5 * math.exp(-10.0))


def test_gaussian_rejects_nonpositive_width() -> None:
    """It should reject A <= 0."""
    with pytest.raises(ValidationError):
        GaussianProfile(a=0.0)


def test_orientation_rotates_the_beam() -> None:
    """It should move the peak to the nominal direction."""
    upward = GaussianProfile(a=10.0, orientation=math.pi / 2)
    assert profile_eval(upward, math.pi / 2)[()] == pytest.approx(1.0)
    assert profile_eval(upward, -math.pi / 2)[()] == 0


@pytest.mark.parametrize(("a", "tol"), [(10.0, 1e-10), (80.0, 1e-12)])
def test_gaussian_coefficients_match_quadrature(a: float, tol: float) -> None:
    """It should match adaptive quadrature of the defining integral on a fine grid."""
    coeffs = angular_coefficients(GaussianProfile(a=a), 10, 4096)
    for n in range(-10, 11):
        assert abs(coeffs[n] - _quad_coefficient(a, n)) < tol, n


def test_real_profile_has_hermitian_coefficients(gaussian10: GaussianProfile) -> None:
    """It should satisfy a_{-n} = conj(a_n) for a real profile."""
    coeffs = angular_coefficients(gaussian10, 20, 200)
    assert np.allclose(coeffs.values[::-1], np.conj(coeffs.values), atol=1e-15)


def test_coefficients_are_linear(gaussian10: GaussianProfile, gaussian80: GaussianProfile) -> None:
    """It should map linear combinations of profiles to linear combinations of coefficients."""
    combined = combine_profiles([(2.0, gaussian10), (1j, gaussian80)])
    c = angular_coefficients(combined, 12, 200).values
    a10 = angular_coefficients(gaussian10, 12, 200).values
    a80 = angular_coefficients(gaussian80, 12, 200).values
    expected = 2.0 * a10 + 1j * a80
    assert np.allclose(c, expected, atol=1e-14)


def test_rotation_multiplies_coefficients_by_phase(gaussian10: GaussianProfile) -> None:
    """It should turn b(phi - theta) into a_n exp(-i n theta)."""
    d = 200
    theta = 2 * math.pi * 7 / d
    base = angular_coefficients(gaussian10, 15, d)
    rotated = angular_coefficients(rotate_profile(gaussian10, theta), 15, d)
    assert np.allclose(rotated.values, base.values * np.exp(-1j * base.indices * theta), atol=1e-12)


@pytest.mark.parametrize(("a", "tol"), [(10.0, 1e-6), (80.0, 1e-12)])
def test_rotation_phase_at_off_grid_angles(a: float, tol: float, rng: np.random.Generator) -> None:
    """It should keep the shift law when theta falls between the quadrature nodes."""
    d = 400
    base = angular_coefficients(GaussianProfile(a=a), 15, d)
    for theta in rng.uniform(-math.pi, math.pi, 5):
        rotated = angular_coefficients(rotate_profile(GaussianProfile(a=a), theta), 15, d)
        assert np.allclose(rotated.values, base.values * np.exp(-1j * base.indices * theta), rtol=0, atol=tol)


def test_rotation_by_pi_turns_the_beam_upward(gaussian10: GaussianProfile) -> None:
    """It should move the support from the lower to the upper half circle."""
    upward = rotate_profile(gaussian10, math.pi)
    phi = angle_grid(64)
    lower, upper = (phi > -math.pi) & (phi < 0), phi > 0
    assert np.all(profile_eval(upward, phi[lower]) == 0)
    assert np.all(np.abs(profile_eval(upward, phi[upper])) > 0)
    assert np.allclose(profile_eval(upward, phi[upper]), profile_eval(gaussian10, phi[upper] - math.pi))
    assert profile_eval(upward, math.pi / 2)[()] == pytest.approx(1.0)


def test_wide_gaussian_coefficients_decay_slower(gaussian10: GaussianProfile, gaussian80: GaussianProfile) -> None:
    """It should let A = 80 overtake A = 10 past the crossover index and decay slower from there on."""
    a10 = np.abs(angular_coefficients(gaussian10, 16, 200).values[16:])
    a80 = np.abs(angular_coefficients(gaussian80, 16, 200).values[16:])
    assert a10[0] > a80[0]
    crossover = int(np.argmax(a80 > a10))
    assert 0 < crossover <= 10
    assert np.all(a80[crossover:] > a10[crossover:])
    assert np.all(a80[crossover + 1 :] / a80[crossover:-1] > a10[crossover + 1 :] / a10[crossover:-1])


def test_angular_coefficients_require_fine_grid(gaussian10: GaussianProfile) -> None:
    """It should refuse D < 4N + 4."""
    with pytest.raises(DomainError, match="too coarse"):
        angular_coefficients(gaussian10, 12, 50)
    assert angular_coefficients(gaussian10, 12, 52).n_max == 12


def test_angular_coefficients_indexing() -> None:
    """It should index by n and reject indices outside the band."""
    coeffs = AngularCoefficients(n_max=1, values=np.array([1.0, 2.0, 3.0]))
    assert coeffs[-1] == 1.0
    assert coeffs[1] == 3.0
    assert list(coeffs.indices) == [-1, 0, 1]
    with pytest.raises(IndexError):
        coeffs[2]
    with pytest.raises(ValueError, match="expected 3"):
        AngularCoefficients(n_max=1, values=np.zeros(4))


def test_angular_spectrum_parseval(rng: np.random.Generator) -> None:
    """It should preserve energy: sum |c_n|^2 = mean |v|^2."""
    v = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    c = angular_spectrum(v)
    assert np.sum(np.abs(c) ** 2) == pytest.approx(np.mean(np.abs(v) ** 2), rel=1e-12)


def test_angular_spectrum_of_single_harmonic() -> None:
    """It should put a single harmonic exp(i 3 phi) at n = 3."""
    d = 32
    c = angular_spectrum(np.exp(3j * angle_grid(d)))
    expected = np.zeros(d, dtype=complex)
    expected[d // 2 + 3] = 1.0
    assert np.allclose(c, expected, atol=1e-14)


def test_uniform_full_circle_has_only_mean() -> None:
    """It should have a_0 = amplitude and no other coefficient."""
    coeffs = angular_coefficients(UniformArcProfile(amplitude=2.0 - 1.0j), 5, 64)
    assert coeffs[0] == pytest.approx(2.0 - 1.0j)
    assert np.allclose(np.delete(coeffs.values, 5), 0.0, atol=1e-14)


def test_uniform_arc_rejects_empty_arc() -> None:
    """It should require phi_hi > phi_lo."""
    with pytest.raises(ValidationError, match="phi_hi"):
        UniformArcProfile(phi_lo=0.5, phi_hi=0.5)


def test_tabulated_profile_is_exact_at_nodes() -> None:
    """It should return the stored samples at the grid nodes."""
    values = tuple(complex(j, -j) for j in range(8))
    profile = TabulatedProfile(values=values)
    assert np.allclose(profile_eval(profile, angle_grid(8)), values)


def test_tabulated_profile_interpolates_trigonometric_polynomials(rng: np.random.Generator) -> None:
    """It should reproduce band-limited profiles between the nodes."""

    def func(phi: np.ndarray) -> np.ndarray:
        return np.cos(3 * phi) + 1j * np.sin(2 * phi) + 0.5

    d = 16
    profile = TabulatedProfile(values=tuple(func(angle_grid(d))))
    phi = rng.uniform(-math.pi, math.pi, 50)
    assert np.allclose(profile_eval(profile, phi), func(phi), atol=1e-12)


def test_tabulated_profile_requires_even_length() -> None:
    """It should reject an odd number of samples."""
    with pytest.raises(ValidationError, match="even"):
        TabulatedProfile(values=(1.0, 2.0, 3.0))


def test_tabulated_csv_round_trip(tmp_path: Path) -> None:
    """It should save and load the same samples and start angle."""
    profile = TabulatedProfile(values=tuple(complex(math.cos(j), math.sin(j)) for j in range(12)))
    path = save_tabulated_csv(profile, tmp_path / "beam.csv")
    assert path.read_text(encoding="utf-8").startswith("phi,re,im")
    loaded = load_tabulated_csv(path)
    assert loaded.d == 12
    assert loaded.phi0 == pytest.approx(-math.pi)
    assert np.allclose(loaded.values, profile.values, atol=1e-15)


def test_tabulated_csv_without_header(tmp_path: Path) -> None:
    """It should accept a table without a header row."""
    phi = angle_grid(4)
    path = tmp_path / "beam.csv"
    path.write_text("\n".join(f"{float(p)!r},1.0,0.0" for p in phi), encoding="utf-8")
    assert load_tabulated_csv(path).d == 4


def test_tabulated_csv_rejects_bad_spacing(tmp_path: Path) -> None:
    """It should require the spacing 2 pi / D."""
    path = tmp_path / "beam.csv"
    path.write_text("phi,re,im\n0.0,1,0\n0.1,1,0\n0.2,1,0\n0.3,1,0\n", encoding="utf-8")
    with pytest.raises(FileFormatError, match="spacing"):
        load_tabulated_csv(path)


def test_tabulated_csv_missing_file(tmp_path: Path, caplog: pytest.LogCaptureFixture) -> None:
    """It should raise FileFormatError and log when the table cannot be read."""
    with caplog.at_level(logging.ERROR), pytest.raises(FileFormatError):
        load_tabulated_csv(tmp_path / "missing.csv")
    assert "Failed to read profile table" in caplog.text


def test_plane_wave_profile_on_node(caplog: pytest.LogCaptureFixture) -> None:
    """It should put weight D / 2pi on the node of the direction without warning."""
    with caplog.at_level(logging.WARNING):
        profile = plane_wave_profile(-math.pi / 2, 8)
    assert caplog.text == ""
    values = profile_eval(profile, angle_grid(8))
    assert values[2] == pytest.approx(8 / (2 * math.pi))
    assert np.count_nonzero(values) == 1


def test_plane_wave_profile_snaps_off_node(caplog: pytest.LogCaptureFixture) -> None:
    """It should warn when the direction is not a grid node."""
    with caplog.at_level(logging.WARNING):
        profile = plane_wave_profile(0.1, 8)
    assert "snapped" in caplog.text
    assert profile.orientation == pytest.approx(0.0)
    values = profile_eval(profile, angle_grid(8))
    assert values[4] == pytest.approx(8 / (2 * math.pi))
    assert np.count_nonzero(np.abs(values) > 1e-9) == 1


def test_incident_field_of_plane_wave(ctx: WaveContext, rng: np.random.Generator) -> None:
    """It should reduce to exp(i k0 r.s) for the plane-wave stand-in."""
    pts = rng.uniform(-3, 3, (20, 2))
    u = incident_field(plane_wave_profile(-math.pi / 2, 64), pts, ctx, 64)
    assert np.allclose(u, np.exp(-1j * ctx.k0 * pts[:, 1]), atol=1e-12)


def test_incident_field_solves_helmholtz(ctx: WaveContext, gaussian10: GaussianProfile) -> None:
    """It should satisfy Laplace(u) + k0^2 u = 0 up to finite-difference error."""
    h = 1e-3
    centres = np.array([[0.0, 0.0], [1.0, -0.5], [-1.5, 1.2]])
    offsets = np.array([[0, 0], [h, 0], [-h, 0], [0, h], [0, -h]])
    pts = centres[:, None, :] + offsets[None, :, :]
    u = incident_field(gaussian10, pts, ctx, 200)
    laplacian = (u[:, 1] + u[:, 2] + u[:, 3] + u[:, 4] - 4 * u[:, 0]) / h**2
    residual = np.abs(laplacian + ctx.k0**2 * u[:, 0])
    assert np.all(residual <= 1e-4 * ctx.k0**2 * np.max(np.abs(u[:, 0])))


def test_narrow_profile_gives_tighter_focus(ctx: WaveContext) -> None:
    """It should focus A = 10 to a narrower spot across the beam axis than A = 80."""
    r1 = np.linspace(-4.0, 4.0, 801)
    across = np.column_stack([r1, np.zeros_like(r1)])

    def half_max_width(a: float) -> float:
        u = np.abs(incident_field(GaussianProfile(a=a), across, ctx, 200))
        assert int(np.argmax(u)) == 400
        return float(np.count_nonzero(u >= 0.5 * u.max()) * (r1[1] - r1[0]))

    assert half_max_width(10.0) < 0.6 * half_max_width(80.0)


def test_beam_settings_build() -> None:
    """It should resolve each beam family to a profile on the requested grid."""
    assert isinstance(BeamSettings(kind="gaussian", a=80).build(200), GaussianProfile)
    plane = BeamSettings(kind="planewave").build(40)
    assert isinstance(plane, TabulatedProfile)
    assert plane.d == 40
    assert BeamSettings(a=80).describe() == "gaussian A=80"


def test_beam_settings_table_needs_path() -> None:
    """It should require a path for kind='table'."""
    with pytest.raises(ValidationError, match="table path"):
        BeamSettings(kind="table")
