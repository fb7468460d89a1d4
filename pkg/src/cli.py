"""Command-line front end ``beamdt``.

Every command writes its artefact (BDTG, BDTM, CSV or PDF) and prints a one-line summary.
Exit status: 0 when the output was written, 2 for invalid input, 1 for runtime failures.
"""

import argparse
import logging
import sys
from collections.abc import Callable, Sequence
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from src.beam_profiles import BeamSettings, angular_coefficients, incident_field
from src.config import (
    ASSETS_PATH,
    DEFAULT_D,
    DEFAULT_EPS_K,
    DEFAULT_K0,
    DEFAULT_M,
    DEFAULT_MIN_SINGULAR,
    DEFAULT_ORIENTATION,
    DEFAULT_OVERSAMPLE,
    DEFAULT_R_M,
    DEFAULT_R_S,
    DEFAULT_TRUNCATION,
    RuntimeSettings,
    SimulationConfig,
)
from src.errors import BeamDTError
from src.fileio import (
    AcquisitionInfo,
    read_grid,
    read_measurements,
    read_sidecar,
    write_compare_csv,
    write_fdt_csv,
    write_grid,
    write_line_csv,
    write_measurements,
    write_picard_csv,
    write_sidecar,
)
from src.forward_model import add_noise, born_field_direct, fdt_check, line_points, simulate, simulate_from_disks
from src.inversion import TsvdConfig, picard_table, reconstruct
from src.kspace_geometry import WaveContext
from src.metrics import compare
from src.parallel import set_threads
from src.phantoms import (
    TWO_INCLUSION_PRESET,
    ComplexImage,
    DiskSpec,
    ObjectGrid,
    disk_phantom,
    load_disk_specs_csv,
    two_inclusion_phantom,
)
from src.report import (
    ReportConfig,
    ReportSection,
    acquisition_section,
    build_report,
    fdt_section,
    metrics_section,
    picard_section,
)

log = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

Handler = Callable[[argparse.Namespace], str]


def _beam_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("beam")
    group.add_argument("--beam", choices=["gaussian", "planewave", "table"], default="gaussian")
    group.add_argument("--A", dest="a", type=float, default=10.0, help="Gaussian width parameter A")
    group.add_argument("--table", type=Path, help="phi,re,im CSV for --beam table")
    group.add_argument("--orientation", type=float, default=DEFAULT_ORIENTATION, help="propagation direction (rad)")
    return parent


def _wave_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("wave")
    group.add_argument("--k0", type=float, default=DEFAULT_K0, help="angular wavenumber (default 2*pi)")
    group.add_argument("--eps-k", type=float, default=DEFAULT_EPS_K, help="relative k-grid clamp")
    return parent


def _beam_settings(args: argparse.Namespace) -> BeamSettings:
    return BeamSettings(kind=args.beam, a=args.a, table=args.table, orientation=args.orientation)


def _preset_image(preset: str, grid: ObjectGrid, d: float, amplitude: float) -> ComplexImage:
    if preset == "disk":
        return disk_phantom(grid, d, amplitude)
    return two_inclusion_phantom(grid, TWO_INCLUSION_PRESET)


def _preset_disks(preset: str, d: float, amplitude: float) -> list[DiskSpec]:
    if preset == "disk":
        return [DiskSpec(radius=d, amplitude=amplitude)]
    return list(TWO_INCLUSION_PRESET)


def cmd_phantom(args: argparse.Namespace) -> str:
    grid = ObjectGrid(m=args.M, r_s=args.rs)
    if args.spec is not None:
        img = two_inclusion_phantom(grid, load_disk_specs_csv(args.spec))
    else:
        img = _preset_image(args.preset, grid, args.d, args.amplitude)
    write_grid(img, args.out)
    nonzero = int(np.count_nonzero(img.values))
    return f"phantom M={grid.m} r_s={grid.r_s:g} nonzero={nonzero} -> {args.out}"


def cmd_simulate(args: argparse.Namespace) -> str:
    cfg = SimulationConfig(
        m=args.M,
        d=args.D,
        k0=args.k0,
        r_m=args.rM,
        eps_k=args.eps_k,
        oversample=args.oversample,
        angular_oversample=args.angular_oversample,
        noise_percent=args.noise,
        seed=args.seed,
    )
    beam = _beam_settings(args)
    if args.phantom is not None:
        ms = simulate(read_grid(args.phantom), beam, cfg)
        source = str(args.phantom)
        oversample = 1
    else:
        ms = simulate_from_disks(_preset_disks(args.preset, args.d, args.amplitude), args.rs, beam, cfg)
        source = args.preset
        oversample = cfg.oversample
    write_measurements(ms, args.out)
    write_sidecar(
        AcquisitionInfo(
            beam=beam,
            noise_percent=cfg.noise_percent,
            seed=cfg.seed,
            oversample=oversample,
            angular_oversample=cfg.angular_oversample,
            phantom=source,
        ),
        args.out,
    )
    return f"measurements {ms.m_k}x{ms.d} ({beam.describe()}, noise {cfg.noise_percent:g}%) -> {args.out}"


def _warn_on_beam_mismatch(meas_path: Path, beam: BeamSettings) -> None:
    info = read_sidecar(meas_path)
    if info is None:
        log.debug("No acquisition sidecar for %s", meas_path)
        return
    if info.beam != beam:
        log.warning(
            "Reconstruction beam (%s) differs from the acquisition beam (%s)", beam.describe(), info.beam.describe()
        )


def cmd_reconstruct(args: argparse.Namespace) -> str:
    ms = read_measurements(args.meas)
    beam = _beam_settings(args)
    _warn_on_beam_mismatch(args.meas, beam)
    grid = ObjectGrid(m=args.M or ms.m, r_s=args.rs)
    cfg = TsvdConfig(truncation=args.N, min_singular=args.min_singular)
    image = reconstruct(ms, beam.build(ms.d), cfg, grid, conventional=args.conventional)
    write_grid(image, args.out)
    summary = f"reconstruction M={grid.m} N={cfg.truncation}{' (conventional)' if args.conventional else ''}"
    if args.truth is not None:
        report = compare(read_grid(args.truth), image)
        summary += f" psnr={report.psnr:.2f} rmse={report.rmse:.4g} ssim={report.ssim:.4f}"
    return f"{summary} -> {args.out}"


def cmd_picard(args: argparse.Namespace) -> str:
    ms = read_measurements(args.meas)
    if args.noise > 0:
        ms = add_noise(ms, args.noise, args.seed)
    beam = _beam_settings(args)
    k_index = int(np.argmin(np.abs(ms.k - args.k)))
    coeffs = angular_coefficients(beam.build(ms.d), args.N, ms.d)
    table = picard_table(ms, coeffs, k_index, args.N)
    write_picard_csv(table, args.out)
    return f"picard table at k={table.k:.6g} (N={args.N}) -> {args.out}"


def _disk_image(args: argparse.Namespace) -> ComplexImage:
    if args.phantom is not None:
        return read_grid(args.phantom)
    return disk_phantom(ObjectGrid(m=args.M, r_s=args.rs), args.d, args.amplitude)


def cmd_fdt_check(args: argparse.Namespace) -> str:
    img = _disk_image(args)
    ctx = WaveContext(k0=args.k0, eps_k=args.eps_k)
    profile = _beam_settings(args).build(args.D)
    report = fdt_check(img, profile, ctx, args.rM, args.extent, args.L, d=args.D, taper=args.taper)
    write_fdt_csv(report, args.out)
    return f"fdt discrepancy={report.relative_error:.6g} over {report.k.size} frequencies -> {args.out}"


def cmd_forward_direct(args: argparse.Namespace) -> str:
    img = _disk_image(args)
    ctx = WaveContext(k0=args.k0, eps_k=args.eps_k)
    profile = _beam_settings(args).build(args.D)
    pts = line_points(args.r2, args.extent, args.L)
    values = born_field_direct(img, profile, pts, ctx, args.D)
    write_line_csv(pts[:, 0], values, args.out)
    return f"born field on r2={args.r2:g} ({args.L} samples) -> {args.out}"


def cmd_compare(args: argparse.Namespace) -> str:
    report = compare(read_grid(args.truth), read_grid(args.recon))
    if args.out is not None:
        write_compare_csv(report, args.out)
    return f"{report.psnr!r},{report.rmse!r},{report.ssim!r}"


def cmd_beamview(args: argparse.Namespace) -> str:
    grid = ObjectGrid(m=args.M, r_s=args.extent)
    ctx = WaveContext(k0=args.k0, eps_k=args.eps_k)
    profile = _beam_settings(args).build(args.D)
    r1, r2 = grid.points()
    field = incident_field(profile, np.stack([r1, r2], axis=-1), ctx, args.D)
    write_grid(ComplexImage(grid=grid, values=field), args.out)
    centre = grid.m // 2
    return f"incident field |u(0)|={abs(field[centre, centre]):.6g} -> {args.out}"


def cmd_report(args: argparse.Namespace) -> str:
    ms = read_measurements(args.meas)
    sections: list[ReportSection] = [acquisition_section(ms, read_sidecar(args.meas))]
    if args.recon is not None and args.truth is not None:
        sections.append(metrics_section(compare(read_grid(args.truth), read_grid(args.recon))))
    if args.picard_k is not None:
        beam = _beam_settings(args)
        k_index = int(np.argmin(np.abs(ms.k - args.picard_k)))
        coeffs = angular_coefficients(beam.build(ms.d), args.N, ms.d)
        sections.append(picard_section(picard_table(ms, coeffs, k_index, args.N)))
    if args.fdt:
        disk = disk_phantom(ObjectGrid(m=64, r_s=2.0), 1.0, 0.05)
        profile = _beam_settings(args).build(ms.d)
        check = fdt_check(disk, profile, ms.ctx, ms.r_m, args.fdt_extent, args.fdt_samples, d=ms.d)
        sections.append(fdt_section(check))
    path = build_report(config=ReportConfig(output_path=args.out, title=args.title), sections=sections)
    return f"report with {len(sections)} section(s) -> {path}"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="beamdt", description="Beam diffraction tomography toolkit.")
    parser.add_argument("--threads", type=int, help="worker cap (overrides $BEAMDT_THREADS)")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="root log level")
    sub = parser.add_subparsers(dest="command", required=True)
    beam, wave = _beam_parent(), _wave_parent()

    p = sub.add_parser("phantom", help="rasterise a phantom to BDTG")
    p.add_argument("--preset", choices=["disk", "two-inclusion"], default="two-inclusion")
    p.add_argument("--spec", type=Path, help="c1,c2,radius,re,im CSV of disks (overrides --preset)")
    p.add_argument("--d", type=float, default=3.0, help="disk radius for --preset disk")
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--M", type=int, default=DEFAULT_M)
    p.add_argument("--rs", type=float, default=DEFAULT_R_S)
    p.add_argument("--out", type=Path, default=ASSETS_PATH / "phantom.bdtg")
    p.set_defaults(handler=cmd_phantom)

    p = sub.add_parser("simulate", parents=[beam, wave], help="simulate measurements to BDTM")
    source = p.add_mutually_exclusive_group()
    source.add_argument("--phantom", type=Path, help="BDTG phantom used as simulation grid as-is")
    source.add_argument("--preset", choices=["disk", "two-inclusion"], default="two-inclusion")
    p.add_argument("--d", type=float, default=3.0, help="disk radius for --preset disk")
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--rs", type=float, default=DEFAULT_R_S)
    p.add_argument("--M", type=int, default=DEFAULT_M)
    p.add_argument("--D", type=int, default=DEFAULT_D)
    p.add_argument("--rM", type=float, default=DEFAULT_R_M)
    p.add_argument("--oversample", type=int, default=DEFAULT_OVERSAMPLE)
    p.add_argument("--angular-oversample", type=int, default=DEFAULT_OVERSAMPLE)
    p.add_argument("--noise", type=float, default=0.0, help="relative noise in percent")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=ASSETS_PATH / "measurements.bdtm")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("reconstruct", parents=[beam], help="TSVD + backpropagation to BDTG")
    p.add_argument("--meas", type=Path, required=True)
    p.add_argument("--N", type=int, default=DEFAULT_TRUNCATION)
    p.add_argument("--min-singular", type=float, default=DEFAULT_MIN_SINGULAR)
    p.add_argument("--M", type=int, help="output grid size (default: measurement M)")
    p.add_argument("--rs", type=float, default=DEFAULT_R_S)
    p.add_argument("--conventional", action="store_true", help="skip TSVD, treat data as plane-wave DT")
    p.add_argument("--truth", type=Path, help="BDTG ground truth for metrics")
    p.add_argument("--out", type=Path, default=ASSETS_PATH / "reconstruction.bdtg")
    p.set_defaults(handler=cmd_reconstruct)

    p = sub.add_parser("picard", parents=[beam], help="Picard table CSV at one frequency")
    p.add_argument("--meas", type=Path, required=True)
    p.add_argument("--k", type=float, default=0.0, help="frequency (nearest grid row is used)")
    p.add_argument("--N", type=int, default=20)
    p.add_argument("--noise", type=float, default=0.0, help="extra relative noise in percent")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=ASSETS_PATH / "picard.csv")
    p.set_defaults(handler=cmd_picard)

    for name, handler, default_out in (
        ("fdt-check", cmd_fdt_check, "fdt.csv"),
        ("forward-direct", cmd_forward_direct, "line.csv"),
    ):
        p = sub.add_parser(name, parents=[beam, wave])
        p.add_argument("--phantom", type=Path, help="BDTG phantom (default: centred disk)")
        p.add_argument("--d", type=float, default=1.0 if name == "fdt-check" else 3.0)
        p.add_argument("--amplitude", type=float, default=0.05 if name == "fdt-check" else 1.0)
        p.add_argument("--M", type=int, default=64 if name == "fdt-check" else 128)
        p.add_argument("--rs", type=float, default=2.0 if name == "fdt-check" else DEFAULT_R_S)
        p.add_argument("--D", type=int, default=DEFAULT_D)
        p.add_argument("--extent", type=float, default=40.0, help="line half-length")
        p.add_argument("--L", type=int, default=2048, help="line samples (even)")
        p.add_argument("--out", type=Path, default=ASSETS_PATH / default_out)
        if name == "fdt-check":
            p.add_argument("--rM", type=float, default=DEFAULT_R_M)
            p.add_argument("--taper", type=float, default=0.5, help="Tukey fraction of the line")
        else:
            p.add_argument("--r2", type=float, default=DEFAULT_R_M, help="height of the line")
        p.set_defaults(handler=handler)

    p = sub.add_parser("compare", help="psnr,rmse,ssim of a reconstruction")
    p.add_argument("--truth", type=Path, required=True)
    p.add_argument("--recon", type=Path, required=True)
    p.add_argument("--out", type=Path)
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser("beamview", parents=[beam, wave], help="incident field on a square grid to BDTG")
    p.add_argument("--M", type=int, default=200)
    p.add_argument("--extent", type=float, default=DEFAULT_R_S, help="half-width of the square")
    p.add_argument("--D", type=int, default=DEFAULT_D)
    p.add_argument("--out", type=Path, default=ASSETS_PATH / "beam.bdtg")
    p.set_defaults(handler=cmd_beamview)

    p = sub.add_parser("report", parents=[beam], help="PDF summary of a run")
    p.add_argument("--meas", type=Path, required=True)
    p.add_argument("--recon", type=Path)
    p.add_argument("--truth", type=Path)
    p.add_argument("--picard-k", type=float, help="include a Picard table at this frequency")
    p.add_argument("--N", type=int, default=DEFAULT_TRUNCATION)
    p.add_argument("--fdt", action="store_true", help="include a Fourier diffraction check of the beam")
    p.add_argument("--fdt-extent", type=float, default=40.0, help="line half-length of the check")
    p.add_argument("--fdt-samples", type=int, default=2048, help="line samples of the check (even)")
    p.add_argument("--title", default="Beam diffraction tomography run")
    p.add_argument("--out", type=Path, default=ASSETS_PATH / "report.pdf")
    p.set_defaults(handler=cmd_report)
    return parser


def _configure(args: argparse.Namespace) -> None:
    settings = RuntimeSettings.from_env()
    level = args.log_level or settings.log_level
    logging.basicConfig(level=level, format=LOG_FORMAT)
    logging.getLogger().setLevel(level)
    set_threads(args.threads if args.threads is not None else settings.threads)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _configure(args)
        handler: Handler = args.handler
        print(handler(args))
    except (BeamDTError, ValidationError, ValueError) as exc:
        print(f"beamdt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, RuntimeError) as exc:
        print(f"beamdt: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK

