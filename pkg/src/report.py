"""PDF experiment summaries built with ReportLab Platypus (tables only, no plots)."""

import logging
from collections.abc import Sequence
from pathlib import Path
from typing import NamedTuple, cast

from pydantic import BaseModel, ConfigDict, Field
from reportlab.lib import colors
from reportlab.lib.pagesizes import A4
from reportlab.lib.styles import ParagraphStyle, StyleSheet1
from reportlab.platypus import Flowable, KeepTogether, Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

from src.fileio import AcquisitionInfo
from src.forward_model import FdtReport, MeasurementSet
from src.inversion import PicardTable
from src.make_styles import make_styles
from src.metrics import MetricReport

log = logging.getLogger(__name__)

# Longer tables may break across pages.
_KEEP_TOGETHER_ROWS = 20


class ReportConfig(BaseModel):
    """Configuration of an experiment report.

    Attributes
    ----------
    output_path : Path
        Destination PDF; parent directories are created.
    pagesize : tuple[float, float]
        Page size in points.
    title : str
        Heading of the first page.
    style_overrides : dict
        Per-style attribute overrides passed to :func:`src.make_styles.make_styles`.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    output_path: Path = Field(..., description="Destination file for the PDF.", examples=[Path("assets/report.pdf")])
    pagesize: tuple[float, float] = Field(default=A4, description="Page size in points (width, height).")
    title: str = Field(default="Beam diffraction tomography run", description="Report heading.")
    style_overrides: dict[str, dict[str, object]] = Field(
        default_factory=dict,
        description="Style name -> attribute overrides.",
        examples=[{"ReportTitle": {"fontSize": 20}}],
    )


class ReportSection(NamedTuple):
    heading: str
    rows: list[list[str]]
    caption: str = ""


def _fmt(value: float) -> str:
    return f"{value:.6g}"


def acquisition_section(ms: MeasurementSet, info: AcquisitionInfo | None = None) -> ReportSection:
    rows = [
        ["quantity", "value"],
        ["M (k-grid)", str(ms.m)],
        ["rows kept after clamp", str(ms.m_k)],
        ["D (rotations)", str(ms.d)],
        ["k0", _fmt(ms.k0)],
        ["r_M", _fmt(ms.r_m)],
        ["eps_k", _fmt(ms.eps_k)],
    ]
    if info is not None:
        rows += [
            ["beam", info.beam.describe()],
            ["noise (%)", _fmt(info.noise_percent)],
            ["seed", str(info.seed)],
            ["oversample (object / angle)", f"{info.oversample} / {info.angular_oversample}"],
            ["phantom", info.phantom or "-"],
        ]
    return ReportSection("Acquisition", rows)


def metrics_section(report: MetricReport) -> ReportSection:
    return ReportSection(
        "Reconstruction quality",
        [["PSNR (dB)", "RMSE", "SSIM"], [_fmt(report.psnr), _fmt(report.rmse), _fmt(report.ssim)]],
        "PSNR and RMSE on the complex modulus, SSIM on real parts.",
    )


def picard_section(table: PicardTable) -> ReportSection:
    rows = [["n", "|a_n|", "|m_n|", "|m_n / a_n|"]]
    rows += [
        [str(n), _fmt(a), _fmt(m), _fmt(r)]
        for n, a, m, r in zip(table.n, table.abs_a, table.abs_m, table.abs_ratio, strict=True)
    ]
    return ReportSection(f"Picard table at k = {_fmt(table.k)}", rows)


def fdt_section(report: FdtReport) -> ReportSection:
    return ReportSection(
        "Fourier diffraction check",
        [
            ["line extent", "samples", "frequencies", "relative L2 error"],
            [_fmt(report.line_extent), str(report.samples), str(report.k.size), _fmt(report.relative_error)],
        ],
    )


def _table(rows: list[list[str]], styles: StyleSheet1) -> Table:
    cell = cast(ParagraphStyle, styles["Cell"])
    table = Table([[Paragraph(text, cell) for text in row] for row in rows], repeatRows=1)
    table.setStyle(
        TableStyle(
            [
                ("GRID", (0, 0), (-1, -1), 0.25, colors.grey),
                ("BACKGROUND", (0, 0), (-1, 0), colors.whitesmoke),
                ("VALIGN", (0, 0), (-1, -1), "MIDDLE"),
            ]
        )
    )
    return table


def build_story(*, title: str, sections: Sequence[ReportSection], styles: StyleSheet1) -> list[Flowable]:
    """Compose the report: a title, then one heading, table and optional caption per section.

    Empty sections are skipped with a warning.
    """
    story: list[Flowable] = [Paragraph(title, cast(ParagraphStyle, styles["ReportTitle"])), Spacer(1, 8)]
    for section in sections:
        if len(section.rows) < 2:
            log.warning("Report section '%s' has no data rows; skipped.", section.heading)
            continue
        block: list[Flowable] = [
            Paragraph(section.heading, cast(ParagraphStyle, styles["Section"])),
            _table(section.rows, styles),
        ]
        if section.caption:
            block.append(Paragraph(section.caption, cast(ParagraphStyle, styles["Caption"])))
        if len(section.rows) > _KEEP_TOGETHER_ROWS:
            story.extend(block)
        else:
            story.append(KeepTogether(block))
        story.append(Spacer(1, 10))
    return story


def build_report(*, config: ReportConfig, sections: Sequence[ReportSection]) -> Path:
    """Render ``sections`` to ``config.output_path``.

    Returns
    -------
    Path
        The generated PDF.

    Raises
    ------
    RuntimeError
        If ReportLab fails to build the document.
    """
    out_dir = config.output_path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    log.debug("Ensured output directory exists: %s", out_dir)

    styles = make_styles(overrides=config.style_overrides)
    story = build_story(title=config.title, sections=sections, styles=styles)
    doc = SimpleDocTemplate(str(config.output_path), pagesize=config.pagesize, title=config.title)
    try:
        doc.build(story)
    except Exception as exc:
        log.exception("Failed to build report at %s", config.output_path)
        raise RuntimeError(f"Failed to build report: {config.output_path}") from exc

    log.info("Report generated: %s", config.output_path)
    return config.output_path
