import logging
from collections.abc import Mapping
from typing import Final, cast

from reportlab.lib import colors
from reportlab.lib.enums import TA_CENTER, TA_LEFT
from reportlab.lib.styles import ParagraphStyle, StyleSheet1, getSampleStyleSheet

log = logging.getLogger(__name__)

# Styles every experiment report relies on, created on top of the sample sheet.
REPORT_STYLES: Final[dict[str, tuple[str, dict[str, object]]]] = {
    "ReportTitle": ("Title", {"fontSize": 18, "leading": 22, "alignment": TA_LEFT, "spaceAfter": 6}),
    "Section": ("Heading2", {"spaceBefore": 10, "spaceAfter": 4}),
    "Caption": ("Italic", {"fontSize": 8, "leading": 10, "textColor": colors.grey}),
    "Cell": ("BodyText", {"fontSize": 8, "leading": 10, "alignment": TA_CENTER}),
}

_NUMERIC: Final = (int, float)
_SETTABLE: Final[dict[str, tuple[type, ...]]] = {
    "fontName": (str,),
    "fontSize": _NUMERIC,
    "leading": _NUMERIC,
    "alignment": (int,),
    "spaceBefore": _NUMERIC,
    "spaceAfter": _NUMERIC,
    "leftIndent": _NUMERIC,
    "textColor": (colors.Color,),
    "backColor": (colors.Color,),
}


def make_styles(*, overrides: Mapping[str, Mapping[str, object]] | None = None) -> StyleSheet1:
    """Return a fresh stylesheet holding the report styles, with ``overrides`` applied on top.

    Parameters
    ----------
    overrides
        ``style_name -> {attribute -> value}``. Colours may be given as hex strings.
        Unknown styles, unknown attributes and badly typed values are skipped with a warning.

    Returns
    -------
    StyleSheet1
        A new stylesheet; ReportLab's shared sample sheet is never modified.
    """
    styles = getSampleStyleSheet()
    for name, (parent, attrs) in REPORT_STYLES.items():
        style = ParagraphStyle(name, parent=cast(ParagraphStyle, styles[parent]))
        for key, value in attrs.items():
            setattr(style, key, value)
        styles.add(style)

    for name, attrs in (overrides or {}).items():
        if name not in styles.byName:
            log.warning("Style '%s' not found; skipping overrides.", name)
            continue
        _apply(cast(ParagraphStyle, styles[name]), attrs)
    return styles


def _apply(style: ParagraphStyle, attrs: Mapping[str, object]) -> None:
    for key, raw in attrs.items():
        allowed = _SETTABLE.get(key)
        if allowed is None:
            log.warning("Attribute '%s' is not allowed; skipping for style '%s'.", key, style.name)
            continue
        value = raw
        if key.endswith("Color") and isinstance(raw, str):
            try:
                value = colors.HexColor(raw if raw.startswith("#") else f"#{raw}")
            except ValueError:
                log.warning("Colour %r of style '%s' is not a hex string.", raw, style.name)
                continue
        if not isinstance(value, allowed):
            log.warning("Attribute '%s' of style '%s' has invalid type %s.", key, style.name, type(value).__name__)
            continue
        setattr(style, key, value)
        log.debug("Style '%s': %s = %r", style.name, key, value)
