"""Small shared helpers: number formatting and XML/SVG text escaping."""

from __future__ import annotations


def fmt_num(value: float) -> str:
    """Format a coordinate/scale value deterministically.

    Integers render without a decimal point; everything else is rounded
    to 3 decimals and stripped of trailing zeros.
    """
    if value == int(value):
        return str(int(value))
    text = f"{value:.3f}".rstrip("0").rstrip(".")
    return text if text not in ("-0", "") else "0"


def xml_escape(text: str, quote: bool = False) -> str:
    """Escape text for XML content (and attribute values when quote=True)."""
    out = text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
    if quote:
        out = out.replace('"', "&quot;").replace("\n", "&#10;").replace("\t", "&#9;")
    return out
