"""Minimal SVG line plots (no plotting dependency)."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _thin(t: np.ndarray, v: np.ndarray, max_points: int) -> tuple[np.ndarray, np.ndarray]:
    if len(t) <= max_points:
        return t, v
    idx = np.unique(np.linspace(0, len(t) - 1, max_points).round().astype(int))
    return t[idx], v[idx]


def line_plot(
    series: list[tuple[str, np.ndarray, np.ndarray]],
    title: str = "",
    width: int = 640,
    height: int = 400,
    max_points: int = 2000,
    log_y: bool = False,
) -> str:
    """SVG text with one polyline per (label, t, values) entry."""
    pad_l, pad_r, pad_t, pad_b = 60, 20, 30, 40
    cleaned = []
    for label, t, v in series:
        t = np.asarray(t, dtype=float)
        v = np.asarray(v, dtype=float)
        if log_y:
            v = np.log10(np.maximum(np.abs(v), 1e-300))
        ok = np.isfinite(v)
        cleaned.append((label, *_thin(t[ok], v[ok], max_points)))
    allt = np.concatenate([c[1] for c in cleaned]) if cleaned else np.zeros(1)
    allv = np.concatenate([c[2] for c in cleaned]) if cleaned else np.zeros(1)
    if allt.size == 0:
        allt = allv = np.zeros(1)
    t0, t1 = float(allt.min()), float(allt.max())
    v0, v1 = float(allv.min()), float(allv.max())
    if t1 == t0:
        t1 = t0 + 1.0
    if v1 == v0:
        v0, v1 = v0 - 0.5, v1 + 0.5
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b

    def sx(t):
        return pad_l + (t - t0) / (t1 - t0) * pw

    def sy(v):
        return pad_t + (1.0 - (v - v0) / (v1 - v0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="{pad_l}" y="{pad_t}" width="{pw}" height="{ph}" fill="none" stroke="#888"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{pad_l}" y="{height - 12}" font-size="11">{t0:.4g}</text>',
        f'<text x="{width - pad_r}" y="{height - 12}" text-anchor="end" font-size="11">{t1:.4g}</text>',
        f'<text x="{pad_l - 4}" y="{pad_t + ph:.1f}" text-anchor="end" font-size="11">{v0:.4g}</text>',
        f'<text x="{pad_l - 4}" y="{pad_t + 10}" text-anchor="end" font-size="11">{v1:.4g}</text>',
    ]
    for i, (label, t, v) in enumerate(cleaned):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(t, v))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>')
        out.append(
            f'<text x="{pad_l + 8}" y="{pad_t + 16 + 14 * i}" font-size="11" fill="{color}">{escape(label)}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_line_plot(file: str | Path, series, title: str = "", **kw) -> Path:
    file = Path(file)
    file.write_text(line_plot(series, title, **kw))
    return file


__all__ = ["line_plot", "write_line_plot"]
