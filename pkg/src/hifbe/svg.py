"""Minimal line-chart writer: polylines, linear axes and a legend in an 800x500 viewBox."""

from __future__ import annotations

import math
from typing import Iterable, List, Sequence, Tuple
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 800, 500
MARGIN = dict(left=70, right=20, top=40, bottom=50)
PALETTE = ("#1f4e9c", "#c0392b", "#27864a", "#8e44ad", "#d68910")


def _nice_ticks(lo: float, hi: float, count: int = 6) -> List[float]:
    span = hi - lo
    raw = span / max(count - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * span:
        ticks.append(round(t, 12))
        t += step
    return ticks


def line_chart(series: Sequence[Tuple[str, Sequence[float], Sequence[float]]], title: str = "",
               xlabel: str = "x", ylabel: str = "", comments: Iterable[str] = ()) -> str:
    """SVG text for ``series`` given as (label, xs, ys); non-finite ys break the line."""
    xs_all = np.concatenate([np.asarray(s[1], dtype=float) for s in series])
    ys_all = np.concatenate([np.asarray(s[2], dtype=float) for s in series])
    ys_all = ys_all[np.isfinite(ys_all)]
    x0, x1 = float(xs_all.min()), float(xs_all.max())
    y0, y1 = (float(ys_all.min()), float(ys_all.max())) if ys_all.size else (0.0, 1.0)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    L, R, T, B = MARGIN["left"], WIDTH - MARGIN["right"], MARGIN["top"], HEIGHT - MARGIN["bottom"]

    def sx(x):
        return L + (x - x0) / (x1 - x0) * (R - L)

    def sy(y):
        return B - (y - y0) / (y1 - y0) * (B - T)

    out = ['<?xml version="1.0" encoding="UTF-8"?>']
    out += [f"<!-- {escape(c).replace('--', '- -')} -->" for c in comments]
    out.append(f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" '
               f'width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">')
    out.append(f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>')
    if title:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>')
    out.append(f'<line x1="{L}" y1="{B}" x2="{R}" y2="{B}" stroke="black"/>')
    out.append(f'<line x1="{L}" y1="{B}" x2="{L}" y2="{T}" stroke="black"/>')
    for t in _nice_ticks(x0, x1):
        X = sx(t)
        out.append(f'<line x1="{X:.2f}" y1="{B}" x2="{X:.2f}" y2="{B + 5}" stroke="black"/>')
        out.append(f'<text x="{X:.2f}" y="{B + 18}" text-anchor="middle">{t:g}</text>')
    for t in _nice_ticks(y0, y1):
        Y = sy(t)
        out.append(f'<line x1="{L - 5}" y1="{Y:.2f}" x2="{L}" y2="{Y:.2f}" stroke="black"/>')
        out.append(f'<line x1="{L}" y1="{Y:.2f}" x2="{R}" y2="{Y:.2f}" stroke="#e5e5e5"/>')
        out.append(f'<text x="{L - 8}" y="{Y + 4:.2f}" text-anchor="end">{t:g}</text>')
    out.append(f'<text x="{(L + R) / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="16" y="{(T + B) / 2:.1f}" text-anchor="middle" '
                   f'transform="rotate(-90 16 {(T + B) / 2:.1f})">{escape(ylabel)}</text>')
    for k, (label, xs, ys) in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        run: List[str] = []
        segments = []
        for x, y in zip(xs, ys):
            if math.isfinite(y):
                run.append(f"{sx(x):.2f},{sy(y):.2f}")
            elif run:
                segments.append(run)
                run = []
        if run:
            segments.append(run)
        for seg in segments:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.6" points="{" ".join(seg)}"/>')
        ly = T + 14 + 18 * k
        out.append(f'<line x1="{R - 150}" y1="{ly}" x2="{R - 120}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{R - 114}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
