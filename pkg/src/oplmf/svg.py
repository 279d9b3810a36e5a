"""Minimal SVG line charts for learning curves (no plotting dependency)."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

PALETTE = {"NLMF": "#d62728", "VSSLMFQ": "#2ca02c", "OPLMF": "#1f77b4", "LMF": "#9467bd"}
FALLBACK = ("#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f")


def _nice_range(lo, hi):
    if not np.isfinite(lo) or not np.isfinite(hi):
        return 0.0, 1.0
    if hi - lo < 1e-12:
        pad = abs(hi) * 0.05 or 1.0
        return lo - pad, hi + pad
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _panel(series, x0, y0, w, h, title, ylabel, max_points=800):
    parts = []
    finite = [np.asarray(y, float)[np.isfinite(y)] for y in series.values()]
    finite = [f for f in finite if f.size]
    if finite:
        lo, hi = _nice_range(min(f.min() for f in finite), max(f.max() for f in finite))
    else:
        lo, hi = 0.0, 1.0
    n_max = max((len(y) for y in series.values()), default=1)

    parts.append(f'<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="#333"/>')
    parts.append(f'<text x="{x0 + w / 2}" y="{y0 - 8}" text-anchor="middle" '
                 f'font-size="13">{escape(title)}</text>')
    parts.append(f'<text x="{x0 - 45}" y="{y0 + h / 2}" font-size="11" text-anchor="middle" '
                 f'transform="rotate(-90 {x0 - 45} {y0 + h / 2})">{escape(ylabel)}</text>')
    for frac in (0.0, 0.5, 1.0):
        val = lo + frac * (hi - lo)
        yy = y0 + h - frac * h
        parts.append(f'<text x="{x0 - 4}" y="{yy + 4:.1f}" font-size="10" '
                     f'text-anchor="end">{val:.3g}</text>')
    parts.append(f'<text x="{x0 + w}" y="{y0 + h + 14}" font-size="10" '
                 f'text-anchor="end">{n_max}</text>')

    for k, (name, y) in enumerate(series.items()):
        y = np.asarray(y, float)
        idx = np.unique(np.linspace(0, len(y) - 1, min(len(y), max_points)).astype(int))
        pts = []
        for i in idx:
            if not np.isfinite(y[i]):
                continue
            px = x0 + w * i / max(n_max - 1, 1)
            py = y0 + h - h * (y[i] - lo) / (hi - lo)
            pts.append(f"{px:.1f},{py:.1f}")
        color = PALETTE.get(name, FALLBACK[k % len(FALLBACK)])
        if pts:
            parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" '
                         f'points="{" ".join(pts)}"/>')
        parts.append(f'<text x="{x0 + w - 6}" y="{y0 + 16 + 14 * k}" font-size="11" '
                     f'text-anchor="end" fill="{color}">{escape(name)}</text>')
    return parts


def experiment_svg(traces, title="") -> str:
    """Three stacked panels: MSD (dB), OPLMF theory error (dB), log10 step size."""
    W, H = 720, 860
    pw, ph, left = 600, 200, 90
    msd = {name: tr.msd_db_sim for name, tr in traces.items()}
    err = {}
    for name, tr in traces.items():
        if tr.msd_lin_theory is not None:
            with np.errstate(divide="ignore"):
                err[f"{name} |sim - theory|"] = 10 * np.log10(
                    np.abs(tr.msd_lin_sim - tr.msd_lin_theory))
            err[f"{name} theory"] = tr.msd_db_theory
    with np.errstate(divide="ignore", invalid="ignore"):
        mu = {name: np.log10(tr.mu_mean) for name, tr in traces.items()}

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
             f'font-family="sans-serif">',
             f'<rect width="{W}" height="{H}" fill="white"/>']
    if title:
        parts.append(f'<text x="{W / 2}" y="22" text-anchor="middle" font-size="15">'
                     f'{escape(title)}</text>')
    parts += _panel(msd, left, 60, pw, ph, "(A) MSD", "MSD / dB")
    parts += _panel(err, left, 330, pw, ph, "(B) MSD error", "dB")
    parts += _panel(mu, left, 600, pw, ph, "(C) step size", "log10 mu(n)")
    parts.append(f'<text x="{left + pw / 2}" y="{H - 16}" text-anchor="middle" '
                 f'font-size="11">iteration</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
