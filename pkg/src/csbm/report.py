"""Heatmaps and a markdown summary from a sweep CSV.

For every algorithm in the CSV three SVG panels are written (rejection
rate, mean overlap, mean covariate overlap) with the curve
``lambda = sqrt(1 - mu^2 / gamma)`` overlaid.  The SVG emitter is plain
string formatting with fixed precision, so output bytes depend only on the
CSV content, ``gamma`` and the package version written in a comment.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

from . import __version__
from .sweep import read_csv

PANELS = (
    ("rejection_rate", "rejection rate"),
    ("mean_overlap", "mean overlap"),
    ("mean_cov_overlap", "mean covariate overlap"),
)

# viridis anchors, linearly interpolated
_STOPS = [
    (0.00, (68, 1, 84)),
    (0.25, (59, 82, 139)),
    (0.50, (33, 145, 140)),
    (0.75, (94, 201, 98)),
    (1.00, (253, 231, 37)),
]

CELL = 36
MARGIN_L, MARGIN_T, MARGIN_B, MARGIN_R = 60, 30, 50, 20


def colour(x: float) -> str:
    if x is None or math.isnan(x):
        return "#bbbbbb"
    x = min(max(x, 0.0), 1.0)
    for (a, ca), (b, cb) in zip(_STOPS, _STOPS[1:]):
        if x <= b:
            w = (x - a) / (b - a)
            rgb = [round(ca[k] + w * (cb[k] - ca[k])) for k in range(3)]
            return "#{:02x}{:02x}{:02x}".format(*rgb)
    return "#fde725"


def _axis(values: list) -> tuple[float, float]:
    """Plot extent with each value at a cell centre."""
    if len(values) == 1:
        return values[0] - 0.5, values[0] + 0.5
    step = (values[-1] - values[0]) / (len(values) - 1)
    return values[0] - step / 2, values[-1] + step / 2


def heatmap_svg(rows: list, key: str, title: str, gamma: float) -> str:
    lams = sorted({r["lambda"] for r in rows})
    mus = sorted({r["mu"] for r in rows})
    W, H = CELL * len(lams), CELL * len(mus)
    x0, x1 = _axis(lams)
    y0, y1 = _axis(mus)

    def px(lam):
        return MARGIN_L + (lam - x0) / (x1 - x0) * W

    def py(mu):
        return MARGIN_T + H - (mu - y0) / (y1 - y0) * H

    width, height = MARGIN_L + W + MARGIN_R, MARGIN_T + H + MARGIN_B
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f"<!-- csbm {__version__} -->",
        f'<text x="{MARGIN_L}" y="18" font-family="sans-serif" font-size="13">{title}</text>',
        f'<clipPath id="plot"><rect x="{MARGIN_L}" y="{MARGIN_T}" width="{W}" height="{H}"/></clipPath>',
    ]
    index = {(r["lambda"], r["mu"]): r[key] for r in rows}
    for i, lam in enumerate(lams):
        for j, mu in enumerate(mus):
            val = index.get((lam, mu), float("nan"))
            x = MARGIN_L + i * CELL
            y = MARGIN_T + H - (j + 1) * CELL
            label = "nan" if math.isnan(val) else f"{val:.3f}"
            out.append(f'<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{colour(val)}">'
                       f"<title>lambda={lam:.4f} mu={mu:.4f} {key}={label}</title></rect>")
    pts = []
    k = 200
    mu_hi = min(y1, math.sqrt(gamma))
    for s in range(k + 1):
        mu = max(y0, 0.0) + (mu_hi - max(y0, 0.0)) * s / k
        lam = math.sqrt(max(1.0 - mu * mu / gamma, 0.0))
        pts.append(f"{px(lam):.2f},{py(mu):.2f}")
    out.append(f'<polyline points="{" ".join(pts)}" fill="none" stroke="red" stroke-width="2" '
               f'clip-path="url(#plot)"/>')
    out.append(f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{W}" height="{H}" fill="none" stroke="black"/>')
    ax = MARGIN_T + H
    out.append(f'<text x="{MARGIN_L + W / 2:.1f}" y="{ax + 40}" font-family="sans-serif" '
               f'font-size="12" text-anchor="middle">lambda</text>')
    out.append(f'<text x="14" y="{MARGIN_T + H / 2:.1f}" font-family="sans-serif" font-size="12" '
               f'transform="rotate(-90 14 {MARGIN_T + H / 2:.1f})" text-anchor="middle">mu</text>')
    for lam in (lams[0], lams[-1]):
        out.append(f'<text x="{px(lam):.1f}" y="{ax + 16}" font-family="sans-serif" font-size="10" '
                   f'text-anchor="middle">{lam:.2f}</text>')
    for mu in (mus[0], mus[-1]):
        out.append(f'<text x="{MARGIN_L - 4}" y="{py(mu) + 4:.1f}" font-family="sans-serif" '
                   f'font-size="10" text-anchor="end">{mu:.2f}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _cell(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.3f}"


def summary_markdown(rows: list, gamma: float) -> str:
    lines = [
        "# Sweep summary",
        "",
        f"gamma = {gamma:.6g}; `below` means lambda^2 + mu^2/gamma < 1.",
        "",
        "| algorithm | cells | mean rejection (below) | mean rejection (above) | "
        "mean overlap (below) | mean overlap (above) | errors |",
        "|---|---|---|---|---|---|---|",
    ]
    for alg in sorted({r["algorithm"] for r in rows}):
        sub = [r for r in rows if r["algorithm"] == alg]
        below = [r for r in sub if r["lambda"] ** 2 + r["mu"] ** 2 / gamma < 1]
        above = [r for r in sub if r["lambda"] ** 2 + r["mu"] ** 2 / gamma >= 1]

        def mean(rs, key):
            vals = [r[key] for r in rs if not math.isnan(r[key])]
            return sum(vals) / len(vals) if vals else float("nan")

        lines.append(
            f"| {alg} | {len(sub)} | {_cell(mean(below, 'rejection_rate'))} | "
            f"{_cell(mean(above, 'rejection_rate'))} | {_cell(mean(below, 'mean_overlap'))} | "
            f"{_cell(mean(above, 'mean_overlap'))} | {sum(r['n_errors'] for r in sub)} |"
        )
    lines += ["", "| algorithm | lambda | mu | rejection rate | mean overlap | mean cov overlap | runs |",
              "|---|---|---|---|---|---|---|"]
    for r in rows:
        lines.append(f"| {r['algorithm']} | {r['lambda']:.4f} | {r['mu']:.4f} | {_cell(r['rejection_rate'])} | "
                     f"{_cell(r['mean_overlap'])} | {_cell(r['mean_cov_overlap'])} | {r['n_runs']} |")
    return "\n".join(lines) + "\n"


def resolve_gamma(csv_path, gamma: float | None) -> float:
    if gamma is not None:
        return float(gamma)
    manifest = Path(csv_path).with_name("manifest.json")
    if manifest.exists():
        cfg = json.loads(manifest.read_text())["config"]
        return cfg["n"] / cfg["p"]
    raise ValueError("gamma unknown: pass it explicitly or keep manifest.json next to the CSV")


def report(csv_path, out_dir, gamma: float | None = None) -> list:
    """Write heatmaps and ``summary.md``; returns the written paths."""
    rows = read_csv(csv_path)
    if not rows:
        raise ValueError("no cells")
    gamma = resolve_gamma(csv_path, gamma)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for alg in sorted({r["algorithm"] for r in rows}):
        sub = [r for r in rows if r["algorithm"] == alg]
        for key, title in PANELS:
            path = out / f"{alg}_{key}.svg"
            path.write_text(heatmap_svg(sub, key, f"{alg}: {title}", gamma))
            written.append(path)
    path = out / "summary.md"
    path.write_text(summary_markdown(rows, gamma))
    written.append(path)
    return written
