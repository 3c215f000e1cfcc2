"""Deterministic SVG plot writers.

All plots use a fixed 640x480 canvas, 6-significant-digit float formatting,
and contain no timestamps or environment-dependent content, so re-running a
pipeline reproduces them byte for byte.
"""

from __future__ import annotations

from .metrics import Confusion, RocCurve
from .mrcv import FeatureRanking

WIDTH, HEIGHT = 640, 480
MARGIN = 64


def _fmt(x: float) -> str:
    return format(float(x), ".6g")


def _header(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="28" text-anchor="middle" '
        f'font-family="sans-serif" font-size="16">{title}</text>',
    ]


def _axes(x_label: str, y_label: str) -> list[str]:
    x0, y0 = MARGIN, HEIGHT - MARGIN
    x1, y1 = WIDTH - MARGIN, MARGIN
    return [
        f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" '
        f'fill="none" stroke="black"/>',
        f'<text x="{(x0 + x1) // 2}" y="{HEIGHT - 20}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">{x_label}</text>',
        f'<text x="20" y="{(y0 + y1) // 2}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13" '
        f'transform="rotate(-90 20 {(y0 + y1) // 2})">{y_label}</text>',
    ]


def _scale(v: float, lo: float, hi: float, px_lo: float, px_hi: float) -> float:
    if hi == lo:
        return (px_lo + px_hi) / 2.0
    return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo)


def roc_svg(curve: RocCurve, auc_value: float, title: str = "ROC") -> str:
    parts = _header(title) + _axes("False positive rate", "True positive rate")
    x0, y0 = MARGIN, HEIGHT - MARGIN
    x1, y1 = WIDTH - MARGIN, MARGIN
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y1}" '
                 f'stroke="gray" stroke-dasharray="4 4"/>')
    pts = " ".join(
        f"{_fmt(_scale(f, 0, 1, x0, x1))},{_fmt(_scale(t, 0, 1, y0, y1))}"
        for f, t in zip(curve.fpr.tolist(), curve.tpr.tolist())
    )
    parts.append(f'<polyline points="{pts}" fill="none" stroke="#1f6fb2" stroke-width="2"/>')
    parts.append(f'<text x="{x1 - 8}" y="{y0 - 10}" text-anchor="end" '
                 f'font-family="sans-serif" font-size="13">AUC = {_fmt(auc_value)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def elbow_svg(ranking: FeatureRanking, n_selected: int, title: str = "Feature ranking") -> str:
    """Rank index vs score with the elbow cut marked after n_selected."""
    scores = ranking.scores()
    k = len(scores)
    lo, hi = min(scores), max(scores)
    parts = _header(title) + _axes("Rank", "Score")
    x0, y0 = MARGIN, HEIGHT - MARGIN
    x1, y1 = WIDTH - MARGIN, MARGIN

    def px(i: int) -> float:
        return _scale(i + 1, 1, max(k, 2), x0, x1)

    def py(s: float) -> float:
        return _scale(s, lo, hi, y0, y1)

    pts = " ".join(f"{_fmt(px(i))},{_fmt(py(s))}" for i, s in enumerate(scores))
    parts.append(f'<polyline points="{pts}" fill="none" stroke="#1f6fb2" stroke-width="1.5"/>')
    for i, s in enumerate(scores):
        color = "#9ecbe8" if i < n_selected else "#1f6fb2"
        parts.append(f'<circle cx="{_fmt(px(i))}" cy="{_fmt(py(s))}" r="3" fill="{color}"/>')
    if 0 < n_selected < k:
        cut_x = _fmt((px(n_selected - 1) + px(n_selected)) / 2.0)
        parts.append(f'<line x1="{cut_x}" y1="{y1}" x2="{cut_x}" y2="{y0}" '
                     f'stroke="#c23b22" stroke-dasharray="6 3"/>')
    parts.append(f'<text x="{x1 - 8}" y="{y1 + 16}" text-anchor="end" '
                 f'font-family="sans-serif" font-size="13">selected = {n_selected}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def confusion_svg(c: Confusion, title: str = "Confusion matrix") -> str:
    """2x2 heatmap; rows are actual classes, columns predicted."""
    cells = [
        ("Benign", "Benign", c.tn), ("Benign", "Malignant", c.fp),
        ("Malignant", "Benign", c.fn), ("Malignant", "Malignant", c.tp),
    ]
    peak = max(c.tp, c.fp, c.tn, c.fn, 1)
    size = 140
    ox, oy = (WIDTH - 2 * size) // 2, 110
    parts = _header(title)
    for idx, (actual, predicted, count) in enumerate(cells):
        row, col = divmod(idx, 2)
        x, y = ox + col * size, oy + row * size
        parts.append(f'<rect x="{x}" y="{y}" width="{size}" height="{size}" '
                     f'fill="#1f6fb2" fill-opacity="{_fmt(count / peak)}" stroke="black"/>')
        parts.append(f'<text x="{x + size // 2}" y="{y + size // 2 + 6}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="18">{count}</text>')
    for col, label in enumerate(("Benign", "Malignant")):
        parts.append(f'<text x="{ox + col * size + size // 2}" y="{oy - 12}" '
                     f'text-anchor="middle" font-family="sans-serif" font-size="13">'
                     f'pred {label}</text>')
    for row, label in enumerate(("Benign", "Malignant")):
        parts.append(f'<text x="{ox - 12}" y="{oy + row * size + size // 2}" '
                     f'text-anchor="end" font-family="sans-serif" font-size="13">'
                     f'{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
