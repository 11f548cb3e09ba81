"""Deterministic SVG and markdown rendering of evaluation results.

Confusion heatmaps shade each cell by count/row-max; scatter plots color
points by the fixed class palette (fungal=blue, healthy=green, virus=red,
unknown=violet); tables display scores at two decimals, half-up. Identical
inputs always produce byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from ._fsutil import write_json_atomic, write_text_atomic
from .metrics import ConfusionMatrix, format_score

CLASS_PALETTE = {
    "fungal": "blue",
    "healthy": "green",
    "virus": "red",
    "unknown": "violet",
}
# deterministic fallback cycle for class names outside the paper's four
EXTRA_COLORS = ("orange", "teal", "brown", "magenta", "olive", "navy")

SVG_HEADER = '<?xml version="1.0" encoding="UTF-8"?>\n'


def class_color(name: str, fallback_index: int = 0) -> str:
    if name in CLASS_PALETTE:
        return CLASS_PALETTE[name]
    return EXTRA_COLORS[fallback_index % len(EXTRA_COLORS)]


def palette_for(class_names) -> dict[str, str]:
    extra = 0
    out = {}
    for name in class_names:
        if name in CLASS_PALETTE:
            out[name] = CLASS_PALETTE[name]
        else:
            out[name] = EXTRA_COLORS[extra % len(EXTRA_COLORS)]
            extra += 1
    return out


def _heat_fill(intensity: float) -> str:
    """White to dark blue ramp; intensity in [0, 1]."""
    t = min(max(intensity, 0.0), 1.0)
    r = round(255 + (8 - 255) * t)
    g = round(255 + (48 - 255) * t)
    b = round(255 + (107 - 255) * t)
    return f"rgb({r},{g},{b})"


def render_confusion_svg(cm: ConfusionMatrix, out_path, title: str = "") -> str:
    """Write a Fig.5-style confusion heatmap; returns the SVG text."""
    c = cm.num_classes
    cell = 64
    left, top, right, bottom = 110, 50, 20, 70
    width = left + c * cell + right
    height = top + c * cell + bottom

    parts = [SVG_HEADER]
    parts.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width}" height="{height}" viewBox="0 0 {width} {height}">\n'
    )
    parts.append(f'<rect width="{width}" height="{height}" fill="white"/>\n')
    if title:
        parts.append(
            f'<text x="{width / 2:.1f}" y="22" font-family="sans-serif" font-size="15" '
            f'text-anchor="middle">{escape(title)}</text>\n'
        )

    row_max = cm.counts.max(axis=1)
    for i in range(c):
        for j in range(c):
            count = int(cm.counts[i, j])
            intensity = count / row_max[i] if row_max[i] > 0 else 0.0
            x = left + j * cell
            y = top + i * cell
            parts.append(
                f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="{_heat_fill(intensity)}" stroke="#888" stroke-width="1"/>\n'
            )
            text_fill = "white" if intensity > 0.5 else "black"
            parts.append(
                f'<text x="{x + cell / 2:.1f}" y="{y + cell / 2 + 5:.1f}" '
                f'font-family="sans-serif" font-size="14" text-anchor="middle" '
                f'fill="{text_fill}">{count}</text>\n'
            )

    for i, name in enumerate(cm.class_names):
        y = top + i * cell + cell / 2 + 4
        parts.append(
            f'<text x="{left - 8}" y="{y:.1f}" font-family="sans-serif" font-size="12" '
            f'text-anchor="end">{escape(name)}</text>\n'
        )
        x = left + i * cell + cell / 2
        parts.append(
            f'<text x="{x:.1f}" y="{top + c * cell + 18}" font-family="sans-serif" '
            f'font-size="12" text-anchor="middle">{escape(name)}</text>\n'
        )

    parts.append(
        f'<text x="{left - 86}" y="{top + c * cell / 2:.1f}" font-family="sans-serif" '
        f'font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 {left - 86} {top + c * cell / 2:.1f})">True label</text>\n'
    )
    parts.append(
        f'<text x="{left + c * cell / 2:.1f}" y="{top + c * cell + 44}" '
        f'font-family="sans-serif" font-size="13" text-anchor="middle">Predicted label</text>\n'
    )
    parts.append("</svg>\n")
    svg = "".join(parts)
    write_text_atomic(out_path, svg)
    return svg


def render_scatter_svg(coords, labels, out_path, title: str = "") -> str:
    """Write a class-colored scatter of N x 2 coords; returns the SVG text.

    `labels` are class-name strings; the viewport is min-max scaled with a
    5% margin, and a degenerate extent centers the points.
    """
    coords = np.asarray(coords, dtype=np.float64)
    labels = [str(l) for l in labels]
    size = 480
    margin = size * 0.05
    legend_w = 110
    width = size + legend_w
    height = size

    def scale(vals):
        lo, hi = float(vals.min()), float(vals.max())
        if hi - lo <= 0:
            return np.full(vals.shape, size / 2.0)
        return margin + (vals - lo) / (hi - lo) * (size - 2 * margin)

    xs = scale(coords[:, 0])
    # flip y so larger values plot upward
    ys = size - scale(coords[:, 1])

    seen: list[str] = []
    for name in labels:
        if name not in seen:
            seen.append(name)
    ordered = [n for n in CLASS_PALETTE if n in seen] + [
        n for n in sorted(seen) if n not in CLASS_PALETTE
    ]
    colors = palette_for(ordered)

    parts = [SVG_HEADER]
    parts.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width}" height="{height}" viewBox="0 0 {width} {height}">\n'
    )
    parts.append(f'<rect width="{width}" height="{height}" fill="white"/>\n')
    if title:
        parts.append(
            f'<text x="{size / 2:.1f}" y="20" font-family="sans-serif" font-size="15" '
            f'text-anchor="middle">{escape(title)}</text>\n'
        )
    for i in range(coords.shape[0]):
        parts.append(
            f'<circle cx="{xs[i]:.2f}" cy="{ys[i]:.2f}" r="3" '
            f'fill="{colors[labels[i]]}" fill-opacity="0.6"/>\n'
        )
    for k, name in enumerate(ordered):
        y = 30 + k * 22
        parts.append(
            f'<circle cx="{size + 16}" cy="{y}" r="5" fill="{colors[name]}"/>\n'
        )
        parts.append(
            f'<text x="{size + 28}" y="{y + 4}" font-family="sans-serif" '
            f'font-size="12">{escape(name)}</text>\n'
        )
    parts.append("</svg>\n")
    svg = "".join(parts)
    write_text_atomic(out_path, svg)
    return svg


def render_tables(metrics_by_treatment: dict, cluster_scores_by_treatment: dict, out_path) -> str:
    """Write the Tables 2/3-style markdown report; returns the text.

    `metrics_by_treatment` maps treatment id to an evaluation dict (see
    metrics.evaluation_dict); `cluster_scores_by_treatment` maps treatment id
    to a list of {method, silhouette, dbi} entries.
    """
    lines = ["# Evaluation report", ""]

    for treatment in sorted(metrics_by_treatment):
        ev = metrics_by_treatment[treatment]
        lines.append(f"## Treatment {treatment}")
        lines.append("")
        lines.append("| Class | Precision | Recall | F1-score | Support |")
        lines.append("|---|---|---|---|---|")
        for row in ev["per_class"]:
            lines.append(
                f"| {row['class']} | {format_score(row['precision'])} "
                f"| {format_score(row['recall'])} | {format_score(row['f1'])} "
                f"| {row['support']} |"
            )
        lines.append("")
        lines.append(f"Weighted average F1-score: **{format_score(ev['weighted_f1'])}**")
        if "accuracy" in ev:
            lines.append(f"Accuracy: {format_score(ev['accuracy'])}")
        lines.append("")

    any_scores = any(cluster_scores_by_treatment.get(t) for t in cluster_scores_by_treatment)
    lines.append("## Cluster separability")
    lines.append("")
    if not any_scores:
        lines.append("_No cluster scores available for this run._")
        lines.append("")
    else:
        lines.append("| Treatment | Method | Silhouette score [1] | DBI [2] |")
        lines.append("|---|---|---|---|")
        for treatment in sorted(cluster_scores_by_treatment):
            for entry in cluster_scores_by_treatment[treatment]:
                lines.append(
                    f"| {treatment} | {entry['method']} "
                    f"| {format_score(entry['silhouette'])} | {format_score(entry['dbi'])} |"
                )
        lines.append("")
        lines.append("[1] Higher is better.")
        lines.append("[2] Lower is better.")
        lines.append("")
    lines.append("Scores with zero denominators (a class never predicted) are reported as 0.")
    lines.append("")
    text = "\n".join(lines)
    write_text_atomic(out_path, text)
    return text


@dataclass(frozen=True)
class ReportBundle:
    treatment: str
    files: tuple[str, ...]
    gallery: tuple


def gallery_entries(records) -> list[dict]:
    """Fig.8-style prediction gallery rows (id, true, pred, correct)."""
    return [
        {
            "id": rec.id,
            "true": rec.true_label,
            "pred": rec.pred_label,
            "correct": rec.true_label == rec.pred_label,
        }
        for rec in records
    ]


def write_gallery(path, records, class_names) -> None:
    rows = [
        {
            "id": rec.id,
            "true": class_names[rec.true_label],
            "pred": class_names[rec.pred_label],
            "correct": rec.true_label == rec.pred_label,
        }
        for rec in records
    ]
    write_json_atomic(path, rows)
