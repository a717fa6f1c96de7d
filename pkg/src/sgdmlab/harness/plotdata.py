"""Figure-style outputs: long-format CSV plus minimal static SVG line charts.

Both outputs are a deterministic function of the records: rerunning the
same experiment produces byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")

WIDTH, HEIGHT = 640, 400
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 64, 12, 12, 40


def _series_table(groups: dict, metric: str) -> list:
    """(name, epochs, values) rows: one per record plus a per-group mean."""
    rows = []
    grid = None
    for label, records in groups.items():
        for rec in records:
            epochs = rec.epoch
            if grid is None:
                grid = tuple(int(e) for e in epochs)
            elif tuple(int(e) for e in epochs) != grid:
                raise ValueError("records do not share a metric grid")
            rows.append((f"{label}/seed{rec.seed}", epochs, rec.metric(metric)))
        mean = np.mean(np.array([rec.metric(metric) for rec in records]), axis=0)
        rows.append((f"{label}/mean", records[0].epoch, mean))
    return rows


def _svg_line_chart(rows: list, metric: str) -> str:
    xs = np.concatenate([np.asarray(r[1], dtype=float) for r in rows])
    ys = np.concatenate([np.asarray(r[2], dtype=float) for r in rows])
    x_min, x_max = float(np.min(xs)), float(np.max(xs))
    y_min, y_max = float(np.min(ys)), float(np.max(ys))
    x_span = (x_max - x_min) or 1.0
    y_span = (y_max - y_min) or 1.0

    def sx(x):
        return MARGIN_L + (x - x_min) / x_span * (WIDTH - MARGIN_L - MARGIN_R)

    def sy(y):
        return HEIGHT - MARGIN_B - (y - y_min) / y_span * (HEIGHT - MARGIN_T - MARGIN_B)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line x1="{MARGIN_L}" y1="{HEIGHT - MARGIN_B}" x2="{WIDTH - MARGIN_R}" '
        f'y2="{HEIGHT - MARGIN_B}" stroke="black"/>',
        f'<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" y2="{HEIGHT - MARGIN_B}" stroke="black"/>',
        f'<text x="{MARGIN_L}" y="{HEIGHT - MARGIN_B + 16}" font-size="11">{x_min:.6g}</text>',
        f'<text x="{WIDTH - MARGIN_R}" y="{HEIGHT - MARGIN_B + 16}" font-size="11" '
        f'text-anchor="end">{x_max:.6g}</text>',
        f'<text x="{MARGIN_L - 6}" y="{HEIGHT - MARGIN_B}" font-size="11" text-anchor="end">{y_min:.6g}</text>',
        f'<text x="{MARGIN_L - 6}" y="{MARGIN_T + 10}" font-size="11" text-anchor="end">{y_max:.6g}</text>',
        f'<text x="{(MARGIN_L + WIDTH - MARGIN_R) // 2}" y="{HEIGHT - 8}" font-size="12" '
        f'text-anchor="middle">epoch</text>',
        f'<text x="14" y="{MARGIN_T + 2}" font-size="12">{metric}</text>',
    ]
    legend_y = MARGIN_T + 14
    for i, (name, epochs, values) in enumerate(rows):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{sx(float(x)):.2f},{sy(float(y)):.2f}" for x, y in zip(epochs, values))
        width = "2" if name.endswith("/mean") else "1"
        opacity = "1.0" if name.endswith("/mean") else "0.45"
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width}" '
            f'stroke-opacity="{opacity}"/>'
        )
        if name.endswith("/mean"):
            parts.append(
                f'<text x="{WIDTH - MARGIN_R - 4}" y="{legend_y}" font-size="11" text-anchor="end" '
                f'fill="{color}">{name[:-5]}</text>'
            )
            legend_y += 14
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_plotdata(groups: dict, out_dir, metrics=("loss_epoch_avg", "grad_norm_sq_mean")) -> list:
    """Write plotdata_<metric>.csv and plot_<metric>.svg per metric; returns paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for metric in metrics:
        rows = _series_table(groups, metric)
        csv_path = out / f"plotdata_{metric}.csv"
        with open(csv_path, "w") as fh:
            fh.write("series,epoch,value\n")
            for name, epochs, values in rows:
                for e, v in zip(epochs, values):
                    fh.write(f"{name},{int(e)},{float(v):.17g}\n")
        svg_path = out / f"plot_{metric}.svg"
        with open(svg_path, "w") as fh:
            fh.write(_svg_line_chart(rows, metric))
        written.extend([csv_path, svg_path])
    return written
