"""Hand-written SVG for inventory curves and grid paths."""

from __future__ import annotations

from xml.sax.saxutils import escape

PALETTE = ("#1b6ca8", "#d1495b", "#edae49", "#00798c", "#66a182", "#8d5a97", "#2e4057", "#f18f01")
CELL_FILL = {"empty": "#ffffff", "start": "#cfe8ff", "goal": "#7bc47f", "obstacle": "#e06666"}


def _svg(width: int, height: int, body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">')
    return "\n".join([head, f'<rect width="{width}" height="{height}" fill="white"/>', *body, "</svg>"]) + "\n"


def line_chart(x, series: dict, title: str = "", xlabel: str = "step",
               ylabel: str = "fraction of shares left") -> str:
    """Polyline per named series over a shared x axis; y is clamped to [0, 1] for layout."""
    W, H, L, R, T, B = 560, 380, 60, 150, 36, 48
    pw, ph = W - L - R, H - T - B
    x = [float(v) for v in x]
    x0, x1 = min(x), max(x)
    span = (x1 - x0) or 1.0

    def px(v):
        return L + pw * (v - x0) / span

    def py(v):
        return T + ph * (1.0 - min(max(v, 0.0), 1.0))

    body = [f'<text x="{W / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
            f'<rect x="{L}" y="{T}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>']
    for k in range(6):
        v = k / 5
        body.append(f'<line x1="{L - 4}" y1="{py(v):.1f}" x2="{L}" y2="{py(v):.1f}" stroke="#444"/>')
        body.append(f'<text x="{L - 8}" y="{py(v) + 4:.1f}" text-anchor="end">{v:.1f}</text>')
    for v in x:
        body.append(f'<text x="{px(v):.1f}" y="{T + ph + 18}" text-anchor="middle">{v:g}</text>')
    body.append(f'<text x="{L + pw / 2:.1f}" y="{H - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    body.append(f'<text x="16" y="{T + ph / 2:.1f}" text-anchor="middle" '
                f'transform="rotate(-90 16 {T + ph / 2:.1f})">{escape(ylabel)}</text>')
    for k, (name, ys) in enumerate(series.items()):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{px(a):.1f},{py(float(b)):.1f}" for a, b in zip(x, ys))
        body.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        ly = T + 14 + 18 * k
        body.append(f'<line x1="{W - R + 12}" y1="{ly}" x2="{W - R + 32}" y2="{ly}" '
                    f'stroke="{color}" stroke-width="2"/>')
        body.append(f'<text x="{W - R + 38}" y="{ly + 4}">{escape(str(name))}</text>')
    return _svg(W, H, body)


def grid_paths(kinds, paths: dict, title: str = "") -> str:
    """Grid cells coloured by kind with one polyline per named path of (row, col) cells."""
    rows, cols = len(kinds), len(kinds[0])
    cell = 48
    L, T = 20, 36
    W = L * 2 + cols * cell + 150
    H = T + rows * cell + 20
    body = [f'<text x="{L}" y="22" font-size="14">{escape(title)}</text>']
    for r in range(rows):
        for c in range(cols):
            fill = CELL_FILL[kinds[r][c]]
            body.append(f'<rect x="{L + c * cell}" y="{T + r * cell}" width="{cell}" height="{cell}" '
                        f'fill="{fill}" stroke="#888"/>')
    for k, (name, path) in enumerate(paths.items()):
        color = PALETTE[k % len(PALETTE)]
        off = (k - (len(paths) - 1) / 2) * 4
        pts = " ".join(f"{L + (c + 0.5) * cell + off:.1f},{T + (r + 0.5) * cell + off:.1f}"
                       for r, c in path)
        body.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="3" '
                    f'stroke-linejoin="round"/>')
        ly = T + 10 + 18 * k
        x0 = L * 2 + cols * cell
        body.append(f'<line x1="{x0}" y1="{ly}" x2="{x0 + 20}" y2="{ly}" stroke="{color}" stroke-width="3"/>')
        body.append(f'<text x="{x0 + 26}" y="{ly + 4}">{escape(str(name))}</text>')
    return _svg(W, H, body)
