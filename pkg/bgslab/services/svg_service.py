"""
Minimal SVG writer for the kappa-plots (log-log scatter with reference
lines) and the heatmap grids. Output is deterministic for fixed input.
"""

import math
from enum import Enum
from html import escape
from pathlib import Path

from pydantic import BaseModel, Field

from bgslab.config import settings
from bgslab.core.matcore import EPS

PREAMBLE = """\
<?xml version="1.0" encoding="UTF-8" standalone="no"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="%(width)d" height="%(height)d" viewBox="0 0 %(width)d %(height)d">
<rect x="0" y="0" width="%(width)d" height="%(height)d" style="fill:#ffffff"/>
"""

POSTAMBLE = """\
</svg>
"""

PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)

REASON_CODES = {"incompatible": "inc", "chol_fail": "chol", "nan_encountered": "nan"}


class ReferenceLine(str, Enum):
    EPS = "eps"
    EPS_KAPPA = "eps_kappa"
    EPS_KAPPA2 = "eps_kappa2"

    @property
    def power(self) -> int:
        return {"eps": 0, "eps_kappa": 1, "eps_kappa2": 2}[self.value]

    @property
    def caption(self) -> str:
        return {"eps": "ε", "eps_kappa": "εκ", "eps_kappa2": "εκ²"}[self.value]


class PlotSeries(BaseModel):
    name: str
    points: list[tuple[float, float]] = Field(default_factory=list)


class PlotData(BaseModel):
    title: str
    x_label: str = "κ(X)"
    y_label: str = ""
    series: list[PlotSeries]
    reference_lines: list[ReferenceLine] = Field(default_factory=lambda: list(ReferenceLine))


class HeatmapGrid(BaseModel):
    title: str
    row_labels: list[str]
    col_labels: list[str]
    values: list[list[float]]
    reasons: list[list[str | None]]


class SvgCanvas:
    def __init__(self, width: int, height: int):
        self.width = width
        self.height = height
        self.commands: list[str] = []

    def render(self) -> str:
        body = "".join(item + "\n" for item in self.commands)
        return PREAMBLE % {"width": self.width, "height": self.height} + body + POSTAMBLE

    def save(self, path: Path) -> None:
        path.write_text(self.render(), encoding="utf-8")

    def circle(self, x: float, y: float, radius: float, color: str, css_class: str = "marker") -> None:
        self.commands.append(
            f'<circle class="{css_class}" cx="{x:.2f}" cy="{y:.2f}" r="{radius:.2f}" '
            f'style="fill:{color};stroke:{color}"/>'
        )

    def line(self, points: list[tuple[float, float]], color: str = "#000000", width: float = 1.0, dash: str | None = None, css_class: str = "line") -> None:
        coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
        dash_style = f";stroke-dasharray:{dash}" if dash else ""
        self.commands.append(
            f'<polyline class="{css_class}" points="{coords}" '
            f'style="fill:none;stroke:{color};stroke-width:{width:.2f}{dash_style}"/>'
        )

    def rect(self, x: float, y: float, w: float, h: float, fill: str, stroke: str = "#ffffff", css_class: str = "cell") -> None:
        self.commands.append(
            f'<rect class="{css_class}" x="{x:.2f}" y="{y:.2f}" width="{w:.2f}" height="{h:.2f}" '
            f'style="fill:{fill};stroke:{stroke}"/>'
        )

    def text(self, x: float, y: float, content: str, size: int = 12, anchor: str = "start", css_class: str = "label") -> None:
        self.commands.append(
            f'<text class="{css_class}" x="{x:.2f}" y="{y:.2f}" font-size="{size}" '
            f'text-anchor="{anchor}" font-family="sans-serif">{escape(content)}</text>'
        )


def _decade_range(values: list[float]) -> tuple[int, int]:
    logs = [math.log10(v) for v in values]
    lo, hi = math.floor(min(logs)), math.ceil(max(logs))
    if hi <= lo:
        hi = lo + 1
    return lo, hi


def _clip_reference(power: int, x_range: tuple[int, int], y_range: tuple[int, int]) -> tuple[tuple[float, float], tuple[float, float]] | None:
    """Segment of log10 y = log10 eps + power * log10 x inside the plot box, in decades."""
    log_eps = math.log10(EPS)
    x_lo, x_hi = float(x_range[0]), float(x_range[1])
    y_lo, y_hi = y_range
    if power == 0:
        if not y_lo <= log_eps <= y_hi:
            return None
        return (x_lo, log_eps), (x_hi, log_eps)
    start = max(x_lo, (y_lo - log_eps) / power)
    stop = min(x_hi, (y_hi - log_eps) / power)
    if start >= stop:
        return None
    return (start, log_eps + power * start), (stop, log_eps + power * stop)


def emit_svg(plot: PlotData, path: Path | None = None) -> str:
    """Log-log scatter: one marker per finite positive point, one legend row per series."""
    width, height = settings.SVG_WIDTH, settings.SVG_HEIGHT
    left, right, top, bottom = 70.0, 170.0, 40.0, 50.0
    box_w, box_h = width - left - right, height - top - bottom

    points = [pt for series in plot.series for pt in series.points if _plottable(pt)]
    xs = [x for x, _ in points] or [1.0, 10.0]
    ys = [y for _, y in points] or [EPS, 1.0]
    x_range = _decade_range(xs)
    y_range = _decade_range(ys + ([EPS] if plot.reference_lines else []))

    def to_px(log_x: float, log_y: float) -> tuple[float, float]:
        fx = (log_x - x_range[0]) / (x_range[1] - x_range[0])
        fy = (log_y - y_range[0]) / (y_range[1] - y_range[0])
        return left + fx * box_w, top + (1.0 - fy) * box_h

    canvas = SvgCanvas(width, height)
    canvas.text(left + box_w / 2, top / 2 + 6, plot.title, size=14, anchor="middle", css_class="title")
    canvas.line([(left, top), (left, top + box_h), (left + box_w, top + box_h)], css_class="axis")
    _decade_ticks(canvas, x_range, lambda d: to_px(d, y_range[0]), horizontal=True)
    _decade_ticks(canvas, y_range, lambda d: to_px(x_range[0], d), horizontal=False)
    canvas.text(left + box_w / 2, height - 10, plot.x_label, anchor="middle", css_class="axis-label")
    if plot.y_label:
        canvas.text(12, top - 10, plot.y_label, css_class="axis-label")

    legend_y = top + 10
    for ref in plot.reference_lines:
        segment = _clip_reference(ref.power, x_range, y_range)
        if segment is None:
            continue
        canvas.line([to_px(*segment[0]), to_px(*segment[1])], color="#555555", dash="4,3", css_class="reference")
        canvas.text(left + box_w + 12, legend_y, ref.caption, size=11, css_class="reference-label")
        legend_y += 16

    for index, series in enumerate(plot.series):
        color = PALETTE[index % len(PALETTE)]
        for x, y in series.points:
            if _plottable((x, y)):
                canvas.circle(*to_px(math.log10(x), math.log10(y)), 3.0, color)
        canvas.rect(left + box_w + 12, legend_y - 8, 8, 8, color, stroke=color, css_class="legend-swatch")
        canvas.text(left + box_w + 26, legend_y, series.name, size=11, css_class="legend")
        legend_y += 16

    if path is not None:
        canvas.save(path)
    return canvas.render()


def _plottable(point: tuple[float, float]) -> bool:
    x, y = point
    return math.isfinite(x) and math.isfinite(y) and x > 0 and y > 0


def _decade_ticks(canvas: SvgCanvas, decades: tuple[int, int], place, *, horizontal: bool) -> None:
    span = decades[1] - decades[0]
    step = 1 if span <= 12 else 2
    for d in range(decades[0], decades[1] + 1, step):
        px, py = place(d)
        if horizontal:
            canvas.line([(px, py), (px, py + 5)], css_class="tick")
            canvas.text(px, py + 18, f"1e{d}", size=10, anchor="middle", css_class="tick-label")
        else:
            canvas.line([(px - 5, py), (px, py)], css_class="tick")
            canvas.text(px - 8, py + 4, f"1e{d}", size=10, anchor="end", css_class="tick-label")


def _heat_color(value: float) -> str:
    # log10 bins from 1e-16 (green) to 1e0 and above (red)
    exponent = min(max(round(math.log10(value)) if value > 0 else -16, -16), 0)
    hue = 120.0 * (1.0 - (exponent + 16) / 16.0)
    return f"hsl({hue:.0f},70%,50%)"


def emit_heatmap_svg(grid: HeatmapGrid, path: Path | None = None) -> str:
    cell_w, cell_h = 64.0, 24.0
    left, top = 120.0, 110.0
    width = int(left + cell_w * len(grid.col_labels) + 20)
    height = int(top + cell_h * len(grid.row_labels) + 20)

    canvas = SvgCanvas(width, height)
    canvas.text(10, 20, grid.title, size=14, css_class="title")
    for j, label in enumerate(grid.col_labels):
        x = left + j * cell_w + cell_w / 2
        canvas.commands.append(
            f'<text class="col-label" x="{x:.2f}" y="{top - 6:.2f}" font-size="10" '
            f'font-family="sans-serif" transform="rotate(-60 {x:.2f} {top - 6:.2f})">{escape(label)}</text>'
        )
    for i, label in enumerate(grid.row_labels):
        y = top + i * cell_h
        canvas.text(left - 6, y + cell_h / 2 + 4, label, size=10, anchor="end", css_class="row-label")
        for j, value in enumerate(grid.values[i]):
            x = left + j * cell_w
            reason = grid.reasons[i][j]
            if reason is not None or not math.isfinite(value):
                canvas.rect(x, y, cell_w, cell_h, "#bdbdbd")
                canvas.text(x + cell_w / 2, y + cell_h / 2 + 4, REASON_CODES.get(reason or "", "nan"), size=9, anchor="middle", css_class="cell-text")
                continue
            canvas.rect(x, y, cell_w, cell_h, _heat_color(value))
            canvas.text(x + cell_w / 2, y + cell_h / 2 + 4, f"{value:.0e}", size=9, anchor="middle", css_class="cell-text")

    if path is not None:
        canvas.save(path)
    return canvas.render()
