"""Deterministic SVG bar-chart renderer with exact geometry.

The renderer is the single source of truth for chart geometry: bar
rectangles, tick-label bounding boxes, and axis lines.  Rule checks and
hand-crafted layout metrics consume the geometry, the labeling UI
consumes the SVG text, and both views agree by construction.

Text metrics use a fixed-width approximation: every character advances
0.6 em, with the font size scaling as 11 px per 300 px of canvas height.
Because all other margins scale the same way, uniform canvas scaling
scales the geometry linearly and leaves rule verdicts unchanged.  Label
boxes are clipped to the canvas, mirroring SVG viewport clipping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

from .params import LayoutParams

# Layout constants, expressed per pixel of canvas height (reference 300 px).
FONT_RATIO = 11.0 / 300.0
CHAR_ADVANCE_EM = 0.6
TICK_GAP_RATIO = 4.0 / 300.0
PAD_RATIO = 10.0 / 300.0

BAR_FILL = "#4c78a8"
AXIS_STROKE = "#333333"

# Box = (x0, y0, x1, y1) with x0 <= x1, y0 <= y1.
Box = tuple[float, float, float, float]


@dataclass(frozen=True)
class ChartData:
    """Categories and nonnegative values; one bar per category."""

    categories: tuple[str, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "categories", tuple(self.categories))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.categories) != len(self.values):
            raise ValueError(
                f"{len(self.categories)} categories vs {len(self.values)} values"
            )
        for v in self.values:
            if not math.isfinite(v):
                raise ValueError(f"non-finite value {v!r}")
            if v < 0:
                raise ValueError(f"negative value {v!r}")

    def to_dict(self) -> dict:
        return {"categories": list(self.categories), "values": list(self.values)}

    @classmethod
    def from_dict(cls, d: dict) -> "ChartData":
        return cls(categories=tuple(d["categories"]), values=tuple(d["values"]))


@dataclass
class RenderedChart:
    """Geometry plus the SVG text produced from it."""

    width: float
    height: float
    plot: Box
    bars: list[Box]
    labels: list[Box]
    axes: list[tuple[float, float, float, float]]
    band_step: float
    orientation: str
    svg: str

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "plot": list(self.plot),
            "bars": [list(b) for b in self.bars],
            "labels": [list(b) for b in self.labels],
            "axes": [list(a) for a in self.axes],
            "band_step": self.band_step,
            "orientation": self.orientation,
        }


def box_area(b: Box) -> float:
    return max(0.0, b[2] - b[0]) * max(0.0, b[3] - b[1])


def box_intersection_area(a: Box, b: Box) -> float:
    w = min(a[2], b[2]) - max(a[0], b[0])
    h = min(a[3], b[3]) - max(a[1], b[1])
    return w * h if (w > 0 and h > 0) else 0.0


def _rotate_corners(corners, angle_deg: float):
    """Rotate screen-space points about the origin.

    Positive angles turn the same way as the SVG ``rotate(-angle)`` used
    for tick labels (label text tilts down-and-left in a y-down frame).
    """
    a = math.radians(angle_deg)
    c, s = math.cos(a), math.sin(a)
    return [(x * c + y * s, -x * s + y * c) for x, y in corners]


def _label_offsets(w: float, h: float, rotation: int, orientation: str) -> Box:
    """AABB of one tick label relative to its anchor point.

    Vertical charts anchor labels below the x-axis; at 0 degrees the box
    hangs centered under the anchor, rotated labels are end-anchored
    (classic tilted-tick convention).  Horizontal charts anchor labels
    left of the y-axis, right-aligned and vertically centered.
    """
    if orientation == "vertical":
        if rotation == 0:
            corners = [(-w / 2, 0.0), (w / 2, 0.0), (w / 2, h), (-w / 2, h)]
        elif rotation == 90:
            corners = [(-h / 2, 0.0), (h / 2, 0.0), (h / 2, w), (-h / 2, w)]
        else:
            base = [(-w, 0.0), (0.0, 0.0), (0.0, h), (-w, h)]
            corners = _rotate_corners(base, rotation)
    else:
        base = [(-w, -h / 2), (0.0, -h / 2), (0.0, h / 2), (-w, h / 2)]
        corners = base if rotation == 0 else _rotate_corners(base, rotation)
    xs = [p[0] for p in corners]
    ys = [p[1] for p in corners]
    return (min(xs), min(ys), max(xs), max(ys))


def _clip(b: Box, width: float, height: float) -> Box:
    x0 = min(max(b[0], 0.0), width)
    y0 = min(max(b[1], 0.0), height)
    x1 = min(max(b[2], 0.0), width)
    y1 = min(max(b[3], 0.0), height)
    return (x0, y0, max(x0, x1), max(y0, y1))


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def render(
    data: ChartData, params: LayoutParams, base_height_px: int = 300
) -> RenderedChart:
    """Render a bar chart deterministically; identical inputs give identical bytes.

    Canvas width is ``base_height_px * aspect_ratio``.  Vertical charts
    place category bands on the x-axis, horizontal charts on the y-axis.
    The longest bar spans the full plot extent.  Labels are truncated to
    ``max_label_length`` before layout.
    """
    if base_height_px <= 0:
        raise ValueError(f"base_height_px must be positive, got {base_height_px}")
    n = params.num_bars
    if len(data.values) != n:
        raise ValueError(f"data has {len(data.values)} entries but num_bars={n}")

    H = float(base_height_px)
    W = H * params.aspect_ratio
    font = H * FONT_RATIO
    char_adv = CHAR_ADVANCE_EM * font
    tick_gap = H * TICK_GAP_RATIO
    pad = H * PAD_RATIO

    texts = [c[: params.max_label_length] for c in data.categories]
    sizes = [(len(t) * char_adv, font) for t in texts]
    offsets = [
        _label_offsets(w, h, params.label_rotation, params.orientation)
        for w, h in sizes
    ]

    vertical = params.orientation == "vertical"
    min_plot = H / 300.0  # plot-extent floor; scales with the canvas
    if vertical:
        label_extent = max(o[3] for o in offsets)  # below the axis
        left, right, top = pad, pad, pad
        bottom = tick_gap + label_extent
    else:
        label_extent = max(-o[0] for o in offsets)  # left of the axis
        left = tick_gap + label_extent
        right, top, bottom = pad, pad, pad
        left = min(left, max(0.0, W - right - min_plot))

    plot: Box = (
        left,
        top,
        max(left + min_plot, W - right),
        max(top + min_plot, H - bottom),
    )
    plot_w = plot[2] - plot[0]
    plot_h = plot[3] - plot[1]

    vmax = max(data.values) if data.values else 0.0
    scale = (plot_h if vertical else plot_w) / vmax if vmax > 0 else 0.0

    bars: list[Box] = []
    anchors: list[tuple[float, float]] = []
    if vertical:
        step = plot_w / n
        thickness = params.bandwidth * step
        for i, v in enumerate(data.values):
            cx = plot[0] + (i + 0.5) * step
            length = v * scale
            bars.append((cx - thickness / 2, plot[3] - length, cx + thickness / 2, plot[3]))
            anchors.append((cx, plot[3] + tick_gap))
    else:
        step = plot_h / n
        thickness = params.bandwidth * step
        for i, v in enumerate(data.values):
            cy = plot[1] + (i + 0.5) * step
            length = v * scale
            bars.append((plot[0], cy - thickness / 2, plot[0] + length, cy + thickness / 2))
            anchors.append((plot[0] - tick_gap, cy))

    labels = [
        _clip(
            (ax + o[0], ay + o[1], ax + o[2], ay + o[3]),
            W,
            H,
        )
        for (ax, ay), o in zip(anchors, offsets)
    ]

    if vertical:
        axes = [
            (plot[0], plot[3], plot[2], plot[3]),  # category axis (x)
            (plot[0], plot[1], plot[0], plot[3]),  # value axis (y)
        ]
    else:
        axes = [
            (plot[0], plot[1], plot[0], plot[3]),  # category axis (y)
            (plot[0], plot[3], plot[2], plot[3]),  # value axis (x)
        ]

    svg = _emit_svg(W, H, bars, axes, anchors, texts, params, font)
    return RenderedChart(
        width=W,
        height=H,
        plot=plot,
        bars=bars,
        labels=labels,
        axes=axes,
        band_step=step,
        orientation=params.orientation,
        svg=svg,
    )


def _emit_svg(W, H, bars, axes, anchors, texts, params: LayoutParams, font) -> str:
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(W)}" '
        f'height="{_fmt(H)}" viewBox="0 0 {_fmt(W)} {_fmt(H)}">'
    ]
    for x0, y0, x1, y1 in bars:
        lines.append(
            f'<rect x="{_fmt(x0)}" y="{_fmt(y0)}" width="{_fmt(x1 - x0)}" '
            f'height="{_fmt(y1 - y0)}" fill="{BAR_FILL}"/>'
        )
    for x0, y0, x1, y1 in axes:
        lines.append(
            f'<line x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x1)}" '
            f'y2="{_fmt(y1)}" stroke="{AXIS_STROKE}" stroke-width="1"/>'
        )
    rot = params.label_rotation
    vertical = params.orientation == "vertical"
    for (ax, ay), text in zip(anchors, texts):
        if vertical:
            if rot == 0:
                attrs = (
                    f'x="{_fmt(ax)}" y="{_fmt(ay)}" text-anchor="middle" '
                    f'dominant-baseline="hanging"'
                )
            elif rot == 90:
                attrs = (
                    f'transform="translate({_fmt(ax)},{_fmt(ay)}) rotate(90)" '
                    f'text-anchor="start" dominant-baseline="central"'
                )
            else:
                attrs = (
                    f'transform="translate({_fmt(ax)},{_fmt(ay)}) rotate(-{rot})" '
                    f'text-anchor="end" dominant-baseline="hanging"'
                )
        else:
            if rot == 0:
                attrs = (
                    f'x="{_fmt(ax)}" y="{_fmt(ay)}" text-anchor="end" '
                    f'dominant-baseline="central"'
                )
            else:
                attrs = (
                    f'transform="translate({_fmt(ax)},{_fmt(ay)}) rotate(-{rot})" '
                    f'text-anchor="end" dominant-baseline="central"'
                )
        lines.append(
            f'<text {attrs} font-family="monospace" '
            f'font-size="{_fmt(font)}">{escape(text)}</text>'
        )
    lines.append("</svg>")
    return "\n".join(lines)


# Rule reasons.
REASON_ROTATED_HORIZONTAL = "rotated-horizontal"
REASON_LABEL_OVERLAP = "label-overlap"

_OVERLAP_EPS = 1e-9


def desk_reject(
    chart: RenderedChart, params: LayoutParams, experiment: str = "exp2"
) -> str | None:
    """Hard-rule verdict: ``None`` passes, otherwise the violated rule's name.

    Two rules, active only for exp2 grids: tick labels must not overlap
    with positive area, and a horizontal chart must not rotate its
    labels.  exp1 charts always pass.
    """
    if experiment == "exp1":
        return None
    if params.orientation == "horizontal" and params.label_rotation != 0:
        return REASON_ROTATED_HORIZONTAL
    boxes = [b for b in chart.labels if box_area(b) > 0.0]
    order = sorted(range(len(boxes)), key=lambda i: boxes[i][0])
    for pos, i in enumerate(order):
        for j in order[pos + 1 :]:
            if boxes[j][0] >= boxes[i][2]:
                break
            if box_intersection_area(boxes[i], boxes[j]) > _OVERLAP_EPS:
                return REASON_LABEL_OVERLAP
    return None
