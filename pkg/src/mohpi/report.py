"""Analysis reports: the JSON document and static SVG charts.

The SVG writers are deterministic: no timestamps, no random ids, colors picked
by hyperparameter order.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence
from xml.sax.saxutils import escape, quoteattr

from mohpi import __version__
from mohpi.ablation import AblationPath
from mohpi.errors import ValidationError
from mohpi.fanova import ImportanceCurve
from mohpi.forest import ForestParams
from mohpi.pareto import WeightVector

SCHEMA_VERSION = 1
METHODS = ("mo-fanova", "mo-ablation")

PALETTE = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
]
BASE_COLOR = "#4c72b0"


@dataclass
class AnalysisReport:
    method: str
    metadata: Dict[str, Any]
    weights: List[WeightVector]
    forest_params: ForestParams
    seed: int
    curves: List[ImportanceCurve] = field(default_factory=list)
    paths: List[AblationPath] = field(default_factory=list)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"unknown method {self.method!r}")

    def to_dict(self) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "method": self.method,
            "metadata": self.metadata,
            "weights": [w.to_dict() for w in self.weights],
        }
        if self.method == "mo-fanova":
            out["curves"] = [c.to_dict() for c in self.curves]
        else:
            out["paths"] = [p.to_dict() for p in self.paths]
        out["forest_params"] = self.forest_params.to_dict()
        out["seed"] = self.seed
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "AnalysisReport":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValidationError(f"unsupported report schema version {d.get('schema_version')!r}")
        try:
            weights = [WeightVector.from_dict(w) for w in d["weights"]]
            w1 = [w.w1 for w in weights]
            curves = [ImportanceCurve.from_dict(c, w1) for c in d.get("curves", [])]
            paths = [AblationPath.from_dict(p) for p in d.get("paths", [])]
            return cls(d["method"], d["metadata"], weights, ForestParams.from_dict(d["forest_params"]),
                       d["seed"], curves, paths)
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed report: {exc}") from exc


def render_json(report: AnalysisReport) -> str:
    return json.dumps(report.to_dict(), indent=2) + "\n"


def parse_json(text: str) -> AnalysisReport:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid report JSON: {exc}") from exc
    return AnalysisReport.from_dict(doc)


def build_metadata(dataset: str, space: str, objectives: Sequence[str], **extra) -> Dict[str, Any]:
    meta = {"dataset": dataset, "space": space, "objectives": list(objectives), "tool_version": __version__}
    meta.update(extra)
    return meta


# --- SVG ---------------------------------------------------------------------

WIDTH, HEIGHT = 760, 440
LEFT, RIGHT, TOP, BOTTOM = 64, 200, 36, 56


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".") if v == v else "nan"


def _nice_ticks(lo: float, hi: float, n: int = 5) -> List[float]:
    span = hi - lo
    raw = span / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=raw)
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * span:
        ticks.append(round(t, 10))
        t += step
    return ticks


class _Canvas:
    def __init__(self, title: str, xlabel: str, ylabel: str, y_lo: float, y_hi: float):
        self.y_lo, self.y_hi = y_lo, y_hi
        self.pw = WIDTH - LEFT - RIGHT
        self.ph = HEIGHT - TOP - BOTTOM
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
            f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<text x="{LEFT + self.pw / 2:.2f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        ]
        self._axes(xlabel, ylabel)

    def x(self, w1: float) -> float:
        return LEFT + w1 * self.pw

    def y(self, v: float) -> float:
        return TOP + (self.y_hi - v) / (self.y_hi - self.y_lo) * self.ph

    def _axes(self, xlabel: str, ylabel: str):
        p = self.parts
        bottom = TOP + self.ph
        for t in _nice_ticks(0.0, 1.0):
            x = self.x(t)
            p.append(f'<line x1="{x:.2f}" y1="{bottom}" x2="{x:.2f}" y2="{bottom + 5}" stroke="black"/>')
            p.append(f'<text x="{x:.2f}" y="{bottom + 18}" text-anchor="middle">{_fmt(t)}</text>')
        for t in _nice_ticks(self.y_lo, self.y_hi):
            y = self.y(t)
            p.append(f'<line class="grid" x1="{LEFT}" y1="{y:.2f}" x2="{LEFT + self.pw}" y2="{y:.2f}" stroke="#e0e0e0"/>')
            p.append(f'<text x="{LEFT - 8}" y="{y + 4:.2f}" text-anchor="end">{_fmt(t)}</text>')
        p.append(f'<line x1="{LEFT}" y1="{bottom}" x2="{LEFT + self.pw}" y2="{bottom}" stroke="black"/>')
        p.append(f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{bottom}" stroke="black"/>')
        p.append(f'<text x="{LEFT + self.pw / 2:.2f}" y="{HEIGHT - 14}" text-anchor="middle">{escape(xlabel)}</text>')
        p.append(
            f'<text x="16" y="{TOP + self.ph / 2:.2f}" text-anchor="middle" '
            f'transform="rotate(-90 16 {TOP + self.ph / 2:.2f})">{escape(ylabel)}</text>'
        )

    def legend(self, entries: Sequence[tuple]):
        x0 = LEFT + self.pw + 16
        for i, (name, color) in enumerate(entries):
            y = TOP + 8 + 18 * i
            self.parts.append(
                f'<g class="legend-entry" data-hp={quoteattr(name)}>'
                f'<rect x="{x0}" y="{y - 9}" width="12" height="12" fill="{color}"/>'
                f'<text x="{x0 + 18}" y="{y + 1}">{escape(name)}</text></g>'
            )

    def finish(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def render_fanova_svg(curves: Sequence[ImportanceCurve], title: str = "MO-fANOVA",
                      xlabel: str = "weight w1 of objective 1") -> str:
    """Line chart of importance against ``w1``, one line per hyperparameter."""
    curves = list(curves)
    if not curves:
        raise ValidationError("nothing to plot")
    top = max([v for c in curves for v in c.importance] + [0.0])
    y_hi = max(0.1, math.ceil(top * 10 - 1e-9) / 10)
    canvas = _Canvas(title, xlabel, "importance (variance fraction)", 0.0, y_hi)
    entries = []
    for i, c in enumerate(curves):
        color = PALETTE[i % len(PALETTE)]
        dash = "" if i < len(PALETTE) else ' stroke-dasharray="5,3"'
        pts = " ".join(f"{canvas.x(w):.2f},{canvas.y(v):.2f}" for w, v in zip(c.w1, c.importance))
        canvas.parts.append(
            f'<polyline class="curve" data-hp={quoteattr(c.hyperparameter)} points="{pts}" '
            f'fill="none" stroke="{color}" stroke-width="2"{dash}/>'
        )
        for w, v in zip(c.w1, c.importance):
            canvas.parts.append(f'<circle cx="{canvas.x(w):.2f}" cy="{canvas.y(v):.2f}" r="2.5" fill="{color}"/>')
        entries.append((c.hyperparameter, color))
    canvas.legend(entries)
    return canvas.finish()


def ablation_bands(paths: Sequence[AblationPath], order: Optional[Sequence[str]] = None):
    """Stacking data for the ablation chart.

    Returns ``(w1, base, bands, negatives)``: the base band is ``1 - default
    performance``; ``bands`` maps each hyperparameter with any positive delta to
    its per-weighting positive contribution; ``negatives`` lists
    ``(w1, hyperparameter, delta)`` for every negative delta.
    """
    paths = sorted(paths, key=lambda p: p.weight.w1)
    names = list(order or [])
    for p in paths:
        for s in p.steps:
            if s.hyperparameter not in names:
                names.append(s.hyperparameter)
    w1 = [p.weight.w1 for p in paths]
    base = [1.0 - p.default_performance for p in paths]
    bands: Dict[str, List[float]] = {}
    negatives = []
    for name in names:
        row = []
        for p in paths:
            contrib = 0.0
            for s in p.steps:
                if s.hyperparameter == name:
                    if s.delta > 0:
                        contrib += s.delta
                    elif s.delta < 0:
                        negatives.append((p.weight.w1, name, s.delta))
            row.append(contrib)
        if any(v > 0 for v in row):
            bands[name] = row
    negatives.sort()
    return w1, base, bands, negatives


def render_ablation_svg(paths: Sequence[AblationPath], order: Optional[Sequence[str]] = None,
                        title: str = "MO-ablation", xlabel: str = "weight w1 of objective 1") -> str:
    """Stacked chart of ``1 - weighted cost``: default band plus one band per
    hyperparameter's improvement. Negative deltas go to a side table."""
    if not paths:
        raise ValidationError("nothing to plot")
    w1, base, bands, negatives = ablation_bands(paths, order)
    tops = list(base)
    for row in bands.values():
        tops = [t + v for t, v in zip(tops, row)]
    lo_v, hi_v = min(base), max(tops)
    span = hi_v - lo_v
    pad = 0.05 * span if span > 0 else 0.05
    y_lo, y_hi = lo_v - pad, hi_v + pad
    canvas = _Canvas(title, xlabel, "performance (1 - weighted cost)", y_lo, y_hi)

    xs = list(w1)
    if len(xs) == 1:
        xs = [max(0.0, xs[0] - 0.02), min(1.0, xs[0] + 0.02)]
        widen = lambda row: [row[0], row[0]]
    else:
        widen = lambda row: list(row)

    def band(name, lower, upper, color):
        data = " ".join(repr(float(v)) for v in upper)
        lower, upper = widen(lower), widen(upper)
        fwd = [f"{canvas.x(x):.2f},{canvas.y(v):.2f}" for x, v in zip(xs, upper)]
        back = [f"{canvas.x(x):.2f},{canvas.y(v):.2f}" for x, v in zip(reversed(xs), reversed(lower))]
        canvas.parts.append(
            f'<polygon class="band" data-hp={quoteattr(name)} data-upper="{data}" '
            f'points="{" ".join(fwd + back)}" fill="{color}" fill-opacity="0.85" stroke="none"/>'
        )

    floor = [y_lo] * len(w1)
    band("default", floor, base, BASE_COLOR)
    entries = [("default", BASE_COLOR)]
    running = list(base)
    for i, (name, row) in enumerate(bands.items()):
        upper = [r + v for r, v in zip(running, row)]
        color = PALETTE[(i + 1) % len(PALETTE)]
        band(name, running, upper, color)
        entries.append((name, color))
        running = upper
    canvas.legend(entries)

    if negatives:
        x0 = LEFT + canvas.pw + 16
        y0 = TOP + 18 * len(entries) + 24
        canvas.parts.append(f'<g class="negative-deltas"><text x="{x0}" y="{y0}" font-weight="bold">negative deltas</text>')
        for k, (w, name, delta) in enumerate(negatives):
            canvas.parts.append(
                f'<text class="negative-entry" x="{x0}" y="{y0 + 16 * (k + 1)}">'
                f'w1={_fmt(w)} {escape(name)}: {delta:.4g}</text>'
            )
        canvas.parts.append("</g>")
    return canvas.finish()


def render_svg(report: AnalysisReport) -> str:
    objectives = report.metadata.get("objectives") or ["objective 1"]
    xlabel = f"weight w1 of {objectives[0]}"
    if report.method == "mo-fanova":
        return render_fanova_svg(report.curves, xlabel=xlabel)
    order = report.metadata.get("hyperparameters")
    return render_ablation_svg(report.paths, order=order, xlabel=xlabel)
