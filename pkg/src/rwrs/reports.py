"""Check reports, verdict helpers and CSV/JSON/SVG emission."""

import csv
import io
import json
import math
import statistics
from dataclasses import asdict, dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

from .errors import UsageError

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


@dataclass
class Row:
    n: int
    observed: float
    target: float
    ratio: float
    key: str = None


def make_row(n, observed, target, key=None):
    """Row with ratio = observed / target (or observed when target is 0)."""
    observed, target = float(observed), float(target)
    ratio = observed / target if target != 0 else observed
    return Row(int(n), observed, target, ratio, key)


@dataclass
class CheckReport:
    check: str
    model: str
    params: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    verdict: str = INCONCLUSIVE
    runtime_ms: int = 0

    def __post_init__(self):
        self.rows = sorted(
            (r if isinstance(r, Row) else Row(**r) for r in self.rows),
            key=lambda r: (r.n, "" if r.key is None else str(r.key)),
        )

    def series(self, key=None):
        return [r for r in self.rows if r.key == key]

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, default=_jsonable)


class RunningMoments:
    """Count, mean and M2 with an associative merge (Chan et al.)."""

    def __init__(self, count=0, mean=0.0, m2=0.0):
        self.count, self.mean, self.m2 = count, mean, m2

    @classmethod
    def of(cls, values):
        acc = cls()
        for v in values:
            acc.push(v)
        return acc

    def push(self, x):
        self.merge_in(RunningMoments(1, float(x), 0.0))

    def merge_in(self, other):
        if other.count == 0:
            return self
        n = self.count + other.count
        delta = other.mean - self.mean
        self.mean += delta * other.count / n
        self.m2 += other.m2 + delta * delta * self.count * other.count / n
        self.count = n
        return self

    def merge(self, other):
        return RunningMoments(self.count, self.mean, self.m2).merge_in(other)

    @property
    def variance(self):
        return self.m2 / (self.count - 1) if self.count > 1 else 0.0


# -- verdict policies ---------------------------------------------------------


def band_trend_verdict(rows, band):
    """Final ratio inside ``band`` and |ratio - 1| not larger at the end.

    A single grid point gives no trend and is inconclusive.
    """
    if len(rows) < 2:
        return INCONCLUSIVE
    first, last = rows[0], rows[-1]
    lo, hi = band
    in_band = lo <= last.ratio <= hi
    improving = abs(last.ratio - 1.0) <= abs(first.ratio - 1.0)
    return PASS if in_band and improving else FAIL


def decreasing_verdict(rows, final_max=None, strict=False):
    """Observed values non-increasing (or strictly decreasing) along n."""
    if len(rows) < 2:
        return INCONCLUSIVE
    obs = [r.observed for r in rows]
    pairs = list(zip(obs, obs[1:]))
    ok = all(b < a for a, b in pairs) if strict else all(b <= a for a, b in pairs)
    if final_max is not None:
        ok = ok and obs[-1] <= final_max
    return PASS if ok else FAIL


def combine(verdicts):
    verdicts = list(verdicts)
    if FAIL in verdicts:
        return FAIL
    if verdicts and all(v == PASS for v in verdicts):
        return PASS
    return INCONCLUSIVE


def median(values):
    return statistics.median(values)


# -- emission -----------------------------------------------------------------

CSV_COLUMNS = ("check", "model", "n", "key", "observed", "target", "ratio", "verdict")


def reports_to_csv(reports):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rep in reports:
        for r in rep.rows:
            writer.writerow([rep.check, rep.model, r.n, "" if r.key is None else r.key,
                             repr(r.observed), repr(r.target), repr(r.ratio), rep.verdict])
    return buf.getvalue()


def reports_to_json(reports):
    return json.dumps([r.to_dict() for r in reports], sort_keys=True, indent=2,
                      default=_jsonable)


def reports_from_json(text):
    return [CheckReport.from_dict(d) for d in json.loads(text)]


def reports_to_svg(reports, width=640, height=400):
    """One polyline per check: log10 n on x, ratio on y, target line at 1."""
    pad = 50
    pts = [(math.log10(r.n), r.ratio) for rep in reports for r in rep.rows if r.n > 0]
    xs = [p[0] for p in pts] or [0.0, 1.0]
    ys = [p[1] for p in pts] + [1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    y0, y1 = y0 - 0.05 * (y1 - y0), y1 + 0.05 * (y1 - y0)

    def sx(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<line class="target" x1="{pad}" y1="{sy(1.0):.2f}" x2="{width - pad}" '
        f'y2="{sy(1.0):.2f}" stroke="gray" stroke-dasharray="4,4"/>',
        f'<text x="{width / 2}" y="{height - 10}" text-anchor="middle">log10 n</text>',
        f'<text x="12" y="{height / 2}" transform="rotate(-90 12 {height / 2})" '
        'text-anchor="middle">ratio</text>',
    ]
    for i, rep in enumerate(reports):
        coords = " ".join(f"{sx(math.log10(r.n)):.2f},{sy(r.ratio):.2f}"
                          for r in rep.rows if r.n > 0)
        label = escape(f"{rep.check} [{rep.model}] {rep.verdict}")
        color = colors[i % len(colors)]
        parts.append(f'<polyline fill="none" stroke="{color}" points="{coords}">'
                     f"<title>{label}</title></polyline>")
        parts.append(f'<text x="{pad + 5}" y="{pad / 2 + 14 * i}" fill="{color}">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_report(reports, fmt, path=None):
    """Render ``reports`` as csv, json or svg; write to ``path`` if given."""
    reports = list(reports)
    if not reports:
        raise UsageError("no reports to emit")
    render = {"csv": reports_to_csv, "json": reports_to_json, "svg": reports_to_svg}
    if fmt not in render:
        raise UsageError(f"unknown report format {fmt!r}")
    text = render[fmt](reports)
    if path is not None:
        Path(path).write_text(text)
    return text


def _jsonable(obj):
    if hasattr(obj, "item"):
        return obj.item()
    if isinstance(obj, (set, tuple)):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")
