"""Self-contained SVG figures: eigenvalue scatter, QQ plot, variance trend.

The drawing code is deliberately small and dependency-free: every file
is deterministic text (fixed float formatting, no timestamps) carrying
the same version / master-seed / config-hash stamp as the data files,
in an XML comment.
"""

from __future__ import annotations

import math
import os

import numpy as np

from .config import ExperimentConfig
from .errors import SchemaError
from .harness import estimate_moments, stack_records
from .oracles import limit_covariance_quadrature

SCATTER_NAME = "scatter.svg"
QQ_NAME = "qq.svg"
TREND_NAME = "variance_trend.svg"

_POINT_STYLE = 'fill="#1f6fb2" fill-opacity="0.72" stroke="none"'
_AXIS_STYLE = 'stroke="#333333" stroke-width="1" fill="none"'
_GUIDE_STYLE = 'stroke="#888888" stroke-width="1" fill="none" stroke-dasharray="4 3"'
_TEXT_STYLE = 'font-family="monospace" font-size="12" fill="#222222"'


def _fmt(x: float) -> str:
    return format(float(x), ".6g")


def _svg(width: int, height: int, body, stamp: str) -> str:
    head = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f"<!-- {stamp} -->",
        f'<rect x="0" y="0" width="{width}" height="{height}" '
        'fill="#ffffff"/>',
    ]
    return "\n".join(head + list(body) + ["</svg>"]) + "\n"


def _stamp(master_seed: int, cfg_hash: str) -> str:
    from .records import VERSION_STRING
    return (f"version = {VERSION_STRING}; master_seed = {master_seed}; "
            f"config_hash = {cfg_hash}")


class _Frame:
    """Maps data coordinates into a pixel rectangle (y axis flipped)."""

    def __init__(self, width, height, x_range, y_range, margin=52):
        self.width = width
        self.height = height
        self.margin = margin
        self.x0, self.x1 = x_range
        self.y0, self.y1 = y_range

    def px(self, x: float) -> float:
        w = self.width - 2 * self.margin
        return self.margin + (x - self.x0) / (self.x1 - self.x0) * w

    def py(self, y: float) -> float:
        h = self.height - 2 * self.margin
        return self.height - self.margin - (y - self.y0) / (self.y1 - self.y0) * h

    def frame_rect(self) -> str:
        w = self.width - 2 * self.margin
        h = self.height - 2 * self.margin
        return (f'<rect x="{self.margin}" y="{self.margin}" width="{w}" '
                f'height="{h}" {_AXIS_STYLE}/>')

    def x_ticks(self, values, fmt=_fmt):
        out = []
        y = self.height - self.margin
        for v in values:
            x = self.px(v)
            out.append(f'<line x1="{_fmt(x)}" y1="{_fmt(y)}" '
                       f'x2="{_fmt(x)}" y2="{_fmt(y + 5)}" {_AXIS_STYLE}/>')
            out.append(f'<text x="{_fmt(x)}" y="{_fmt(y + 18)}" '
                       f'text-anchor="middle" {_TEXT_STYLE}>{fmt(v)}</text>')
        return out

    def y_ticks(self, values, fmt=_fmt):
        out = []
        x = self.margin
        for v in values:
            y = self.py(v)
            out.append(f'<line x1="{_fmt(x - 5)}" y1="{_fmt(y)}" '
                       f'x2="{_fmt(x)}" y2="{_fmt(y)}" {_AXIS_STYLE}/>')
            out.append(f'<text x="{_fmt(x - 8)}" y="{_fmt(y + 4)}" '
                       f'text-anchor="end" {_TEXT_STYLE}>{fmt(v)}</text>')
        return out

    def title(self, text: str) -> str:
        return (f'<text x="{self.margin}" y="{self.margin - 12}" '
                f'{_TEXT_STYLE}>{text}</text>')


def eigenvalue_scatter(values, n: int, law_name: str, master_seed: int,
                       cfg_hash: str) -> str:
    """Scatter of one replicate's spectrum with the unit circle overlaid."""
    values = np.asarray(values, dtype=np.complex128)
    if values.size == 0:
        raise SchemaError("empty spectrum, no scatter figure")
    lim = max(1.3, float(np.abs(values).max()) * 1.05)
    frame = _Frame(480, 480, (-lim, lim), (-lim, lim))
    body = [frame.frame_rect(),
            frame.title(f"spectrum n={n} replicate 0 law={law_name}")]
    cx, cy = frame.px(0.0), frame.py(0.0)
    r_px = frame.px(1.0) - frame.px(0.0)
    body.append(f'<line x1="{_fmt(frame.px(-lim))}" y1="{_fmt(cy)}" '
                f'x2="{_fmt(frame.px(lim))}" y2="{_fmt(cy)}" {_GUIDE_STYLE}/>')
    body.append(f'<line x1="{_fmt(cx)}" y1="{_fmt(frame.py(-lim))}" '
                f'x2="{_fmt(cx)}" y2="{_fmt(frame.py(lim))}" {_GUIDE_STYLE}/>')
    body.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{_fmt(r_px)}" '
                'fill="none" stroke="#c0392b" stroke-width="1.5"/>')
    for lam in values:
        body.append(f'<circle cx="{_fmt(frame.px(lam.real))}" '
                    f'cy="{_fmt(frame.py(lam.imag))}" r="1.6" '
                    f'{_POINT_STYLE}/>')
    body.extend(frame.x_ticks([-1.0, 0.0, 1.0]))
    body.extend(frame.y_ticks([-1.0, 0.0, 1.0]))
    return _svg(480, 480, body, _stamp(master_seed, cfg_hash))


# --- normal quantiles (rational approximation + one Halley step) ---------

_NQ_A = (-3.969683028665376e+01, 2.209460984245205e+02,
         -2.759285104469687e+02, 1.383577518672690e+02,
         -3.066479806614716e+01, 2.506628277459239e+00)
_NQ_B = (-5.447609879822406e+01, 1.615858368580409e+02,
         -1.556989798598866e+02, 6.680131188771972e+01,
         -1.328068155288572e+01)
_NQ_C = (-7.784894002430293e-03, -3.223964580411365e-01,
         -2.400758277161838e+00, -2.549732539343734e+00,
         4.374664141464968e+00, 2.938163982698783e+00)
_NQ_D = (7.784695709041462e-03, 3.224671290700398e-01,
         2.445134137142996e+00, 3.754408661907416e+00)


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF, accurate to ~1e-15.

    Rational initial guess refined by one Halley step on the CDF
    residual (the CDF itself comes from math.erfc).
    """
    if not 0.0 < p < 1.0:
        raise ValueError("quantile argument must lie strictly in (0, 1)")
    a, b, c, d = _NQ_A, _NQ_B, _NQ_C, _NQ_D
    p_low = 0.02425
    if p < p_low:
        q = math.sqrt(-2.0 * math.log(p))
        x = ((((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q
              + c[5])
             / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0))
    elif p <= 1.0 - p_low:
        q = p - 0.5
        r = q * q
        x = ((((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r
              + a[5]) * q
             / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r
                + 1.0))
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -((((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q
               + c[5])
              / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0))
    err = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    u = err * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def qq_points(values):
    """(normal quantiles, ordered standardized sample) for a QQ plot."""
    x = np.asarray(values, dtype=np.float64)
    if x.size < 2:
        raise SchemaError("QQ plot needs at least two values")
    sd = float(x.std())
    if sd == 0.0:
        raise SchemaError("QQ plot input is constant")
    ordered = np.sort((x - float(x.mean())) / sd)
    n = x.size
    theo = np.array([normal_quantile((i + 0.5) / n) for i in range(n)])
    return theo, ordered


def qq_figure(values, label: str, master_seed: int, cfg_hash: str) -> str:
    theo, ordered = qq_points(values)
    lim = max(float(np.abs(theo).max()), float(np.abs(ordered).max())) * 1.08
    frame = _Frame(480, 480, (-lim, lim), (-lim, lim))
    body = [frame.frame_rect(),
            frame.title(f"QQ vs normal: {label} ({theo.size} samples)")]
    body.append(f'<line x1="{_fmt(frame.px(-lim))}" '
                f'y1="{_fmt(frame.py(-lim))}" x2="{_fmt(frame.px(lim))}" '
                f'y2="{_fmt(frame.py(lim))}" {_GUIDE_STYLE}/>')
    for tx, ty in zip(theo, ordered):
        body.append(f'<circle cx="{_fmt(frame.px(tx))}" '
                    f'cy="{_fmt(frame.py(ty))}" r="1.8" {_POINT_STYLE}/>')
    ticks = [-2.0, 0.0, 2.0]
    body.extend(frame.x_ticks(ticks))
    body.extend(frame.y_ticks(ticks))
    return _svg(480, 480, body, _stamp(master_seed, cfg_hash))


def variance_trend(points, theory: float, label: str, master_seed: int,
                   cfg_hash: str) -> str:
    """points: (n, variance, se) triples; draws +-2 SE bars and the limit."""
    if not points:
        raise SchemaError("variance trend needs at least one dimension")
    ns = [p[0] for p in points]
    lo = min(min(p[1] - 2.0 * p[2] for p in points), theory)
    hi = max(max(p[1] + 2.0 * p[2] for p in points), theory)
    pad = 0.1 * max(hi - lo, 1e-3)
    xs = [math.log2(n) for n in ns]
    x0, x1 = min(xs), max(xs)
    if x0 == x1:
        x0, x1 = x0 - 0.5, x1 + 0.5
    frame = _Frame(560, 400, (x0 - 0.3, x1 + 0.3), (lo - pad, hi + pad))
    body = [frame.frame_rect(),
            frame.title(f"variance of {label} vs n (bars: 2 SE)")]
    y_t = frame.py(theory)
    body.append(f'<line x1="{_fmt(frame.px(x0 - 0.3))}" y1="{_fmt(y_t)}" '
                f'x2="{_fmt(frame.px(x1 + 0.3))}" y2="{_fmt(y_t)}" '
                'stroke="#c0392b" stroke-width="1.5" '
                'stroke-dasharray="6 3"/>')
    body.append(f'<text x="{_fmt(frame.px(x1 + 0.3) - 4)}" '
                f'y="{_fmt(y_t - 6)}" text-anchor="end" {_TEXT_STYLE}>'
                f'limit {_fmt(theory)}</text>')
    for n, v, se in points:
        x = frame.px(math.log2(n))
        body.append(f'<line x1="{_fmt(x)}" y1="{_fmt(frame.py(v - 2 * se))}" '
                    f'x2="{_fmt(x)}" y2="{_fmt(frame.py(v + 2 * se))}" '
                    'stroke="#1f6fb2" stroke-width="1.5"/>')
        for yv in (v - 2 * se, v + 2 * se):
            body.append(f'<line x1="{_fmt(x - 4)}" y1="{_fmt(frame.py(yv))}" '
                        f'x2="{_fmt(x + 4)}" y2="{_fmt(frame.py(yv))}" '
                        'stroke="#1f6fb2" stroke-width="1.5"/>')
        body.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(frame.py(v))}" '
                    f'r="3" {_POINT_STYLE}/>')
        body.append(f'<text x="{_fmt(x)}" '
                    f'y="{_fmt(frame.py(lo - pad) + 18)}" '
                    f'text-anchor="middle" {_TEXT_STYLE}>{n}</text>')
    step = (hi - lo + 2 * pad) / 4.0
    body.extend(frame.y_ticks([lo - pad + k * step for k in range(5)],
                              fmt=lambda v: format(v, ".3g")))
    return _svg(560, 400, body, _stamp(master_seed, cfg_hash))


# --- record-driven emission ----------------------------------------------


def column_values(cfg: ExperimentConfig, records, key: str, n: int):
    """Real samples for a column key like f0.re, g2.im, or tr1.re."""
    name, _, component = key.partition(".")
    if component not in ("re", "im"):
        raise SchemaError(f"column '{key}': component must be re or im")
    ok = [rec for rec in records if rec.n == n and not rec.failed]
    if not ok:
        raise SchemaError(f"no usable replicates at n={n}")

    def pick(rec):
        if name.startswith("f"):
            idx = int(name[1:])
            if not 0 <= idx < len(cfg.functions):
                raise SchemaError(f"column '{key}': no such test function")
            return rec.statistics[idx]
        if name.startswith("tr"):
            s = int(name[2:])
            if not 1 <= s <= len(rec.trace_powers):
                raise SchemaError(f"column '{key}': trace power out of range")
            return rec.trace_powers[s - 1]
        if name.startswith("g"):
            idx = int(name[1:])
            if not 0 <= idx < len(cfg.z_grid):
                raise SchemaError(f"column '{key}': no such grid point")
            return rec.resolvent.values[idx]
        raise SchemaError(f"column '{key}': unknown field "
                          "(expected f<i>, g<j>, or tr<s>)")

    try:
        vals = np.array([complex(pick(rec)) for rec in ok])
    except ValueError:
        raise SchemaError(f"column '{key}': malformed index")
    return vals.real if component == "re" else vals.imag


def write_figures(cfg: ExperimentConfig, records, spectra, out_dir: str,
                  qq_column: str = "f0.re"):
    """Emit scatter.svg, qq.svg, and variance_trend.svg; returns paths."""
    from .config import config_hash
    cfg_hash = config_hash(cfg)
    if not spectra:
        raise SchemaError("no stored spectra, cannot draw the scatter")
    n_big = max(spectra)
    scatter = eigenvalue_scatter(spectra[n_big], n_big, cfg.law.name,
                                 cfg.master_seed, cfg_hash)

    counts = {n: sum(1 for rec in records
                     if rec.n == n and not rec.failed)
              for n in cfg.n_values}
    n_qq = max(counts, key=lambda n: (counts[n], n))
    qq = qq_figure(column_values(cfg, records, qq_column, n_qq),
                   f"{qq_column} at n={n_qq}", cfg.master_seed, cfg_hash)

    points = []
    for n in cfg.n_values:
        if counts.get(n, 0) < 2:
            continue
        samples, labels, kinds = stack_records(cfg, records, n)
        report = estimate_moments(samples, labels, kinds, n)
        points.append((n, float(report.conj_cov[0, 0].real),
                       float(report.var_se[0])))
    if not points:
        raise SchemaError("no dimension has 2 usable replicates, "
                          "cannot draw the variance trend")
    f0 = cfg.functions[0]
    theory = float(limit_covariance_quadrature(f0, f0).real)
    trend = variance_trend(points, theory, f"X[{f0.describe()}]",
                           cfg.master_seed, cfg_hash)

    os.makedirs(out_dir, exist_ok=True)
    out = []
    for name, text in ((SCATTER_NAME, scatter), (QQ_NAME, qq),
                       (TREND_NAME, trend)):
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        out.append(path)
    return out
