"""Distills sampled (error, cost) points into differentiable loss functions.

The pipeline runs in four stages: a natural cubic smoothing spline through
the discrete samples, a curvature-driven choice of how many linear segments
the spline deserves, quantile placement of the segment boundaries along the
cumulative curvature density, and finally a quadratic blend in a small band
around each boundary so the result has a continuous first derivative and
can sit inside a gradient-based trainer.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.interpolate import CubicSpline, make_smoothing_spline
from scipy.optimize import brentq

from .errors import ParseError, ValidationError

__all__ = [
    "SmoothingSpline",
    "PiecewiseLossFunction",
    "QuadraticLoss",
    "LossVariant",
    "fit_spline",
    "breakpoint_count",
    "place_breakpoints",
    "linearize",
    "huberize",
    "fit_variant",
    "loss_function_from_dict",
]

# default approximation tolerance, as a fraction of the sample cost range
TOLERANCE_FRACTION = 0.02
# default half-width of the quadratic blend, as a fraction of the tightest
# spacing between segment boundaries (domain edges included, so the blend
# bands can never poke outside the domain)
DELTA_FRACTION = 0.25

_CONTINUITY_TOL = 1e-9

# distinct-abscissae cap before samples are pooled onto a uniform grid
_MAX_KNOTS = 4096


class SmoothingSpline:
    """Natural cubic fit ``s`` to scattered samples, with its curvature.

    Evaluation is restricted to the sampled domain; the fitted object also
    reports the residual sum of squares and the integrated squared
    curvature of the solution.
    """

    def __init__(self, bspline, domain, lam, residual, roughness):
        self._s = bspline
        self._d2 = bspline.derivative(2)
        self.domain = (float(domain[0]), float(domain[1]))
        self.lam = lam  # None means the smoothing weight was cross-validated
        self.residual = float(residual)
        self.roughness = float(roughness)

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.domain
        if np.any(x < lo - 1e-12) or np.any(x > hi + 1e-12):
            raise ValidationError(
                f"spline evaluated outside its domain [{lo:g}, {hi:g}]")
        return np.clip(x, lo, hi)

    def __call__(self, x):
        return self._s(self._check(x))

    def second_derivative(self, x):
        return self._d2(self._check(x))

    @property
    def knots(self):
        if isinstance(self._s, CubicSpline):
            return np.asarray(self._s.x)
        lo, hi = self.domain
        t = np.asarray(self._s.t)
        return np.unique(np.clip(t, lo, hi))

    def _breaks(self):
        """Abscissae where the cubic pieces join (curvature kinks live here)."""
        return self.knots


def _cross_validated_lam(x, y, w):
    """Pick the smoothing weight by interleaved 5-fold cross-validation.

    Candidates span a wide logarithmic grid scaled by the domain width.
    The two extreme abscissae always stay in the training folds so no fold
    has to extrapolate.
    """
    n = x.size
    idx = np.arange(n)
    grid = (x[-1] - x[0]) ** 3 * np.logspace(-8.0, 6.0, 29)
    best_err, best_lam = np.inf, float(grid[0])
    for lam in grid:
        err = 0.0
        for fold in range(5):
            hold = (idx % 5 == fold) & (idx != 0) & (idx != n - 1)
            if not hold.any():
                continue
            train = ~hold
            try:
                s = make_smoothing_spline(x[train], y[train], w=w[train], lam=lam)
            except np.linalg.LinAlgError:
                err = np.inf
                break
            err += float(np.sum(w[hold] * (y[hold] - s(x[hold])) ** 2))
        if err < best_err:
            best_err, best_lam = err, float(lam)
    return best_lam


def fit_spline(eps, cost, lam=None) -> SmoothingSpline:
    """Fit a natural cubic smoothing spline to (error, cost) samples.

    ``lam`` is the weight on integrated squared curvature; ``None`` selects
    it by cross-validation over a logarithmic grid, ``0`` interpolates.
    Repeated abscissae are pooled to their mean with matching weight.
    """
    eps = np.asarray(eps, dtype=float).reshape(-1)
    cost = np.asarray(cost, dtype=float).reshape(-1)
    if eps.size != cost.size:
        raise ValidationError("eps and cost must have the same length")
    if eps.size == 0:
        raise ValidationError("no samples to fit")
    if not (np.all(np.isfinite(eps)) and np.all(np.isfinite(cost))):
        raise ValidationError("samples must be finite")
    if lam is not None and lam < 0.0:
        raise ValidationError("lam must be >= 0")

    x, inverse, counts = np.unique(eps, return_inverse=True, return_counts=True)
    if x.size < 4:
        raise ValidationError(
            f"need at least 4 distinct abscissae, got {x.size}")
    if x.size > _MAX_KNOTS:
        # dense inputs make the banded smoother ill conditioned; snapping
        # to a fine grid pools near-duplicates without visible bias
        lo, hi = x[0], x[-1]
        step = (hi - lo) / _MAX_KNOTS
        snapped = lo + np.round((eps - lo) / step) * step
        x, inverse, counts = np.unique(snapped, return_inverse=True,
                                       return_counts=True)
    y = np.zeros_like(x)
    np.add.at(y, inverse, cost)
    y /= counts
    weights = counts.astype(float)

    if lam is None and x.size >= 8:
        lam_used = _cross_validated_lam(x, y, weights)
    elif lam is None:
        lam_used = 0.0  # too few points to validate a smoothing weight
    else:
        lam_used = float(lam)

    if lam_used == 0.0 or x.size < 5:
        spline = CubicSpline(x, y, bc_type="natural")
    else:
        spline = make_smoothing_spline(x, y, w=weights, lam=lam_used)

    residual = float(np.sum((cost - spline(eps)) ** 2))
    d2 = spline.derivative(2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        roughness = quad(lambda t: float(d2(t)) ** 2, x[0], x[-1], limit=200)[0]
    return SmoothingSpline(spline, (x[0], x[-1]), lam_used, residual, roughness)


def _curvature_density_table(s: SmoothingSpline):
    """Cumulative integral of |s''|^(2/5) at every piece boundary.

    The curvature of a cubic spline is piecewise linear, so integrating
    piece by piece keeps the adaptive quadrature local and cheap.  Returns
    (breaks, cumulative) with cumulative[0] = 0.
    """
    d2 = s.second_derivative
    breaks = s._breaks()
    lo, hi = s.domain
    breaks = np.unique(np.concatenate([[lo], breaks, [hi]]))
    parts = np.zeros(breaks.size)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        for i in range(breaks.size - 1):
            parts[i + 1] = quad(
                lambda t: abs(float(d2(t))) ** 0.4,
                breaks[i], breaks[i + 1], limit=50,
            )[0]
    return breaks, np.cumsum(parts)


def breakpoint_count(s: SmoothingSpline, tolerance: float) -> int:
    """Fewest linear segments whose approximation error bound meets ``tolerance``.

    The bound for K segments is (integral of |s''|^(2/5))^(5/2) / (sqrt(120) K^2);
    K is the smallest integer bringing it under the tolerance, and at least 1.
    """
    if tolerance <= 0.0:
        raise ValidationError("tolerance must be > 0")
    total = _curvature_density_table(s)[1][-1]
    if total <= 0.0:
        return 1
    k = max(1, math.ceil(math.sqrt(total ** 2.5 / (math.sqrt(120.0) * tolerance)) - 1e-9))
    while total ** 2.5 / (math.sqrt(120.0) * k * k) > tolerance * (1.0 + 1e-12):
        k += 1
    return k


def place_breakpoints(s: SmoothingSpline, k: int) -> np.ndarray:
    """Segment boundaries at the k-quantiles of the curvature density.

    The cumulative density F of |s''|^(2/5) is inverted at j/k for
    j = 1..k-1 by bracketed root-finding to 1e-10.  A flat spline (no
    curvature anywhere) falls back to uniform spacing.
    """
    if k < 2:
        raise ValidationError("placement needs at least two segments")
    lo, hi = s.domain
    breaks, cum = _curvature_density_table(s)
    total = cum[-1]
    if total <= 1e-12 * (hi - lo):
        return lo + (hi - lo) * np.arange(1, k) / k

    d2 = s.second_derivative

    def cumulative(x):
        i = int(np.searchsorted(breaks, x, side="right") - 1)
        i = min(max(i, 0), breaks.size - 2)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IntegrationWarning)
            extra = quad(lambda t: abs(float(d2(t))) ** 0.4,
                         breaks[i], x, limit=50)[0]
        return cum[i] + extra

    out = np.empty(k - 1)
    for j in range(1, k):
        target = total * j / k
        i = int(np.searchsorted(cum, target, side="left"))
        a = breaks[max(i - 1, 0)]
        b = breaks[min(i, breaks.size - 1)]
        if b <= a:
            out[j - 1] = a
            continue
        out[j - 1] = brentq(lambda x: cumulative(x) - target, a, b, xtol=1e-10)
    # quantiles of a continuous monotone map cannot coincide, but guard
    # against degenerate numerics anyway
    keep = np.concatenate([[True], np.diff(out) > 1e-12 * (hi - lo)])
    return out[keep]


def _l2_gap(s: SmoothingSpline, pl: "PiecewiseLossFunction") -> float:
    lo, hi = s.domain
    edges = [lo, *pl.breakpoints, hi]

    def sq(t):
        return float((s(t) - pl.evaluate(t)[0]) ** 2)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        total = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            total += quad(sq, a, b, limit=100)[0]
    return math.sqrt(max(total, 0.0))


def linearize(s: SmoothingSpline, breakpoints, kind: str = "daily",
              samples_per_segment: int = 400) -> "PiecewiseLossFunction":
    """Least-squares line per segment, welded together at the boundaries.

    Each segment is fit to the spline sampled densely on it.  The function
    value at each boundary is fixed to the mean of the two raw fits there;
    the two outer segments then keep their fitted slope and shift onto that
    value, while every interior segment is redrawn through its two endpoint
    values (the only line that can honor both).  The welding scheme is
    recorded in the fit metadata, as is the realized L2 distance to the
    spline.
    """
    lo, hi = s.domain
    bps = np.asarray(breakpoints, dtype=float).reshape(-1)
    if bps.size and (np.any(np.diff(bps) <= 0.0)
                     or bps[0] <= lo or bps[-1] >= hi):
        raise ValidationError("breakpoints must be strictly increasing and interior")
    edges = np.concatenate([[lo], bps, [hi]])
    if np.any(np.diff(edges) <= 0.0):
        raise ValidationError("empty segment between breakpoints")

    raw = []
    for a, b in zip(edges[:-1], edges[1:]):
        grid = np.linspace(a, b, samples_per_segment)
        slope, intercept = np.polyfit(grid, s(grid), 1)
        raw.append((float(slope), float(intercept)))

    k = len(raw)
    if k == 1:
        slopes, intercepts, values = [raw[0][0]], [raw[0][1]], []
    else:
        values = [
            0.5 * ((raw[i][0] * e + raw[i][1]) + (raw[i + 1][0] * e + raw[i + 1][1]))
            for i, e in enumerate(bps)
        ]
        slopes = [0.0] * k
        intercepts = [0.0] * k
        slopes[0] = raw[0][0]
        intercepts[0] = values[0] - slopes[0] * bps[0]
        slopes[-1] = raw[-1][0]
        intercepts[-1] = values[-1] - slopes[-1] * bps[-1]
        for i in range(1, k - 1):
            slopes[i] = (values[i] - values[i - 1]) / (bps[i] - bps[i - 1])
            intercepts[i] = values[i] - slopes[i] * bps[i]

    pl = PiecewiseLossFunction(
        kind=kind, domain=(lo, hi),
        slopes=tuple(slopes), intercepts=tuple(intercepts),
        breakpoints=tuple(float(e) for e in bps),
        values=tuple(float(v) for v in values),
        huber_half_width=0.0,
        fit_metadata={"k": k, "continuity": "segment-lsq, endpoint averaging"},
    )
    gap = _l2_gap(s, pl)
    return replace(pl, fit_metadata={**pl.fit_metadata, "l2_gap": gap})


def huberize(pl: "PiecewiseLossFunction",
             delta: float | None = None) -> "PiecewiseLossFunction":
    """Insert the quadratic blend band of half-width ``delta`` at each kink.

    The default half-width is a quarter of the tightest gap in the sequence
    domain-edge, breakpoints, domain-edge, which keeps every band interior
    and non-overlapping.
    """
    lo, hi = pl.domain
    edges = np.concatenate([[lo], pl.breakpoints, [hi]])
    tightest = float(np.min(np.diff(edges)))
    if delta is None:
        delta = DELTA_FRACTION * tightest
    if delta <= 0.0:
        raise ValidationError("delta must be > 0")
    if pl.breakpoints:
        if delta >= 0.5 * tightest:
            raise ValidationError(
                f"delta {delta:g} too large for segment spacing {tightest:g}")
    return replace(pl, huber_half_width=float(delta))


@dataclass(frozen=True)
class PiecewiseLossFunction:
    """K linear segments with quadratic blends at the K-1 interior kinks.

    Between bands the function is a_i ε + b_i on segment i; within
    ``huber_half_width`` of breakpoint ε_i it follows the unique parabola
    matching both neighboring lines in value and slope at the band edges.
    A half-width of zero means the kinks are still sharp (the state
    between line fitting and blending).

    Outside the domain nothing was sampled, so the fit carries no
    evidence there; the boundary value and slope continue with a growing
    quadratic term (still C¹ at the edges) so that training can never
    profit from wandering beyond the data.  The growth rate is the
    function's own steepest slope per domain width.
    """

    kind: str
    domain: tuple
    slopes: tuple
    intercepts: tuple
    breakpoints: tuple
    values: tuple
    huber_half_width: float
    fit_metadata: dict | None = None

    def __post_init__(self):
        lo, hi = self.domain
        k = len(self.slopes)
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValidationError("domain must be a finite interval")
        if len(self.intercepts) != k or len(self.breakpoints) != k - 1 \
                or len(self.values) != k - 1:
            raise ValidationError("segment and breakpoint counts disagree")
        bps = np.asarray(self.breakpoints)
        if bps.size:
            if np.any(np.diff(bps) <= 0.0) or bps[0] <= lo or bps[-1] >= hi:
                raise ValidationError("breakpoints must be increasing and interior")
        for i, (e, v) in enumerate(zip(self.breakpoints, self.values)):
            left = self.slopes[i] * e + self.intercepts[i]
            right = self.slopes[i + 1] * e + self.intercepts[i + 1]
            if abs(left - v) > _CONTINUITY_TOL or abs(right - v) > _CONTINUITY_TOL:
                raise ValidationError(
                    f"segments do not meet at breakpoint {i} "
                    f"({left:.12g} | {v:.12g} | {right:.12g})")
        d = self.huber_half_width
        if d < 0.0 or not math.isfinite(d):
            raise ValidationError("huber_half_width must be >= 0")
        if d > 0.0 and bps.size:
            edges = np.concatenate([[lo], bps, [hi]])
            if d >= 0.5 * float(np.min(np.diff(edges))):
                raise ValidationError("huber_half_width exceeds half the spacing")

    @property
    def segment_count(self) -> int:
        return len(self.slopes)

    @property
    def growth_rate(self) -> float:
        """Curvature applied beyond the domain: steepest slope per width."""
        lo, hi = self.domain
        return max(1.0, max(abs(s) for s in self.slopes)) / (hi - lo)

    def evaluate(self, eps):
        """Value and first derivative at ``eps`` (scalar or array)."""
        scalar = np.ndim(eps) == 0
        x_raw = np.atleast_1d(np.asarray(eps, dtype=float))
        lo, hi = self.domain
        x = np.clip(x_raw, lo, hi)
        a = np.asarray(self.slopes)
        b = np.asarray(self.intercepts)
        idx = np.searchsorted(self.breakpoints, x, side="right")
        val = a[idx] * x + b[idx]
        der = a[idx].copy()
        d = self.huber_half_width
        if d > 0.0:
            for i, (e, v) in enumerate(zip(self.breakpoints, self.values)):
                t = x - e
                in_band = np.abs(t) < d
                if not np.any(in_band):
                    continue
                c2 = (a[i + 1] - a[i]) / (4.0 * d)
                c1 = 0.5 * (a[i + 1] + a[i])
                c0 = 0.25 * (a[i + 1] - a[i]) * d + v
                tb = t[in_band]
                val[in_band] = c2 * tb * tb + c1 * tb + c0
                der[in_band] = 2.0 * c2 * tb + c1
        out = x_raw - x
        if np.any(out != 0.0):
            kappa = self.growth_rate
            val = val + der * out + 0.5 * kappa * out * out
            der = der + kappa * out
        if scalar:
            return float(val[0]), float(der[0])
        return val, der

    def to_dict(self) -> dict:
        meta = None
        if self.fit_metadata is not None:
            meta = {k: (float(v) if isinstance(v, (int, float, np.floating)) else v)
                    for k, v in self.fit_metadata.items()}
        return {
            "kind": self.kind,
            "domain": [self.domain[0], self.domain[1]],
            "segments": [
                {"slope": s, "intercept": b}
                for s, b in zip(self.slopes, self.intercepts)
            ],
            "breakpoints": [
                {"eps": e, "value": v}
                for e, v in zip(self.breakpoints, self.values)
            ],
            "huber_half_width": self.huber_half_width,
            "fit_metadata": meta,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "PiecewiseLossFunction":
        try:
            return cls(
                kind=obj["kind"],
                domain=tuple(float(v) for v in obj["domain"]),
                slopes=tuple(float(s["slope"]) for s in obj["segments"]),
                intercepts=tuple(float(s["intercept"]) for s in obj["segments"]),
                breakpoints=tuple(float(b["eps"]) for b in obj["breakpoints"]),
                values=tuple(float(b["value"]) for b in obj["breakpoints"]),
                huber_half_width=float(obj["huber_half_width"]),
                fit_metadata=obj.get("fit_metadata"),
            )
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed loss function object: {exc}") from exc


@dataclass(frozen=True)
class QuadraticLoss:
    """The benchmark loss: plain squared relative error, derivative 2ε."""

    domain: tuple
    kind: str = "mse"

    def evaluate(self, eps):
        scalar = np.ndim(eps) == 0
        x = np.atleast_1d(np.asarray(eps, dtype=float))
        if scalar:
            return float(x[0] ** 2), float(2.0 * x[0])
        return x ** 2, 2.0 * x

    def to_dict(self) -> dict:
        return {
            "kind": "mse",
            "domain": [self.domain[0], self.domain[1]],
            "segments": [],
            "breakpoints": [],
            "huber_half_width": 0.0,
            "fit_metadata": None,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "QuadraticLoss":
        return cls(domain=tuple(float(v) for v in obj["domain"]))


def loss_function_from_dict(obj: dict):
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ParseError("loss function object must carry a 'kind'")
    if obj["kind"] == "mse":
        return QuadraticLoss.from_dict(obj)
    return PiecewiseLossFunction.from_dict(obj)


@dataclass(frozen=True)
class LossVariant:
    """A trained-against loss: one function per hour, or one for the day.

    ``hourly`` carries 24 functions indexed by 1-based hour; the other
    kinds carry a single function used for every hour.
    """

    kind: str
    functions: tuple

    def __post_init__(self):
        if self.kind not in ("hourly", "daily", "linear", "mse"):
            raise ValidationError(f"unknown loss kind {self.kind!r}")
        want = 24 if self.kind == "hourly" else 1
        if len(self.functions) != want:
            raise ValidationError(
                f"{self.kind} variant needs {want} function(s), got {len(self.functions)}")

    def for_hour(self, hour: int):
        if self.kind != "hourly":
            return self.functions[0]
        if not 1 <= hour <= 24:
            raise ValidationError("hour must lie in 1..24")
        return self.functions[hour - 1]

    def evaluate(self, eps, hour: int | None = None):
        if self.kind == "hourly" and hour is None:
            raise ValidationError("hourly variant needs an hour")
        return self.for_hour(hour or 1).evaluate(eps)

    def evaluate_many(self, eps, hours=None):
        """Evaluate a sample vector, routing each entry by its 1-based hour."""
        eps = np.asarray(eps, dtype=float)
        if self.kind != "hourly":
            return self.functions[0].evaluate(eps)
        if hours is None:
            raise ValidationError("hourly variant needs per-sample hours")
        hours = np.asarray(hours)
        if hours.shape != eps.shape:
            raise ValidationError("hours must match eps in shape")
        if eps.size and not np.all((hours >= 1) & (hours <= 24)):
            raise ValidationError("hours must lie in 1..24")
        values = np.empty_like(eps)
        grads = np.empty_like(eps)
        for h in range(1, 25):
            mask = hours == h
            if mask.any():
                values[mask], grads[mask] = self.functions[h - 1].evaluate(eps[mask])
        return values, grads

    def to_payload(self) -> dict:
        if self.kind == "hourly":
            return {"kind": "hourly",
                    "functions": [f.to_dict() for f in self.functions]}
        return self.functions[0].to_dict()

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_payload(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def from_payload(cls, obj: dict) -> "LossVariant":
        if not isinstance(obj, dict) or "kind" not in obj:
            raise ParseError("loss file must be an object with a 'kind'")
        if obj["kind"] == "hourly":
            funcs = tuple(loss_function_from_dict(f) for f in obj.get("functions", []))
            return cls(kind="hourly", functions=funcs)
        return cls(kind=obj["kind"], functions=(loss_function_from_dict(obj),))

    @classmethod
    def load(cls, path) -> "LossVariant":
        try:
            with open(path) as fh:
                obj = json.load(fh)
        except OSError as exc:
            raise ParseError(f"cannot read loss file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ParseError(f"loss file {path} is not valid JSON: {exc}") from exc
        return cls.from_payload(obj)


def _enforce_coercive(pl: "PiecewiseLossFunction") -> "PiecewiseLossFunction":
    """Clamp the outermost slopes so large errors are never rewarded.

    The simulated cost is zero for a perfect forecast and non-negative
    everywhere, so the fitted function must fall towards zero error on
    the left and rise away from it on the right.  Fit noise can tilt an
    outer segment the wrong way; flattening it (while keeping the
    function continuous at the outer breakpoints) restores a usable
    training objective without touching the interior fit.
    """
    slopes = list(pl.slopes)
    intercepts = list(pl.intercepts)
    changed = False
    if slopes[0] > 0.0:
        slopes[0] = 0.0
        intercepts[0] = pl.values[0]
        changed = True
    if slopes[-1] < 0.0:
        slopes[-1] = 0.0
        intercepts[-1] = pl.values[-1]
        changed = True
    if not changed:
        return pl
    return replace(pl, slopes=tuple(slopes), intercepts=tuple(intercepts))


def _fit_pipeline(eps, cost, kind, tolerance, delta, lam) -> PiecewiseLossFunction:
    spline = fit_spline(eps, cost, lam=lam)
    tol = tolerance
    if tol is None:
        spread = float(np.max(cost) - np.min(cost))
        tol = TOLERANCE_FRACTION * spread if spread > 0.0 else 1e-9
    # a single segment would be a monotone line, which no model can
    # meaningfully descend; always keep one kink between the two regimes
    k = max(2, breakpoint_count(spline, tol))
    bps = place_breakpoints(spline, k)
    pl = linearize(spline, bps, kind=kind)
    pl = _enforce_coercive(pl)
    pl = huberize(pl, delta)
    meta = {**(pl.fit_metadata or {}), "lambda": spline.lam, "tolerance": tol}
    return replace(pl, fit_metadata=meta)


def _fit_linear(eps, cost, delta) -> PiecewiseLossFunction:
    neg = eps < 0.0
    pos = eps > 0.0
    if not (np.any(neg) and np.any(pos)):
        raise ValidationError("linear fit needs samples on both sides of zero")
    lo, hi = float(np.min(eps)), float(np.max(eps))
    slope_neg = float(np.sum(cost[neg] * eps[neg]) / np.sum(eps[neg] ** 2))
    slope_pos = float(np.sum(cost[pos] * eps[pos]) / np.sum(eps[pos] ** 2))
    pl = PiecewiseLossFunction(
        kind="linear", domain=(lo, hi),
        slopes=(slope_neg, slope_pos), intercepts=(0.0, 0.0),
        breakpoints=(0.0,), values=(0.0,),
        huber_half_width=0.0,
        fit_metadata={"k": 2, "lambda": None, "tolerance": None,
                      "l2_gap": None, "continuity": "through origin"},
    )
    return huberize(pl, delta)


def fit_variant(groups, kind: str, tolerance: float | None = None,
                delta: float | None = None, lam: float | None = None) -> LossVariant:
    """Fit one of the four loss kinds from per-hour (eps, cost) sample groups.

    ``groups`` is a sequence of (eps, cost) array pairs, one per hour.
    ``hourly`` fits 24 independent functions; the other kinds pool every
    group first.  ``mse`` ignores the costs entirely and just records the
    sampled domain for the benchmark parabola.
    """
    groups = [(np.asarray(e, dtype=float).reshape(-1),
               np.asarray(c, dtype=float).reshape(-1)) for e, c in groups]
    if kind == "hourly":
        if len(groups) != 24:
            raise ValidationError(f"hourly fit needs 24 groups, got {len(groups)}")
        funcs = []
        for h, (e, c) in enumerate(groups, start=1):
            if e.size == 0:
                raise ValidationError(f"hour {h} has no samples")
            funcs.append(_fit_pipeline(e, c, "hourly", tolerance, delta, lam))
        return LossVariant(kind="hourly", functions=tuple(funcs))

    eps = np.concatenate([e for e, _ in groups]) if groups else np.empty(0)
    cost = np.concatenate([c for _, c in groups]) if groups else np.empty(0)
    if eps.size == 0:
        raise ValidationError("no samples to fit")
    if kind == "daily":
        return LossVariant(kind="daily",
                           functions=(_fit_pipeline(eps, cost, "daily",
                                                    tolerance, delta, lam),))
    if kind == "linear":
        return LossVariant(kind="linear", functions=(_fit_linear(eps, cost, delta),))
    if kind == "mse":
        dom = (float(np.min(eps)), float(np.max(eps)))
        if dom[0] >= dom[1]:
            raise ValidationError("mse benchmark needs a non-degenerate domain")
        return LossVariant(kind="mse", functions=(QuadraticLoss(domain=dom),))
    raise ValidationError(f"unknown loss kind {kind!r}")
