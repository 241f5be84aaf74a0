import json
import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.optimize import brentq

from costcast.errors import ParseError, ValidationError
from costcast.loss_fit import (
    PiecewiseLossFunction,
    QuadraticLoss,
    LossVariant,
    breakpoint_count,
    fit_spline,
    fit_variant,
    huberize,
    linearize,
    loss_function_from_dict,
    place_breakpoints,
)


@pytest.fixture(scope="module")
def quad_spline():
    # interpolating a clean quadratic: curvature is 2 except for the
    # natural-boundary roll-off at the very edges
    eps = np.linspace(-1.0, 1.0, 201)
    return fit_spline(eps, eps**2, lam=0.0)


@pytest.fixture(scope="module")
def quad_loss(quad_spline):
    bps = place_breakpoints(quad_spline, 5)
    return huberize(linearize(quad_spline, bps))


# ---------------------------------------------------------------- splines


def test_lam_zero_interpolates():
    rng = np.random.default_rng(11)
    eps = np.sort(rng.uniform(-1.0, 1.0, 40))
    cost = np.sin(3.0 * eps) + eps
    s = fit_spline(eps, cost, lam=0.0)
    assert np.max(np.abs(s(eps) - cost)) < 1e-10
    assert s.residual < 1e-18


def test_large_lam_flattens_to_least_squares_line():
    rng = np.random.default_rng(5)
    eps = np.linspace(-1.0, 1.0, 120)
    cost = eps**2 + rng.normal(0.0, 0.05, eps.size)
    s = fit_spline(eps, cost, lam=1.0e5)
    coef = np.polyfit(eps, cost, 1)
    grid = np.linspace(-1.0, 1.0, 301)
    assert np.max(np.abs(s(grid) - np.polyval(coef, grid))) < 1e-3
    assert s.roughness < 1e-8


def test_moderate_lam_recovers_noisy_quadratic():
    rng = np.random.default_rng(3)
    eps = np.linspace(-1.0, 1.0, 400)
    noise = rng.normal(0.0, 0.02, eps.size)
    s = fit_spline(eps, eps**2 + noise, lam=8.0e-4)
    grid = np.linspace(-0.9, 0.9, 200)  # dodge natural-boundary roll-off
    assert np.max(np.abs(s(grid) - grid**2)) < np.max(np.abs(noise))
    assert np.max(np.abs(s(grid) - grid**2)) < 0.02


def test_auto_lam_is_deterministic_and_recorded():
    rng = np.random.default_rng(9)
    eps = np.linspace(-0.5, 0.5, 90)
    cost = 4.0 * eps**2 + rng.normal(0.0, 0.05, eps.size)
    s1 = fit_spline(eps, cost)
    s2 = fit_spline(eps, cost)
    assert s1.lam == s2.lam
    assert s1.lam > 0.0
    grid = np.linspace(-0.45, 0.45, 100)
    assert np.max(np.abs(s1(grid) - s2(grid))) == 0.0
    # the chosen weight actually smooths: roughness far below interpolation
    s0 = fit_spline(eps, cost, lam=0.0)
    assert s1.roughness < 0.1 * s0.roughness


def test_spline_input_validation():
    with pytest.raises(ValidationError, match="distinct"):
        fit_spline([0.0, 0.0, 0.1, 0.2], [1.0, 1.0, 2.0, 3.0])
    with pytest.raises(ValidationError, match="length"):
        fit_spline([0.0, 0.1], [1.0])
    with pytest.raises(ValidationError, match="finite"):
        fit_spline([0.0, 0.1, 0.2, 0.3, 0.4], [1.0, np.nan, 2.0, 3.0, 4.0])
    with pytest.raises(ValidationError, match="lam"):
        fit_spline(np.linspace(0, 1, 10), np.ones(10), lam=-1.0)


def test_spline_rejects_out_of_domain(quad_spline):
    with pytest.raises(ValidationError, match="domain"):
        quad_spline(1.5)


# ----------------------------------------------------- segment budgeting


def test_segment_count_for_quadratic(quad_spline):
    # integral of |s''|^(2/5) over [-1, 1] is 2 * 2^(2/5) = 2.639, so the
    # approximation bound crosses 0.05 between K=4 and K=5
    assert breakpoint_count(quad_spline, 0.05) == 5
    assert breakpoint_count(quad_spline, 0.1) == 4
    assert breakpoint_count(quad_spline, 0.2) == 3


def test_segment_count_never_rises_with_looser_tolerance(quad_spline):
    counts = [breakpoint_count(quad_spline, t)
              for t in (0.02, 0.05, 0.1, 0.2, 0.5, 2.0)]
    assert counts == sorted(counts, reverse=True)
    assert counts[-1] >= 1


def test_straight_line_needs_one_segment():
    eps = np.linspace(-1.0, 1.0, 60)
    s = fit_spline(eps, 3.0 * eps + 1.0, lam=0.0)
    assert breakpoint_count(s, 0.05) == 1
    pl = linearize(s, ())
    assert pl.breakpoints == ()
    assert pl.slopes == pytest.approx((3.0,), abs=1e-8)
    assert pl.intercepts == pytest.approx((1.0,), abs=1e-8)
    assert pl.fit_metadata["l2_gap"] < 1e-12


def test_uniform_placement_under_constant_curvature(quad_spline):
    # |s''| is constant, so curvature quantiles are evenly spaced
    bps = place_breakpoints(quad_spline, 5)
    assert np.allclose(bps, [-0.6, -0.2, 0.2, 0.6], atol=0.01)


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_quartic_placement_matches_independent_quantile_solve():
    eps = np.linspace(-1.0, 1.0, 201)
    s = fit_spline(eps, eps**4, lam=0.0)
    bps = place_breakpoints(s, 4)
    # independent oracle: invert the cumulative curvature measure directly
    dens = lambda t: abs(float(s.second_derivative(t))) ** 0.4
    total = quad(dens, -1.0, 1.0, limit=200)[0]
    expected = []
    for j in (1, 2, 3):
        cum = lambda x: quad(dens, -1.0, x, limit=200)[0] - j * total / 4.0
        expected.append(brentq(cum, -1.0, 1.0, xtol=1e-10))
    assert np.allclose(bps, expected, atol=5e-5)
    # and the ideal-curvature positions for eps^4 are +/- 0.5^(5/9) and 0
    assert abs(bps[1]) < 1e-6
    assert abs(bps[2] - 0.5 ** (5.0 / 9.0)) < 5e-3
    with pytest.raises(ValidationError, match="at least two"):
        place_breakpoints(s, 1)


# ----------------------------------------------------------- linearizing


def test_linearized_quadratic_is_convex_and_tight(quad_spline):
    bps = place_breakpoints(quad_spline, 5)
    pl = linearize(quad_spline, bps)
    slopes = np.asarray(pl.slopes)
    assert np.all(np.diff(slopes) > 0.0)  # convex data keeps convex fit
    # least-squares slope of t^2 over [a, b] is a + b: check the outer pieces
    assert slopes[0] == pytest.approx(-1.0 + bps[0], abs=5e-3)
    assert slopes[-1] == pytest.approx(1.0 + bps[-1], abs=5e-3)
    # measured gap stays under the 1/(sqrt(120) K^2) curvature bound
    bound = (2.0 * 2.0 ** 0.4) ** 2.5 / (math.sqrt(120.0) * 25.0)
    assert pl.fit_metadata["l2_gap"] < bound
    assert pl.fit_metadata["l2_gap"] == pytest.approx(0.016867, abs=1e-4)


def test_linearized_segments_are_continuous(quad_loss):
    for k, b in enumerate(quad_loss.breakpoints):
        left = quad_loss.slopes[k] * b + quad_loss.intercepts[k]
        right = quad_loss.slopes[k + 1] * b + quad_loss.intercepts[k + 1]
        assert left == pytest.approx(right, abs=1e-9)
        assert left == pytest.approx(quad_loss.values[k], abs=1e-9)


# ------------------------------------------------------ quadratic blend


def test_blend_coefficients_by_hand():
    # kink of |.|-style loss with slopes -1 / +2 at zero, half-width 0.1:
    # apex value (2-(-1))*0.1/4 = 0.075, edges meet the lines at 0.1 / 0.2
    pl = PiecewiseLossFunction(
        kind="daily", domain=(-1.0, 1.0), slopes=(-1.0, 2.0),
        intercepts=(0.0, 0.0), breakpoints=(0.0,), values=(0.0,),
        huber_half_width=0.1, fit_metadata={})
    v, d = pl.evaluate(0.0)
    assert v == pytest.approx(0.075, abs=1e-15)
    assert d == pytest.approx(0.5, abs=1e-15)
    v, d = pl.evaluate(-0.05)
    assert v == pytest.approx(0.06875, abs=1e-15)
    assert d == pytest.approx(-0.25, abs=1e-15)
    v, d = pl.evaluate(-0.1)
    assert v == pytest.approx(0.1, abs=1e-15)
    assert d == pytest.approx(-1.0, abs=1e-15)
    v, d = pl.evaluate(0.1)
    assert v == pytest.approx(0.2, abs=1e-15)
    assert d == pytest.approx(2.0, abs=1e-15)
    # outside the band the raw lines apply
    v, d = pl.evaluate(0.5)
    assert (v, d) == (1.0, 2.0)


def test_blend_edges_are_smooth(quad_loss):
    delta = quad_loss.huber_half_width
    assert delta > 0.0
    for b in quad_loss.breakpoints:
        for edge in (b - delta, b + delta):
            v_out, d_out = quad_loss.evaluate(edge)
            v_in, d_in = quad_loss.evaluate(edge - 1e-12 if edge > b
                                            else edge + 1e-12)
            assert abs(v_in - v_out) < 1e-10
            assert abs(d_in - d_out) < 1e-8
    # the blend lifts the apex above the piecewise-linear value
    for b, val in zip(quad_loss.breakpoints, quad_loss.values):
        assert quad_loss.evaluate(b)[0] > val


def test_gradient_matches_finite_differences(quad_loss):
    rng = np.random.default_rng(17)
    lo, hi = quad_loss.domain
    h = 1e-5
    pts = rng.uniform(lo + 2 * h, hi - 2 * h, 1000)
    # central differences are exact on quadratic pieces, so only skip
    # points whose stencil straddles a piece boundary
    edges = []
    for b in quad_loss.breakpoints:
        edges += [b - quad_loss.huber_half_width,
                  b + quad_loss.huber_half_width]
    keep = np.ones(pts.size, dtype=bool)
    for e in edges:
        keep &= np.abs(pts - e) > 2 * h
    pts = pts[keep]
    assert pts.size > 900
    _, grad = quad_loss.evaluate(pts)
    fd = (quad_loss.evaluate(pts + h)[0] - quad_loss.evaluate(pts - h)[0]) / (2 * h)
    assert np.max(np.abs(grad - fd)) < 1e-7


def test_blend_width_rules(quad_loss):
    bare = PiecewiseLossFunction(
        kind="daily", domain=(-1.0, 1.0), slopes=(-1.0, 1.0),
        intercepts=(0.0, 0.0), breakpoints=(0.0,), values=(0.0,),
        huber_half_width=0.0, fit_metadata={})
    assert huberize(bare, 0.3).huber_half_width == 0.3
    # default: a quarter of the tightest edge-to-edge gap
    assert huberize(bare).huber_half_width == pytest.approx(0.25)
    with pytest.raises(ValidationError, match="delta"):
        huberize(bare, 0.5)  # half the gap: bands would touch the edges
    with pytest.raises(ValidationError, match="delta"):
        huberize(bare, -0.1)
    edges = np.concatenate([[quad_loss.domain[0]], quad_loss.breakpoints,
                            [quad_loss.domain[1]]])
    tightest = np.min(np.diff(edges))
    assert quad_loss.huber_half_width == pytest.approx(0.25 * tightest)


# ------------------------------------------------------- other variants


def test_mse_variant_evaluates_square():
    v = fit_variant([(np.linspace(-0.2, 0.2, 30), np.linspace(0, 1, 30))],
                    "mse")
    fn = v.functions[0]
    assert isinstance(fn, QuadraticLoss)
    val, grad = fn.evaluate(0.05)
    assert val == pytest.approx(0.0025, rel=1e-15)
    assert grad == pytest.approx(0.1, rel=1e-15)
    vals, grads = fn.evaluate(np.array([-0.1, 0.1]))
    assert np.allclose(vals, 0.01)
    assert np.allclose(grads, [-0.2, 0.2])


def test_linear_variant_recovers_absolute_value():
    rng = np.random.default_rng(2)
    eps = rng.uniform(-0.3, 0.3, 500)
    v = fit_variant([(eps, np.abs(eps))], "linear")
    fn = v.functions[0]
    assert fn.breakpoints == (0.0,)
    assert fn.slopes[0] == pytest.approx(-1.0, abs=1e-12)
    assert fn.slopes[1] == pytest.approx(1.0, abs=1e-12)
    assert fn.huber_half_width > 0.0
    with pytest.raises(ValidationError, match="both sides"):
        fit_variant([(np.abs(eps) + 0.01, np.abs(eps))], "linear")


def test_hourly_variant_routes_by_hour():
    rng = np.random.default_rng(4)
    groups = []
    for h in range(24):
        e = np.sort(rng.uniform(-0.2, 0.2, 80))
        groups.append((e, (1.0 + h) * e**2))
    v = fit_variant(groups, "hourly", tolerance=0.002)
    assert len(v.functions) == 24
    # steeper true cost in later hours shows up in the fitted slopes
    assert v.for_hour(24).evaluate(0.15)[0] > v.for_hour(1).evaluate(0.15)[0]
    assert v.evaluate(0.15, hour=24)[0] == v.for_hour(24).evaluate(0.15)[0]
    with pytest.raises(ValidationError, match="hour"):
        v.for_hour(0)
    with pytest.raises(ValidationError, match="hour"):
        v.for_hour(25)
    with pytest.raises(ValidationError, match="24"):
        fit_variant(groups[:23], "hourly")
    with pytest.raises(ValidationError, match="kind"):
        fit_variant(groups[:1], "weekly")


# -------------------------------------------------------- serialization


def test_roundtrip_is_exact(quad_loss):
    clone = loss_function_from_dict(quad_loss.to_dict())
    rng = np.random.default_rng(23)
    pts = np.concatenate([np.asarray(quad_loss.breakpoints),
                          rng.uniform(-1.0, 1.0, 100)])
    v0, d0 = quad_loss.evaluate(pts)
    v1, d1 = clone.evaluate(pts)
    assert np.array_equal(v0, v1)
    assert np.array_equal(d0, d1)


def test_variant_file_roundtrip(tmp_path, quad_loss):
    variant = LossVariant(kind="daily", functions=(quad_loss,))
    path = tmp_path / "loss.json"
    variant.save(path)
    loaded = LossVariant.load(path)
    assert loaded.kind == "daily"
    assert loaded.functions[0].slopes == quad_loss.slopes
    # rewriting the loaded variant reproduces the file byte for byte
    path2 = tmp_path / "loss2.json"
    loaded.save(path2)
    assert path2.read_bytes() == path.read_bytes()
    payload = json.loads(path.read_text())
    assert payload["kind"] == "daily"
    assert {"slope", "intercept"} <= set(payload["segments"][0])


def test_malformed_payload_rejected():
    with pytest.raises(ParseError):
        loss_function_from_dict({"kind": "daily"})
    with pytest.raises(ParseError):
        loss_function_from_dict({"kind": "mystery", "segments": []})
