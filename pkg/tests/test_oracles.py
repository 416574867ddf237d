import numpy as np
import pytest

from lcrlab.convexity import verify_convexity
from lcrlab.errors import DimensionError, LabError
from lcrlab.maps import linear_map, shear_map
from lcrlab.openness import newton_batch
from lcrlab.oracles import (
    grid_convexity_oracle_2d,
    in_convex_polygon,
    monotone_chain,
    polygon_area,
    shear_dent_depth,
    shear_lcr_exact,
    shear_linf_witness,
    shear_upper_boundary,
)
from lcrlab.spaces import Ball, euclidean, linf


def disk(r, c=(0.0, 0.0)):
    return Ball(euclidean(2), list(c), r)


# -- hull helpers ------------------------------------------------------------


def test_monotone_chain_square_with_interior_points():
    pts = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5], [0.2, 0.7], [0.5, 0.0]], dtype=float)
    hull = monotone_chain(pts)
    assert len(hull) == 4
    assert polygon_area(hull) == pytest.approx(1.0)
    assert in_convex_polygon(hull, np.array([[0.5, 0.5], [1.0, 0.5], [1.5, 0.5]])).tolist() == [True, True, False]


def test_monotone_chain_matches_scipy_hull_area():
    from scipy.spatial import ConvexHull

    pts = np.random.default_rng(0).standard_normal((500, 2))
    assert polygon_area(monotone_chain(pts)) == pytest.approx(ConvexHull(pts).volume, rel=1e-12)


# -- grid oracle -------------------------------------------------------------


def test_grid_linear_bijection_convex():
    m = linear_map([[2.0, 1.0], [0.0, 0.5]])
    for c, r in (((0.0, 0.0), 1.0), ((0.2, 0.1), 0.4)):
        g = grid_convexity_oracle_2d(m, disk(r, c), 256)
        assert g.verdict == "convex"
        assert g.margin <= 1 / 256
        assert g.covered_area <= g.hull_area + 1e-9


def test_grid_shear_below_threshold_convex():
    g = grid_convexity_oracle_2d(shear_map(2.0), disk(0.45), 256)
    assert g.verdict == "convex"


def test_grid_shear_far_above_threshold_non_convex_near_apex():
    k, eps = 2.0, 1.0
    g = grid_convexity_oracle_2d(shear_map(k), disk(eps), 256)
    assert g.verdict == "non_convex"
    apex = 0.5 * k * (eps * eps - 1 / k**2) + 1 / k  # chord height over u = 0 reaches max of the upper curve
    assert abs(g.witness[0]) < 0.05
    assert g.witness[1] == pytest.approx(apex, abs=0.05)
    assert g.covered_area <= g.hull_area + 1e-9


def test_grid_shear_k2_eps_0_6_is_below_resolution():
    # the dent at eps = 0.6 is 0.01 deep: thinner than a mapped grid cell, so
    # the one-cell dilation covers it and the area test cannot see it
    g = grid_convexity_oracle_2d(shear_map(2.0), disk(0.6), 256)
    assert g.verdict == "convex"
    assert shear_dent_depth(2.0, 0.6) == pytest.approx(0.01)


@pytest.mark.parametrize("k", [1.0, 2.0, 4.0])
def test_grid_flip_is_monotone_and_above_threshold(k):
    eps_grid = [e for e in np.linspace(0.5, 2.0, 16) / k if e <= 1.0]
    verdicts = [grid_convexity_oracle_2d(shear_map(k), disk(e), 256).verdict for e in eps_grid]
    flip = verdicts.index("non_convex") if "non_convex" in verdicts else len(verdicts)
    assert all(v == "convex" for v in verdicts[:flip])
    assert all(v == "non_convex" for v in verdicts[flip:])
    # convex at and below 1/k, as the closed form requires
    assert all(v == "convex" for e, v in zip(eps_grid, verdicts) if e <= 1 / k)


def test_grid_oracle_preconditions():
    with pytest.raises(DimensionError):
        grid_convexity_oracle_2d(shear_map(1.0, space=euclidean(3)), Ball(euclidean(3), [0, 0, 0], 0.5))
    with pytest.raises(LabError):
        grid_convexity_oracle_2d(shear_map(1.0), disk(0.5), 32)


def test_grid_and_verifier_agree_on_clear_cases():
    m = shear_map(2.0)
    for eps in (0.3, 0.45, 0.8, 1.0):
        b = disk(eps)
        g = grid_convexity_oracle_2d(m, b, 256)
        v = verify_convexity(m, b)
        if g.margin > 6 / 256:
            assert v.verdict == "non_convex"
        if v.verdict == "convex":
            assert g.verdict == "convex"


# -- closed forms ------------------------------------------------------------


def test_shear_lcr_exact_examples():
    assert shear_lcr_exact(2.0) == 0.5
    assert shear_lcr_exact(1.0) == 1.0
    with pytest.raises(LabError):
        shear_lcr_exact(0.0)
    with pytest.raises(LabError):
        shear_lcr_exact(-1.0)


@pytest.mark.parametrize("k, eps", [(2.0, 0.4), (2.0, 0.7), (1.0, 0.9)])
def test_upper_boundary_matches_mapped_circle(k, eps):
    th = np.linspace(0.01, np.pi - 0.01, 400)
    pts = eps * np.column_stack([np.cos(th), np.sin(th)])
    img = shear_map(k).f(pts)
    np.testing.assert_allclose(img[:, 1], shear_upper_boundary(k, eps, img[:, 0]), atol=1e-14)


@pytest.mark.parametrize("k, eps", [(2.0, 0.6), (2.0, 0.8), (4.0, 0.5)])
def test_dent_depth_closed_form(k, eps):
    # chord between the two maxima of the upper curve minus its value at u = 0
    u = np.linspace(-eps, eps, 200_001)
    top = shear_upper_boundary(k, eps, u)
    depth = top.max() - top[len(u) // 2]
    assert shear_dent_depth(k, eps) == pytest.approx(depth, rel=1e-6)
    assert shear_dent_depth(k, 0.9 / k) == 0.0


# -- max-norm witness --------------------------------------------------------


def test_linf_witness_example_margin():
    w = shear_linf_witness(1.0, 0.5)
    assert w.margin >= 0.0625
    assert w.tau == pytest.approx(0.125)


@pytest.mark.parametrize("k", [0.25, 1.0, 3.0])
@pytest.mark.parametrize("eps", [0.05, 0.3, 0.8])
def test_linf_witness_structure(k, eps):
    w = shear_linf_witness(k, eps)
    m = shear_map(k, space=linf(2))
    pa, pb = np.asarray(w.preimages)
    np.testing.assert_allclose(m.f(np.vstack([pa, pb])), [w.a, w.b], atol=1e-15)
    assert max(abs(pa).max(), abs(pb).max()) <= eps
    assert w.margin >= 0.25 * k * eps * eps - 1e-15
    # upper boundary of the image at u = 0 is eps
    assert w.midpoint[0] == 0.0 and w.midpoint[1] - eps == pytest.approx(w.margin, abs=1e-15)
    assert 0 < w.distance <= w.margin


def test_linf_witness_vanishes_as_k_goes_to_zero():
    margins = [shear_linf_witness(k, 0.5).margin for k in (1.0, 0.1, 0.01, 0.001)]
    assert all(a > b for a, b in zip(margins, margins[1:]))
    assert margins[-1] < 1e-4


@pytest.mark.parametrize("eps", [0.05, 0.1, 0.2, 0.4, 0.8])
def test_linf_witness_rejected_by_newton_and_verifier(eps):
    m = shear_map(1.0, space=linf(2))
    b = Ball(linf(2), [0.0, 0.0], eps)
    w = shear_linf_witness(1.0, eps)
    starts = np.random.default_rng(1).uniform(-0.9 * eps, 0.9 * eps, (5, 2))
    out = newton_batch(m, np.repeat([w.midpoint], 5, axis=0), starts, b.c[None, :], np.array([eps]))
    assert not np.any(out["success"])
    assert verify_convexity(m, b).verdict == "non_convex"


def test_linf_witness_grid_rejection_from_0_1():
    m = shear_map(1.0, space=linf(2))
    for eps in (0.1, 0.2, 0.4, 0.8):
        assert grid_convexity_oracle_2d(m, Ball(linf(2), [0.0, 0.0], eps), 256).verdict == "non_convex"
    # at eps = 0.05 the uncovered fraction (about 0.005) sits below the 3/256 threshold
    assert grid_convexity_oracle_2d(m, Ball(linf(2), [0.0, 0.0], 0.05), 256).verdict == "convex"
