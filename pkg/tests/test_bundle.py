import numpy as np
import pytest
import scipy.linalg

from labcoupling import algebra as alg
from labcoupling import geometry as geo
from labcoupling.bundle import (
    LieAlgebraBundle,
    LieConnection,
    TransportError,
    check_bundle,
    curvature,
    curvature_endo,
    global_connection_from_locals,
    holonomy_variation_check,
    parallel_transport,
    transport_composition_check,
)
from labcoupling.scenarios import BUILTIN_SCENARIOS, ad_form, great_arc
from oracles import rotation_angle

WITH_CONNECTION = ["so3-circle", "sl2-circle-outer", "abelian-circle", "so3-plane", "ts2"]


@pytest.mark.parametrize("name", list(BUILTIN_SCENARIOS))
def test_builtin_bundles_are_valid(scenario, name):
    rep = check_bundle(scenario(name).bundle, 16)
    assert rep.ok, rep
    assert rep.samples > 0


def test_transition_orientation():
    sc = BUILTIN_SCENARIOS["so3-circle"]()
    b = sc.bundle
    pts = b.atlas.overlap_samples("0", "1", 8)
    fwd = b.transition("0", "1", pts)
    assert np.allclose(b.transition("1", "0", pts), np.linalg.inv(fwd))
    assert np.array_equal(b.transition("0", "0", pts), np.broadcast_to(np.eye(3), fwd.shape))


def test_missing_transition_is_an_error():
    b = LieAlgebraBundle(alg.so3(), geo.circle(), {}, "broken")
    with pytest.raises(TransportError):
        check_bundle(b)
    with pytest.raises(ValueError):
        LieAlgebraBundle(alg.so3(), geo.circle(), {("0", "0"): lambda p: p}, "bad")


@pytest.mark.parametrize("name", WITH_CONNECTION)
def test_builtin_connections_are_lie_and_compatible(scenario, name):
    c = scenario(name).connection
    assert c.lie_residual() <= 1e-10
    assert c.compatibility_residual() <= 1e-6


def test_non_derivation_form_is_detected():
    sc = BUILTIN_SCENARIOS["so3-plane"]()
    form = lambda u: np.broadcast_to(0.1 * np.eye(3), np.shape(u)[:-1] + (2, 3, 3))  # noqa: E731
    c = LieConnection(sc.bundle, {"0": form, "1": form})
    assert c.lie_residual() >= 1e-3


# -- curvature oracles -----------------------------------------------------------------


def test_curvature_of_so3_plane_matches_closed_form(scenario):
    sc = scenario("so3-plane")
    g = sc.bundle.fiber
    rng = np.random.default_rng(0)
    for x in rng.uniform(-0.5, 0.5, (6, 2)):
        x1, x2 = x
        A1 = np.array([0.3 * x2, 0.2 * np.sin(x1), 0.1])
        A2 = np.array([0.1 * x1 * x2, -0.2, 0.25 * np.cos(x2)])
        d1A2 = np.array([0.1 * x2, 0.0, 0.0])
        d2A1 = np.array([0.3, 0.0, 0.0])
        omega = d1A2 - d2A1 + np.cross(A1, A2)
        val = curvature(sc.connection, x, [1, 0], [0, 1], chart="0")
        assert np.allclose(val.endo, alg.ad(g, omega), atol=1e-8)
        assert val.is_inner and np.allclose(val.omega, omega, atol=1e-8)


def test_sphere_curvature_is_area_form(scenario):
    c = scenario("ts2").connection
    rng = np.random.default_rng(1)
    u = rng.uniform(-1, 1, (8, 2))
    q = 1 + np.sum(u * u, axis=-1)
    R = curvature_endo(c, "N", u, [1, 0], [0, 1])
    expected = (-4 / q**2)[:, None, None] * np.array([[0.0, -1.0], [1.0, 0.0]])
    assert np.allclose(R, expected, atol=1e-8)
    val = curvature(c, np.array([0.0, 0.0, 1.0]), [1, 0], [0, 1], chart="N")
    assert not val.is_inner and val.ad_residual > 1


# -- transport -------------------------------------------------------------------------


@pytest.mark.parametrize("loops", [1, 2, 3])
def test_abelian_circle_transport_closed_form(scenario, loops):
    sc = scenario("abelian-circle")
    res = parallel_transport(sc.connection, sc.loop(loops), 256)
    assert res.map[0, 0] == pytest.approx(np.exp(-2 * np.pi * sc.extras["k"] * loops), rel=1e-10)


def test_octant_holonomy_is_enclosed_area(scenario):
    sc = scenario("ts2")
    res = parallel_transport(sc.connection, sc.loop(), 512)
    assert rotation_angle(res.map) == pytest.approx(np.pi / 2, abs=1e-9)
    assert np.allclose(res.map.T @ res.map, np.eye(2), atol=1e-10)


def test_transport_of_pure_gauge_is_gauge_difference():
    g = alg.so3()
    u0 = np.array([0.3, -0.5, 0.8])
    atlas = geo.box(2)
    b = LieAlgebraBundle(g, atlas, {}, "flat")
    f = lambda x: np.sin(x[..., 0]) * x[..., 1] + x[..., 0] ** 2  # noqa: E731
    df = lambda x: np.stack([np.cos(x[..., 0]) * x[..., 1] + 2 * x[..., 0], np.sin(x[..., 0])], axis=-1)  # noqa: E731
    # omega = -dg g^-1 for g = exp(f ad u0)
    form = lambda u: -df(u)[..., :, None, None] * alg.ad(g, u0)  # noqa: E731
    c = LieConnection(b, {"0": form})
    gauge = lambda x: scipy.linalg.expm(f(np.asarray(x)) * alg.ad(g, u0))  # noqa: E731
    path = geo.segment_path([(0.0, 0.0), (0.7, 0.2), (0.4, -0.6)])
    P = parallel_transport(c, path, 256).map
    assert np.allclose(P, gauge(path.end) @ np.linalg.inv(gauge(path.start)), atol=1e-10)
    loop = geo.segment_path([(0.1, 0.1), (0.8, 0.3), (0.2, 0.9), (0.1, 0.1)])
    assert np.allclose(parallel_transport(c, loop, 128).map, np.eye(3), atol=1e-10)


def test_rk4_error_is_fourth_order(scenario):
    sc = scenario("so3-circle")
    ref = parallel_transport(sc.connection, sc.loop(), 4096).map
    e256 = np.linalg.norm(parallel_transport(sc.connection, sc.loop(), 256).map - ref)
    e512 = np.linalg.norm(parallel_transport(sc.connection, sc.loop(), 512).map - ref)
    assert 12 <= e256 / e512 <= 20


@pytest.mark.parametrize("name", WITH_CONNECTION)
def test_transport_is_an_automorphism(scenario, name):
    sc = scenario(name)
    assert parallel_transport(sc.connection, sc.loop(), 512).lie_residual <= 1e-7


def test_transport_of_non_lie_connection_is_not_automorphism():
    sc = BUILTIN_SCENARIOS["so3-plane"]()

    def form(u):
        # 0.3 x2 dx1 times the identity: circulation -0.3 pi / 4 around the loop
        out = np.zeros(np.shape(u)[:-1] + (2, 3, 3))
        out[..., 0, :, :] = 0.3 * u[..., 1, None, None] * np.eye(3)
        return out

    c = LieConnection(sc.bundle, {"0": form, "1": form})
    assert parallel_transport(c, sc.loop(), 512).lie_residual >= 1e-3


def test_composition_inverse_and_reparameterization(scenario):
    sc = scenario("so3-circle")
    atlas = sc.bundle.atlas
    arc1 = geo.PiecewisePath.single(geo.coordinate_segment(
        atlas.chart("0"), lambda t: (-0.4 + 2.0 * np.asarray(t))[..., None], lambda t: np.full(np.shape(t) + (1,), 2.0)))
    arc2 = geo.PiecewisePath.single(geo.coordinate_segment(
        atlas.chart("1"), lambda t: (1.6 - np.pi - 1.5 * np.asarray(t))[..., None],
        lambda t: np.full(np.shape(t) + (1,), -1.5)))
    comp, inv = transport_composition_check(sc.connection, arc1, arc2, 512)
    assert comp <= 1e-7 and inv <= 1e-7
    loop = sc.loop()
    P = parallel_transport(sc.connection, loop, 512).map
    r = lambda t: (np.exp(t) - 1) / (np.e - 1)  # noqa: E731
    dr = lambda t: np.exp(t) / (np.e - 1)  # noqa: E731
    Pr = parallel_transport(sc.connection, geo.reparameterize(loop, r, dr), 512).map
    assert np.linalg.norm(P - Pr) <= 1e-7


def test_frames_at_the_ends_follow_transitions(scenario):
    sc = scenario("so3-circle")
    b = sc.bundle
    path = geo.PiecewisePath.single(great_arc_2d(np.pi / 2 - 0.1, np.pi / 2 + 0.2))
    P00 = parallel_transport(sc.connection, path, 256, "0", "0").map
    P11 = parallel_transport(sc.connection, path, 256, "1", "1").map
    expect = b.transition("0", "1", path.end) @ P00 @ np.linalg.inv(b.transition("0", "1", path.start))
    assert np.allclose(P11, expect, atol=1e-8)


def great_arc_2d(a0, a1):
    seg = great_arc([np.cos(a0), np.sin(a0), 0.0], [np.cos(a1), np.sin(a1), 0.0])
    return geo.Segment(lambda t: seg(t)[..., :2], lambda t: seg.velocity(t)[..., :2])


def test_transport_argument_errors(scenario):
    sc = scenario("so3-plane")
    with pytest.raises(ValueError):
        parallel_transport(sc.connection, sc.loop(), 4)
    far = geo.segment_path([(5.0, 5.0), (6.0, 5.0)])
    with pytest.raises(geo.GeometryError):
        parallel_transport(sc.connection, far, 64)


# -- holonomy variation ------------------------------------------------------------------


def test_holonomy_variation_second_order_on_plane(scenario):
    sc = scenario("so3-plane")
    coarse = holonomy_variation_check(sc.connection, sc.homotopy(), 8, 128).max_residual
    fine = holonomy_variation_check(sc.connection, sc.homotopy(), 16, 256).max_residual
    assert fine <= 1e-4
    assert 3.5 <= coarse / fine <= 4.5


def test_holonomy_variation_on_circle(scenario):
    sc = scenario("so3-circle")
    prof = holonomy_variation_check(sc.connection, sc.homotopy(), 8, 256)
    assert prof.max_residual <= 1e-6
    assert len(prof.s) == 7


def test_holonomy_variation_requires_fixed_endpoints(scenario):
    sc = scenario("ts2")
    chart = sc.bundle.atlas.chart("N")
    moving = geo.coordinate_homotopy(chart, lambda s, t: np.multiply.outer(np.asarray(t), [s, 0.0]),
                                     lambda s, t: np.broadcast_to([s, 0.0], np.shape(t) + (2,)),
                                     lambda s, t: np.multiply.outer(np.asarray(t), [1.0, 0.0]), (0.1, 0.2))
    with pytest.raises(geo.GeometryError):
        holonomy_variation_check(sc.connection, moving, 4, 32)


# -- blending -------------------------------------------------------------------------------


def test_blended_connection_is_lie_and_inner_valued(scenario):
    sc = scenario("so3-circle")
    c = sc.connection
    assert c.lie_residual() <= 1e-11
    ds = sc.bundle.derivations
    for ch in sc.bundle.atlas.charts:
        pts = sc.bundle.atlas.chart_samples(ch.id, 12)
        A = c.components(ch.id, ch.to_coord(pts))
        for a in A[:, 0]:
            assert alg.inner_test(ds, a).relative_residual <= 1e-9


def test_single_chart_blend_is_the_local_form():
    g = alg.so3()
    b = LieAlgebraBundle(g, geo.box(2), {}, "one")
    form = ad_form(g, lambda u: np.stack([u[..., [0, 1, 0]], u[..., [1, 1, 0]]], axis=-2))
    c = global_connection_from_locals(b, {"0": form}, geo.build_partition(b.atlas))
    u = np.array([[0.2, -0.3]])
    assert np.array_equal(c.components("0", u), form(u))
