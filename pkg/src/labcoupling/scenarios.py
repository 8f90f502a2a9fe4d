"""Builtin bundles, connections and test loops."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from . import algebra as alg
from . import geometry as geo
from .bundle import LieAlgebraBundle, LieConnection, global_connection_from_locals

J2 = np.array([[0.0, -1.0], [1.0, 0.0]])


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    bundle: LieAlgebraBundle
    connection: Optional[LieConnection] = None
    expected: Optional[str] = None
    description: str = ""
    loop: Optional[Callable[[], geo.PiecewisePath]] = None
    homotopy: Optional[Callable[[], geo.Homotopy]] = None
    extras: dict = field(default_factory=dict)


def ad_form(g: alg.LieAlgebra, vectors: Callable[[np.ndarray], np.ndarray]):
    """Local form with components ``ad(v_i(u))``; ``vectors`` returns ``(..., n, dim g)``."""
    return lambda u: alg.ad(g, vectors(np.asarray(u, dtype=float)))


def zero_form(n: int, d: int):
    return lambda u: np.zeros(np.shape(u)[:-1] + (n, d, d))


def _upper(points) -> np.ndarray:
    """Which overlap component of the two-chart circle a point lies in."""
    return np.asarray(points)[..., 1] > 0


def _angle(points) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    return np.arctan2(p[..., 1], p[..., 0])


def circle_loop(loops: int = 1) -> geo.PiecewisePath:
    """``loops`` turns around the circle from angle 0, counterclockwise."""
    seg = geo.Segment(
        lambda t: np.stack([np.cos(2 * np.pi * t), np.sin(2 * np.pi * t)], axis=-1),
        lambda t: 2 * np.pi * np.stack([-np.sin(2 * np.pi * t), np.cos(2 * np.pi * t)], axis=-1),
    )
    k = max(1, int(loops))
    return geo.PiecewisePath([seg] * k, [Fraction(i, k) for i in range(k + 1)])


def great_arc(a, b) -> geo.Segment:
    """Constant-speed arc of the great circle from unit vector ``a`` to ``b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ang = float(np.arccos(np.clip(a @ b, -1.0, 1.0)))
    w = b - (a @ b) * a
    w = w / np.linalg.norm(w)

    def pos(t):
        t = np.asarray(t, dtype=float)[..., None]
        return np.cos(ang * t) * a + np.sin(ang * t) * w

    def vel(t):
        t = np.asarray(t, dtype=float)[..., None]
        return ang * (-np.sin(ang * t) * a + np.cos(ang * t) * w)

    return geo.Segment(pos, vel)


def octant_loop() -> geo.PiecewisePath:
    """North pole -> (1,0,0) -> (0,1,0) -> north pole; encloses area pi/2."""
    n, x, y = np.array([0.0, 0, 1]), np.array([1.0, 0, 0]), np.array([0.0, 1, 0])
    return geo.PiecewisePath([great_arc(n, x), great_arc(x, y), great_arc(y, n)],
                             [0, Fraction(1, 3), Fraction(2, 3), 1])


# -- so(3) over the circle ---------------------------------------------------


def so3_circle() -> Scenario:
    g = alg.so3()
    atlas = geo.circle()
    e1, e3 = np.eye(3)[0], np.eye(3)[2]
    lower = alg.exp_derivation(alg.ad(g, 0.5 * e1))

    def phi01(points):
        th = 0.8 * np.cos(_angle(points))
        upper = alg.exp_derivation(alg.ad(g, th[..., None] * e3))
        return np.where(_upper(points)[..., None, None], upper, lower)

    bundle = LieAlgebraBundle(g, atlas, {("0", "1"): phi01}, "so3-circle")

    def v0(u):
        th = u[..., 0]
        return np.stack([0.3 * np.cos(th), 0.2 + 0 * th, 0.1 * np.sin(2 * th)], axis=-1)[..., None, :]

    def v1(u):
        th = u[..., 0]
        return np.stack([0.1 + 0 * th, -0.25 * np.sin(th), 0.2 * np.cos(th)], axis=-1)[..., None, :]

    pu = geo.build_partition(atlas)
    conn = global_connection_from_locals(bundle, {"0": ad_form(g, v0), "1": ad_form(g, v1)}, pu, name="so3-circle")

    def homotopy():
        c = geo.PiecewisePath.single(geo.coordinate_segment(
            atlas.chart("0"), lambda s: (np.pi / 2 - 0.3 + 0.6 * np.asarray(s))[..., None],
            lambda s: np.full(np.shape(s) + (1,), 0.6)))
        return geo.overlap_homotopy(atlas.chart("0"), atlas.chart("1"), c)

    return Scenario("so3-circle", bundle, conn, "exists",
                    "so(3) fibre over S^1; inner exponential transition on one overlap component, "
                    "constant on the other; blended inner-valued connection.",
                    loop=circle_loop, homotopy=homotopy)


def sl2_circle_outer() -> Scenario:
    g = alg.sl2()
    atlas = geo.circle()
    outer = np.diag([1.0, -1.0, -1.0])

    def phi01(points):
        m = np.where(_upper(points)[..., None, None], outer, np.eye(3))
        return np.broadcast_to(m, np.shape(points)[:-1] + (3, 3)).copy()

    bundle = LieAlgebraBundle(g, atlas, {("0", "1"): phi01}, "sl2-circle-outer")
    pu = geo.build_partition(atlas)
    conn = global_connection_from_locals(bundle, {"0": zero_form(1, 3), "1": zero_form(1, 3)}, pu, name="sl2-circle-outer")
    return Scenario("sl2-circle-outer", bundle, conn, "exists",
                    "sl(2,R) fibre over S^1 with the constant outer automorphism diag(1,-1,-1) "
                    "as transition on one overlap component.", loop=circle_loop)


def abelian_circle(k: float = 0.1) -> Scenario:
    g = alg.abelian(1)
    atlas = geo.circle()
    bundle = LieAlgebraBundle(g, atlas, {("0", "1"): lambda p: np.ones(np.shape(p)[:-1] + (1, 1))}, "abelian-circle")
    form = lambda u: np.full(np.shape(u)[:-1] + (1, 1, 1), k)
    conn = LieConnection(bundle, {"0": form, "1": form}, "abelian-circle")
    return Scenario("abelian-circle", bundle, conn, "exists",
                    f"trivial line bundle over S^1 with connection {k} dtheta.", loop=circle_loop,
                    extras={"k": k})


# -- so(3) over a planar patch -----------------------------------------------


def _plane_vectors(x):
    x1, x2 = x[..., 0], x[..., 1]
    d1 = np.stack([0.3 * x2, 0.2 * np.sin(x1), 0.1 + 0 * x1], axis=-1)
    d2 = np.stack([0.1 * x1 * x2, -0.2 + 0 * x1, 0.25 * np.cos(x2)], axis=-1)
    return np.stack([d1, d2], axis=-2)


def so3_plane() -> Scenario:
    g = alg.so3()
    atlas = geo.plane2()
    bundle = LieAlgebraBundle(g, atlas, {("0", "1"): lambda p: np.broadcast_to(np.eye(3), np.shape(p)[:-1] + (3, 3)).copy()},
                              "so3-plane")
    forms = {c.id: ad_form(g, lambda u, c=c: _plane_vectors(c.to_point(u))) for c in atlas.charts}
    conn = LieConnection(bundle, forms, "so3-plane")

    def loop():
        return geo.PiecewisePath.single(geo.coordinate_segment(
            atlas.chart("0"),
            lambda t: 0.5 * np.stack([np.cos(2 * np.pi * t), np.sin(2 * np.pi * t)], axis=-1) + np.array([0.5, 0.0]),
            lambda t: np.pi * np.stack([-np.sin(2 * np.pi * t), np.cos(2 * np.pi * t)], axis=-1)))

    def homotopy():
        c = geo.segment_path([(0.5, -0.3), (0.5, 0.3)])
        return geo.overlap_homotopy(atlas.chart("0"), atlas.chart("1"), c)

    return Scenario("so3-plane", bundle, conn, "exists",
                    "trivial so(3) bundle over two overlapping discs with a curved inner-valued connection.",
                    loop=loop, homotopy=homotopy)


# -- tangent bundle of the sphere -----------------------------------------------


def _levi_civita(u):
    u = np.asarray(u, dtype=float)
    q = 1 + np.sum(u * u, axis=-1)
    a1 = 2 * u[..., 1] / q
    a2 = -2 * u[..., 0] / q
    return np.stack([a1[..., None, None] * J2, a2[..., None, None] * J2], axis=-3)


def ts2() -> Scenario:
    """Tangent bundle of S^2 in orthonormal stereographic frames.

    The frame change between the two stereographic charts is the reflection
    ``I - 2 n n^T`` with ``n`` the unit coordinate direction of the point.
    """
    g = alg.abelian(2)
    atlas = geo.sphere2()
    chart_s = atlas.chart("S")

    def phi(points):
        u = chart_s.to_coord(points)
        n = u / np.linalg.norm(u, axis=-1, keepdims=True)
        return np.eye(2) - 2 * n[..., :, None] * n[..., None, :]

    bundle = LieAlgebraBundle(g, atlas, {("S", "N"): phi}, "ts2")
    conn = LieConnection(bundle, {"S": _levi_civita, "N": _levi_civita}, "ts2-levi-civita")
    chart_n = atlas.chart("N")

    def homotopy():
        def U(s, t):
            t = np.asarray(t, dtype=float)
            return s * np.stack([1 - np.cos(2 * np.pi * t), np.sin(2 * np.pi * t)], axis=-1)

        def dU_dt(s, t):
            t = np.asarray(t, dtype=float)
            return 2 * np.pi * s * np.stack([np.sin(2 * np.pi * t), np.cos(2 * np.pi * t)], axis=-1)

        def dU_ds(s, t):
            t = np.asarray(t, dtype=float)
            return np.stack([1 - np.cos(2 * np.pi * t), np.sin(2 * np.pi * t)], axis=-1)

        return geo.coordinate_homotopy(chart_n, U, dU_dt, dU_ds, (0.2, 0.25))

    return Scenario("ts2", bundle, conn, "fails",
                    "tangent bundle of S^2 as an abelian Lie algebra bundle; admits no flat connection.",
                    loop=octant_loop, homotopy=homotopy)


# -- Heisenberg fibre over the torus -------------------------------------------


def heisenberg_torus() -> Scenario:
    g = alg.heisenberg3()
    atlas = geo.torus()
    ids = atlas.ids

    def gauge(idx, points):
        p = np.asarray(points, dtype=float)
        u = np.stack([0.3 * p[..., 0] + 0.1 * idx, 0.2 * p[..., 3], 0.1 * p[..., 1] * p[..., 2] - 0.05 * idx], axis=-1)
        return alg.exp_derivation(alg.ad(g, u))

    trans = {}
    for i, a in enumerate(ids):
        for j in range(i + 1, len(ids)):
            trans[(a, ids[j])] = lambda p, i=i, j=j: gauge(j, p) @ np.linalg.inv(gauge(i, p))
    bundle = LieAlgebraBundle(g, atlas, trans, "heisenberg-torus")
    return Scenario("heisenberg-torus", bundle, None, "exists",
                    "Heisenberg fibre over T^2 with x-dependent inner transitions on all chart pairs.")


BUILTIN_SCENARIOS = {
    "so3-circle": so3_circle,
    "sl2-circle-outer": sl2_circle_outer,
    "abelian-circle": abelian_circle,
    "so3-plane": so3_plane,
    "ts2": ts2,
    "heisenberg-torus": heisenberg_torus,
}


def builtin_scenario(name: str) -> Scenario:
    try:
        return BUILTIN_SCENARIOS[name]()
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; known: {', '.join(BUILTIN_SCENARIOS)}") from None
