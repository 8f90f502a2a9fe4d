"""Charts, atlases, piecewise smooth paths, homotopies and partitions of unity.

Manifold points are numpy vectors in whatever representation the atlas uses
(unit vectors in R^2 for the circle, R^3 for the sphere, angle pairs embedded
in R^4 for the torus, plain coordinates for boxes). Charts convert between
points and coordinates; every chart image is a star-shaped ball (or box)
around 0 so radial paths stay inside it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.stats import qmc

TOL_GEO = 1e-9
DEFAULT_SAMPLES_PER_SEGMENT = 512
_FD_STEP = 1e-4


class GeometryError(ValueError):
    pass


def _fd_directional(f, x, v, h=_FD_STEP):
    """Fourth-order central difference of ``f`` at ``x`` along ``v`` (batched)."""
    return (
        -f(x + 2 * h * v) + 8 * f(x + h * v) - 8 * f(x - h * v) + f(x - 2 * h * v)
    ) / (12 * h)


@dataclass(frozen=True, eq=False)
class Chart:
    """Coordinate chart ``f: U -> R^n`` with inverse ``to_point``.

    The chart domain is ``{p : valid(p) and |f(p)| < radius}`` with either the
    Euclidean or the max norm. ``push`` maps point velocities to coordinate
    velocities and ``lift`` does the reverse; both fall back to finite
    differences when no analytic Jacobian is supplied.
    """

    id: str
    dim: int
    to_coord: Callable[[np.ndarray], np.ndarray]
    to_point: Callable[[np.ndarray], np.ndarray]
    radius: float = np.inf
    norm: str = "euclid"
    valid: Optional[Callable[[np.ndarray], np.ndarray]] = None
    coord_jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    point_jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None

    @property
    def center(self) -> np.ndarray:
        return self.to_point(np.zeros(self.dim))

    @property
    def scale(self) -> float:
        return float(self.radius) if np.isfinite(self.radius) else 1.0

    def coord_norm(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.norm == "max":
            return np.max(np.abs(u), axis=-1)
        return np.linalg.norm(u, axis=-1)

    def rho(self, points) -> np.ndarray:
        """Normalised radius of ``points`` in this chart; ``inf`` where invalid."""
        points = np.asarray(points, dtype=float)
        ok = np.ones(points.shape[:-1], dtype=bool)
        if self.valid is not None:
            ok = np.asarray(self.valid(points), dtype=bool)
        with np.errstate(all="ignore"):
            r = self.coord_norm(self.to_coord(points)) / self.radius
        return np.where(ok & np.isfinite(r), r, np.inf)

    def contains(self, points, margin: float = 0.0) -> np.ndarray:
        return self.rho(points) < 1.0 - margin

    def push(self, points, vecs) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        vecs = np.asarray(vecs, dtype=float)
        if self.coord_jacobian is not None:
            return np.einsum("...ij,...j->...i", self.coord_jacobian(points), vecs)
        return _fd_directional(self.to_coord, points, vecs, 1e-5)

    def lift(self, coords, cvecs) -> np.ndarray:
        coords = np.asarray(coords, dtype=float)
        cvecs = np.asarray(cvecs, dtype=float)
        if self.point_jacobian is not None:
            return np.einsum("...ij,...j->...i", self.point_jacobian(coords), cvecs)
        return _fd_directional(self.to_point, coords, cvecs, 1e-5)


@dataclass(frozen=True, eq=False)
class Atlas:
    name: str
    charts: tuple
    sample_margin: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "charts", tuple(self.charts))
        ids = [c.id for c in self.charts]
        if len(set(ids)) != len(ids):
            raise GeometryError(f"duplicate chart ids in atlas {self.name!r}")

    @property
    def ids(self) -> list[str]:
        return [c.id for c in self.charts]

    @property
    def dim(self) -> int:
        return self.charts[0].dim

    def chart(self, cid: str) -> Chart:
        for c in self.charts:
            if c.id == cid:
                return c
        raise GeometryError(f"atlas {self.name!r} has no chart {cid!r}")

    def index(self, cid: str) -> int:
        return self.ids.index(cid)

    def first_chart(self, point) -> Chart:
        for c in self.charts:
            if c.contains(point):
                return c
        raise GeometryError(f"point {np.asarray(point).tolist()} lies in no chart of {self.name!r}")

    def _candidates(self, chart: Chart, count: int, seed: Optional[int]) -> np.ndarray:
        n = chart.dim
        m = max(64, 16 * count)
        if seed is None:
            pts = qmc.Halton(d=n, scramble=False).random(m + 1)[1:]
        else:
            pts = qmc.Halton(d=n, scramble=True, seed=seed).random(m)
        u = (2 * pts - 1) * chart.scale
        if chart.norm != "max" and np.isfinite(chart.radius):
            u = u[np.linalg.norm(u, axis=-1) < chart.scale]
        return chart.to_point(u)

    def chart_samples(self, cid: str, count: int, margin=None, seed=None) -> np.ndarray:
        """Deterministic low-discrepancy points well inside chart ``cid``."""
        margin = self.sample_margin if margin is None else margin
        c = self.chart(cid)
        pts = self._candidates(c, count, seed)
        pts = pts[c.contains(pts, margin)]
        return pts[:count]

    def overlap_samples(self, a: str, b: str, count: int, margin=None, seed=None) -> np.ndarray:
        """Points of ``U_a`` and ``U_b`` at normalised depth ``margin`` in both."""
        margin = self.sample_margin if margin is None else margin
        ca, cb = self.chart(a), self.chart(b)
        pts = self._candidates(ca, 8 * count, seed)
        pts = pts[ca.contains(pts, margin) & cb.contains(pts, margin)]
        return pts[:count]

    def triple_samples(self, a, b, c, count, margin=None, seed=None) -> np.ndarray:
        pts = self.overlap_samples(a, b, 4 * count, margin, seed)
        margin = self.sample_margin if margin is None else margin
        return pts[self.chart(c).contains(pts, margin)][:count]

    def overlapping_pairs(self) -> list[tuple[str, str]]:
        out = []
        for i, a in enumerate(self.ids):
            for b in self.ids[i + 1 :]:
                if len(self.overlap_samples(a, b, 1)):
                    out.append((a, b))
        return out

    def sample_points(self, count: int) -> np.ndarray:
        """Registered base points: ``count`` samples from every chart."""
        return np.concatenate([self.chart_samples(c.id, count, margin=0.0) for c in self.charts])


# -- builtin atlases -------------------------------------------------------


def _wrap(a):
    return (a + np.pi) % (2 * np.pi) - np.pi


def angle_chart(cid: str, center_angle: float, half_width: float = 0.75 * np.pi) -> Chart:
    """Circle chart ``p -> angle(p) - center_angle`` on unit vectors in R^2."""
    a0 = float(center_angle)

    def to_coord(p):
        p = np.asarray(p, dtype=float)
        return _wrap(np.arctan2(p[..., 1], p[..., 0]) - a0)[..., None]

    def to_point(u):
        th = np.asarray(u, dtype=float)[..., 0] + a0
        return np.stack([np.cos(th), np.sin(th)], axis=-1)

    def coord_jac(p):
        p = np.asarray(p, dtype=float)
        r2 = np.sum(p * p, axis=-1)
        return np.stack([-p[..., 1] / r2, p[..., 0] / r2], axis=-1)[..., None, :]

    def point_jac(u):
        th = np.asarray(u, dtype=float)[..., 0] + a0
        return np.stack([-np.sin(th), np.cos(th)], axis=-1)[..., :, None]

    return Chart(cid, 1, to_coord, to_point, half_width, "euclid", None, coord_jac, point_jac)


def circle(half_width: float = 0.75 * np.pi) -> Atlas:
    """S^1 with two angular charts centred at angles 0 and pi.

    The overlap has two components, around angles pi/2 and -pi/2.
    """
    return Atlas("circle", [angle_chart("0", 0.0, half_width), angle_chart("1", np.pi, half_width)])


def stereographic_chart(cid: str, sign: int, radius: float = 2.5) -> Chart:
    """Stereographic projection of the unit sphere.

    ``sign=+1`` projects from the north pole (chart centre is the south pole),
    ``sign=-1`` from the south pole (centre is the north pole).
    """
    s = float(sign)

    def to_coord(p):
        p = np.asarray(p, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return p[..., :2] / (1 - s * p[..., 2:3])

    def to_point(u):
        u = np.asarray(u, dtype=float)
        r2 = np.sum(u * u, axis=-1, keepdims=True)
        return np.concatenate([2 * u, s * (r2 - 1)], axis=-1) / (1 + r2)

    def coord_jac(p):
        p = np.asarray(p, dtype=float)
        d = 1 - s * p[..., 2]
        J = np.zeros(p.shape[:-1] + (2, 3))
        J[..., 0, 0] = 1 / d
        J[..., 1, 1] = 1 / d
        J[..., 0, 2] = s * p[..., 0] / d**2
        J[..., 1, 2] = s * p[..., 1] / d**2
        return J

    def point_jac(u):
        u = np.asarray(u, dtype=float)
        q = 1 + np.sum(u * u, axis=-1)
        J = np.zeros(u.shape[:-1] + (3, 2))
        eye = np.eye(2)
        J[..., :2, :] = 2 * eye / q[..., None, None] - 4 * u[..., :, None] * u[..., None, :] / q[..., None, None] ** 2
        J[..., 2, :] = s * 4 * u / q[..., None] ** 2
        return J

    def valid(p):
        return (1 - s * np.asarray(p, dtype=float)[..., 2]) > 1e-12

    return Chart(cid, 2, to_coord, to_point, radius, "euclid", valid, coord_jac, point_jac)


def sphere2(radius: float = 2.5) -> Atlas:
    """S^2 with chart ``S`` (centre south pole) and ``N`` (centre north pole)."""
    return Atlas("sphere2", [stereographic_chart("S", +1, radius), stereographic_chart("N", -1, radius)])


def torus(half_width: float = 0.75 * np.pi) -> Atlas:
    """T^2 embedded as ``(cos a, sin a, cos b, sin b)`` with four product charts."""
    charts = []
    for i, a0 in enumerate((0.0, np.pi)):
        for j, b0 in enumerate((0.0, np.pi)):
            charts.append(_torus_chart(f"{i}{j}", a0, b0, half_width))
    return Atlas("torus", charts)


def _torus_chart(cid, a0, b0, w):
    ca, cb = angle_chart("a", a0, w), angle_chart("b", b0, w)

    def to_coord(p):
        p = np.asarray(p, dtype=float)
        return np.concatenate([ca.to_coord(p[..., :2]), cb.to_coord(p[..., 2:])], axis=-1)

    def to_point(u):
        u = np.asarray(u, dtype=float)
        return np.concatenate([ca.to_point(u[..., :1]), cb.to_point(u[..., 1:])], axis=-1)

    def coord_jac(p):
        p = np.asarray(p, dtype=float)
        J = np.zeros(p.shape[:-1] + (2, 4))
        J[..., 0:1, 0:2] = ca.coord_jacobian(p[..., :2])
        J[..., 1:2, 2:4] = cb.coord_jacobian(p[..., 2:])
        return J

    def point_jac(u):
        u = np.asarray(u, dtype=float)
        J = np.zeros(u.shape[:-1] + (4, 2))
        J[..., 0:2, 0:1] = ca.point_jacobian(u[..., :1])
        J[..., 2:4, 1:2] = cb.point_jacobian(u[..., 1:])
        return J

    return Chart(cid, 2, to_coord, to_point, w, "max", None, coord_jac, point_jac)


def flat_chart(cid: str, center, radius: float = np.inf, norm: str = "euclid") -> Chart:
    c = np.asarray(center, dtype=float)
    n = c.size

    def jac(p):
        p = np.asarray(p, dtype=float)
        return np.broadcast_to(np.eye(n), p.shape[:-1] + (n, n))

    return Chart(cid, n, lambda p: np.asarray(p, dtype=float) - c, lambda u: np.asarray(u, dtype=float) + c,
                 radius, norm, None, jac, jac)


def box(n: int = 2, centers=None, radius: float = np.inf) -> Atlas:
    """Flat R^n patch: one global chart, or balls around ``centers``."""
    if centers is None:
        return Atlas(f"box{n}", [flat_chart("0", np.zeros(n), radius)])
    return Atlas(f"box{n}", [flat_chart(str(i), c, radius) for i, c in enumerate(centers)])


def plane2() -> Atlas:
    """Two overlapping unit-scale discs in R^2, centred at (0,0) and (1,0)."""
    return box(2, centers=[(0.0, 0.0), (1.0, 0.0)], radius=1.5)


BUILTIN_ATLASES = {
    "circle": circle,
    "sphere2": sphere2,
    "torus": torus,
    "box1": lambda: box(1),
    "box2": lambda: box(2),
    "box3": lambda: box(3),
    "plane2": plane2,
}


def builtin_atlas(name: str) -> Atlas:
    try:
        return BUILTIN_ATLASES[name]()
    except KeyError:
        raise GeometryError(f"unknown atlas {name!r}; known: {', '.join(BUILTIN_ATLASES)}") from None


# -- paths -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Segment:
    """Smooth piece ``t in [0, 1] -> point`` with its velocity.

    Reversal is a flag, so sampling a doubly reversed segment reproduces the
    original samples bit for bit.
    """

    position: Callable[[np.ndarray], np.ndarray]
    velocity: Callable[[np.ndarray], np.ndarray]
    reversed: bool = False

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.position(1 - t) if self.reversed else self.position(t)

    def velocity_at(self, t):
        t = np.asarray(t, dtype=float)
        return -self.velocity(1 - t) if self.reversed else self.velocity(t)

    def sample(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        """Positions and velocities on the grid ``t = j/m``, ``j = 0..m``."""
        t = np.arange(m + 1) / m
        P, V = self.position(t), self.velocity(t)
        if self.reversed:
            return P[::-1], -V[::-1]
        return P, V

    def invert(self) -> "Segment":
        return Segment(self.position, self.velocity, not self.reversed)

    @classmethod
    def from_samples(cls, points) -> "Segment":
        """Segment through uniformly spaced samples.

        Velocities come from second-order central differences at the samples;
        values in between use cubic Hermite interpolation.
        """
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or len(pts) < 3:
            raise GeometryError("need at least three samples of shape (k, m)")
        t = np.linspace(0.0, 1.0, len(pts))
        vel = np.gradient(pts, t, axis=0, edge_order=2)
        spline = CubicHermiteSpline(t, pts, vel, axis=0)
        return cls(spline, spline.derivative())


def _const_segment(point) -> Segment:
    p = np.asarray(point, dtype=float)
    return Segment(
        lambda t: np.broadcast_to(p, np.shape(t) + p.shape).copy(),
        lambda t: np.zeros(np.shape(t) + p.shape),
    )


@dataclass(frozen=True, eq=False)
class PiecewisePath:
    """Concatenation of segments; segment ``i`` occupies ``[breaks[i], breaks[i+1]]``."""

    segments: tuple
    breaks: tuple

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "breaks", tuple(Fraction(b) for b in self.breaks))
        if len(self.breaks) != len(self.segments) + 1 or self.breaks[0] != 0 or self.breaks[-1] != 1:
            raise GeometryError("breaks must run from 0 to 1 with one interval per segment")

    @classmethod
    def single(cls, segment: Segment) -> "PiecewisePath":
        return cls((segment,), (0, 1))

    @property
    def start(self) -> np.ndarray:
        return np.asarray(self.segments[0](0.0))

    @property
    def end(self) -> np.ndarray:
        return np.asarray(self.segments[-1](1.0))

    def _locate(self, t: float):
        t = float(t)
        for seg, a, b in zip(self.segments, self.breaks[:-1], self.breaks[1:]):
            if t <= float(b) or b == 1:
                return seg, (t - float(a)) / float(b - a), float(b - a)
        raise GeometryError(f"parameter {t} outside [0, 1]")

    def __call__(self, t: float) -> np.ndarray:
        seg, tau, _ = self._locate(t)
        return np.asarray(seg(tau))

    def velocity_at(self, t: float) -> np.ndarray:
        """Velocity in the global parameter (one-sided from the left at breaks)."""
        seg, tau, width = self._locate(t)
        return np.asarray(seg.velocity_at(tau)) / width

    def sample(self, m: int = DEFAULT_SAMPLES_PER_SEGMENT):
        """Per-segment ``(positions, velocities)``, velocities in local parameters."""
        return [s.sample(m) for s in self.segments]


def constant_path(point) -> PiecewisePath:
    return PiecewisePath.single(_const_segment(point))


def segment_path(points) -> PiecewisePath:
    """Piecewise linear path through ``points`` in ambient coordinates (flat bases)."""
    pts = [np.asarray(p, dtype=float) for p in points]
    segs = []
    for p, q in zip(pts[:-1], pts[1:]):
        segs.append(Segment(lambda t, p=p, q=q: p + np.multiply.outer(t, q - p),
                            lambda t, p=p, q=q: np.broadcast_to(q - p, np.shape(t) + p.shape).copy()))
    k = len(segs)
    return PiecewisePath(segs, [Fraction(i, k) for i in range(k + 1)])


def coordinate_segment(chart: Chart, coord, coord_velocity) -> Segment:
    """Segment given by a curve in chart coordinates."""
    return Segment(
        lambda t: chart.to_point(coord(np.asarray(t, dtype=float))),
        lambda t: chart.lift(coord(np.asarray(t, dtype=float)), coord_velocity(np.asarray(t, dtype=float))),
    )


def radial_path(chart: Chart, x) -> PiecewisePath:
    """``t -> f^-1(t f(x))``: from the chart centre to ``x`` along a coordinate ray."""
    x = np.asarray(x, dtype=float)
    if not chart.contains(x):
        raise GeometryError(f"point {x.tolist()} is outside chart {chart.id!r}")
    u = np.asarray(chart.to_coord(x), dtype=float)
    return PiecewisePath.single(
        coordinate_segment(chart, lambda t: np.multiply.outer(t, u), lambda t: np.broadcast_to(u, np.shape(t) + u.shape))
    )


def invert_path(path: PiecewisePath) -> PiecewisePath:
    segs = [s.invert() for s in reversed(path.segments)]
    breaks = [1 - b for b in reversed(path.breaks)]
    return PiecewisePath(segs, breaks)


def compose_paths(first: PiecewisePath, second: PiecewisePath, tol: float = TOL_GEO) -> PiecewisePath:
    """Traverse ``first`` on ``[0, 1/2]`` then ``second`` on ``[1/2, 1]``."""
    gap = float(np.linalg.norm(first.end - second.start))
    if gap > tol:
        raise GeometryError(f"paths do not meet: endpoint gap {gap:.3e}")
    half = Fraction(1, 2)
    breaks = [b * half for b in first.breaks] + [half + b * half for b in second.breaks[1:]]
    return PiecewisePath(first.segments + second.segments, breaks)


def reparameterize(path: PiecewisePath, r: Callable, dr: Callable) -> PiecewisePath:
    """Apply a monotone ``r: [0,1] -> [0,1]`` (with derivative ``dr``) to every segment."""
    segs = []
    for s in path.segments:
        segs.append(Segment(
            lambda t, s=s: s(r(np.asarray(t, dtype=float))),
            lambda t, s=s: np.asarray(dr(np.asarray(t, dtype=float)))[..., None] * s.velocity_at(r(np.asarray(t, dtype=float))),
        ))
    return PiecewisePath(segs, path.breaks)


def velocity_consistency(path: PiecewisePath, m: int = DEFAULT_SAMPLES_PER_SEGMENT) -> float:
    """Max gap between supplied velocities and central differences of positions."""
    worst = 0.0
    for P, V in path.sample(m):
        fd = (P[2:] - P[:-2]) * (m / 2)
        worst = max(worst, float(np.max(np.abs(fd - V[1:-1]))))
    return worst


def segment_continuity(path: PiecewisePath) -> float:
    worst = 0.0
    for a, b in zip(path.segments[:-1], path.segments[1:]):
        worst = max(worst, float(np.linalg.norm(np.asarray(a(1.0)) - np.asarray(b(0.0)))))
    return worst


# -- homotopies --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Homotopy:
    """Family of paths ``h_s``, ``s`` in ``s_range``.

    ``s_velocity(s, m)`` returns per segment the samples of ``dH/ds`` on the grid
    ``t = j/m``; without it a central difference in ``s`` is used.
    """

    family: Callable[[float], PiecewisePath]
    s_range: tuple = (0.0, 1.0)
    s_velocity: Optional[Callable[[float, int], list]] = None

    def path(self, s: float) -> PiecewisePath:
        return self.family(s)

    def ds(self, s: float, m: int) -> list[np.ndarray]:
        if self.s_velocity is not None:
            return self.s_velocity(s, m)
        h = 1e-6 * max(1.0, abs(self.s_range[1] - self.s_range[0]))
        plus = self.family(s + h).sample(m)
        minus = self.family(s - h).sample(m)
        return [(p[0] - q[0]) / (2 * h) for p, q in zip(plus, minus)]

    def grid(self, ns: int, m: int) -> list[np.ndarray]:
        """Positions per segment on an ``(ns + 1) x (m + 1)`` grid."""
        s = np.linspace(*self.s_range, ns + 1)
        samples = [self.family(si).sample(m) for si in s]
        return [np.stack([smp[k][0] for smp in samples]) for k in range(len(samples[0]))]

    def continuity_residual(self, ns: int = 16, m: int = 64) -> float:
        """Largest jump between neighbouring grid cells, scaled by the grid step."""
        worst = 0.0
        for G in self.grid(ns, m):
            ds = np.linalg.norm(np.diff(G, axis=0), axis=-1).max() * ns
            dt = np.linalg.norm(np.diff(G, axis=1), axis=-1).max() * m
            worst = max(worst, float(ds), float(dt))
        return worst


def _radial_s_velocity(chart: Chart, c_point, c_vel, m: int) -> np.ndarray:
    """``d/ds f^-1(t f(c(s)))`` on the grid ``t = j/m``."""
    u = np.asarray(chart.to_coord(c_point), dtype=float)
    du = chart.push(c_point, c_vel)
    t = np.arange(m + 1) / m
    return chart.lift(np.multiply.outer(t, u), np.multiply.outer(t, du))


def overlap_homotopy(chart_a: Chart, chart_b: Chart, c: PiecewisePath, m_check: int = 64) -> Homotopy:
    """The two-piece homotopy ``h_s = (radial_b(c(s)))^-1 . radial_a(c(s))``.

    Every ``h_s`` starts at the centre of ``chart_a`` and ends at the centre of
    ``chart_b``.
    """
    s_grid = np.linspace(0.0, 1.0, m_check + 1)
    pts = np.stack([c(s) for s in s_grid])
    if not np.all(chart_a.contains(pts) & chart_b.contains(pts)):
        raise GeometryError("curve leaves the overlap of the two charts")

    def family(s):
        x = c(s)
        return compose_paths(radial_path(chart_a, x), invert_path(radial_path(chart_b, x)))

    def s_vel(s, m):
        x, v = c(s), c.velocity_at(s)
        first = _radial_s_velocity(chart_a, x, v, m)
        second = _radial_s_velocity(chart_b, x, v, m)[::-1]
        return [first, second]

    return Homotopy(family, (0.0, 1.0), s_vel)


def coordinate_homotopy(chart: Chart, U, dU_dt, dU_ds, s_range) -> Homotopy:
    """Single-segment homotopy given by ``(s, t) -> U(s, t)`` in chart coordinates."""

    def family(s):
        return PiecewisePath.single(coordinate_segment(chart, lambda t: U(s, t), lambda t: dU_dt(s, t)))

    def s_vel(s, m):
        t = np.arange(m + 1) / m
        return [chart.lift(U(s, t), dU_ds(s, t))]

    return Homotopy(family, tuple(s_range), s_vel)


# -- partitions of unity -----------------------------------------------------


def smoothstep(z):
    z = np.clip(z, 0.0, 1.0)
    return z * z * z * (z * (6 * z - 15) + 10)


@dataclass(frozen=True, eq=False)
class PartitionOfUnity:
    """Normalised smoothstep bumps, one per chart, in chart order."""

    atlas: Atlas
    plateau: float = 0.25

    def bumps(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        cols = []
        for c in self.atlas.charts:
            rho = c.rho(points)
            if not np.isfinite(c.radius):
                cols.append(np.ones(points.shape[:-1]))
                continue
            with np.errstate(invalid="ignore"):
                b = smoothstep((1.0 - rho) / (1.0 - self.plateau))
            cols.append(np.where(np.isfinite(rho), b, 0.0))
        return np.stack(cols, axis=-1)

    def __call__(self, points) -> np.ndarray:
        """Weights ``h_alpha(points)``, shape ``points.shape[:-1] + (n_charts,)``."""
        b = self.bumps(points)
        total = b.sum(axis=-1, keepdims=True)
        if np.any(total <= 0):
            bad = np.asarray(points)[..., :][(total[..., 0] <= 0)]
            raise GeometryError(f"{len(bad)} point(s) not covered by the atlas, e.g. {bad[0].tolist()}")
        return b / total

    def weight(self, cid: str, points) -> np.ndarray:
        return self(points)[..., self.atlas.index(cid)]


def build_partition(atlas: Atlas, sample_count: int = 64, plateau: float = 0.25) -> PartitionOfUnity:
    pu = PartitionOfUnity(atlas, plateau)
    pu(atlas.sample_points(sample_count))
    return pu
