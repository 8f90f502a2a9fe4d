"""Lie algebra bundles over atlases, Lie connections and parallel transport.

Conventions. ``transition(a, b, x)`` maps fibre coordinates in the frame of
chart ``a`` to those of chart ``b``: ``v_b = phi_ab(x) v_a``. A connection is
stored chart by chart as component matrices ``A_i(u)`` so that in chart
coordinates ``nabla_X s = ds(X) + omega(X) s`` with ``omega(X) = sum_i X_i A_i``.
Changing frames gives ``omega_b = phi omega_a phi^-1 - (d_X phi) phi^-1``.
Parallel sections satisfy ``s' = -omega(gamma') s``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np

from . import algebra as alg
from .geometry import (
    Atlas,
    Chart,
    GeometryError,
    TOL_GEO,
    Homotopy,
    PartitionOfUnity,
    PiecewisePath,
    invert_path,
    compose_paths,
)

TOL_CONN = 1e-6
TOL_TRANSPORT = 1e-7
FD_STEP = 1e-4
DEFAULT_STEPS = 512
MIN_STEPS = 8

# points[..., m] -> matrices[..., d, d]
TransitionFn = Callable[[np.ndarray], np.ndarray]
# coords[..., n] -> components[..., n, d, d]
LocalForm = Callable[[np.ndarray], np.ndarray]


class TransportError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class LieAlgebraBundle:
    """Fibre, atlas and transition functions for the stored pairs.

    Only one orientation of each pair needs to be given; the other one is the
    pointwise inverse and ``phi_aa = I``.
    """

    fiber: alg.LieAlgebra
    atlas: Atlas
    transitions: Mapping
    name: str = ""

    def __post_init__(self):
        trans = dict(self.transitions)
        ids = set(self.atlas.ids)
        for a, b in trans:
            if a not in ids or b not in ids or a == b:
                raise ValueError(f"bad transition pair ({a!r}, {b!r})")
            if (b, a) in trans:
                raise ValueError(f"pair ({a!r}, {b!r}) given in both orientations")
        object.__setattr__(self, "transitions", trans)

    @property
    def rank(self) -> int:
        return self.fiber.dim

    def pairs(self) -> list[tuple[str, str]]:
        return list(self.transitions)

    def has_transition(self, a: str, b: str) -> bool:
        return a == b or (a, b) in self.transitions or (b, a) in self.transitions

    def transition(self, a: str, b: str, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        d = self.rank
        if a == b:
            return np.broadcast_to(np.eye(d), points.shape[:-1] + (d, d)).copy()
        if (a, b) in self.transitions:
            return np.asarray(self.transitions[(a, b)](points), dtype=float)
        if (b, a) in self.transitions:
            return np.linalg.inv(np.asarray(self.transitions[(b, a)](points), dtype=float))
        raise TransportError(f"bundle {self.name!r} has no transition between charts {a!r} and {b!r}")

    @functools.cached_property
    def derivations(self) -> alg.DerivationSpace:
        return alg.derivation_space(self.fiber)


@dataclass(frozen=True)
class BundleReport:
    automorphism: float
    cocycle: float
    singular: int
    samples: int

    @property
    def ok(self) -> bool:
        return self.singular == 0 and self.automorphism <= alg.TOL_ALG and self.cocycle <= 1e-9


def check_bundle(b: LieAlgebraBundle, samples: int = 32, seed=None) -> BundleReport:
    aut = 0.0
    coc = 0.0
    singular = 0
    total = 0
    for pa, pb in b.atlas.overlapping_pairs():
        pts = b.atlas.overlap_samples(pa, pb, samples, seed=seed)
        if not len(pts):
            continue
        if not b.has_transition(pa, pb):
            raise TransportError(f"charts {pa!r} and {pb!r} overlap but no transition is given")
        phi = b.transition(pa, pb, pts)
        total += len(pts)
        aut = max(aut, float(np.max(alg.automorphism_residual(b.fiber, phi))))
        cond = np.linalg.cond(phi)
        singular += int(np.sum(~np.isfinite(cond) | (cond > alg.COND_LIMIT)))
    ids = b.atlas.ids
    for i, a in enumerate(ids):
        for j, c2 in enumerate(ids[i + 1 :], i + 1):
            for c3 in ids[j + 1 :]:
                pts = b.atlas.triple_samples(a, c2, c3, samples, seed=seed)
                if not len(pts):
                    continue
                lhs = b.transition(a, c3, pts)
                rhs = b.transition(c2, c3, pts) @ b.transition(a, c2, pts)
                coc = max(coc, float(np.max(np.abs(lhs - rhs))))
    return BundleReport(aut, coc, singular, total)


class LieConnection:
    """Connection given by local forms in the chart frames of a bundle."""

    def __init__(self, bundle: LieAlgebraBundle, local_forms: Mapping[str, LocalForm], name: str = ""):
        missing = set(bundle.atlas.ids) - set(local_forms)
        if missing:
            raise ValueError(f"no local form for chart(s) {sorted(missing)}")
        self.bundle = bundle
        self.local_forms = dict(local_forms)
        self.name = name

    def components(self, cid: str, coords) -> np.ndarray:
        return np.asarray(self.local_forms[cid](np.asarray(coords, dtype=float)), dtype=float)

    def form(self, cid: str, coords, vecs) -> np.ndarray:
        """``omega(X)`` in chart ``cid`` at ``coords`` for coordinate vectors ``vecs``."""
        A = self.components(cid, coords)
        return np.einsum("...i,...ijk->...jk", np.asarray(vecs, dtype=float), A)

    def lie_residual(self, samples: int = 32) -> float:
        """Worst derivation-identity residual of the form components at chart samples."""
        worst = 0.0
        for c in self.bundle.atlas.charts:
            pts = self.bundle.atlas.chart_samples(c.id, samples)
            A = self.components(c.id, c.to_coord(pts))
            worst = max(worst, float(np.max(alg.derivation_residual(self.bundle.fiber, A))))
        return worst

    def compatibility_residual(self, samples: int = 16, h: float = FD_STEP) -> float:
        """Worst mismatch of ``omega_b`` against the frame change of ``omega_a``."""
        b = self.bundle
        worst = 0.0
        for pa, pb in b.atlas.overlapping_pairs():
            ca, cb = b.atlas.chart(pa), b.atlas.chart(pb)
            pts = b.atlas.overlap_samples(pa, pb, samples)
            if not len(pts):
                continue
            ua = ca.to_coord(pts)
            phi = b.transition(pa, pb, pts)
            phinv = np.linalg.inv(phi)
            step = h * ca.scale
            for i in range(ca.dim):
                e = np.zeros(ca.dim)
                e[i] = 1.0
                dphi = (b.transition(pa, pb, ca.to_point(ua + step * e)) - b.transition(pa, pb, ca.to_point(ua - step * e))) / (2 * step)
                Xb = cb.push(pts, ca.lift(ua, np.broadcast_to(e, ua.shape)))
                wa = self.form(pa, ua, np.broadcast_to(e, ua.shape))
                wb = self.form(pb, cb.to_coord(pts), Xb)
                expect = phi @ wa @ phinv - dphi @ phinv
                worst = max(worst, float(np.max(np.abs(wb - expect))))
        return worst


@dataclass(frozen=True)
class CurvatureValue:
    endo: np.ndarray
    omega: Optional[np.ndarray]
    ad_residual: float

    @property
    def is_inner(self) -> bool:
        return self.omega is not None


def curvature_endo(c: LieConnection, cid: str, coords, X, Y, h: float = FD_STEP) -> np.ndarray:
    """``d_X omega(Y) - d_Y omega(X) + [omega(X), omega(Y)]``, batched over points."""
    chart = c.bundle.atlas.chart(cid)
    u = np.asarray(coords, dtype=float)
    X = np.broadcast_to(np.asarray(X, dtype=float), u.shape)
    Y = np.broadcast_to(np.asarray(Y, dtype=float), u.shape)
    step = h * chart.scale

    def dform(along, arg):
        # unit-length stencil; scaled back by |along|
        size = np.linalg.norm(along, axis=-1, keepdims=True)
        unit = np.divide(along, size, out=np.zeros_like(along), where=size > 0)
        plus = c.form(cid, u + step * unit, arg)
        minus = c.form(cid, u - step * unit, arg)
        return (plus - minus) / (2 * step) * size[..., None]

    wX, wY = c.form(cid, u, X), c.form(cid, u, Y)
    return dform(X, Y) - dform(Y, X) + wX @ wY - wY @ wX


def curvature(c: LieConnection, x, X, Y, chart: Optional[str] = None, h: float = FD_STEP) -> CurvatureValue:
    """Curvature at the point ``x``; ``X`` and ``Y`` are coordinate vectors of ``chart``."""
    x = np.asarray(x, dtype=float)
    ch = c.bundle.atlas.chart(chart) if chart is not None else c.bundle.atlas.first_chart(x)
    if not ch.contains(x):
        raise GeometryError(f"point {x.tolist()} is outside chart {ch.id!r}")
    R = curvature_endo(c, ch.id, ch.to_coord(x), X, Y, h)
    dec = alg.inner_test(c.bundle.derivations, R)
    return CurvatureValue(R, dec.witness_u if dec.is_inner else None, dec.residual)


# -- parallel transport ------------------------------------------------------


@dataclass(frozen=True)
class TransportResult:
    map: np.ndarray
    lie_residual: float
    step_count: int
    start_chart: str = ""
    end_chart: str = ""
    # per segment: (U at nodes, chart id at nodes); only filled on request
    nodes: Optional[list] = field(default=None, repr=False, compare=False)

    @classmethod
    def build(cls, P, fiber, steps, start_chart="", end_chart="", nodes=None):
        res = float(alg.automorphism_residual(fiber, P))
        return cls(P, res, steps, start_chart, end_chart, nodes)


def _schedule(inside: np.ndarray, start: int) -> list[tuple[int, int, int]]:
    """Chart runs ``(chart, first_step, stop_step)`` covering every step.

    ``inside[c, k]`` says step ``k`` lies in chart ``c``. A chart is kept until
    the path leaves it; the switch happens halfway through the stretch where
    both the old and the new chart contain the path.
    """
    n_charts, K = inside.shape
    runs = []
    cur, begin = start, 0
    while True:
        out = np.flatnonzero(~inside[cur, begin:])
        if not len(out):
            runs.append((cur, begin, K))
            return runs
        exit_k = begin + int(out[0])
        best, best_len = None, -1
        for c in range(n_charts):
            if c == cur or not inside[c, exit_k]:
                continue
            stop = np.flatnonzero(~inside[c, exit_k:])
            length = int(stop[0]) if len(stop) else K - exit_k
            if length > best_len:
                best, best_len = c, length
        if best is None:
            raise TransportError(f"path leaves the atlas at step {exit_k}")
        k = exit_k
        while k - 1 > begin and inside[best, k - 1] and inside[cur, k - 1]:
            k -= 1
        switch = (k + exit_k) // 2
        if switch <= begin:
            switch = exit_k
        runs.append((cur, begin, switch))
        cur, begin = best, switch


def parallel_transport(
    c: LieConnection,
    path: PiecewisePath,
    steps: int = DEFAULT_STEPS,
    start_chart: Optional[str] = None,
    end_chart: Optional[str] = None,
    record: bool = False,
) -> TransportResult:
    """Transport along ``path`` with fixed-step RK4, ``steps`` per segment.

    The result maps fibre coordinates in the frame of ``start_chart`` at the
    start point to the frame of ``end_chart`` at the end point (defaults: the
    first chart containing the respective point).
    """
    if steps < MIN_STEPS:
        raise ValueError(f"need at least {MIN_STEPS} steps, got {steps}")
    b = c.bundle
    atlas = b.atlas
    d = b.rank
    samples = path.sample(2 * steps)
    P3 = np.concatenate([np.stack([p[0:-1:2], p[1::2], p[2::2]], axis=1) for p, _ in samples])
    V3 = np.concatenate([np.stack([v[0:-1:2], v[1::2], v[2::2]], axis=1) for _, v in samples])
    K = len(P3)
    h = 1.0 / steps

    start_chart = start_chart or atlas.first_chart(path.start).id
    end_chart = end_chart or atlas.first_chart(path.end).id
    if not atlas.chart(start_chart).contains(path.start):
        raise TransportError(f"start point is outside chart {start_chart!r}")
    if not atlas.chart(end_chart).contains(path.end):
        raise TransportError(f"end point is outside chart {end_chart!r}")

    inside = np.stack([ch.contains(P3).all(axis=1) for ch in atlas.charts])
    s_idx = atlas.index(start_chart)
    first = s_idx if inside[s_idx, 0] else int(np.flatnonzero(inside[:, 0])[0]) if inside[:, 0].any() else None
    if first is None:
        raise TransportError("path starts outside every chart")
    runs = _schedule(inside, first)

    M = np.empty((K, d, d))
    for ci, k0, k1 in runs:
        ch = atlas.charts[ci]
        pts = P3[k0:k1]
        u = ch.to_coord(pts)
        du = ch.push(pts, V3[k0:k1])
        W = c.form(ch.id, u, du)
        M[k0:k1] = _rk4_propagators(W, h)

    P = np.eye(d)
    if atlas.charts[first].id != start_chart:
        P = b.transition(start_chart, atlas.charts[first].id, path.start) @ P
    node_U, node_c = [P.copy()], [atlas.charts[first].id]
    switch_at = {k0: ci for ci, k0, _ in runs[1:]}
    prev = first
    for k in range(K):
        if k in switch_at:
            nxt = switch_at[k]
            P = b.transition(atlas.charts[prev].id, atlas.charts[nxt].id, P3[k, 0]) @ P
            prev = nxt
            if record:
                node_U[-1], node_c[-1] = P.copy(), atlas.charts[prev].id
        P = M[k] @ P
        if record:
            node_U.append(P.copy())
            node_c.append(atlas.charts[prev].id)
    last = atlas.charts[prev].id
    E = np.eye(d)
    if last != end_chart:
        E = b.transition(last, end_chart, path.end)
    P = E @ P

    nodes = None
    if record:
        U = np.stack(node_U)
        charts = np.array(node_c, dtype=object)
        nodes = []
        for i in range(len(samples)):
            sl = slice(i * steps, (i + 1) * steps + 1)
            nodes.append((U[sl], charts[sl], E))
    return TransportResult.build(P, b.fiber, steps, start_chart, end_chart, nodes)


def _rk4_propagators(W: np.ndarray, h: float) -> np.ndarray:
    """One-step RK4 maps for ``P' = -W(t) P`` with ``W[k] = (start, mid, end)``."""
    K, _, d, _ = W.shape
    I = np.broadcast_to(np.eye(d), (K, d, d))
    W0, Wm, W1 = W[:, 0], W[:, 1], W[:, 2]
    k1 = -W0
    k2 = -Wm @ (I + 0.5 * h * k1)
    k3 = -Wm @ (I + 0.5 * h * k2)
    k4 = -W1 @ (I + h * k3)
    return I + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def transport_composition_check(c: LieConnection, path1: PiecewisePath, path2: PiecewisePath,
                                steps: int = DEFAULT_STEPS) -> tuple[float, float]:
    """``(|P_{path2 . path1} - P_path2 P_path1|, |P_{path1^-1} - P_path1^-1|)``."""
    atlas = c.bundle.atlas
    a = atlas.first_chart(path1.start).id
    m = atlas.first_chart(path1.end).id
    z = atlas.first_chart(path2.end).id
    joined = compose_paths(path1, path2)
    P1 = parallel_transport(c, path1, steps, a, m).map
    P2 = parallel_transport(c, path2, steps, m, z).map
    P12 = parallel_transport(c, joined, steps, a, z).map
    Pinv = parallel_transport(c, invert_path(path1), steps, m, a).map
    return (float(np.linalg.norm(P12 - P2 @ P1)), float(np.linalg.norm(Pinv - np.linalg.inv(P1))))


# -- holonomy variation ------------------------------------------------------


@dataclass(frozen=True)
class HolonomyProfile:
    s: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    residual: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residual))


def _rhs_integral(c: LieConnection, H: Homotopy, s: float, steps: int, start: str, end: str, h_fd: float):
    """``(P_s, int_0^1 P_{s,t} R(dH/dt, dH/ds) P_{s,t}^-1 dt)`` by the trapezoid rule."""
    atlas = c.bundle.atlas
    path = H.path(s)
    tr = parallel_transport(c, path, steps, start, end, record=True)
    P = tr.map
    dS = H.ds(s, steps)
    total = np.zeros_like(P)
    for (pos, vel), dsH, (U, charts, _) in zip(path.sample(steps), dS, tr.nodes):
        vals = np.empty((len(pos),) + P.shape)
        for cid in dict.fromkeys(charts):
            sel = np.flatnonzero(charts == cid)
            ch = atlas.chart(cid)
            u = ch.to_coord(pos[sel])
            R = curvature_endo(c, cid, u, ch.push(pos[sel], vel[sel]), ch.push(pos[sel], dsH[sel]), h_fd)
            Pst = P @ np.linalg.inv(U[sel])
            vals[sel] = Pst @ R @ np.linalg.inv(Pst)
        total += (vals[0] + vals[-1]) / (2 * steps) + vals[1:-1].sum(axis=0) / steps
    return P, total


def holonomy_variation_check(c: LieConnection, H: Homotopy, ns: int = 64, steps: int = DEFAULT_STEPS,
                             h_fd: float = FD_STEP, tol: float = TOL_GEO) -> HolonomyProfile:
    """Compare ``d/ds P_s`` with ``(int R_{s,t} dt) P_s`` on a uniform ``s`` grid.

    ``ns`` is the number of ``s`` intervals and ``steps`` the RK4 step count
    per path segment. The left side uses central differences between grid
    neighbours, so the profile covers the ``ns - 1`` interior nodes.
    """
    s0, s1 = H.s_range
    grid = s0 + (s1 - s0) * np.arange(ns + 1) / ns
    starts = np.stack([H.path(s).start for s in grid])
    ends = np.stack([H.path(s).end for s in grid])
    if np.ptp(starts, axis=0).max() > tol or np.ptp(ends, axis=0).max() > tol:
        raise GeometryError("homotopy endpoints move with s")
    atlas = c.bundle.atlas
    a = atlas.first_chart(starts[0]).id
    z = atlas.first_chart(ends[0]).id
    maps = [parallel_transport(c, H.path(s), steps, a, z).map for s in grid]
    ds = (s1 - s0) / ns
    lhs, rhs = [], []
    for i in range(1, ns):
        lhs.append((maps[i + 1] - maps[i - 1]) / (2 * ds))
        P, integral = _rhs_integral(c, H, grid[i], steps, a, z, h_fd)
        rhs.append(integral @ P)
    lhs, rhs = np.array(lhs), np.array(rhs)
    return HolonomyProfile(grid[1:-1], lhs, rhs, np.linalg.norm(lhs - rhs, axis=(-2, -1)))


# -- blending ----------------------------------------------------------------


def frame_change_form(b: LieAlgebraBundle, cid_from: str, cid_to: str, form: LocalForm, coords_to,
                      h: float = FD_STEP) -> np.ndarray:
    """Components of ``omega_from`` rewritten in the frame of ``cid_to``.

    Evaluated at ``coords_to`` (coordinates of ``cid_to``); directions are the
    coordinate directions of ``cid_to``.
    """
    atlas = b.atlas
    ct, cf = atlas.chart(cid_to), atlas.chart(cid_from)
    u = np.asarray(coords_to, dtype=float)
    x = ct.to_point(u)
    phi = b.transition(cid_from, cid_to, x)
    phinv = np.linalg.inv(phi)
    A_from = np.asarray(form(cf.to_coord(x)), dtype=float)
    step = h * ct.scale
    out = np.empty(u.shape[:-1] + (ct.dim,) + phi.shape[-2:])
    for i in range(ct.dim):
        e = np.zeros(ct.dim)
        e[i] = 1.0
        Xf = cf.push(x, ct.lift(u, np.broadcast_to(e, u.shape)))
        w = np.einsum("...i,...ijk->...jk", Xf, A_from)
        dlog = alg.log_derivative(b.transition(cid_from, cid_to, ct.to_point(u + step * e)),
                                  b.transition(cid_from, cid_to, ct.to_point(u - step * e)), phi, step)
        out[..., i, :, :] = phi @ w @ phinv - dlog
    return out


def global_connection_from_locals(bundle: LieAlgebraBundle, locals_: Mapping[str, LocalForm],
                                  pu: PartitionOfUnity, h: float = FD_STEP, name: str = "") -> LieConnection:
    """Partition-of-unity blend ``sum_alpha h_alpha nabla^alpha``.

    Terms whose finite-difference stencil would leave the chart are dropped;
    their weights are below the smoothstep tail at that depth.
    """
    atlas = bundle.atlas
    if len(atlas.charts) == 1:
        return LieConnection(bundle, dict(locals_), name)

    def make(cid_to):
        ct = atlas.chart(cid_to)

        def form(coords):
            u = np.asarray(coords, dtype=float)
            x = ct.to_point(u)
            w = pu(x)
            d = bundle.rank
            out = np.zeros(u.shape[:-1] + (ct.dim, d, d))
            for j, cf in enumerate(atlas.charts):
                wj = w[..., j]
                if cf.id == cid_to:
                    out += wj[..., None, None, None] * np.asarray(locals_[cf.id](u), dtype=float)
                    continue
                step = h * ct.scale
                ok = wj > 0
                for i in range(ct.dim):
                    e = np.zeros(ct.dim)
                    e[i] = 1.0
                    ok &= cf.contains(ct.to_point(u + step * e)) & cf.contains(ct.to_point(u - step * e))
                if not bundle.has_transition(cf.id, cid_to):
                    if np.any(ok):
                        raise TransportError(f"blend needs a transition between {cf.id!r} and {cid_to!r}")
                    continue
                if not np.any(ok):
                    continue
                part = frame_change_form(bundle, cf.id, cid_to, locals_[cf.id], u[ok], h)
                out[ok] += wj[ok][..., None, None, None] * part
            return out

        return form

    return LieConnection(bundle, {c.id: make(c.id) for c in atlas.charts}, name)
