"""Deciding whether the tangent bundle couples with a Lie algebra bundle.

A coupling exists exactly when the bundle has transition functions whose
logarithmic derivatives are everywhere inner derivations. Two routes reach
such transitions:

* forward: a Lie connection whose curvature is inner is used to re-trivialise
  the bundle by parallel transport along chart rays; the new transitions are
  transports around ``centre_a -> x -> centre_b``;
* direct: the supplied transitions are tested as they are.

When the transitions pass, the coupling is assembled from the flat
connections of the chart frames, blended by a partition of unity, and the
certificate records the residual of every step.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from . import algebra as alg
from .bundle import (
    DEFAULT_STEPS,
    FD_STEP,
    TOL_CONN,
    TOL_TRANSPORT,
    LieAlgebraBundle,
    LieConnection,
    TransportError,
    curvature_endo,
    frame_change_form,
    global_connection_from_locals,
    parallel_transport,
)
from .geometry import (
    GeometryError,
    PartitionOfUnity,
    build_partition,
    compose_paths,
    invert_path,
    radial_path,
)

PASS_TOL = 1e-6
FAIL_TOL = 1e-2
# witnesses from the two routes must agree to this many fd tolerances
WITNESS_FACTOR = 10.0
MAX_WITNESSES = 16


class Verdict(str, enum.Enum):
    EXISTS = "exists"
    FAILS = "fails"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class CouplingSettings:
    samples: int = 32
    steps: int = DEFAULT_STEPS
    fd_step: float = FD_STEP
    pass_tol: float = PASS_TOL
    fail_tol: float = FAIL_TOL
    curvature_samples: int = 16
    seed: Optional[int] = None

    def classify(self, residual: float) -> str:
        if residual <= self.pass_tol:
            return "pass"
        if residual >= self.fail_tol:
            return "fail"
        return "inconclusive"


@dataclass(frozen=True)
class Witness:
    kind: str
    where: str
    point: np.ndarray
    direction: object
    residual: float

    def to_dict(self):
        return {
            "kind": self.kind,
            "where": self.where,
            "point": _floats(self.point),
            "direction": self.direction,
            "residual": float(self.residual),
        }


class HypothesisFailure(RuntimeError):
    """The connection does not have inner curvature somewhere."""

    def __init__(self, witness: Witness):
        super().__init__(f"curvature is not inner at {witness.where} (relative residual {witness.residual:.3e})")
        self.witness = witness


# -- curvature scan -------------------------------------------------------------


@dataclass(frozen=True)
class CurvatureSample:
    chart: str
    point: np.ndarray
    directions: tuple
    norm: float
    residual: float
    omega: np.ndarray


def curvature_scan(c: LieConnection, settings: CouplingSettings = CouplingSettings()) -> list[CurvatureSample]:
    """Inner-test of ``R(e_i, e_j)`` for all coordinate pairs at chart samples."""
    ds = c.bundle.derivations
    atlas = c.bundle.atlas
    out = []
    for ch in atlas.charts:
        pts = atlas.chart_samples(ch.id, settings.curvature_samples, seed=settings.seed)
        u = ch.to_coord(pts)
        eye = np.eye(ch.dim)
        for i in range(ch.dim):
            for j in range(i + 1, ch.dim):
                R = curvature_endo(c, ch.id, u, eye[i], eye[j], settings.fd_step)
                for p, Rk in zip(pts, R):
                    dec = alg.inner_test(ds, Rk)
                    out.append(CurvatureSample(ch.id, p, (i, j), dec.norm, dec.relative_residual, dec.witness_u))
    return out


# -- forward direction ---------------------------------------------------------


class TransportTransition:
    """``x -> P_{gamma_x}`` with ``gamma_x`` running centre_a -> x -> centre_b."""

    def __init__(self, c: LieConnection, a: str, b: str, steps: int = DEFAULT_STEPS):
        self.connection = c
        self.a, self.b = a, b
        self.steps = steps
        self._cache: dict = {}

    def path(self, x):
        atlas = self.connection.bundle.atlas
        return compose_paths(radial_path(atlas.chart(self.a), x), invert_path(radial_path(atlas.chart(self.b), x)))

    def at(self, x) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=float)
        key = x.tobytes()
        if key not in self._cache:
            tr = parallel_transport(self.connection, self.path(x), self.steps, self.a, self.b)
            self._cache[key] = tr.map
        return self._cache[key]

    def __call__(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        flat = points.reshape(-1, points.shape[-1])
        d = self.connection.bundle.rank
        out = np.stack([self.at(x) for x in flat]) if len(flat) else np.zeros((0, d, d))
        return out.reshape(points.shape[:-1] + (d, d))


def build_transport_charts(c: LieConnection, settings: CouplingSettings = CouplingSettings()) -> LieAlgebraBundle:
    """Re-trivialise the bundle by transport along chart rays.

    Raises :class:`HypothesisFailure` when the curvature is not inner at some
    sample; the exception carries the worst sample as witness.
    """
    scan = curvature_scan(c, settings)
    bad = [s for s in scan if s.residual > settings.pass_tol]
    if bad:
        w = max(bad, key=lambda s: s.residual)
        raise HypothesisFailure(Witness("curvature", f"chart {w.chart}", w.point, list(w.directions), w.residual))
    lie = c.lie_residual(settings.curvature_samples)
    if lie > alg.TOL_ALG:
        raise HypothesisFailure(Witness("lie_condition", "connection", np.zeros(0), None, lie))
    b = c.bundle
    trans = {(a, z): TransportTransition(c, a, z, settings.steps) for a, z in b.atlas.overlapping_pairs()}
    return LieAlgebraBundle(b.fiber, b.atlas, trans, f"{b.name}/transport-charts")


# -- delta-continuity ---------------------------------------------------------------


@dataclass(frozen=True)
class DeltaSample:
    point: np.ndarray
    direction: int
    residual: float
    derivative_norm: float
    witness_u: np.ndarray
    h_witness: np.ndarray


@dataclass(frozen=True)
class DeltaTransitionReport:
    pair: tuple
    samples: list
    max_residual: float
    passes: bool
    status: str


def delta_continuity_test(b: LieAlgebraBundle, ds: Optional[alg.DerivationSpace] = None,
                          settings: CouplingSettings = CouplingSettings()) -> list[DeltaTransitionReport]:
    """Inner-test of ``(d_X phi) phi^-1`` at overlap samples, per chart pair.

    Directions are the coordinate directions of the first chart of each pair;
    residuals are relative to ``max(1, |(d_X phi) phi^-1|_F)``.
    """
    ds = ds or b.derivations
    atlas = b.atlas
    reports = []
    for a, z in atlas.overlapping_pairs():
        ca, cz = atlas.chart(a), atlas.chart(z)
        pts = atlas.overlap_samples(a, z, settings.samples, seed=settings.seed)
        step = settings.fd_step * ca.scale
        u0 = ca.to_coord(pts)
        eye = np.eye(ca.dim)
        plus = ca.to_point(u0[:, None, :] + step * eye)
        minus = ca.to_point(u0[:, None, :] - step * eye)
        inside = ca.contains(plus) & ca.contains(minus) & cz.contains(plus) & cz.contains(minus)
        if not np.all(inside):
            raise GeometryError(f"overlap sample of ({a}, {z}) too close to the boundary for the fd stencil")
        phi0 = b.transition(a, z, pts)
        dphi = (b.transition(a, z, plus) - b.transition(a, z, minus)) / (2 * step)
        inv0 = np.linalg.inv(phi0)
        samples = []
        for k in range(len(pts)):
            for i in range(ca.dim):
                D = dphi[k, i] @ inv0[k]
                dec = alg.inner_test(ds, D)
                samples.append(DeltaSample(pts[k], i, dec.relative_residual, dec.norm, dec.witness_u,
                                           inv0[k] @ dec.witness_u))
        worst = max((s.residual for s in samples), default=0.0)
        reports.append(DeltaTransitionReport((a, z), samples, worst, worst <= settings.pass_tol, settings.classify(worst)))
    return reports


# -- backward direction ----------------------------------------------------------


@dataclass
class CouplingCertificate:
    verdict: Verdict
    route: str = "direct"
    bundle: str = ""
    fiber: str = ""
    atlas: str = ""
    local_forms: dict = field(default_factory=dict)
    xi: Optional[LieConnection] = None
    outer_curvature_residuals: dict = field(default_factory=dict)
    overlap_residuals: dict = field(default_factory=dict)
    restriction_residuals: dict = field(default_factory=dict)
    xi_lie_residual: Optional[float] = None
    witness_agreement: Optional[float] = None
    delta_reports: list = field(default_factory=list)
    curvature: dict = field(default_factory=dict)
    witnesses: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    settings: CouplingSettings = field(default_factory=CouplingSettings)

    def to_dict(self) -> dict:
        st = self.settings
        return {
            "verdict": self.verdict.value,
            "route": self.route,
            "bundle": self.bundle,
            "fiber": self.fiber,
            "atlas": self.atlas,
            "local_forms": self.local_forms,
            "delta_continuity": [
                {
                    "pair": list(r.pair),
                    "max_residual": float(r.max_residual),
                    "passes": bool(r.passes),
                    "status": r.status,
                    "samples": len(r.samples),
                }
                for r in self.delta_reports
            ],
            "overlap_residuals": {k: float(max(v, default=0.0)) for k, v in self.overlap_residuals.items()},
            "restriction_residuals": {k: float(max(v, default=0.0)) for k, v in self.restriction_residuals.items()},
            "outer_curvature_residuals": {k: float(max(v, default=0.0)) for k, v in self.outer_curvature_residuals.items()},
            "xi_lie_residual": self.xi_lie_residual,
            "witness_agreement": self.witness_agreement,
            "curvature": self.curvature,
            "witnesses": [w.to_dict() for w in self.witnesses],
            "notes": list(self.notes),
            "tolerances": {
                "pass": st.pass_tol,
                "fail": st.fail_tol,
                "algebra": alg.TOL_ALG,
                "inner": alg.TOL_INNER,
                "connection": TOL_CONN,
                "transport": TOL_TRANSPORT,
                "witness_agreement": WITNESS_FACTOR * TOL_CONN,
            },
            "resolutions": {
                "samples": st.samples,
                "steps": st.steps,
                "fd_step": st.fd_step,
                "curvature_samples": st.curvature_samples,
                "seed": st.seed,
            },
            "versions": {"labcoupling": __version__, "numpy": np.__version__},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _floats(a):
    return [float(v) for v in np.asarray(a, dtype=float).ravel()]


def _zero_form(n, d):
    return lambda u: np.zeros(np.shape(u)[:-1] + (n, d, d))


def build_coupling(b: LieAlgebraBundle, reports: list[DeltaTransitionReport], pu: Optional[PartitionOfUnity] = None,
                   settings: CouplingSettings = CouplingSettings()) -> CouplingCertificate:
    """Assemble the coupling from flat chart-frame connections.

    Every report must pass. The certificate checks that the flat local
    connections have zero curvature, that their differences on overlaps are
    inner, and that the blended representative restricts to each local one
    modulo inner derivations.
    """
    failing = [r.pair for r in reports if not r.passes]
    if failing:
        raise ValueError(f"delta-continuity failed for pairs {failing}")
    atlas = b.atlas
    ds = b.derivations
    d = b.rank
    pu = pu or build_partition(atlas)
    locals_ = {ch.id: _zero_form(ch.dim, d) for ch in atlas.charts}
    flat = LieConnection(b, locals_, "flat-chart-frames")
    xi = global_connection_from_locals(b, locals_, pu, settings.fd_step, name="xi")
    cert = CouplingCertificate(Verdict.EXISTS, bundle=b.name, fiber=b.fiber.name, atlas=atlas.name, xi=xi,
                               settings=settings)
    cert.local_forms = {ch.id: "zero in the chart frame" for ch in atlas.charts}
    cert.delta_reports = list(reports)

    for ch in atlas.charts:
        pts = atlas.chart_samples(ch.id, settings.curvature_samples, seed=settings.seed)
        u = ch.to_coord(pts)
        eye = np.eye(ch.dim)
        vals = [0.0]
        for i in range(ch.dim):
            for j in range(i + 1, ch.dim):
                R = curvature_endo(flat, ch.id, u, eye[i], eye[j], settings.fd_step)
                vals.extend(float(np.linalg.norm(Rk)) for Rk in R)
        cert.outer_curvature_residuals[ch.id] = vals

    agreement = 0.0
    worst = []
    for rep in reports:
        a, z = rep.pair
        ca = atlas.chart(a)
        key = f"{a}-{z}"
        res = []
        pts = np.stack([s.point for s in rep.samples])
        # difference nabla^z - nabla^a in the frame of a, i.e. phi^-1 d phi
        diff = frame_change_form(b, z, a, locals_[z], ca.to_coord(pts), settings.fd_step)
        for k, s in enumerate(rep.samples):
            dec = alg.inner_test(ds, diff[k, s.direction])
            res.append(dec.relative_residual)
            agreement = max(agreement, float(np.linalg.norm(dec.witness_u - s.h_witness)))
            worst.append(Witness("overlap_difference", f"pair {a}-{z}", s.point, s.direction, dec.relative_residual))
        cert.overlap_residuals[key] = res

        # blended representative against the local one on the overlap
        xi_a = xi.components(a, ca.to_coord(pts))
        rres = []
        for k in range(len(pts)):
            for i in range(ca.dim):
                rres.append(alg.inner_test(ds, xi_a[k, i]).relative_residual)
        cert.restriction_residuals[key] = rres

    cert.witness_agreement = agreement
    cert.xi_lie_residual = xi.lie_residual(settings.curvature_samples)

    everything = [v for vs in cert.overlap_residuals.values() for v in vs]
    everything += [v for vs in cert.restriction_residuals.values() for v in vs]
    top = max(everything, default=0.0)
    status = settings.classify(top)
    if status == "pass":
        cert.verdict = Verdict.EXISTS
    else:
        cert.verdict = Verdict.FAILS if status == "fail" else Verdict.INCONCLUSIVE
        cert.witnesses = sorted((w for w in worst if w.residual > settings.pass_tol),
                                key=lambda w: -w.residual)[:MAX_WITNESSES]
        cert.notes.append("overlap differences of the flat chart connections are not inner")
    return cert


def coupling_exists(b: LieAlgebraBundle, connection: Optional[LieConnection] = None,
                    settings: CouplingSettings = CouplingSettings()) -> CouplingCertificate:
    ds = b.derivations
    notes = []
    curvature_info = {}
    target = b
    route = "direct"
    if connection is not None:
        scan = curvature_scan(connection, settings)
        lie = connection.lie_residual(settings.curvature_samples)
        worst = max((s.residual for s in scan), default=0.0)
        curvature_info = {
            "lie_residual": lie,
            "max_relative_ad_residual": worst,
            "max_norm": max((s.norm for s in scan), default=0.0),
            "samples": len(scan),
        }
        if lie <= alg.TOL_ALG and worst <= settings.pass_tol:
            try:
                target = build_transport_charts(connection, settings)
                route = "forward"
            except (TransportError, GeometryError) as exc:
                notes.append(f"transport charts unavailable ({exc}); testing the given transitions")
        else:
            bad = sorted((s for s in scan if s.residual > settings.pass_tol), key=lambda s: -s.residual)
            curvature_info["witnesses"] = [
                Witness("curvature", f"chart {s.chart}", s.point, list(s.directions), s.residual).to_dict()
                for s in bad[:MAX_WITNESSES]
            ]
            if lie > alg.TOL_ALG:
                notes.append("connection is not a Lie connection; testing the given transitions")
            else:
                notes.append("curvature is not inner; testing the given transitions")

    reports = delta_continuity_test(target, ds, settings)
    if all(r.passes for r in reports):
        cert = build_coupling(target, reports, build_partition(b.atlas), settings)
    else:
        cert = CouplingCertificate(Verdict.INCONCLUSIVE, bundle=target.name, fiber=b.fiber.name, atlas=b.atlas.name,
                                   settings=settings)
        cert.delta_reports = reports
        failing = [
            Witness("transition_derivative", f"pair {r.pair[0]}-{r.pair[1]}", s.point, s.direction, s.residual)
            for r in reports
            for s in r.samples
            if s.residual > settings.pass_tol
        ]
        decisive = any(r.status == "fail" for r in reports)
        cert.verdict = Verdict.FAILS if decisive else Verdict.INCONCLUSIVE
        cert.witnesses = sorted(failing, key=lambda w: -w.residual)[:MAX_WITNESSES]
        if decisive:
            notes.append("transition derivatives have non-inner components; the witnesses refer to this trivialization")
        else:
            notes.append("residuals fall between the pass and fail thresholds")
    cert.route = route
    cert.curvature = curvature_info
    cert.notes = notes + cert.notes
    return cert
