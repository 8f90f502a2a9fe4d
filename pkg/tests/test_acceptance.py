"""Acceptance suite.

Each test prints one ``PASS``/``FAIL`` line; the lines are repeated in the
terminal summary (see conftest.py) so they survive output capture.
"""

import io
import json

import numpy as np
import pytest

from labcoupling import algebra as alg
from labcoupling import geometry as geo
from labcoupling.bundle import (
    LieConnection,
    check_bundle,
    holonomy_variation_check,
    parallel_transport,
    transport_composition_check,
)
from labcoupling.cli import run_command
from labcoupling.coupling import (
    CouplingSettings,
    Verdict,
    build_coupling,
    build_transport_charts,
    coupling_exists,
    delta_continuity_test,
)
from labcoupling.scenarios import BUILTIN_SCENARIOS
from oracles import ad_dimension_exact, der_dimension_exact, rotation_angle

RESULTS: list[str] = []
WITH_CONNECTION = ["so3-circle", "sl2-circle-outer", "abelian-circle", "so3-plane", "ts2"]


def report(number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def test_criterion_01_algebra_suite():
    worst, mismatches = 0.0, []
    for name in alg.CATALOG:
        g = alg.builtin(name)
        rep = alg.validate_algebra(g)
        worst = max(worst, rep.antisymmetry, rep.jacobi)
        dims = alg.derivation_space(g).dims
        exact = (der_dimension_exact(g.structure), ad_dimension_exact(g.structure))
        if dims != exact:
            mismatches.append(f"{name}: {dims} vs {exact}")
    report(1, worst <= 1e-12 and not mismatches,
           f"{len(alg.CATALOG)} algebras, max residual {worst:.1e}, Der/ad mismatches {mismatches or 'none'}")


def test_criterion_02_exp_is_automorphism():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for name in ("so3", "sl2"):
        g = alg.builtin(name)
        basis = alg.derivation_space(g).der_basis
        for _ in range(100):
            D = np.tensordot(rng.standard_normal(len(basis)), basis, axes=1)
            D *= rng.uniform(0, 2) / np.linalg.norm(D, 2)
            worst = max(worst, alg.is_automorphism(g, alg.exp_derivation(D)).residual)
    report(2, worst <= 1e-10, f"200 derivations with |D| <= 2, max automorphism residual {worst:.1e}")


def test_criterion_03_rk4_order(scenario):
    sc = scenario("so3-circle")
    ref = parallel_transport(sc.connection, sc.loop(), 4096).map
    e256 = np.linalg.norm(parallel_transport(sc.connection, sc.loop(), 256).map - ref)
    e512 = np.linalg.norm(parallel_transport(sc.connection, sc.loop(), 512).map - ref)
    ratio = e256 / e512
    report(3, ratio >= 12, f"error 256 steps {e256:.2e}, 512 steps {e512:.2e}, ratio {ratio:.2f}")


def test_criterion_04_transport_preserves_bracket(scenario):
    worst = max(parallel_transport(scenario(n).connection, scenario(n).loop(), 512).lie_residual
                for n in WITH_CONNECTION)
    sc = scenario("so3-plane")

    def form(u):
        out = np.zeros(np.shape(u)[:-1] + (2, 3, 3))
        out[..., 0, :, :] = 0.3 * u[..., 1, None, None] * np.eye(3)
        return out

    control = parallel_transport(LieConnection(sc.bundle, {"0": form, "1": form}), sc.loop(), 512).lie_residual
    report(4, worst <= 1e-7 and control >= 1e-3,
           f"max lie residual {worst:.1e} over {len(WITH_CONNECTION)} connections, negative control {control:.1e}")


def test_criterion_05_composition_inverse_reparameterization(scenario):
    sc = scenario("so3-circle")
    atlas = sc.bundle.atlas
    arc1 = geo.PiecewisePath.single(geo.coordinate_segment(
        atlas.chart("0"), lambda t: (-0.4 + 2.0 * np.asarray(t))[..., None],
        lambda t: np.full(np.shape(t) + (1,), 2.0)))
    arc2 = geo.PiecewisePath.single(geo.coordinate_segment(
        atlas.chart("1"), lambda t: (1.6 - np.pi - 1.5 * np.asarray(t))[..., None],
        lambda t: np.full(np.shape(t) + (1,), -1.5)))
    comp, inv = transport_composition_check(sc.connection, arc1, arc2, 512)
    loop = sc.loop()
    P = parallel_transport(sc.connection, loop, 512).map
    r = lambda t: (np.exp(t) - 1) / (np.e - 1)  # noqa: E731
    dr = lambda t: np.exp(t) / (np.e - 1)  # noqa: E731
    rep = np.linalg.norm(P - parallel_transport(sc.connection, geo.reparameterize(loop, r, dr), 512).map)
    report(5, max(comp, inv, rep) <= 1e-7,
           f"composition {comp:.1e}, inverse {inv:.1e}, reparameterization {rep:.1e}")


def test_criterion_06_holonomy_variation(scenario):
    sc = scenario("ts2")
    fine = holonomy_variation_check(sc.connection, sc.homotopy(), 64, 512).max_residual
    coarse = holonomy_variation_check(sc.connection, sc.homotopy(), 32, 256).max_residual
    ratio = coarse / fine
    report(6, fine <= 1e-4 and 3.6 <= ratio <= 4.4,
           f"residual 64x512 {fine:.2e}, 32x256 {coarse:.2e}, refinement ratio {ratio:.2f}")


def test_criterion_07_forward_direction(scenario):
    settings = CouplingSettings()
    tb = build_transport_charts(scenario("so3-circle").connection, settings)
    aut = check_bundle(tb, settings.samples).automorphism
    delta = max(r.max_residual for r in delta_continuity_test(tb, settings=settings))
    report(7, aut <= 1e-7 and delta <= 1e-6, f"automorphism residual {aut:.1e}, delta residual {delta:.1e}")


def test_criterion_08_backward_direction_and_round_trip(scenario):
    settings = CouplingSettings()
    tb = build_transport_charts(scenario("so3-circle").connection, settings)
    lines, ok = [], True
    for label, b in [("so3-circle transport charts", tb), ("heisenberg-torus", scenario("heisenberg-torus").bundle)]:
        cert = build_coupling(b, delta_continuity_test(b, settings=settings), settings=settings)
        overlap = max(max(v) for v in cert.overlap_residuals.values())
        ok &= cert.verdict is Verdict.EXISTS and overlap <= 1e-6 and cert.witness_agreement <= 1e-5
        lines.append(f"{label}: {cert.verdict.value}, overlap {overlap:.1e}, witness gap {cert.witness_agreement:.1e}")
    report(8, ok, "; ".join(lines))


def _run(*argv):
    out = io.StringIO()
    return run_command(list(argv), out), out.getvalue()


def test_criterion_09_tangent_sphere_counterexample(tmp_path, scenario):
    path = tmp_path / "ts2.json"
    code, text = _run("coupling", "test", "--scenario", "ts2", "--json", str(path))
    cert = json.loads(path.read_text())
    angle = rotation_angle(parallel_transport(scenario("ts2").connection, scenario("ts2").loop(), 512).map)
    ok = code == 2 and cert["verdict"] == "fails" and len(cert["witnesses"]) >= 1 and abs(angle - np.pi / 2) <= 1e-3
    report(9, ok, f"exit {code}, verdict {cert['verdict']}, {len(cert['witnesses'])} witnesses, "
                  f"octant angle {angle:.9f}")


def test_criterion_10_determinism(tmp_path):
    differing = []
    for name in BUILTIN_SCENARIOS:
        blobs = []
        for run in range(2):
            path = tmp_path / f"{name}-{run}.json"
            _run("coupling", "test", "--scenario", name, "--samples", "8", "--json", str(path))
            blobs.append(path.read_bytes())
        if blobs[0] != blobs[1] or not blobs[0]:
            differing.append(name)
    report(10, not differing,
           f"{len(BUILTIN_SCENARIOS)} scenarios run twice, differing certificates: {differing or 'none'}")


@pytest.mark.parametrize("name", list(BUILTIN_SCENARIOS))
def test_builtin_expectations(scenario, name):
    sc = scenario(name)
    assert coupling_exists(sc.bundle, sc.connection, CouplingSettings(samples=8)).verdict.value == sc.expected
