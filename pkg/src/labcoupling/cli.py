"""Command-line front end."""

from __future__ import annotations

import argparse
import inspect
import sys
from pathlib import Path

import numpy as np

from . import algebra as alg
from . import geometry as geo
from .bundle import (
    DEFAULT_STEPS,
    FD_STEP,
    TOL_TRANSPORT,
    TransportError,
    check_bundle,
    holonomy_variation_check,
    parallel_transport,
)
from .config import Config, ConfigError, load_config
from .coupling import (
    FAIL_TOL,
    PASS_TOL,
    CouplingCertificate,
    CouplingSettings,
    HypothesisFailure,
    Verdict,
    build_coupling,
    build_transport_charts,
    coupling_exists,
    curvature_scan,
    delta_continuity_test,
)
from .expr import ExpressionEvalError
from .report import CERTIFICATE_CSV_COLUMNS, certificate_rows, fmt, format_certificate, matrix_lines, vec, write_csv
from .scenarios import BUILTIN_SCENARIOS, builtin_scenario

EXIT_OK = 0
EXIT_FAILS = 2
EXIT_INCONCLUSIVE = 3
EXIT_CONFIG = 4
EXIT_NUMERIC = 5

VERDICT_EXIT = {Verdict.EXISTS: EXIT_OK, Verdict.FAILS: EXIT_FAILS, Verdict.INCONCLUSIVE: EXIT_INCONCLUSIVE}

EPILOG = f"""\
exit codes:
  {EXIT_OK}  pass / coupling exists
  {EXIT_FAILS}  verdict fails
  {EXIT_INCONCLUSIVE}  verdict inconclusive
  {EXIT_CONFIG}  config error (unknown scenario, malformed file)
  {EXIT_NUMERIC}  numeric validation failure

CSV columns (--csv):
  coupling test|build: {",".join(CERTIFICATE_CSV_COLUMNS)}
      one row per delta-continuity sample; point and witness are space-separated
      vectors, witness is h = phi^-1 w with ad(w) the inner part.
  bundle curvature:    chart,point,i,j,norm,residual
  bundle holonomy:     s,lhs_norm,residual
  bundle transport:    row,col,value
"""


# -- argument parsing ---------------------------------------------------------------


def _common(p: argparse.ArgumentParser, scenario=True):
    if scenario:
        p.add_argument("--scenario", help="builtin or config scenario name")
    p.add_argument("--config", type=Path, help="YAML/JSON experiment file")
    p.add_argument("--steps", type=int, default=DEFAULT_STEPS, help="RK4 steps per path segment")
    p.add_argument("--samples", type=int, default=32, help="overlap samples per chart pair")
    p.add_argument("--fd-step", type=float, default=FD_STEP, help="finite-difference step, relative to chart scale")
    p.add_argument("--tol-pass", type=float, default=PASS_TOL, help="relative residual accepted as zero")
    p.add_argument("--tol-fail", type=float, default=FAIL_TOL, help="relative residual counted as decisive")
    p.add_argument("--tol-lie", type=float, default=TOL_TRANSPORT, help="automorphism residual bound for transports")
    p.add_argument("--tol-holonomy", type=float, default=1e-4, help="holonomy-variation residual bound")
    p.add_argument("--csv", type=Path, help="write per-sample rows to this file")
    p.add_argument("--seed", type=int, default=None, help="scramble the sample sequence")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="labcoupling",
        description="Lie algebra bundles, Lie connections and couplings with the tangent bundle.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    groups = parser.add_subparsers(dest="group", required=True)

    def sub(group, name, help_):
        p = group.add_parser(name, help=help_, epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
        return p

    a = groups.add_parser("algebra", help="structure-constant checks").add_subparsers(dest="action", required=True)
    for name, help_ in (("check", "antisymmetry and Jacobi residuals"), ("derivations", "Der, ad and centre")):
        p = sub(a, name, help_)
        p.add_argument("name", help="builtin algebra (" + ", ".join(alg.CATALOG) + ") or config algebra")
        _common(p, scenario=False)

    b = groups.add_parser("bundle", help="bundle and connection checks").add_subparsers(dest="action", required=True)
    sub_check = sub(b, "check", "automorphism and cocycle residuals of the transitions")
    sub_tr = sub(b, "transport", "parallel transport around the scenario loop")
    sub_tr.add_argument("--loops", type=int, default=1, help="number of turns (loops that support it)")
    sub_cu = sub(b, "curvature", "curvature and its inner part at chart samples")
    sub_cu.add_argument("--curvature-samples", type=int, default=16)
    sub_ho = sub(b, "holonomy", "holonomy variation along the scenario homotopy")
    sub_ho.add_argument("--ns", type=int, default=64, help="intervals in the homotopy parameter")
    for p in (sub_check, sub_tr, sub_cu, sub_ho):
        _common(p)

    c = groups.add_parser("coupling", help="decide whether a coupling exists").add_subparsers(dest="action", required=True)
    for name, help_ in (("test", "verdict with certificate"), ("build", "transport charts, delta test and coupling")):
        p = sub(c, name, help_)
        _common(p)
        p.add_argument("--json", type=Path, help="write the certificate as JSON")
        p.add_argument("--curvature-samples", type=int, default=16)

    s = groups.add_parser("scenario", help="scenario catalog").add_subparsers(dest="action", required=True)
    p = sub(s, "list", "list builtin and config scenarios")
    p.add_argument("--config", type=Path)
    return parser


# -- helpers ---------------------------------------------------------------------------


def _config(args) -> Config:
    return load_config(args.config) if getattr(args, "config", None) else Config()


def _scenario(args):
    if not args.scenario:
        raise ConfigError("--scenario is required")
    cfg = _config(args)
    if args.scenario in cfg.scenarios:
        return cfg.scenarios[args.scenario]
    try:
        return builtin_scenario(args.scenario)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None


def _settings(args) -> CouplingSettings:
    return CouplingSettings(
        samples=args.samples,
        steps=args.steps,
        fd_step=args.fd_step,
        pass_tol=args.tol_pass,
        fail_tol=args.tol_fail,
        curvature_samples=getattr(args, "curvature_samples", 16),
        seed=args.seed,
    )


def _need_connection(sc):
    if sc.connection is None:
        raise ConfigError(f"scenario {sc.name!r} has no connection")
    return sc.connection


# -- commands -----------------------------------------------------------------------------


def cmd_algebra(args, out) -> int:
    cfg = _config(args)
    if args.name in cfg.algebras:
        g = cfg.algebras[args.name]
    else:
        try:
            g = alg.builtin(args.name)
        except alg.AlgebraError:
            raise ConfigError(f"unknown algebra {args.name!r}") from None
    if args.action == "check":
        rep = alg.validate_algebra(g)
        print(f"algebra {g.name} (dim {g.dim})", file=out)
        print(f"antisymmetry residual {fmt(rep.antisymmetry)}", file=out)
        print(f"jacobi residual {fmt(rep.jacobi)}", file=out)
        print("ok" if rep.ok else "FAILED", file=out)
        return EXIT_OK if rep.ok else EXIT_NUMERIC
    ds = alg.derivation_space(g)
    der, ad_ = ds.dims
    centre = len(ds.center)
    print(f"algebra {g.name} (dim {g.dim})", file=out)
    print(f"dim Der = {der}", file=out)
    print(f"dim ad = {ad_}", file=out)
    print(f"dim centre = {centre}", file=out)
    print(f"dim Der/ad = {der - ad_}", file=out)
    if ds.ambiguous:
        print("warning: singular values near the rank tolerance", file=out)
    return EXIT_OK


def cmd_bundle(args, out) -> int:
    sc = _scenario(args)
    b = sc.bundle
    if args.action == "check":
        rep = check_bundle(b, args.samples, seed=args.seed)
        print(f"bundle {b.name}: fiber {b.fiber.name}, atlas {b.atlas.name}, pairs {len(b.pairs())}", file=out)
        print(f"automorphism residual {fmt(rep.automorphism)}", file=out)
        print(f"cocycle residual {fmt(rep.cocycle)}", file=out)
        print(f"singular transitions {rep.singular}", file=out)
        ok = rep.ok
        if sc.connection is not None:
            lie = sc.connection.lie_residual(args.samples)
            comp = sc.connection.compatibility_residual(args.samples)
            print(f"connection {sc.connection.name}: lie residual {fmt(lie)}, chart compatibility {fmt(comp)}", file=out)
            ok = ok and lie <= args.tol_lie and comp <= 1e-6
        print("ok" if ok else "FAILED", file=out)
        return EXIT_OK if ok else EXIT_NUMERIC

    c = _need_connection(sc)
    if args.action == "transport":
        if sc.loop is None:
            raise ConfigError(f"scenario {sc.name!r} has no loop")
        takes_loops = bool(inspect.signature(sc.loop).parameters)
        path = sc.loop(args.loops) if takes_loops else sc.loop()
        res = parallel_transport(c, path, args.steps)
        print(f"transport along {sc.name} loop ({args.loops if takes_loops else 1} turn(s), {args.steps} steps per segment)",
              file=out)
        print(f"charts {res.start_chart} -> {res.end_chart}", file=out)
        for line in matrix_lines(res.map):
            print(line, file=out)
        print(f"lie residual {fmt(res.lie_residual)}", file=out)
        if b.rank == 2:
            angle = float(np.arctan2(res.map[1, 0], res.map[0, 0]))
            print(f"rotation angle {angle:.9f}", file=out)
        if args.csv:
            write_csv(args.csv, ("row", "col", "value"),
                      [(i, j, repr(float(res.map[i, j]))) for i in range(b.rank) for j in range(b.rank)])
        return EXIT_OK if res.lie_residual <= args.tol_lie else EXIT_NUMERIC

    if args.action == "curvature":
        settings = _settings(args)
        scan = curvature_scan(c, settings)
        worst = max((s.residual for s in scan), default=0.0)
        print(f"curvature of {c.name}: {len(scan)} samples", file=out)
        for cid in b.atlas.ids:
            mine = [s for s in scan if s.chart == cid]
            if mine:
                print(f"  chart {cid}: max norm {fmt(max(s.norm for s in mine))}, "
                      f"max inner residual {fmt(max(s.residual for s in mine))}", file=out)
        status = settings.classify(worst)
        print(f"curvature inner: {status}", file=out)
        if args.csv:
            write_csv(args.csv, ("chart", "point", "i", "j", "norm", "residual"),
                      [(s.chart, vec(s.point), s.directions[0], s.directions[1], repr(s.norm), repr(s.residual))
                       for s in scan])
        return {"pass": EXIT_OK, "fail": EXIT_FAILS}.get(status, EXIT_INCONCLUSIVE)

    if sc.homotopy is None:
        raise ConfigError(f"scenario {sc.name!r} has no homotopy")
    prof = holonomy_variation_check(c, sc.homotopy(), args.ns, args.steps)
    print(f"holonomy variation on {sc.name}: {args.ns} x {args.steps} grid", file=out)
    print(f"max residual {fmt(prof.max_residual)}", file=out)
    if args.csv:
        write_csv(args.csv, ("s", "lhs_norm", "residual"),
                  [(repr(float(s)), repr(float(np.linalg.norm(l))), repr(float(r)))
                   for s, l, r in zip(prof.s, prof.lhs, prof.residual)])
    return EXIT_OK if prof.max_residual <= args.tol_holonomy else EXIT_NUMERIC


def _emit(cert: CouplingCertificate, args, out) -> int:
    out.write(format_certificate(cert))
    if args.json:
        args.json.write_text(cert.to_json())
    if args.csv:
        write_csv(args.csv, CERTIFICATE_CSV_COLUMNS, certificate_rows(cert))
    return VERDICT_EXIT[cert.verdict]


def cmd_coupling(args, out) -> int:
    sc = _scenario(args)
    settings = _settings(args)
    if args.action == "test":
        return _emit(coupling_exists(sc.bundle, sc.connection, settings), args, out)
    target = sc.bundle
    route = "direct"
    if sc.connection is not None:
        try:
            target = build_transport_charts(sc.connection, settings)
            route = "forward"
        except HypothesisFailure as exc:
            cert = CouplingCertificate(Verdict.FAILS, route="forward", bundle=sc.bundle.name, fiber=sc.bundle.fiber.name,
                                       atlas=sc.bundle.atlas.name, witnesses=[exc.witness], settings=settings,
                                       notes=[f"transport charts not built: {exc}"])
            return _emit(cert, args, out)
    reports = delta_continuity_test(target, settings=settings)
    if not all(r.passes for r in reports):
        cert = coupling_exists(target, None, settings)
        cert.route = route
    else:
        cert = build_coupling(target, reports, geo.build_partition(target.atlas), settings)
        cert.route = route
    if route == "forward":
        rep = check_bundle(target, min(settings.samples, 8), seed=settings.seed)
        cert.notes.append(f"transport transitions: automorphism residual {rep.automorphism:.3e}")
    return _emit(cert, args, out)


def cmd_scenario(args, out) -> int:
    cfg = _config(args)
    for name in BUILTIN_SCENARIOS:
        sc = builtin_scenario(name)
        print(f"{name}\texpected={sc.expected}\t{sc.description}", file=out)
    for name, sc in cfg.scenarios.items():
        print(f"{name}\texpected={sc.expected}\t{sc.description or '(config)'}", file=out)
    return EXIT_OK


COMMANDS = {"algebra": cmd_algebra, "bundle": cmd_bundle, "coupling": cmd_coupling, "scenario": cmd_scenario}


def run_command(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return COMMANDS[args.group](args, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (alg.AlgebraError, geo.GeometryError, TransportError, ExpressionEvalError,
            np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
