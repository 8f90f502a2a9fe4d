"""Experiment files: algebras, atlases, bundles, connections and scenarios.

A config is one YAML (or JSON) document::

    algebras:
      h3: {dim: 3, brackets: [[1, 2, [0, 0, 1]]]}
    atlases:
      line: {box: {dim: 1, centers: [[0], [1]], radius: 0.8}}
    bundles:
      b:
        algebra: h3
        atlas: line
        transitions:
          - pair: ["0", "1"]
            exp_ad: ["0", "0", "0.3*x1^2"]
    connections:
      c:
        bundle: b
        forms:
          "0": {ad: [["0.1", "0", "0"]]}
          "1": {zero: true}
    scenarios:
      demo: {bundle: b, connection: c, expected: exists}

Transition and form entries are strings in the chart coordinates ``x1..xn``
of the first chart of the pair (transitions) or of the chart itself (forms).
Algebra and atlas references fall back to the builtin catalogs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np
import yaml
from scipy.interpolate import RegularGridInterpolator

from . import algebra as alg
from . import geometry as geo
from .bundle import LieAlgebraBundle, LieConnection, global_connection_from_locals
from .expr import CompiledExpression, ExpressionSyntaxError
from .scenarios import Scenario

SECTIONS = ("algebras", "atlases", "bundles", "connections", "scenarios")
TRANSITION_KINDS = ("constant", "matrix", "exp", "exp_ad", "grid", "pieces")


class ConfigError(ValueError):
    pass


@dataclass
class Config:
    algebras: dict = field(default_factory=dict)
    atlases: dict = field(default_factory=dict)
    bundles: dict = field(default_factory=dict)
    connections: dict = field(default_factory=dict)
    scenarios: dict = field(default_factory=dict)


def load_config(path) -> Config:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(doc if doc is not None else {})


def parse_config(doc) -> Config:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping with sections " + ", ".join(SECTIONS))
    unknown = set(doc) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown sections: {', '.join(sorted(map(str, unknown)))}")
    cfg = Config()
    for name, rec in _section(doc, "algebras"):
        cfg.algebras[name] = _algebra(name, rec)
    for name, rec in _section(doc, "atlases"):
        cfg.atlases[name] = _atlas(name, rec)
    for name, rec in _section(doc, "bundles"):
        cfg.bundles[name] = _bundle(cfg, name, rec)
    for name, rec in _section(doc, "connections"):
        cfg.connections[name] = _connection(cfg, name, rec)
    for name, rec in _section(doc, "scenarios"):
        cfg.scenarios[name] = _scenario(cfg, name, rec)
    return cfg


def _section(doc, key):
    sec = doc.get(key) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"section {key!r} must be a mapping of name -> record")
    return [(str(k), v) for k, v in sec.items()]


def _need(rec, key, where):
    if not isinstance(rec, dict) or key not in rec:
        raise ConfigError(f"{where}: missing field {key!r}")
    return rec[key]


# -- algebras and atlases -------------------------------------------------------------


def _algebra(name, rec):
    if isinstance(rec, str):
        return _builtin_algebra(rec, f"algebras.{name}")
    if isinstance(rec, dict) and "builtin" in rec:
        return _builtin_algebra(rec["builtin"], f"algebras.{name}")
    try:
        g = alg.load_algebra({"name": name, **(rec or {})})
    except (alg.AlgebraError, TypeError, ValueError) as exc:
        raise ConfigError(f"algebras.{name}: {exc}") from None
    return g


def _builtin_algebra(key, where):
    try:
        return alg.builtin(str(key))
    except alg.AlgebraError:
        raise ConfigError(f"{where}: unknown builtin algebra {key!r}") from None


def _resolve_algebra(cfg, ref, where):
    if ref in cfg.algebras:
        return cfg.algebras[ref]
    return _builtin_algebra(ref, where)


def _atlas(name, rec):
    where = f"atlases.{name}"
    if isinstance(rec, str) or (isinstance(rec, dict) and "builtin" in rec):
        key = rec if isinstance(rec, str) else rec["builtin"]
        try:
            return geo.builtin_atlas(str(key))
        except geo.GeometryError:
            raise ConfigError(f"{where}: unknown builtin atlas {key!r}") from None
    spec = _need(rec, "box", where)
    try:
        dim = int(_need(spec, "dim", where))
        centers = spec.get("centers")
        radius = float(spec.get("radius", np.inf))
        centers = None if centers is None else [np.asarray(c, dtype=float).reshape(dim) for c in centers]
        atlas = geo.box(dim, centers, radius)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None
    return geo.Atlas(name, atlas.charts)


def _resolve_atlas(cfg, ref, where):
    if ref in cfg.atlases:
        return cfg.atlases[ref]
    try:
        return geo.builtin_atlas(str(ref))
    except geo.GeometryError:
        raise ConfigError(f"{where}: unknown atlas {ref!r}") from None


# -- expressions -------------------------------------------------------------------


def _compile(value, where, arity):
    try:
        e = CompiledExpression(value)
    except ExpressionSyntaxError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    if e.arity > arity:
        raise ConfigError(f"{where}: uses x{e.arity} but the chart has {arity} coordinates")
    return e


def _expr_array(values, shape, where, arity) -> Callable:
    """Nested lists of expressions with the given shape -> ``coords -> (..., *shape)``."""
    arr = np.asarray(values, dtype=object)
    if arr.shape != tuple(shape):
        raise ConfigError(f"{where}: expected shape {tuple(shape)}, got {arr.shape}")
    flat = [_compile(v, f"{where}[{i}]", arity) for i, v in enumerate(arr.ravel())]

    def fn(coords):
        coords = np.asarray(coords, dtype=float)
        vals = np.stack([e(coords) for e in flat], axis=-1) if flat else np.zeros(coords.shape[:-1] + (0,))
        return vals.reshape(coords.shape[:-1] + tuple(shape))

    return fn


# -- bundles ----------------------------------------------------------------------------


def _transition_fn(g, chart, spec, where):
    d = g.dim
    n = chart.dim
    if not isinstance(spec, dict):
        raise ConfigError(f"{where}: transition must be a mapping")
    kinds = [k for k in TRANSITION_KINDS if k in spec]
    if len(kinds) != 1:
        raise ConfigError(f"{where}: give exactly one of {', '.join(TRANSITION_KINDS)}")
    kind = kinds[0]
    val = spec[kind]
    if kind == "constant":
        try:
            m = np.asarray(val, dtype=float)
        except (TypeError, ValueError):
            raise ConfigError(f"{where}: constant must be a numeric {d}x{d} matrix") from None
        if m.shape != (d, d):
            raise ConfigError(f"{where}: constant must be {d}x{d}")
        return lambda p: np.broadcast_to(m, np.shape(p)[:-1] + (d, d)).copy()
    if kind == "matrix":
        f = _expr_array(val, (d, d), where + ".matrix", n)
        return lambda p: f(chart.to_coord(p))
    if kind == "exp":
        f = _expr_array(val, (d, d), where + ".exp", n)
        return lambda p: alg.exp_derivation(f(chart.to_coord(p)))
    if kind == "exp_ad":
        f = _expr_array(val, (d,), where + ".exp_ad", n)
        return lambda p: alg.exp_derivation(alg.ad(g, f(chart.to_coord(p))))
    if kind == "grid":
        return _grid_transition(val, chart, d, where + ".grid")
    pieces = val
    if not isinstance(pieces, list) or not pieces:
        raise ConfigError(f"{where}: pieces must be a non-empty list")
    conds, fns = [], []
    for i, piece in enumerate(pieces):
        w = f"{where}.pieces[{i}]"
        if not isinstance(piece, dict):
            raise ConfigError(f"{w}: piece must be a mapping")
        piece = dict(piece)
        cond = piece.pop("where", None)
        if cond is None and i != len(pieces) - 1:
            raise ConfigError(f"{w}: only the last piece may omit 'where'")
        conds.append(None if cond is None else _compile(cond, w + ".where", n))
        fns.append(_transition_fn(g, chart, piece, w))

    def fn(p):
        p = np.asarray(p, dtype=float)
        u = chart.to_coord(p)
        out = np.full(p.shape[:-1] + (d, d), np.nan)
        done = np.zeros(p.shape[:-1], dtype=bool)
        for cond, f in zip(conds, fns):
            take = ~done if cond is None else (~done & (cond(u) > 0))
            if np.any(take):
                out[take] = f(p[take])
            done |= take
        return out

    return fn


def _grid_transition(spec, chart, d, where):
    try:
        axes = [np.asarray(a, dtype=float) for a in _need(spec, "axes", where)]
        values = np.asarray(_need(spec, "values", where), dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None
    if len(axes) != chart.dim or values.shape != tuple(len(a) for a in axes) + (d, d):
        raise ConfigError(f"{where}: values must have shape (len(axis) for each axis) + ({d}, {d})")
    method = spec.get("method", "cubic")
    try:
        interp = RegularGridInterpolator(axes, values, method=method)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None

    def fn(p):
        u = chart.to_coord(p)
        return interp(u.reshape(-1, chart.dim)).reshape(u.shape[:-1] + (d, d))

    return fn


def _bundle(cfg, name, rec):
    where = f"bundles.{name}"
    g = _resolve_algebra(cfg, _need(rec, "algebra", where), where)
    atlas = _resolve_atlas(cfg, _need(rec, "atlas", where), where)
    trans = {}
    for i, spec in enumerate(rec.get("transitions") or []):
        w = f"{where}.transitions[{i}]"
        pair = _need(spec, "pair", w)
        if not (isinstance(pair, list) and len(pair) == 2):
            raise ConfigError(f"{w}: pair must be [chart_a, chart_b]")
        a, b = str(pair[0]), str(pair[1])
        for cid in (a, b):
            if cid not in atlas.ids:
                raise ConfigError(f"{w}: atlas {atlas.name} has no chart {cid!r}")
        body = {k: v for k, v in spec.items() if k != "pair"}
        trans[(a, b)] = _transition_fn(g, atlas.chart(a), body, w)
    try:
        return LieAlgebraBundle(g, atlas, trans, name)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


# -- connections ----------------------------------------------------------------------


def _form(g, chart, spec, where):
    n, d = chart.dim, g.dim
    if not isinstance(spec, dict):
        raise ConfigError(f"{where}: form must be a mapping")
    if spec.get("zero"):
        return lambda u: np.zeros(np.shape(u)[:-1] + (n, d, d))
    if "ad" in spec:
        f = _expr_array(spec["ad"], (n, d), where + ".ad", n)
        return lambda u: alg.ad(g, f(u))
    if "matrix" in spec:
        return _expr_array(spec["matrix"], (n, d, d), where + ".matrix", n)
    raise ConfigError(f"{where}: give one of zero, ad, matrix")


def _connection(cfg, name, rec):
    where = f"connections.{name}"
    bref = _need(rec, "bundle", where)
    if bref not in cfg.bundles:
        raise ConfigError(f"{where}: unknown bundle {bref!r}")
    b = cfg.bundles[bref]
    forms_spec = _need(rec, "forms", where)
    if not isinstance(forms_spec, dict):
        raise ConfigError(f"{where}.forms must map chart id -> form")
    forms = {}
    for cid, spec in forms_spec.items():
        cid = str(cid)
        if cid not in b.atlas.ids:
            raise ConfigError(f"{where}.forms: atlas has no chart {cid!r}")
        forms[cid] = _form(b.fiber, b.atlas.chart(cid), spec, f"{where}.forms.{cid}")
    missing = [c for c in b.atlas.ids if c not in forms]
    if missing:
        raise ConfigError(f"{where}.forms: no form for charts {', '.join(missing)}")
    if rec.get("blend", len(b.atlas.ids) > 1):
        return global_connection_from_locals(b, forms, geo.build_partition(b.atlas), name=name)
    return LieConnection(b, forms, name)


# -- scenarios ----------------------------------------------------------------------------


def _polyline_loop(atlas, spec, where):
    cid = str(_need(spec, "chart", where))
    if cid not in atlas.ids:
        raise ConfigError(f"{where}: atlas has no chart {cid!r}")
    chart = atlas.chart(cid)
    try:
        pts = np.asarray(_need(spec, "polyline", where), dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None
    if pts.ndim != 2 or pts.shape[1] != chart.dim or len(pts) < 2:
        raise ConfigError(f"{where}: polyline must list at least two {chart.dim}-vectors")

    def make():
        segs = []
        for a, b in zip(pts[:-1], pts[1:]):
            segs.append(geo.coordinate_segment(
                chart,
                lambda t, a=a, b=b: a + np.asarray(t, dtype=float)[..., None] * (b - a),
                lambda t, a=a, b=b: np.broadcast_to(b - a, np.shape(t) + a.shape),
            ))
        k = len(segs)
        return geo.PiecewisePath(segs, [Fraction(i, k) for i in range(k + 1)])

    return make


def _scenario(cfg, name, rec):
    where = f"scenarios.{name}"
    bref = _need(rec, "bundle", where)
    if bref not in cfg.bundles:
        raise ConfigError(f"{where}: unknown bundle {bref!r}")
    b = cfg.bundles[bref]
    conn = None
    cref = rec.get("connection")
    if cref is not None:
        if cref not in cfg.connections:
            raise ConfigError(f"{where}: unknown connection {cref!r}")
        conn = cfg.connections[cref]
        if conn.bundle is not b:
            raise ConfigError(f"{where}: connection {cref!r} belongs to another bundle")
    expected = rec.get("expected")
    if expected not in (None, "exists", "fails", "inconclusive"):
        raise ConfigError(f"{where}: expected must be exists, fails or inconclusive")
    loop = _polyline_loop(b.atlas, rec["loop"], where + ".loop") if "loop" in rec else None
    return Scenario(name, b, conn, expected, str(rec.get("description", "")), loop=loop)
