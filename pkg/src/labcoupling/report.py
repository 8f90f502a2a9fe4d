"""Plain-text and CSV rendering of results."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .coupling import CouplingCertificate

CERTIFICATE_CSV_COLUMNS = ("pair", "sample", "point", "direction", "residual", "witness")


def fmt(x) -> str:
    return "n/a" if x is None else f"{float(x):.3e}"


def vec(a) -> str:
    return " ".join(repr(float(v)) for v in np.asarray(a, dtype=float).ravel())


def matrix_lines(m, indent="  ") -> list[str]:
    m = np.asarray(m, dtype=float)
    return [indent + " ".join(f"{v: .12f}" for v in row) for row in m]


def format_certificate(cert: CouplingCertificate) -> str:
    d = cert.to_dict()
    out = [
        f"verdict: {d['verdict']}",
        f"route: {d['route']}",
        f"bundle: {d['bundle']}  fiber: {d['fiber']}  atlas: {d['atlas']}",
    ]
    if d["curvature"]:
        c = d["curvature"]
        out.append(f"connection: lie residual {fmt(c['lie_residual'])}, "
                   f"max curvature ad-residual {fmt(c['max_relative_ad_residual'])} over {c['samples']} samples")
    out.append("delta-continuity:")
    for r in d["delta_continuity"]:
        out.append(f"  {r['pair'][0]}-{r['pair'][1]}: max residual {fmt(r['max_residual'])} "
                   f"({r['status']}, {r['samples']} samples)")
    if d["overlap_residuals"]:
        out.append("coupling:")
        for k in sorted(d["outer_curvature_residuals"]):
            out.append(f"  chart {k}: local curvature {fmt(d['outer_curvature_residuals'][k])}")
        for k in sorted(d["overlap_residuals"]):
            out.append(f"  overlap {k}: difference residual {fmt(d['overlap_residuals'][k])}, "
                       f"restriction residual {fmt(d['restriction_residuals'][k])}")
        out.append(f"  blended lie residual {fmt(d['xi_lie_residual'])}")
        out.append(f"  witness agreement {fmt(d['witness_agreement'])}")
    if d["witnesses"]:
        out.append("witnesses:")
        for w in d["witnesses"]:
            out.append(f"  {w['kind']} at {w['where']} point ({' '.join(f'{v:.6f}' for v in w['point'])}) "
                       f"direction {w['direction']}: residual {fmt(w['residual'])}")
    for n in d["notes"]:
        out.append(f"note: {n}")
    t, r = d["tolerances"], d["resolutions"]
    out.append("tolerances: " + ", ".join(f"{k}={t[k]:g}" for k in sorted(t)))
    out.append("resolutions: " + ", ".join(f"{k}={r[k]}" for k in sorted(r)))
    out.append("versions: " + ", ".join(f"{k}={v}" for k, v in sorted(d["versions"].items())))
    return "\n".join(out) + "\n"


def certificate_rows(cert: CouplingCertificate) -> list[tuple]:
    rows = []
    for rep in cert.delta_reports:
        pair = f"{rep.pair[0]}-{rep.pair[1]}"
        for k, s in enumerate(rep.samples):
            rows.append((pair, k, vec(s.point), s.direction,
                         repr(float(s.residual)), vec(s.h_witness)))
    return rows


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def write_csv(path, header, rows) -> None:
    Path(path).write_text(csv_text(header, rows))
