"""Deterministic machine-readable reports for the command line tools.

Every command emits a single report dict: tool version, an echo of the
effective configuration (including the seed and every tolerance that
influenced a verdict), a list of per-check records, and the overall
verdict.  Reports carry no timestamps or timings, so identical
(config, seed, data) runs produce byte-identical output.

Verdicts are three-valued.  FAIL means a mathematical property is
violated with margin; INCONCLUSIVE means the numerics could not separate
PASS from FAIL (small spectral gap, quadrature failure); PASS means the
property holds with margin.  Exit codes: 0 PASS, 1 FAIL, 2 INCONCLUSIVE,
64 configuration or schema errors.
"""

import io
import json
import math
from fractions import Fraction

import numpy as np

from . import __version__
from .exactscalar import QI

__all__ = [
    "SCHEMA",
    "EXIT_PASS",
    "EXIT_FAIL",
    "EXIT_INCONCLUSIVE",
    "EXIT_CONFIG",
    "worst_verdict",
    "verdict_exit",
    "jsonable",
    "render_report",
    "check_record",
    "make_report",
    "gram_report",
    "gram_to_csv",
    "threshold_verdict",
    "gap_verdict",
]

SCHEMA = "operlab-report/1"

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INCONCLUSIVE = 2
EXIT_CONFIG = 64

_ORDER = {"PASS": 0, "INCONCLUSIVE": 1, "FAIL": 2}


def worst_verdict(verdicts):
    """FAIL dominates INCONCLUSIVE dominates PASS; empty input is PASS."""
    worst = "PASS"
    for v in verdicts:
        if _ORDER[v] > _ORDER[worst]:
            worst = v
    return worst


def verdict_exit(verdict):
    return {"PASS": EXIT_PASS, "FAIL": EXIT_FAIL, "INCONCLUSIVE": EXIT_INCONCLUSIVE}[
        verdict
    ]


def threshold_verdict(residual, tol):
    """PASS iff the residual is under tol.  A residual inside a factor 10
    of the line in either direction is reported INCONCLUSIVE rather than
    silently passed or failed."""
    residual = float(residual)
    if residual < 0.1 * tol:
        return "PASS"
    if residual > 10 * tol:
        return "FAIL"
    return "INCONCLUSIVE" if residual >= tol else "PASS"


def gap_verdict(gap, floor):
    """For quantities that must exceed a floor (spectral gaps, rank
    separations): PASS above 10x, FAIL below 0.1x, INCONCLUSIVE between."""
    gap = float(gap)
    if gap >= 10 * floor:
        return "PASS"
    if gap <= 0.1 * floor:
        return "FAIL"
    return "INCONCLUSIVE" if gap < floor else "PASS"


def jsonable(x):
    """Coerce numpy scalars and arrays, complex numbers, exact rationals,
    and non-finite floats into JSON-serializable structures.  Complex
    values become {"re": .., "im": ..}; non-finite floats become the
    strings "inf", "-inf", "nan"."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [jsonable(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (complex, np.complexfloating)):
        x = complex(x)
        return {"re": jsonable(x.real), "im": jsonable(x.imag)}
    if isinstance(x, (QI, Fraction)):
        return str(x)
    if x is None or isinstance(x, str):
        return x
    return str(x)


def render_report(report):
    """Canonical JSON text: sorted keys, two-space indent, trailing
    newline.  Non-finite numbers are coerced before serialization so the
    strict allow_nan=False mode never trips."""
    return json.dumps(jsonable(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def check_record(name, verdict, **fields):
    """One per-check record.  Only supplied fields are emitted; common
    ones are tolerance, residual, gap, value, expected, note."""
    rec = {"name": name, "verdict": verdict}
    for key in sorted(fields):
        if fields[key] is not None:
            rec[key] = fields[key]
    return rec


def make_report(command, config, checks, data=None):
    report = {
        "schema": SCHEMA,
        "version": __version__,
        "command": command,
        "config": dict(config),
        "checks": list(checks),
        "verdict": worst_verdict(c["verdict"] for c in checks),
    }
    if data is not None:
        report["data"] = data
    return report


def _complex_str(x):
    x = complex(x)
    return f"{x.real:.17g}{x.imag:+.17g}j"


def gram_to_csv(labels, gram):
    """CSV text for a Gram matrix: header row of basis labels, one row
    per basis vector, complex entries as re+imj with full precision."""
    gram = np.asarray(gram, dtype=complex)
    buf = io.StringIO()
    buf.write(",".join(["basis"] + list(labels)) + "\n")
    for label, row in zip(labels, gram):
        buf.write(",".join([label] + [_complex_str(x) for x in row]) + "\n")
    return buf.getvalue()


def gram_report(
    labels,
    gram,
    kind,
    sym_tol=1e-10,
    nondeg_floor=1e-6,
    expect_definite=False,
):
    """Gram matrix report: basis labels, entries, declared symmetry type
    with its residual, eigenvalue summary, and verdicts for symmetry,
    nondegeneracy, and (optionally) positive definiteness.

    kind "skew" is for the bilinear cup-product pairing (G^T = -G),
    kind "hermitian" for the sesquilinear one (G^* = G)."""
    if kind not in ("skew", "hermitian"):
        raise ValueError(f"unknown symmetry kind {kind!r}")
    labels = list(labels)
    gram = np.asarray(gram, dtype=complex)
    n = gram.shape[0]
    if gram.shape != (n, n) or n != len(labels):
        raise ValueError("gram matrix shape does not match the label list")
    checks = []
    data = {"labels": labels, "kind": kind, "gram": gram}
    if n == 0:
        data["eigenvalues"] = []
        data["singular_values"] = []
        checks.append(check_record("symmetry", "PASS", residual=0.0, tolerance=sym_tol))
        checks.append(
            check_record("nondegenerate", "PASS", gap=math.inf, tolerance=nondeg_floor)
        )
        if expect_definite:
            checks.append(
                check_record("positive_definite", "PASS", margin=math.inf, note="empty basis")
            )
        data["checks"] = checks
        data["verdict"] = "PASS"
        return data
    scale = float(np.max(np.abs(gram))) or 1.0
    if kind == "skew":
        sym_res = float(np.max(np.abs(gram + gram.T))) / scale
    else:
        sym_res = float(np.max(np.abs(gram - gram.conj().T))) / scale
    checks.append(
        check_record(
            "symmetry",
            threshold_verdict(sym_res, sym_tol),
            residual=sym_res,
            tolerance=sym_tol,
        )
    )
    sing = np.linalg.svd(gram, compute_uv=False)
    data["singular_values"] = [float(s) for s in sing]
    ratio = float(sing[-1] / sing[0]) if sing[0] > 0 else 0.0
    checks.append(
        check_record(
            "nondegenerate",
            gap_verdict(ratio, nondeg_floor),
            gap=ratio,
            tolerance=nondeg_floor,
        )
    )
    if kind == "hermitian":
        eigs = np.linalg.eigvalsh((gram + gram.conj().T) / 2)
        data["eigenvalues"] = [float(e) for e in eigs]
        if expect_definite:
            margin = float(eigs[0]) / scale
            verdict = "PASS" if margin > 0 else "FAIL"
            if 0 < margin < 1e-13:
                verdict = "INCONCLUSIVE"
            checks.append(check_record("positive_definite", verdict, margin=margin))
    else:
        eigs = np.linalg.eigvals(gram)
        order = np.lexsort((eigs.real, eigs.imag))
        data["eigenvalues"] = [complex(e) for e in eigs[order]]
    data["checks"] = checks
    data["verdict"] = worst_verdict(c["verdict"] for c in checks)
    return data
