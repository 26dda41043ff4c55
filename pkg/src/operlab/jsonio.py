"""JSON wire formats for matrices, formal connections, and Fuchsian systems.

Matrices travel as {"n": N, "re": [[..]], "im": [[..]]}.  In exact mode the
entries may be strings like "2/3" (parsed as exact rationals); plain JSON
numbers are taken at their exact binary value, so a float input still rounds
nowhere once inside the exact pipeline.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .exactscalar import QI, is_exact_array, to_complex

__all__ = [
    "matrix_to_json",
    "matrix_from_json",
    "connection_to_json",
    "connection_from_json",
    "system_to_json",
    "system_from_json",
]


def _scalar_from_json(x):
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(x)


def matrix_to_json(m):
    m = np.asarray(m)
    if is_exact_array(m):
        n = m.shape[0]
        re = [[str(m[i, j].re) for j in range(m.shape[1])] for i in range(n)]
        im = [[str(m[i, j].im) for j in range(m.shape[1])] for i in range(n)]
        return {"n": n, "re": re, "im": im}
    m = np.asarray(m, dtype=complex)
    return {
        "n": m.shape[0],
        "re": [[float(x) for x in row] for row in m.real],
        "im": [[float(x) for x in row] for row in m.imag],
    }


def matrix_from_json(d, mode="float"):
    n = int(d["n"])
    re = d["re"]
    im = d.get("im")
    if im is None:
        im = [[0] * len(row) for row in re]
    if mode == "exact":
        out = np.empty((n, len(re[0])), dtype=object)
        for i in range(n):
            for j in range(len(re[i])):
                out[i, j] = QI(_scalar_from_json(re[i][j]), _scalar_from_json(im[i][j]))
        return out
    out = np.empty((n, len(re[0])), dtype=complex)
    for i in range(n):
        for j in range(len(re[i])):
            out[i, j] = float(Fraction(re[i][j]) if isinstance(re[i][j], str) else re[i][j]) + 1j * float(
                Fraction(im[i][j]) if isinstance(im[i][j], str) else im[i][j]
            )
    return out


def connection_to_json(v):
    return {
        "log": bool(v.logarithmic),
        "order": v.order,
        "coeffs": [matrix_to_json(c) for c in v.coeffs],
    }


def connection_from_json(d, mode="float"):
    from .series import FormalConnection

    coeffs = [matrix_from_json(c, mode=mode) for c in d["coeffs"]]
    order = int(d.get("order", len(coeffs) - 1))
    if order != len(coeffs) - 1:
        raise ValueError("order field disagrees with coefficient count")
    return FormalConnection(coeffs, logarithmic=bool(d.get("log", True)))


def _complex_from_json(x):
    if isinstance(x, (list, tuple)):
        return complex(float(x[0]), float(x[1]))
    if isinstance(x, dict):
        return complex(float(x.get("re", 0.0)), float(x.get("im", 0.0)))
    return complex(x)


def system_to_json(system):
    return {
        "poles": [[float(p.real), float(p.imag)] for p in system.poles],
        "residues": [matrix_to_json(r) for r in system.residues],
        "poly": [matrix_to_json(c) for c in system.poly],
    }


def system_from_json(d):
    from .continuation import MeromorphicSystem

    poles = [_complex_from_json(p) for p in d.get("poles", [])]
    residues = [to_complex(matrix_from_json(m)) for m in d.get("residues", [])]
    poly = [to_complex(matrix_from_json(m)) for m in d.get("poly", [])]
    return MeromorphicSystem(poles, residues, poly)
