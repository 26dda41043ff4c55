"""Period cocycles of cusp forms with polynomial coefficients.

A weight 2j + 2 cusp form f integrates against the degree-2j kernel

    K(z) = (z x + y)^{2j},   components K_s(z) = C(2j, s) z^{2j - s}

on the monomial basis x^{2j-s} y^s.  The kernel intertwines the module
action used everywhere else in the package: with (g P)(x, y) =
P(ax + cy, bx + dy) one checks g K(u) = (cu + d)^{2j} K(gu), so

    I(gamma) = int_{b}^{gamma b} f(z) K(z) dz

satisfies I(gamma delta) = I(gamma) + gamma I(delta) on the nose, and
moving the base point b changes I by the coboundary of int_{b}^{b'} f K.
Values are complex even though the action matrices are real; the
componentwise conjugate is again a cocycle, and together the two span
the period contribution of f inside parabolic cohomology.

Integrals run over straight segments (the integrand is holomorphic on
the upper half-plane, so only the endpoints matter) with the integrand
evaluated through the exact modular reduction of the fixture, and every
returned cocycle carries honest relator and puncture residuals.
"""

import math
from math import comb

import numpy as np

from .hyperbolic import QuadratureFailure, fixture_group, surface_evaluator
from .surface import (
    cocycle_value,
    h1p_basis,
    restriction_to_puncture,
    symmetric_power_module,
)

__all__ = [
    "ESConsistencyFailure",
    "DecompositionFailure",
    "ESCocycle",
    "eichler_integral",
    "es_cocycle",
    "es_conjugate_cocycle",
    "decomposition_check",
]


class ESConsistencyFailure(RuntimeError):
    """The assembled periods fail the cocycle or parabolicity residuals."""


class DecompositionFailure(RuntimeError):
    """Period classes do not span a subspace of the expected rank."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


def _gauss_nodes(n):
    return np.polynomial.legendre.leggauss(n)


def _panel_value(fun, p, q, t0, t1, nodes):
    x0, w0 = nodes
    mid = 0.5 * (t0 + t1)
    half = 0.5 * (t1 - t0)
    acc = None
    for t, wt in zip(mid + half * x0, half * w0):
        v = np.asarray(fun(p + t * (q - p)))
        acc = wt * v if acc is None else acc + wt * v
    return acc


def _segment_integral(fun, p, q, tol, order=16, max_depth=16):
    """Adaptive Gauss integration of a vector-valued function along the
    straight segment from p to q.

    Panels are bisected until the one-panel and two-half estimates agree
    within the panel's share of tol.  Near the real axis an automorphic
    integrand oscillates on a scale quadratic in the distance to the
    nearest cusp, so fixed meshes lose; bisection follows the oscillation
    down and stops early wherever the cusp decay has already flattened
    the integrand to nothing.
    """
    p, q = complex(p), complex(q)
    if p == q:
        return np.asarray(fun(p)) * 0.0
    if min(p.imag, q.imag) <= 0:
        raise ValueError("segment leaves the upper half-plane")
    nodes = _gauss_nodes(order)

    def recurse(t0, t1, coarse, depth):
        tm = 0.5 * (t0 + t1)
        left = _panel_value(fun, p, q, t0, tm, nodes)
        right = _panel_value(fun, p, q, tm, t1, nodes)
        fine = left + right
        err = float(np.max(np.abs(fine - coarse))) * abs(q - p)
        # summing O(mass) terms cannot come out cleaner than eps * mass,
        # however small the panel: without this floor, large integrands
        # (conformal factors grow near the real axis) refine forever
        mass = float(np.max(np.abs(left) + np.abs(right)))
        accept = max(tol * (t1 - t0), 64e-16 * mass * abs(q - p))
        if err <= accept or depth >= max_depth:
            if depth >= max_depth and err > accept:
                raise QuadratureFailure(
                    f"segment integral did not settle to {tol:.1e}", achieved=err
                )
            return fine
        return recurse(t0, tm, left, depth + 1) + recurse(tm, t1, right, depth + 1)

    whole = _panel_value(fun, p, q, 0.0, 1.0, nodes)
    return recurse(0.0, 1.0, whole, 0) * (q - p)


def eichler_integral(evaluate, j, z_from, z_to, tol=1e-11):
    """int f(z) K(z) dz over the straight segment, as a vector in the
    monomial coordinates of the weight-2j module.  evaluate is a scalar
    holomorphic function (typically a reduced fixture evaluator)."""
    binoms = np.array([comb(2 * j, s) for s in range(2 * j + 1)], dtype=float)
    powers = np.array([2 * j - s for s in range(2 * j + 1)], dtype=float)

    def fun(z):
        return evaluate(z) * binoms * z ** powers

    return _segment_integral(fun, z_from, z_to, tol)


class ESCocycle:
    """Period cocycle of one form: per-generator values, the module they
    live in, and the consistency residuals measured after assembly."""

    def __init__(self, fixture, form, base, action, values, tol):
        self.fixture = fixture
        self.form = form
        self.j = form.j
        self.base = base
        self.action = action
        self.values = values
        self.tol = tol
        names = action.presentation.generators
        self.stacked = np.concatenate([values[n] for n in names])
        self.relator_residual = _relator_residual(action, values)
        self.puncture_residuals = _puncture_residuals(action, self.stacked)

    def value_on(self, word):
        return cocycle_value(self.action, self.stacked, word)

    def conjugate(self):
        values = {n: np.conj(v) for n, v in self.values.items()}
        return ESCocycle(self.fixture, self.form, self.base, self.action, values, self.tol)

    def summary(self):
        return {
            "fixture": self.fixture,
            "form": self.form.tag,
            "weight": self.form.weight,
            "j": self.j,
            "base": [self.base.real, self.base.imag],
            "relator_residual": self.relator_residual,
            "puncture_residuals": self.puncture_residuals,
            "integration_tol": self.tol,
        }


def _relator_residual(action, values):
    """|z(relator)| relative to the largest intermediate term: the terms
    are prefix-transported generator values, and high-weight module
    matrices amplify them well past the final cancellation."""
    pres = action.presentation
    acc = np.zeros(action.dim, dtype=complex)
    prefix = np.eye(action.dim, dtype=complex)
    scale = 1.0
    for name, e in pres.relator:
        if e == 1:
            term = prefix @ values[name]
        else:
            term = -(prefix @ action.mat(name, -1)) @ values[name]
        acc += term
        scale = max(scale, float(np.max(np.abs(term))))
        prefix = prefix @ action.mat(name, e)
    return float(np.max(np.abs(acc))) / scale


def _puncture_residuals(action, stacked):
    pres = action.presentation
    out = {}
    for i in range(1, pres.punctures + 1):
        r = restriction_to_puncture(action, stacked, i)
        blocks = np.abs(stacked).max()
        out[f"T{i}"] = float(np.max(np.abs(r), initial=0.0)) / max(1.0, blocks)
    return out


_cache = {}


def es_cocycle(fixture, form, base=1j, tol=1e-11, check=True, check_tol=1e-8):
    """Assemble the period cocycle of a fixture form on the generators.

    Returns an ESCocycle whose values live in the weight-2j symmetric
    power of the fixture holonomy (complex coefficients over the real
    action).  With check=True the relator and puncture residuals must
    pass check_tol, otherwise ESConsistencyFailure is raised.
    """
    if isinstance(fixture, str):
        pres, rep, dom = fixture_group(fixture)
    else:
        pres, rep, dom = fixture
    base = complex(base)
    if base.imag <= 0:
        raise ValueError("base point must lie in the upper half-plane")
    key = (dom.tag, form.level, form.tag, form.weight, base, tol)
    if key not in _cache:
        evaluate = surface_evaluator(dom, form)
        action = symmetric_power_module(pres, rep, form.j, field="complex")
        values = {}
        for name in pres.generators:
            g = np.real(np.asarray(rep.gens[name]))
            endpoint = (g[0, 0] * base + g[0, 1]) / (g[1, 0] * base + g[1, 1])
            values[name] = eichler_integral(evaluate, form.j, base, endpoint, tol)
        _cache[key] = (action, values)
    action, values = _cache[key]
    cocycle = ESCocycle(
        dom.tag, form, base, action, {n: v.copy() for n, v in values.items()}, tol
    )
    if check:
        bad = cocycle.relator_residual > check_tol or any(
            r > check_tol for r in cocycle.puncture_residuals.values()
        )
        if bad:
            raise ESConsistencyFailure(
                f"period cocycle inconsistent: relator {cocycle.relator_residual:.2e}, "
                f"punctures {cocycle.puncture_residuals}"
            )
    return cocycle


def es_conjugate_cocycle(fixture, form, base=1j, tol=1e-11, **kw):
    """Componentwise conjugate periods; a cocycle because the module
    action matrices are real."""
    return es_cocycle(fixture, form, base=base, tol=tol, **kw).conjugate()


def decomposition_check(fixture, forms, rtol=1e-8, sigma_floor=1e-4, base=1j, tol=1e-11):
    """Verify that the period classes of the given forms, together with
    their conjugates, span a subspace of parabolic cohomology of full
    rank 2 * len(forms), with smallest singular value above sigma_floor
    times the largest.  Returns a report dict; raises
    DecompositionFailure when the rank or the gap fails.
    """
    if isinstance(fixture, str):
        fixture = fixture_group(fixture)
    pres, rep, dom = fixture
    weights = {f.weight for f in forms}
    if len(weights) != 1:
        raise ValueError("forms must share a single weight")
    j = forms[0].j
    action = symmetric_power_module(pres, rep, j, field="complex")
    space = h1p_basis(action, rtol)
    cols = []
    for f in forms:
        co = es_cocycle((pres, rep, dom), f, base=base, tol=tol)
        cols.append(space.class_coordinates(co.stacked))
        cols.append(space.class_coordinates(np.conj(co.stacked)))
    M = np.column_stack(cols)
    # normalize columns so the rank test measures angles, not magnitudes
    norms = np.linalg.norm(M, axis=0)
    if np.min(norms) == 0.0:
        raise DecompositionFailure("a period class has zero coordinates")
    sig = np.linalg.svd(M / norms, compute_uv=False)
    ratio = float(sig[-1] / sig[0])
    report = {
        "fixture": dom.tag,
        "j": j,
        "forms": [f.tag for f in forms],
        "dim_h1p": space.dim,
        "expected_rank": 2 * len(forms),
        "sigma_max": float(sig[0]),
        "sigma_min": float(sig[-1]),
        "ratio": ratio,
        "ok": True,
    }
    if len(sig) < 2 * len(forms) or ratio < sigma_floor:
        report["ok"] = False
        raise DecompositionFailure(
            f"period classes span rank < {2 * len(forms)} "
            f"(singular value ratio {ratio:.2e})",
            report=report,
        )
    return report
