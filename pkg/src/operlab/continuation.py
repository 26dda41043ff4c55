"""Analytic continuation of y' = A(t) y along paths in the punctured plane.

A path is a chain of line and arc segments; transport integrates the matrix
ODE with a high-order adaptive scheme.  The monodromy convention matches the
formal side: the matrix returned for a positive (counterclockwise) loop has
eigenvalues exp(-2 pi i lambda) for residue eigenvalues lambda, i.e. it is
the inverse of the raw counterclockwise propagator.  Raw transport is exposed
too, and continue_along(A = C/t, unit circle, I) = exp(+2 pi i C).
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp

__all__ = [
    "ContinuationFailure",
    "Path",
    "line_path",
    "circle_path",
    "keyhole_loop",
    "MeromorphicSystem",
    "continue_along",
    "local_monodromy_numeric",
    "monodromy_representation",
]


class ContinuationFailure(RuntimeError):
    """Transport failed: clearance violation or integrator breakdown."""


class Path:
    """Piecewise path: line segments (z0, z1) and arcs (center, r, a0, a1).

    Angles in radians; an arc runs from a0 to a1 (counterclockwise when
    a1 > a0).  Each segment gets equal parameter length; transport integrates
    segment by segment so corners never hit the integrator.
    """

    def __init__(self, segments, clearance=None):
        if not segments:
            raise ValueError("empty path")
        self.segments = list(segments)
        self.clearance = clearance

    @property
    def start(self):
        return self._endpoints(self.segments[0])[0]

    @property
    def end(self):
        return self._endpoints(self.segments[-1])[1]

    @staticmethod
    def _endpoints(seg):
        kind = seg[0]
        if kind == "line":
            return seg[1], seg[2]
        _, c, r, a0, a1 = seg
        return c + r * np.exp(1j * a0), c + r * np.exp(1j * a1)

    def reversed(self):
        out = []
        for seg in reversed(self.segments):
            if seg[0] == "line":
                out.append(("line", seg[2], seg[1]))
            else:
                _, c, r, a0, a1 = seg
                out.append(("arc", c, r, a1, a0))
        return Path(out, clearance=self.clearance)

    def then(self, other):
        c = None
        if self.clearance is not None and other.clearance is not None:
            c = min(self.clearance, other.clearance)
        return Path(self.segments + other.segments, clearance=c)

    def min_distance(self, z):
        """Distance from the point z to the path."""
        best = np.inf
        for seg in self.segments:
            if seg[0] == "line":
                _, z0, z1 = seg
                d = z1 - z0
                L2 = abs(d) ** 2
                if L2 == 0:
                    best = min(best, abs(z - z0))
                    continue
                u = ((z - z0) * np.conj(d)).real / L2
                u = min(1.0, max(0.0, u))
                best = min(best, abs(z - (z0 + u * d)))
            else:
                _, c, r, a0, a1 = seg
                ang = np.angle(z - c)
                lo, hi = min(a0, a1), max(a0, a1)
                # wrap the angle into a representative near the arc's range
                k = np.floor((lo - ang) / (2 * np.pi))
                cand = []
                for kk in (k, k + 1, k + 2):
                    a = ang + 2 * np.pi * kk
                    if lo <= a <= hi:
                        cand.append(abs(abs(z - c) - r))
                cand.append(abs(z - (c + r * np.exp(1j * a0))))
                cand.append(abs(z - (c + r * np.exp(1j * a1))))
                best = min(best, min(cand))
        return best

    def scale(self):
        """A crude diameter, used for default clearance."""
        pts = []
        for seg in self.segments:
            z0, z1 = self._endpoints(seg)
            pts.extend([z0, z1])
            if seg[0] == "arc":
                pts.append(seg[1] + seg[2])
                pts.append(seg[1] - seg[2])
        pts = np.asarray(pts)
        return float(np.abs(pts[:, None] - pts[None, :]).max()) or 1.0


def line_path(z0, z1, clearance=None):
    return Path([("line", complex(z0), complex(z1))], clearance=clearance)


def circle_path(center, radius, turns=1, orientation=+1, base_angle=0.0):
    """Closed circular loop; orientation +1 is counterclockwise."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    a0 = float(base_angle)
    a1 = a0 + 2 * np.pi * turns * (1 if orientation >= 0 else -1)
    return Path([("arc", complex(center), float(radius), a0, a1)], clearance=radius / 10)


def keyhole_loop(base, pole, radius):
    """Stem from the base point to the circle, once around, and back."""
    z = complex(pole)
    b = complex(base)
    d = z - b
    if abs(d) <= radius:
        raise ValueError("base point inside the loop circle")
    entry = z - radius * d / abs(d)
    ang = float(np.angle(entry - z))
    stem = line_path(b, entry)
    loop = Path([("arc", z, float(radius), ang, ang + 2 * np.pi)], clearance=radius / 10)
    return stem.then(loop).then(stem.reversed())


class MeromorphicSystem:
    """A(t) = sum_i Res_i / (t - p_i) + sum_k P_k t^k with matrix data."""

    def __init__(self, poles, residues, poly=()):
        if len(poles) != len(residues):
            raise ValueError("one residue per pole required")
        self.poles = [complex(p) for p in poles]
        self.residues = [np.asarray(r, dtype=complex) for r in residues]
        self.poly = [np.asarray(c, dtype=complex) for c in poly]
        sizes = {m.shape for m in self.residues} | {m.shape for m in self.poly}
        if len(sizes) > 1:
            raise ValueError("matrix sizes disagree")
        self.n = next(iter(sizes))[0] if sizes else 1

    def coefficient(self, t):
        A = np.zeros((self.n, self.n), dtype=complex)
        for p, R in zip(self.poles, self.residues):
            A = A + R / (t - p)
        tp = 1.0
        for C in self.poly:
            A = A + C * tp
            tp *= t
        return A


def _segment_param(seg):
    if seg[0] == "line":
        _, z0, z1 = seg

        def pos(s):
            return z0 + s * (z1 - z0)

        def vel(s):
            return z1 - z0

        return pos, vel
    _, c, r, a0, a1 = seg

    def pos(s):
        return c + r * np.exp(1j * (a0 + s * (a1 - a0)))

    def vel(s):
        return 1j * (a1 - a0) * r * np.exp(1j * (a0 + s * (a1 - a0)))

    return pos, vel


def _check_clearance(system, path):
    clearance = path.clearance
    if clearance is None:
        clearance = path.scale() / 100.0
    for p in system.poles:
        d = path.min_distance(p)
        if d < clearance * (1 - 1e-12):
            raise ContinuationFailure(
                f"path passes within {d:.3g} of the pole at {p} "
                f"(clearance {clearance:.3g})"
            )


def continue_along(system, path, y0, tol=1e-10):
    """Transport the frame y0 along the path through y' = A(t) y."""
    _check_clearance(system, path)
    n = system.n
    y = np.asarray(y0, dtype=complex)
    shape = y.shape
    for seg in path.segments:
        pos, vel = _segment_param(seg)

        def rhs(s, u):
            Y = (u[0::2] + 1j * u[1::2]).reshape(shape)
            dY = vel(s) * (system.coefficient(pos(s)) @ Y)
            out = np.empty(2 * dY.size)
            out[0::2] = dY.real.reshape(-1)
            out[1::2] = dY.imag.reshape(-1)
            return out

        u0 = np.empty(2 * y.size)
        u0[0::2] = y.real.reshape(-1)
        u0[1::2] = y.imag.reshape(-1)
        sol = solve_ivp(
            rhs, (0.0, 1.0), u0, method="DOP853", rtol=tol, atol=tol * 1e-2
        )
        if not sol.success:
            raise ContinuationFailure(f"integrator failed: {sol.message}")
        u = sol.y[:, -1]
        y = (u[0::2] + 1j * u[1::2]).reshape(shape)
    return y


def local_monodromy_numeric(system, puncture, radius, tol=1e-10):
    """Monodromy of the positive loop around one puncture.

    Returned with the formal-side normalization: eigenvalues are
    exp(-2 pi i lambda) for eigenvalues lambda of the residue (the raw
    counterclockwise propagator is inverted).  Basis-dependent: only the
    conjugacy-invariant content (spectrum, unipotency) is contractual.
    """
    p = complex(puncture)
    if not any(abs(p - q) < 1e-12 for q in system.poles):
        raise ValueError(f"{puncture} is not a declared singular point")
    for q in system.poles:
        if abs(p - q) > 1e-12 and abs(p - q) <= radius * 1.1:
            raise ContinuationFailure(
                f"disc of radius {radius} around {puncture} contains the pole {q}"
            )
    loop = circle_path(p, radius)
    prop = continue_along(system, loop, np.eye(system.n, dtype=complex), tol=tol)
    return np.linalg.inv(prop)


def monodromy_representation(system, loops, tol=1e-10):
    """One monodromy matrix per loop, all with the inverse-transport sign.

    For loops that concatenate (in list order) to a contractible composite,
    the ordered product of the returned matrices is the identity.  With
    keyhole loops around every pole of a system that vanishes at infinity,
    that happens when the list runs in counterclockwise fan order: increasing
    angle of the enclosed pole as seen from the shared base point.
    """
    out = []
    base = None
    for loop in loops:
        if base is None:
            base = loop.start
        elif abs(loop.start - base) > 1e-9:
            raise ValueError("all loops must share one base point")
        if abs(loop.end - loop.start) > 1e-9:
            raise ValueError("paths must be closed loops")
        prop = continue_along(system, loop, np.eye(system.n, dtype=complex), tol=tol)
        out.append(np.linalg.inv(prop))
    return out
