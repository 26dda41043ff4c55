"""Generate the genus-2 holonomy fixture: side pairings of the regular
hyperbolic octagon with all vertex angles pi/4.

Works in the Poincare disc at 50 digits.  The octagon is centered at the
origin with vertices rho * exp(i pi k / 4); the canonical side pairing
(sides 0<->2 by A1, 1<->3 by B1, 4<->6 by A2, 5<->7 by B2) is found by
searching orientation conventions until the surface relator
[A1,B1][A2,B2] evaluates to +-identity.  Matrices are converted to the
upper half-plane model and written to src/operlab/data/genus2.json.

Run from the repository root:  python3 tools/make_genus2_fixture.py
"""

import json
import os

import mpmath as mp

mp.mp.dps = 50


def t_matrix(a):
    """Disc automorphism w -> (w - a)/(1 - conj(a) w) as an SU(1,1) matrix."""
    s = 1 / mp.sqrt(1 - abs(a) ** 2)
    return mp.matrix([[s, -s * a], [-s * mp.conj(a), s]])


def r_matrix(theta):
    e = mp.exp(1j * theta / 2)
    return mp.matrix([[e, 0], [0, 1 / e]])


def apply_m(M, w):
    return (M[0, 0] * w + M[0, 1]) / (M[1, 0] * w + M[1, 1])


def normalizer(p1, p2):
    """Isometry sending p1 to 0 and p2 onto the positive real axis."""
    T = t_matrix(p1)
    theta = mp.arg(apply_m(T, p2))
    return r_matrix(-theta) * T


def pairing(p1, p2, q1, q2):
    """The unique orientation-preserving isometry with p1->q1, p2->q2."""
    return normalizer(q1, q2) ** -1 * normalizer(p1, p2)


def vertex_angle(rho):
    """Interior angle of the regular octagon with vertex radius rho."""
    v = rho
    u = rho * mp.exp(1j * mp.pi / 4)
    w = rho * mp.exp(-1j * mp.pi / 4)
    T = t_matrix(v)
    a1 = mp.arg(apply_m(T, u))
    a2 = mp.arg(apply_m(T, w))
    d = abs(a1 - a2)
    return min(d, 2 * mp.pi - d)


def residual_pm_identity(M):
    I = mp.eye(2)
    rp = max(abs(M[i, j] - I[i, j]) for i in range(2) for j in range(2))
    rm = max(abs(M[i, j] + I[i, j]) for i in range(2) for j in range(2))
    return min(rp, rm)


def main():
    # vertex radius: angle pi/4 at every vertex.  closed form
    # cosh(dist to vertex) = cot(pi/8)^2, rho = tanh(dist/2)
    dv = mp.acosh(mp.cot(mp.pi / 8) ** 2)
    rho = mp.tanh(dv / 2)
    ang = vertex_angle(rho)
    print(f"rho = {rho}")
    print(f"vertex angle = {ang}  (target {mp.pi/4})")
    assert abs(ang - mp.pi / 4) < mp.mpf(10) ** -40

    verts = [rho * mp.exp(1j * mp.pi * k / 4) for k in range(8)]
    sides = [(verts[k], verts[(k + 1) % 8]) for k in range(8)]

    scheme = {"A1": (0, 2), "B1": (1, 3), "A2": (4, 6), "B2": (5, 7)}
    names = ["A1", "B1", "A2", "B2"]

    def build(opts):
        gens = {}
        for name, (direction, swap) in zip(names, opts):
            i, j = scheme[name]
            if direction:
                i, j = j, i
            p1, p2 = sides[i]
            q1, q2 = sides[j]
            if swap:
                q1, q2 = q2, q1
            gens[name] = pairing(p1, p2, q1, q2)
        return gens

    def relator(gens):
        M = mp.eye(2)
        for a, b in (("A1", "B1"), ("A2", "B2")):
            M = M * gens[a] * gens[b] * gens[a] ** -1 * gens[b] ** -1
        return M

    best = None
    for mask in range(256):
        opts = [((mask >> (2 * k)) & 1, (mask >> (2 * k + 1)) & 1) for k in range(4)]
        gens = build(opts)
        res = residual_pm_identity(relator(gens))
        # a genuine side pairing pushes the center off itself
        moves = min(abs(apply_m(gens[n], mp.mpf(0))) for n in names)
        if res < mp.mpf(10) ** -30 and moves > mp.mpf("0.1"):
            best = (opts, gens, res)
            print(f"mask {mask}: relator residual {mp.nstr(res, 5)}, opts {opts}")
            break
    assert best is not None, "no orientation convention closes the relator"
    opts, gens, res = best

    # convert to the upper half-plane: w = (z - i)/(z + i)
    K = mp.matrix([[1, -1j], [1, 1j]])
    Kinv = K ** -1
    out = {}
    for name in names:
        M = Kinv * gens[name] * K
        M = M / mp.sqrt(mp.det(M))
        # strip the global phase: rotate so the largest entry is real
        piv = max(
            (abs(M[i, j]), i, j) for i in range(2) for j in range(2)
        )
        phase = M[piv[1], piv[2]] / abs(M[piv[1], piv[2]])
        M = M / phase
        if mp.re(M[0, 0] + M[1, 1]) < 0:
            M = -M
        imag_left = max(abs(mp.im(M[i, j])) for i in range(2) for j in range(2))
        det_err = abs(mp.det(M) - 1)
        print(f"{name}: residual imag {mp.nstr(imag_left, 3)}, det err {mp.nstr(det_err, 3)}")
        assert imag_left < mp.mpf(10) ** -38
        assert det_err < mp.mpf(10) ** -38
        out[name] = [[float(mp.re(M[i, j])) for j in range(2)] for i in range(2)]

    # float64 relator check on the shipped matrices
    import numpy as np

    g64 = {n: np.array(out[n]) for n in names}
    R = np.eye(2)
    for a, b in (("A1", "B1"), ("A2", "B2")):
        R = R @ g64[a] @ g64[b] @ np.linalg.inv(g64[a]) @ np.linalg.inv(g64[b])
    resid = min(np.abs(R - np.eye(2)).max(), np.abs(R + np.eye(2)).max())
    print(f"float64 relator residual: {resid:.3e}")
    assert resid < 1e-12

    data = {
        "g": 2,
        "r": 0,
        "gens": out,
        "domain": {
            "model": "disc",
            "type": "regular_octagon",
            "rho": float(rho),
            "vertex_angle": "pi/4",
        },
    }
    dest = os.path.join(os.path.dirname(__file__), "..", "src", "operlab", "data")
    os.makedirs(dest, exist_ok=True)
    path = os.path.join(dest, "genus2.json")
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1)
    print("wrote", os.path.normpath(path))


if __name__ == "__main__":
    main()
