"""sl_N structure theory used by the analytic half of the library.

Everything is a bare numpy matrix: complex128 in float mode, object dtype of
exact Gaussian rationals in exact mode.  The principal triple fixes the
conventions; the grading is by matrix diagonals (grade j = j-th superdiagonal
block relative to the principal Cartan element), and the one-dimensional
spaces of ad(q_plus)-invariants in each positive grade generate the modules
the pairing code consumes.

Naming follows the mathematics rather than PEP-8 where that is easier to
read (q_plus, u_j, varsigma).
"""

from __future__ import annotations

from fractions import Fraction
from math import comb, factorial
from typing import NamedTuple

import numpy as np

from .exactscalar import (
    QI,
    eye_q,
    is_exact_array,
    nullspace_q,
    qi,
    to_complex,
    zeros_q,
)

__all__ = [
    "PrincipalTriple",
    "bracket",
    "killing_form",
    "principal_triple",
    "grade",
    "invariants_basis",
    "graded_invariant_dimensions",
    "killing_adpower_identity_check",
    "killing_identity_grid",
    "ad_power",
    "pair_jj",
    "sym_action",
    "varsigma",
    "sl_basis",
    "sl_coords",
    "adjoint_rep_matrix",
    "iota_G",
    "conj_elem",
    "check_traceless",
]


class PrincipalTriple(NamedTuple):
    q_minus: np.ndarray
    h: np.ndarray
    q_plus: np.ndarray

    @property
    def n(self):
        return self.h.shape[0]


def _is_exact(*mats):
    return any(is_exact_array(m) for m in mats)


def _zeros(n, exact):
    return zeros_q((n, n)) if exact else np.zeros((n, n), dtype=complex)


def check_traceless(x, tol=1e-12):
    """Trace must vanish for algebra elements; exact zero in exact mode."""
    if is_exact_array(x):
        t = QI(0)
        for i in range(x.shape[0]):
            t = t + qi(x[i, i])
        if not t.is_zero():
            raise ValueError(f"element has nonzero trace {t!r}")
    else:
        t = np.trace(x)
        if abs(t) > tol:
            raise ValueError(f"element has nonzero trace {t}")


def bracket(x, y):
    return np.dot(x, y) - np.dot(y, x)


def killing_form(x, y):
    """Killing form on sl_N, the closed form 2N tr(xy)."""
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape or x.shape[0] != x.shape[1]:
        raise ValueError(f"algebra size mismatch: {x.shape} vs {y.shape}")
    n = x.shape[0]
    prod = np.dot(x, y)
    if is_exact_array(prod):
        t = QI(0)
        for i in range(n):
            t = t + qi(prod[i, i])
        return 2 * n * t
    return 2 * n * np.trace(prod)


def principal_triple(N, mode="float"):
    """The principal sl2-triple (q_minus, h, q_plus) in sl_N.

    q_plus has coefficient 1 on every simple root vector, h = 2*rho-check =
    diag(N-1, N-3, ..., 1-N), and q_minus = sum_i i(N-i) E_{i+1,i}, so the
    triple relations hold with integer entries.
    """
    if N < 2:
        raise ValueError("N >= 2 required")
    exact = mode == "exact"
    q_plus = _zeros(N, exact)
    q_minus = _zeros(N, exact)
    h = _zeros(N, exact)
    one = QI(1) if exact else 1.0
    for i in range(N - 1):
        q_plus[i, i + 1] = one
        q_minus[i + 1, i] = (i + 1) * (N - i - 1) * one
    for i in range(N):
        h[i, i] = (N - 1 - 2 * i) * one
    return PrincipalTriple(q_minus, h, q_plus)


def grade(x, triple):
    """Split x into ad(h)/2 eigencomponents, keyed by the integer grade.

    For the principal h this is just the decomposition of a matrix into its
    diagonals: offset j contributes grade j.  Only nonzero components are
    returned.
    """
    x = np.asarray(x)
    n = x.shape[0]
    if n != triple.n:
        raise ValueError("element and triple live in different algebras")
    exact = is_exact_array(x)
    pieces = {}
    for j in range(-(n - 1), n):
        comp = _zeros(n, exact)
        nonzero = False
        for i in range(n):
            k = i + j
            if 0 <= k < n:
                comp[i, k] = x[i, k]
                if (qi(x[i, k]) if exact else x[i, k]) != 0:
                    nonzero = True
        if nonzero:
            pieces[j] = comp
    return pieces


def _grade_j_basis(n, j, exact):
    # matrix units along the j-th diagonal, row-major order
    out = []
    for i in range(n - j):
        e = _zeros(n, exact)
        e[i, i + j] = QI(1) if exact else 1.0
        out.append(e)
    return out


def invariants_basis(triple, j):
    """Generator u_j of the ad(q_plus)-invariants in grade j, or None.

    Computed as an honest kernel of ad(q_plus) restricted to grade j, then
    scaled so the first nonzero entry in row-major order equals 1.  For the
    principal triple the result is the all-ones j-th superdiagonal.
    """
    n = triple.n
    if not 1 <= j <= n - 1:
        return None
    exact = is_exact_array(triple.q_plus)
    basis = _grade_j_basis(n, j, exact)
    # ad(q_plus) maps grade j into grade j+1; assemble it in these bases
    target = _grade_j_basis(n, j + 1, exact) if j + 1 <= n - 1 else []
    rows = max(len(target), 1)
    if exact:
        M = zeros_q((rows, len(basis)))
    else:
        M = np.zeros((rows, len(basis)), dtype=complex)
    for col, b in enumerate(basis):
        im = bracket(triple.q_plus, b)
        for row in range(len(target)):
            i = row
            M[row, col] = im[i, i + j + 1]
    if exact:
        null = nullspace_q(M)
        if len(null) != 1:
            raise ArithmeticError(f"invariant space in grade {j} not a line")
        vec = null[0]
    else:
        u, s, vh = np.linalg.svd(M)
        del u
        ker = int(np.sum(s < 1e-12 * max(s[0], 1.0))) + len(basis) - len(s)
        if ker != 1:
            raise ArithmeticError(f"invariant space in grade {j} not a line")
        vec = vh[-1].conj()
    out = _zeros(n, exact)
    lead = None
    if exact:
        for c in vec:
            if not qi(c).is_zero():
                lead = c
                break
    else:
        big = max(abs(c) for c in vec)
        for c in vec:
            if abs(c) > 1e-8 * big:
                lead = c
                break
    for i, c in enumerate(vec):
        out[i, i + j] = (qi(c) / qi(lead)) if exact else c / lead
    return out


def graded_invariant_dimensions(triple):
    """dim of ad(q_plus)-invariants per grade j >= 1; the rank check."""
    n = triple.n
    dims = {}
    for j in range(1, n):
        try:
            u = invariants_basis(triple, j)
            dims[j] = 1 if u is not None else 0
        except ArithmeticError:
            dims[j] = -1
    return dims


def conj_elem(x):
    """Entrywise complex conjugation, the split real structure on sl_N."""
    if is_exact_array(x):
        out = np.empty_like(x)
        flat_in = x.reshape(-1)
        flat_out = out.reshape(-1)
        for k in range(flat_in.size):
            flat_out[k] = qi(flat_in[k]).conjugate()
        return out
    return np.conj(x)


def ad_power(q, v, l):
    for _ in range(l):
        v = bracket(q, v)
    return v


def pair_jj(triple, v, w, j):
    """<v, w>_j = kappa(ad(q_minus)^j v, ad(q_minus)^j conj(w))."""
    return killing_form(
        ad_power(triple.q_minus, v, j), ad_power(triple.q_minus, conj_elem(w), j)
    )


def _single_grade(x, triple):
    pieces = grade(x, triple)
    if len(pieces) != 1:
        raise ValueError("expected a vector concentrated in one grade")
    return next(iter(pieces))


def _pairing_mass(a, b):
    """Absolute-value mass of the trace sum 2N tr(ab): the scale at which
    float cancellation noise lives.  The ad-strings grow factorially with
    the rank, so a defect is only meaningful relative to this."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    return 2 * a.shape[0] * float(np.sum(np.abs(a) * np.abs(b).T))


def _killing_trace(a, b):
    """killing_form without the full product: 2N sum_ik a_ik b_ki."""
    prod = np.multiply(np.asarray(a), np.asarray(b).T)
    n = prod.shape[0]
    if is_exact_array(prod):
        t = QI(0)
        for x in prod.reshape(-1):
            t = t + qi(x)
        return 2 * n * t
    return 2 * n * complex(prod.sum())


def killing_adpower_identity_check(triple, j, l, lp, v_j, v_jp, tol=1e-10):
    """Pairing of ad(q_minus)-strings against the closed-form prediction.

    Returns (value, expected, ok): value = kappa(ad(q_minus)^l v_j,
    ad(q_minus)^{l'} conj(v_{j'})), which must equal (-1)^{l-j} <v_j, v_j>_j
    when the grades agree and l + l' = j + j', and vanish otherwise.  In
    float mode the defect is measured against tol times the larger of the
    prediction and the trace mass of the pairing.
    """
    jp = _single_grade(v_jp, triple)
    if _single_grade(v_j, triple) != j:
        raise ValueError("v_j not in the stated grade")
    a = ad_power(triple.q_minus, v_j, l)
    b = ad_power(triple.q_minus, conj_elem(v_jp), lp)
    value = killing_form(a, b)
    exact = is_exact_array(triple.q_plus)
    if j == jp and l + lp == j + jp:
        sign = 1 if (l - j) % 2 == 0 else -1
        expected = sign * pair_jj(triple, v_j, v_j, j)
    else:
        expected = QI(0) if exact else 0.0
    if exact:
        ok = (qi(value) - qi(expected)).is_zero()
    else:
        scale = max(abs(complex(expected)), _pairing_mass(a, b), 1.0)
        ok = abs(complex(value) - complex(expected)) <= tol * scale
    return value, expected, ok


def killing_identity_grid(triple, tol=1e-10):
    """The full ladder of ad-string pairings against the closed form.

    For every exponent pair (j, j') and all powers l <= 2j, l' <= 2j',
    pairs the strings ad(q_minus)^l u_j and ad(q_minus)^{l'} conj(u_{j'})
    and compares with (-1)^{l-j} <u_j, u_j>_j on the diagonal j = j',
    l + l' = 2j, zero elsewhere.  The strings are built once per exponent
    and reused, which keeps the exact-mode grid tractable at rank 6.

    Returns {(j, j'): {"residual": float, "ok": bool, "pairs": int}} with
    residuals relative to the trace mass of the pairing (exact mode:
    residual 0.0 iff every defect is exactly zero).
    """
    N = np.asarray(triple.h).shape[0]
    exact = is_exact_array(triple.q_plus)
    chains, conj_chains, norms = {}, {}, {}
    for j in range(1, N):
        u = invariants_basis(triple, j)
        chain = [u]
        cchain = [conj_elem(u)]
        for _ in range(2 * j):
            chain.append(bracket(triple.q_minus, chain[-1]))
            cchain.append(bracket(triple.q_minus, cchain[-1]))
        chains[j] = chain
        conj_chains[j] = cchain
        norms[j] = _killing_trace(chain[j], cchain[j])
    out = {}
    for j in range(1, N):
        for jp in range(1, N):
            worst = 0.0
            all_ok = True
            count = 0
            for l in range(2 * j + 1):
                a = chains[j][l]
                for lp in range(2 * jp + 1):
                    b = conj_chains[jp][lp]
                    value = _killing_trace(a, b)
                    if j == jp and l + lp == 2 * j:
                        sign = 1 if (l - j) % 2 == 0 else -1
                        expected = sign * norms[j]
                    else:
                        expected = QI(0) if exact else 0.0
                    if exact:
                        d = qi(value) - qi(expected)
                        if not d.is_zero():
                            all_ok = False
                            worst = max(worst, abs(float(d.re) + 1j * float(d.im)))
                    else:
                        scale = max(abs(complex(expected)), _pairing_mass(a, b), 1.0)
                        res = abs(complex(value) - complex(expected)) / scale
                        worst = max(worst, res)
                        all_ok = all_ok and res <= tol
                    count += 1
            out[(j, jp)] = {"residual": worst, "ok": all_ok, "pairs": count}
    return out


def _substitution_matrix(m, deg):
    """Matrix of P(x,y) -> P(ax+cy, bx+dy) on x^{deg-s} y^s, s = 0..deg."""
    exact = is_exact_array(np.asarray(m))
    a, b, c, d = (np.asarray(m)).reshape(-1)
    dim = deg + 1
    if exact:
        M = zeros_q((dim, dim))
    else:
        M = np.zeros((dim, dim), dtype=complex)
    for s in range(dim):
        # (ax+cy)^{deg-s} (bx+dy)^s, collect coefficient of x^{deg-r} y^r
        for k in range(deg - s + 1):
            ck = comb(deg - s, k) * a ** (deg - s - k) * c**k
            for l in range(s + 1):
                cl = comb(s, l) * b ** (s - l) * d**l
                M[k + l, s] = M[k + l, s] + ck * cl
    return M


def _check_unimodular(m, tol=1e-10):
    m = np.asarray(m)
    if m.shape != (2, 2):
        raise ValueError("2x2 matrix required")
    if is_exact_array(m):
        det = qi(m[0, 0]) * qi(m[1, 1]) - qi(m[0, 1]) * qi(m[1, 0])
        if not (det - 1).is_zero():
            raise ValueError(f"matrix not unimodular, det = {det!r}")
    else:
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        if abs(det - 1) > tol:
            raise ValueError(f"matrix not unimodular, det = {det}")


def sym_action(m, j, tol=1e-10):
    """Action of a unimodular 2x2 matrix on the weight-2j symmetric power.

    Basis monomials x^{2j-s} y^s, s = 0..2j (s indexes the y-degree).  The
    action is multiplicative and, the weight being even, factors through the
    projective group: sym_action(-m, j) == sym_action(m, j).
    """
    _check_unimodular(m, tol)
    return _substitution_matrix(m, 2 * j)


def varsigma(j, P, u_j, triple):
    """Intertwiner from V_{2j} tensor u_j into the algebra.

    x^{2j-s} y^s (x) u_j maps to ((2j-s)!/(2j)!) ad(q_minus)^s(u_j), extended
    linearly in the coefficient vector P.
    """
    n = triple.n
    if not 1 <= j <= n - 1:
        raise ValueError(f"grade {j} out of range for sl_{n}")
    P = np.asarray(P)
    if P.shape != (2 * j + 1,):
        raise ValueError("module vector has wrong dimension")
    exact = is_exact_array(triple.q_plus)
    out = _zeros(n, exact)
    v = u_j
    for s in range(2 * j + 1):
        coeff = Fraction(factorial(2 * j - s), factorial(2 * j))
        c = P[s] * (QI(coeff) if exact else float(coeff))
        out = out + c * v
        if s < 2 * j:
            v = bracket(triple.q_minus, v)
    return out


def sl_basis(N, mode="float"):
    """Ordered basis of sl_N: matrix units E_ab (a != b) row-major, then
    the simple coweights H_i = E_ii - E_{i+1,i+1}."""
    exact = mode == "exact"
    out = []
    for a in range(N):
        for b in range(N):
            if a != b:
                e = _zeros(N, exact)
                e[a, b] = QI(1) if exact else 1.0
                out.append(e)
    for i in range(N - 1):
        e = _zeros(N, exact)
        e[i, i] = QI(1) if exact else 1.0
        e[i + 1, i + 1] = QI(-1) if exact else -1.0
        out.append(e)
    return out


def sl_coords(X):
    """Coordinates of a traceless matrix in the sl_basis ordering."""
    X = np.asarray(X)
    N = X.shape[0]
    exact = is_exact_array(X)
    coords = []
    for a in range(N):
        for b in range(N):
            if a != b:
                coords.append(X[a, b])
    acc = QI(0) if exact else 0.0 + 0.0j
    for i in range(N - 1):
        acc = acc + X[i, i]
        coords.append(acc)
    if exact:
        return np.array(coords, dtype=object)
    return np.array(coords, dtype=complex)


def adjoint_rep_matrix(g, basis=None):
    """Matrix of Ad(g): x -> g x g^{-1} in the sl_basis coordinates."""
    g = np.asarray(g)
    N = g.shape[0]
    exact = is_exact_array(g)
    if basis is None:
        basis = sl_basis(N, mode="exact" if exact else "float")
    if exact:
        from .exactscalar import inverse_q

        ginv = inverse_q(g)
    else:
        ginv = np.linalg.inv(g)
    cols = [sl_coords(np.dot(np.dot(g, b), ginv)) for b in basis]
    if exact:
        out = np.empty((len(cols[0]), len(cols)), dtype=object)
        for j, c in enumerate(cols):
            out[:, j] = c
        return out
    return np.stack(cols, axis=1)


def iota_G(m, N, tol=1e-10):
    """Principal embedding of a unimodular 2x2 matrix into SL_N.

    The unique N-dimensional irreducible of the 2x2 group, conjugated so the
    differential matches principal_triple(N): e -> q_plus, f -> q_minus,
    h -> diag(N-1, ..., 1-N).  For N = 2 this is the identity map.
    """
    _check_unimodular(m, tol)
    M = _substitution_matrix(m, N - 1)
    exact = is_exact_array(np.asarray(m))
    if exact:
        D = zeros_q((N, N))
        Dinv = zeros_q((N, N))
        for s in range(N):
            D[s, s] = QI(factorial(s))
            Dinv[s, s] = QI(Fraction(1, factorial(s)))
    else:
        D = np.diag([float(factorial(s)) for s in range(N)]).astype(complex)
        Dinv = np.diag([1.0 / factorial(s) for s in range(N)]).astype(complex)
    return np.dot(np.dot(D, M), Dinv)
