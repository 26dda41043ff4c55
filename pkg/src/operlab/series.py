"""Truncated formal connections at a marked point and their gauge theory.

A connection is v(t) = sum_i t^i v_i with matrix coefficients, acted on by
gauge series h(t) through h D(h^{-1}) + h v h^{-1}, D = t d/dt in logarithmic
mode.  The normalization algorithm removes the tail of a weakly prepared
logarithmic connection order by order; in exact mode the whole computation
runs over Gaussian rationals and the final agreement with the residue is an
identity, not an approximation.
"""

from __future__ import annotations

import warnings
from fractions import Fraction
from math import factorial

import numpy as np
import scipy.linalg

from .exactscalar import (
    QI,
    eye_q,
    is_exact_array,
    qi,
    rational_eigenvalues,
    solve_q,
    to_complex,
    zeros_q,
)

__all__ = [
    "FormalConnection",
    "GaugeSeries",
    "WeaklyPreparedViolation",
    "gauge_transform",
    "gauge_mul",
    "gauge_inverse",
    "residue",
    "is_weakly_prepared",
    "radius",
    "is_zero_radius",
    "normalize_step",
    "normalize",
    "local_monodromy",
    "random_prepared_residue",
]


class WeaklyPreparedViolation(ArithmeticError):
    """Raised when n*id + ad(v0) is singular during normalization.

    Carries the offending order n and, when identifiable, the eigenvalue pair
    of the residue whose difference equals n.
    """

    def __init__(self, n, pair=None):
        self.n = n
        self.pair = pair
        msg = f"n*id + ad(v0) singular at order n = {n}"
        if pair is not None:
            msg += f"; eigenvalue pair {pair[0]} , {pair[1]} differs by {n}"
        super().__init__(msg)


class FormalConnection:
    """v(t) = sum t^i v_i truncated at order M, with a derivation flag."""

    def __init__(self, coeffs, logarithmic=True):
        self.coeffs = [np.asarray(c) for c in coeffs]
        if not self.coeffs:
            raise ValueError("at least the order-0 coefficient is required")
        n = self.coeffs[0].shape[0]
        for c in self.coeffs:
            if c.shape != (n, n):
                raise ValueError("coefficient shapes disagree")
        self.logarithmic = bool(logarithmic)

    @property
    def order(self):
        return len(self.coeffs) - 1

    @property
    def n(self):
        return self.coeffs[0].shape[0]

    @property
    def exact(self):
        return is_exact_array(self.coeffs[0])


class GaugeSeries:
    """h(t) = sum t^i h_i with h_0 invertible."""

    def __init__(self, coeffs):
        self.coeffs = [np.asarray(c) for c in coeffs]

    @property
    def order(self):
        return len(self.coeffs) - 1

    @property
    def n(self):
        return self.coeffs[0].shape[0]

    @property
    def exact(self):
        return is_exact_array(self.coeffs[0])

    @classmethod
    def identity(cls, n, order, exact=False):
        one = eye_q(n) if exact else np.eye(n, dtype=complex)
        zero = zeros_q((n, n)) if exact else np.zeros((n, n), dtype=complex)
        return cls([one] + [zero.copy() for _ in range(order)])


def _is_zero_mat(c):
    if is_exact_array(c):
        return all(qi(x).is_zero() for x in c.reshape(-1))
    return not np.any(c)


def _series_mul(a, b, order):
    """Cauchy product of coefficient lists, truncated; skips zero terms.

    The exact path runs on common-denominator integer cores and reduces each
    output coefficient once, which is an order of magnitude cheaper than
    per-entry Fraction arithmetic.
    """
    n = a[0].shape[0]
    exact = is_exact_array(a[0])
    nz_a = [not _is_zero_mat(c) for c in a]
    nz_b = [not _is_zero_mat(c) for c in b]
    if exact:
        from .exactscalar import from_intcore, intcore, intcore_add, intcore_dot

        ca = [intcore(c) if nz else None for c, nz in zip(a, nz_a)]
        cb = [intcore(c) if nz else None for c, nz in zip(b, nz_b)]
        out = []
        for k in range(order + 1):
            acc = None
            for i in range(k + 1):
                if i < len(a) and k - i < len(b) and nz_a[i] and nz_b[k - i]:
                    term = intcore_dot(ca[i], cb[k - i])
                    acc = term if acc is None else intcore_add(acc, term)
            out.append(zeros_q((n, n)) if acc is None else from_intcore(*acc))
        return out
    out = []
    for k in range(order + 1):
        acc = np.zeros((n, n), dtype=complex)
        for i in range(k + 1):
            if i < len(a) and k - i < len(b) and nz_a[i] and nz_b[k - i]:
                acc = acc + np.dot(a[i], b[k - i])
        out.append(acc)
    return out


def _series_inv(h, order):
    """Inverse of an invertible series to the given order."""
    n = h[0].shape[0]
    exact = is_exact_array(h[0])
    if exact:
        g0 = solve_q(h[0], eye_q(n))
    else:
        g0 = np.linalg.inv(h[0])
    out = [g0]
    for k in range(1, order + 1):
        acc = zeros_q((n, n)) if exact else np.zeros((n, n), dtype=complex)
        for i in range(1, k + 1):
            if i < len(h):
                acc = acc + np.dot(h[i], out[k - i])
        out.append(-np.dot(g0, acc))
    return out


def gauge_mul(h1, h2):
    """Product of gauge series (apply h2 first, then h1)."""
    order = max(h1.order, h2.order)
    return GaugeSeries(_series_mul(h1.coeffs, h2.coeffs, order))


def gauge_inverse(h):
    return GaugeSeries(_series_inv(h.coeffs, h.order))


def gauge_transform(h, v, hinv=None):
    """h D(h^{-1}) + h v h^{-1}, truncated at the connection's order.

    D = t d/dt when v is logarithmic, plain d/dt otherwise; in the latter case
    the top coefficient of the derivative term is computed from the available
    data only (the t^{M+1} coefficient of h is not known).
    """
    order = v.order
    n = v.n
    exact = v.exact
    if hinv is None:
        g = _series_inv(h.coeffs, order)
    else:
        g = list(hinv.coeffs)
    if v.logarithmic:
        dg = [k * g[k] for k in range(len(g))]
    else:
        dg = [(k + 1) * g[k + 1] for k in range(len(g) - 1)]
        dg.append(zeros_q((n, n)) if exact else np.zeros((n, n), dtype=complex))
    term1 = _series_mul(h.coeffs, dg, order)
    term2 = _series_mul(_series_mul(h.coeffs, v.coeffs, order), g, order)
    return FormalConnection(
        [a + b for a, b in zip(term1, term2)], logarithmic=v.logarithmic
    )


def residue(v):
    """The order-zero coefficient; only logarithmic connections have one."""
    if not v.logarithmic:
        raise ValueError("residue undefined for non-logarithmic connections")
    return v.coeffs[0]


def _eigenvalues_for_preparedness(c, tol):
    """(values, exact_flag); exact path falls back to float with a warning."""
    if is_exact_array(c):
        lams = rational_eigenvalues(c)
        if lams is not None:
            return lams, True
        warnings.warn(
            "residue spectrum not rational; weakly-prepared test falls back "
            "to floating point",
            stacklevel=3,
        )
        c = to_complex(c)
    return list(np.linalg.eigvals(np.asarray(c, dtype=complex))), False


def is_weakly_prepared(c, tol=1e-9):
    """No two distinct eigenvalues of c may differ by a nonzero integer."""
    lams, exact = _eigenvalues_for_preparedness(c, tol)
    for i in range(len(lams)):
        for j in range(len(lams)):
            if i == j:
                continue
            if exact:
                d = qi(lams[i]) - qi(lams[j])
                if d.is_zero():
                    continue
                if d.im == 0 and d.re.denominator == 1 and d.re != 0:
                    return False
            else:
                d = lams[i] - lams[j]
                if abs(d) <= tol:
                    continue
                k = round(d.real)
                if k != 0 and abs(d - k) <= tol:
                    return False
    return True


def _charpoly_coeffs(c):
    """Monic characteristic coefficients, descending, in the element's mode."""
    if is_exact_array(c):
        from .exactscalar import charpoly_q

        return charpoly_q(c)
    c = np.asarray(c, dtype=complex)
    n = c.shape[0]
    coeffs = [1.0 + 0j]
    M = np.eye(n, dtype=complex)
    for k in range(1, n + 1):
        cm = c @ M
        ck = -np.trace(cm) / k
        coeffs.append(ck)
        if k < n:
            M = cm + ck * np.eye(n)
    return coeffs


def radius(c):
    """Characteristic coefficients of a residue, trace and leading term dropped.

    This is the invariant-theory image of the residue: it vanishes exactly on
    nilpotent matrices.
    """
    coeffs = _charpoly_coeffs(c)
    return coeffs[2:]


def is_zero_radius(c, tol=1e-9):
    for x in radius(c):
        if isinstance(x, QI):
            if not x.is_zero():
                return False
        elif abs(x) > tol:
            return False
    return True


def _ad_operator(v0):
    """Matrix of u -> n u + [v0, u] on full matrix space, vectorized row-major."""
    n = v0.shape[0]
    if is_exact_array(v0):
        eye = eye_q(n)
        K = np.kron(v0, eye) - np.kron(eye.T, v0.T)
        return K
    eye = np.eye(n, dtype=complex)
    return np.kron(v0, eye) - np.kron(eye, v0.T)


def _diagnose_pair(v0, n_order, tol=1e-8):
    if is_exact_array(v0):
        lams = rational_eigenvalues(v0)
        if lams is None:
            return None
        lams = [complex(x) for x in lams]
    else:
        lams = np.linalg.eigvals(np.asarray(v0, dtype=complex))
    for a in lams:
        for b in lams:
            if abs((a - b) - n_order) < tol:
                return (a, b)
    return None


def _exp_gauge(u, n_order, order):
    """Gauge series exp(t^n u) truncated at the given order, with its inverse."""
    n = u.shape[0]
    exact = is_exact_array(u)
    zero = zeros_q((n, n)) if exact else np.zeros((n, n), dtype=complex)
    coeffs = [zero.copy() for _ in range(order + 1)]
    inv_coeffs = [zero.copy() for _ in range(order + 1)]
    power = eye_q(n) if exact else np.eye(n, dtype=complex)
    m = 0
    while n_order * m <= order:
        if exact:
            fac = QI(Fraction(1, factorial(m)))
            coeffs[n_order * m] = power * fac
            inv_coeffs[n_order * m] = power * (fac if m % 2 == 0 else -fac)
        else:
            fac = 1.0 / factorial(m)
            coeffs[n_order * m] = power * fac
            inv_coeffs[n_order * m] = power * (fac if m % 2 == 0 else -fac)
        m += 1
        if n_order * m <= order:
            power = np.dot(power, u)
    return GaugeSeries(coeffs), GaugeSeries(inv_coeffs)


def normalize_step(v, n_order):
    """One sweep of the normalization: kill the order-n coefficient.

    Solves (n id + ad(v0)) u = -v_n and gauges by exp(-t^n u); under the
    gauge action h D(h^{-1}) + h v h^{-1} this cancels the t^n term.  A
    singular solve means two residue eigenvalues differ by exactly n, which
    is the weakly-prepared hypothesis failing; that raises
    WeaklyPreparedViolation carrying the offending pair.
    """
    if not v.logarithmic:
        raise ValueError("normalization requires a logarithmic connection")
    if n_order < 1:
        raise ValueError("order must be at least 1")
    v0 = v.coeffs[0]
    vn = v.coeffs[n_order] if n_order <= v.order else None
    n = v.n
    exact = v.exact
    if vn is None or _is_zero_mat(vn):
        h = GaugeSeries.identity(n, v.order, exact=exact)
        return h, v
    K = _ad_operator(v0)
    if exact:
        K = K + QI(n_order) * eye_q(n * n)
        try:
            u_vec = solve_q(K, -vn.reshape(-1))
        except np.linalg.LinAlgError:
            raise WeaklyPreparedViolation(n_order, _diagnose_pair(v0, n_order))
        u = u_vec.reshape(n, n)
    else:
        K = K + n_order * np.eye(n * n, dtype=complex)
        sv = np.linalg.svd(K, compute_uv=False)
        if sv[-1] <= 1e-10 * max(sv[0], 1.0):
            raise WeaklyPreparedViolation(n_order, _diagnose_pair(v0, n_order))
        u = np.linalg.solve(K, -vn.reshape(-1)).reshape(n, n)
    h, hinv = _exp_gauge(-u, n_order, v.order)
    w = gauge_transform(h, v, hinv=hinv)
    return h, w


def normalize(v):
    """Gauge a weakly prepared logarithmic connection to its residue.

    Returns (h, v0) with h = identity mod t and gauge_transform(h, v) = v0
    through the truncation order.  Instead of composing the M elementary
    steps, h is found from the equivalent recursion D(h) = h v - v0 h, i.e.
    (k id + ad(v0)) h_k = sum_{l=1..k} h_{k-l} v_l, order by order; weak
    preparedness makes each solve nonsingular and the solution unique, so
    this h coincides with the composite h_M ... h_1 of normalize_step.
    """
    if not v.logarithmic:
        raise ValueError("normalization requires a logarithmic connection")
    if not is_weakly_prepared(v.coeffs[0]):
        lams = np.linalg.eigvals(to_complex(v.coeffs[0]))
        for a in lams:
            for b in lams:
                k = round((a - b).real)
                if k > 0 and abs((a - b) - k) < 1e-9:
                    raise WeaklyPreparedViolation(k, (a, b))
        raise WeaklyPreparedViolation(0, None)
    n = v.n
    exact = v.exact
    M = v.order
    v0 = v.coeffs[0]
    K0 = _ad_operator(v0)
    nz_v = [not _is_zero_mat(c) for c in v.coeffs]
    h = [eye_q(n) if exact else np.eye(n, dtype=complex)]
    for k in range(1, M + 1):
        rhs = zeros_q((n, n)) if exact else np.zeros((n, n), dtype=complex)
        for l in range(1, k + 1):
            if nz_v[l]:
                rhs = rhs + np.dot(h[k - l], v.coeffs[l])
        if _is_zero_mat(rhs):
            h.append(rhs)
            continue
        if exact:
            K = K0 + QI(k) * eye_q(n * n)
            try:
                hk = solve_q(K, rhs.reshape(-1)).reshape(n, n)
            except np.linalg.LinAlgError:
                raise WeaklyPreparedViolation(k, _diagnose_pair(v0, k))
        else:
            K = K0 + k * np.eye(n * n, dtype=complex)
            sv = np.linalg.svd(K, compute_uv=False)
            if sv[-1] <= 1e-10 * max(sv[0], 1.0):
                raise WeaklyPreparedViolation(k, _diagnose_pair(v0, k))
            hk = np.linalg.solve(K, rhs.reshape(-1)).reshape(n, n)
        h.append(hk)
    return GaugeSeries(h), v0


def local_monodromy(c):
    """exp(-2 pi i c): the monodromy of the normalized model t^{-c}."""
    return scipy.linalg.expm(-2j * np.pi * to_complex(c))


def random_prepared_residue(N, rng, mode="float", denom=7):
    """Random traceless residue with rational spectrum, no integer gaps.

    Built as P diag(k_i/denom) P^{-1} with a random unimodular integer P
    (product of elementary shear matrices), so the exact pipeline certifies
    the eigenvalues and the float pipeline sees a mildly conditioned matrix.
    Numerators are distinct mod denom and bounded by it, which rules out
    integer differences outright and keeps the spectrum in (-1, 1).
    """
    if denom < N + 1:
        raise ValueError("denominator too small to separate eigenvalues mod denom")
    while True:
        ks = [int(k) for k in rng.integers(-(denom - 1), denom, size=N)]
        ks[-1] = -sum(ks[:-1])
        if len({k % denom for k in ks}) == N and abs(ks[-1]) < denom:
            break
    while True:
        P = np.eye(N, dtype=np.int64)
        for _ in range(N):
            i, j = rng.choice(N, size=2, replace=False)
            P[i] += int(rng.choice([-1, 1])) * P[j]
        if np.abs(P).max() <= 2:
            break
    Pq = np.empty((N, N), dtype=object)
    for i in range(N):
        for j in range(N):
            Pq[i, j] = QI(int(P[i, j]))
    Pinv = solve_q(Pq, eye_q(N))
    D = zeros_q((N, N))
    for i in range(N):
        D[i, i] = QI(Fraction(ks[i], denom))
    c = np.dot(np.dot(Pq, D), Pinv)
    if mode == "float":
        return to_complex(c)
    return c
