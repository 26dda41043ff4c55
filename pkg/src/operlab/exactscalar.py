"""Exact Gaussian-rational scalars and the small linear algebra built on them.

Float mode everywhere else in the library is plain complex128.  Exact mode
stores `QI` scalars (pairs of Fractions) inside object-dtype numpy arrays, so
matrix code written against ndarray semantics runs unchanged in both modes.
Only the handful of dense routines that must be exact live here: Gaussian
elimination, nullspaces, characteristic polynomials, and a verified rational
eigenvalue extraction.
"""

from __future__ import annotations

from fractions import Fraction
from math import factorial

import numpy as np

__all__ = [
    "QI",
    "qi",
    "qi_matrix",
    "zeros_q",
    "eye_q",
    "to_complex",
    "is_exact_array",
    "solve_q",
    "inverse_q",
    "nullspace_q",
    "charpoly_q",
    "rational_eigenvalues",
]


class QI:
    """A Gaussian rational a + b*i with exact Fraction parts.

    Immutable.  Arithmetic accepts ints and Fractions on either side, which is
    what numpy object arrays feed us during dot products.
    """

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        object.__setattr__(self, "re", Fraction(re))
        object.__setattr__(self, "im", Fraction(im))

    def __setattr__(self, name, value):
        raise AttributeError("QI is immutable")

    # -- ring structure ----------------------------------------------------

    def __add__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return QI(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __sub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return QI(self.re - other.re, self.im - other.im)

    def __rsub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return QI(other.re - self.re, other.im - self.im)

    def __mul__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return QI(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        n = other.re * other.re + other.im * other.im
        if n == 0:
            raise ZeroDivisionError("division by exact zero")
        return QI(
            (self.re * other.re + self.im * other.im) / n,
            (self.im * other.re - self.re * other.im) / n,
        )

    def __rtruediv__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other.__truediv__(self)

    def __neg__(self):
        return QI(-self.re, -self.im)

    def __pos__(self):
        return self

    def __pow__(self, k):
        if not isinstance(k, int) or k < 0:
            return NotImplemented
        out = QI(1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    # -- predicates and conversions ----------------------------------------

    def conjugate(self):
        return QI(self.re, -self.im)

    def is_zero(self):
        return self.re == 0 and self.im == 0

    def __bool__(self):
        return not self.is_zero()

    def __eq__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self.re == other.re and self.im == other.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __abs__(self):
        return abs(complex(self))

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        if self.im == 0:
            return f"QI({self.re})"
        return f"QI({self.re}, {self.im})"


def _coerce(x):
    if isinstance(x, QI):
        return x
    if isinstance(x, (int, Fraction)):
        return QI(x)
    if isinstance(x, complex) and x.imag == 0 and float(x.real).is_integer():
        return QI(int(x.real))
    return NotImplemented


def qi(x):
    """Coerce an int, Fraction, QI, or exact complex into a QI scalar."""
    c = _coerce(x)
    if c is NotImplemented:
        raise TypeError(f"cannot represent {x!r} exactly")
    return c


def qi_matrix(rows):
    """Object ndarray of QI scalars from nested int/Fraction/QI data."""
    a = np.asarray(rows, dtype=object)
    flat = a.reshape(-1)
    for k in range(flat.size):
        flat[k] = qi(flat[k])
    return flat.reshape(a.shape)


def zeros_q(shape):
    a = np.empty(shape, dtype=object)
    a.reshape(-1)[:] = [QI(0)] * a.size
    return a


def eye_q(n):
    a = zeros_q((n, n))
    for i in range(n):
        a[i, i] = QI(1)
    return a


def to_complex(a):
    """Convert an exact object array (or anything array-like) to complex128."""
    a = np.asarray(a)
    if a.dtype != object:
        return a.astype(complex)
    out = np.empty(a.shape, dtype=complex)
    flat_in = a.reshape(-1)
    flat_out = out.reshape(-1)
    for k in range(flat_in.size):
        flat_out[k] = complex(flat_in[k])
    return out


def is_exact_array(a):
    return isinstance(a, np.ndarray) and a.dtype == object


def solve_q(A, b):
    """Exact linear solve by Gaussian elimination with nonzero pivoting.

    Raises np.linalg.LinAlgError on a singular matrix so callers can treat the
    exact path and numpy's float path uniformly.
    """
    A = np.array(A, dtype=object)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("square matrix required")
    b = np.array(b, dtype=object)
    vec = b.ndim == 1
    if vec:
        b = b.reshape(n, 1)
    M = np.concatenate([A, b], axis=1)
    for col in range(n):
        piv = None
        for r in range(col, n):
            if not qi(M[r, col]).is_zero():
                piv = r
                break
        if piv is None:
            raise np.linalg.LinAlgError("exact solve: singular matrix")
        if piv != col:
            M[[col, piv]] = M[[piv, col]]
        inv = QI(1) / qi(M[col, col])
        M[col, col:] = [inv * qi(x) for x in M[col, col:]]
        for r in range(n):
            if r != col and not qi(M[r, col]).is_zero():
                M[r, col:] = [
                    qi(x) - qi(M[r, col]) * qi(y)
                    for x, y in zip(M[r, col:], M[col, col:])
                ]
    x = M[:, n:]
    return x[:, 0] if vec else x


def inverse_q(A):
    return solve_q(A, eye_q(np.asarray(A).shape[0]))


def nullspace_q(A):
    """Exact right nullspace basis (list of object vectors) via RREF."""
    A = np.array(A, dtype=object)
    rows, cols = A.shape
    pivots = []
    r = 0
    for c in range(cols):
        piv = None
        for rr in range(r, rows):
            if not qi(A[rr, c]).is_zero():
                piv = rr
                break
        if piv is None:
            continue
        if piv != r:
            A[[r, piv]] = A[[piv, r]]
        inv = QI(1) / qi(A[r, c])
        A[r, :] = [inv * qi(x) for x in A[r, :]]
        for rr in range(rows):
            if rr != r and not qi(A[rr, c]).is_zero():
                A[rr, :] = [
                    qi(x) - qi(A[rr, c]) * qi(y) for x, y in zip(A[rr, :], A[r, :])
                ]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    free = [c for c in range(cols) if c not in pivots]
    basis = []
    for fc in free:
        v = zeros_q(cols)
        v[fc] = QI(1)
        for i, pc in enumerate(pivots):
            v[pc] = -qi(A[i, fc])
        basis.append(v)
    return basis


def charpoly_q(A):
    """Characteristic polynomial of an exact matrix, monic, descending powers.

    Faddeev-LeVerrier: returns [1, c_{n-1}, ..., c_0] with
    det(lambda I - A) = lambda^n + c_{n-1} lambda^{n-1} + ... + c_0.
    """
    A = np.asarray(A, dtype=object)
    n = A.shape[0]
    coeffs = [QI(1)]
    M = eye_q(n)
    for k in range(1, n + 1):
        AM = np.dot(A, M)
        tr = QI(0)
        for i in range(n):
            tr = tr + qi(AM[i, i])
        c = -tr / k
        coeffs.append(c)
        if k < n:
            M = AM + c * eye_q(n)
    return coeffs


def _poly_eval(coeffs, x):
    acc = QI(0)
    for c in coeffs:
        acc = acc * x + c
    return acc


def _poly_deflate(coeffs, root):
    # synthetic division; caller guarantees root is exact
    out = [coeffs[0]]
    for c in coeffs[1:-1]:
        out.append(c + root * out[-1])
    return out


def rational_eigenvalues(A, max_den=10**6):
    """Exact eigenvalues of an exact matrix when they are Gaussian rational.

    Strategy: float eigenvalues suggest candidates, Fraction.limit_denominator
    rationalizes them, and exact polynomial division verifies.  Returns the
    full multiset as QI scalars, or None when the spectrum is not (detectably)
    rational, in which case the caller falls back to float arithmetic.
    """
    coeffs = charpoly_q(A)
    approx = np.linalg.eigvals(to_complex(A))
    roots = []
    for lam in approx:
        cand = QI(
            Fraction(lam.real).limit_denominator(max_den),
            Fraction(lam.imag).limit_denominator(max_den),
        )
        roots.append(cand)
    # verify with multiplicity by repeated exact deflation
    remaining = list(coeffs)
    out = []
    for cand in roots:
        if len(remaining) == 1:
            break
        if _poly_eval(remaining, cand).is_zero():
            remaining = _poly_deflate(remaining, cand)
            out.append(cand)
    if len(out) == A.shape[0]:
        return out
    return None


def intcore(A):
    """Common-denominator integer form (R, I, den) of an exact matrix.

    Hot loops (series convolution) do their arithmetic on plain integer
    arrays and reduce once at the end; this avoids a gcd per scalar op.
    """
    from math import lcm

    A = np.asarray(A, dtype=object)
    den = 1
    flat = A.reshape(-1)
    for x in flat:
        x = qi(x)
        den = lcm(den, x.re.denominator, x.im.denominator)
    R = np.empty(A.shape, dtype=object)
    I = np.empty(A.shape, dtype=object)
    fr = R.reshape(-1)
    fi = I.reshape(-1)
    for k, x in enumerate(flat):
        x = qi(x)
        fr[k] = int(x.re * den)
        fi[k] = int(x.im * den)
    return R, I, den


def from_intcore(R, I, den):
    out = np.empty(R.shape, dtype=object)
    fo = out.reshape(-1)
    fr = R.reshape(-1)
    fi = I.reshape(-1)
    for k in range(fo.size):
        fo[k] = QI(Fraction(fr[k], den), Fraction(fi[k], den))
    return out


def intcore_dot(a, b):
    """Product of two intcore matrices, no reduction."""
    Ra, Ia, da = a
    Rb, Ib, db = b
    return (
        np.dot(Ra, Rb) - np.dot(Ia, Ib),
        np.dot(Ra, Ib) + np.dot(Ia, Rb),
        da * db,
    )


def intcore_add(a, b):
    from math import gcd

    Ra, Ia, da = a
    Rb, Ib, db = b
    g = gcd(da, db)
    ma, mb = db // g, da // g
    return (Ra * ma + Rb * mb, Ia * ma + Ib * mb, da * ma)


def exp_nilpotent_q(A, order=None):
    """Exact exp of a nilpotent exact matrix via the terminating series."""
    A = np.asarray(A, dtype=object)
    n = A.shape[0]
    if order is None:
        order = n
    out = eye_q(n)
    term = eye_q(n)
    for k in range(1, order + 1):
        term = np.dot(term, A)
        if all(qi(x).is_zero() for x in term.reshape(-1)):
            break
        out = out + term * QI(Fraction(1, factorial(k)))
    return out
