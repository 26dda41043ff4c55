"""Group cohomology of punctured-surface groups with matrix coefficients.

The group is given by the standard presentation with generators
A_1, B_1, ..., A_g, B_g, T_1, ..., T_r and the single relation

    [A_1, B_1] ... [A_g, B_g] T_1 ... T_r = 1.

A coefficient module is a matrix action of the generators; cocycles are
stored as stacked vectors listing the value on each generator in the
fixed generator order.  Parabolic cocycles are those whose value on each
T_i lies in the image of (T_i - 1), and the parabolic cohomology H^1_P
is computed as the orthogonal complement of the coboundaries inside the
parabolic cocycle space.  Ranks come from singular values with a
relative cutoff, and every dimension computation records the spectral
gap it relied on so borderline thresholding is visible to the caller.
"""

import json

import numpy as np

from .exactscalar import (
    QI,
    eye_q,
    inverse_q,
    is_exact_array,
    nullspace_q,
    qi,
    qi_matrix,
    to_complex,
)
from .lie import adjoint_rep_matrix, iota_G, sl_basis, sym_action

__all__ = [
    "SurfacePresentation",
    "GroupRepresentation",
    "ModuleAction",
    "CohomologySpace",
    "parse_word",
    "evaluate_word",
    "cocycle_value",
    "cocycle_relator_map",
    "z1_basis",
    "coboundary_matrix",
    "coboundary_space",
    "parabolic_subspace",
    "h0_space",
    "h1p_basis",
    "h1p_dimension",
    "restriction_to_puncture",
    "adjoint_module",
    "symmetric_power_module",
    "representation_from_json",
    "representation_to_json",
]

RANK_RTOL = 1e-8


class SurfacePresentation:
    """Generator bookkeeping for genus g with r punctures."""

    def __init__(self, genus, punctures):
        if genus < 0 or punctures < 0 or (genus == 0 and punctures == 0):
            raise ValueError("need genus >= 0, punctures >= 0, not both zero")
        self.genus = genus
        self.punctures = punctures
        self.handle_names = []
        for j in range(1, genus + 1):
            self.handle_names += [f"A{j}", f"B{j}"]
        self.puncture_names = [f"T{i}" for i in range(1, punctures + 1)]
        self.generators = self.handle_names + self.puncture_names
        self._index = {name: k for k, name in enumerate(self.generators)}

    def index(self, name):
        return self._index[name]

    @property
    def relator(self):
        """The defining word prod_j [A_j,B_j] prod_i T_i as (name, exp) letters."""
        word = []
        for j in range(1, self.genus + 1):
            a, b = f"A{j}", f"B{j}"
            word += [(a, 1), (b, 1), (a, -1), (b, -1)]
        for name in self.puncture_names:
            word.append((name, 1))
        return word

    def __repr__(self):
        return f"SurfacePresentation(genus={self.genus}, punctures={self.punctures})"


def parse_word(word, presentation=None):
    """Accept either a letter list [(name, exp), ...] or a string like
    "A1 B1 A1^-1 B1^-1"; powers expand to repeated unit letters."""
    if isinstance(word, str):
        letters = []
        for tok in word.split():
            if "^" in tok:
                name, e = tok.split("^")
                e = int(e)
            else:
                name, e = tok, 1
            letters.append((name, e))
        word = letters
    out = []
    for name, e in word:
        if presentation is not None and name not in presentation._index:
            raise KeyError(f"unknown generator {name!r}")
        if e == 0:
            continue
        step = 1 if e > 0 else -1
        out += [(name, step)] * abs(e)
    return out


class _MatrixFamily:
    """Shared machinery: a dict of generator matrices plus cached inverses."""

    def __init__(self, presentation, gens, tol=1e-9):
        self.presentation = presentation
        missing = [g for g in presentation.generators if g not in gens]
        if missing:
            raise ValueError(f"missing generator matrices: {missing}")
        first = np.asarray(gens[presentation.generators[0]])
        self.exact = is_exact_array(first)
        self.dim = first.shape[0]
        self.gens = {}
        for name in presentation.generators:
            m = np.asarray(gens[name])
            if m.shape != (self.dim, self.dim):
                raise ValueError(f"generator {name} has shape {m.shape}")
            if self.exact != is_exact_array(m):
                raise ValueError("mixed exact and floating generator matrices")
            self.gens[name] = m if self.exact else m.astype(complex)
        self._inv = {}
        self.tol = tol

    def mat(self, name, exp=1):
        if exp == 1:
            return self.gens[name]
        if name not in self._inv:
            g = self.gens[name]
            self._inv[name] = inverse_q(g) if self.exact else np.linalg.inv(g)
        return self._inv[name]

    def word_matrix(self, word, return_peak=False):
        word = parse_word(word, self.presentation)
        if self.exact:
            out = eye_q(self.dim)
        else:
            out = np.eye(self.dim, dtype=complex)
        peak = 1.0
        for name, e in word:
            out = np.dot(out, self.mat(name, e))
            if return_peak and not self.exact:
                peak = max(peak, float(np.abs(out).max()))
        if return_peak:
            return out, peak
        return out

    def _identity_defect(self, m, scale=1.0):
        eye = np.eye(self.dim)
        if self.exact:
            return float(np.abs(to_complex(m) - eye).max())
        return float(np.abs(m - eye).max()) / max(scale, 1.0)


class GroupRepresentation(_MatrixFamily):
    """Matrices for the group generators; the relator must evaluate to
    the identity up to sign (projective representations are allowed,
    a holonomy lifted from PSL_2 may hit -1 on the relator)."""

    def __init__(self, presentation, gens, tol=1e-9):
        super().__init__(presentation, gens, tol)
        rel, peak = self.word_matrix(presentation.relator, return_peak=True)
        plus = self._identity_defect(rel, peak)
        minus = self._identity_defect(-rel, peak)
        self.relator_sign = 1 if plus <= minus else -1
        self.relator_defect = min(plus, minus)
        if self.relator_defect > tol:
            raise ValueError(
                f"relator fails to be +-identity, defect {self.relator_defect:.3e}"
            )


class ModuleAction(_MatrixFamily):
    """Coefficient module: the relator must act as the exact identity."""

    def __init__(self, presentation, gens, field="real", tol=1e-9):
        super().__init__(presentation, gens, tol)
        if field not in ("real", "complex"):
            raise ValueError("field must be 'real' or 'complex'")
        self.field = field
        rel, peak = self.word_matrix(presentation.relator, return_peak=True)
        # defect is measured relative to the largest intermediate product:
        # high-weight modules pass through entries of size ||g||^{2j}
        self.relator_defect = self._identity_defect(rel, peak)
        if self.relator_defect > tol:
            raise ValueError(
                "relator does not act trivially on the module "
                f"(defect {self.relator_defect:.3e}); the action is inconsistent"
            )

    def _real_view(self, m):
        if self.field == "real":
            return m.real
        return m

    def zeros(self, shape):
        """Work buffer: object array of exact zeros, or complex zeros.
        Callers cast to real at the end when the field is real."""
        if self.exact:
            out = np.empty(shape, dtype=object)
            out[...] = QI(0)
            return out
        return np.zeros(shape, dtype=complex)


def evaluate_word(family, word):
    """Product of generator matrices along the word (left to right)."""
    return family.word_matrix(word)


def _letter_blocks(action, z):
    """Split a stacked cocycle vector into per-generator values."""
    d = action.dim
    names = action.presentation.generators
    z = np.asarray(z)
    if z.shape[0] != d * len(names):
        raise ValueError(f"cocycle vector has length {z.shape[0]}, expected {d * len(names)}")
    return {name: z[k * d : (k + 1) * d] for k, name in enumerate(names)}


def cocycle_value(action, z, word):
    """Extend a cocycle from generators to any word via
    z(uv) = z(u) + u . z(v) and z(y^-1) = -y^-1 . z(y)."""
    blocks = _letter_blocks(action, z)
    word = parse_word(word, action.presentation)
    val = action.zeros((action.dim,))
    if action.exact:
        prefix = eye_q(action.dim)
    else:
        prefix = np.eye(action.dim, dtype=complex)
    for name, e in word:
        if e == 1:
            val = val + np.dot(prefix, blocks[name])
        else:
            ginv = action.mat(name, -1)
            val = val - np.dot(np.dot(prefix, ginv), blocks[name])
        prefix = np.dot(prefix, action.mat(name, e))
    if action.exact or action.field == "complex":
        return val
    return val.real


def cocycle_relator_map(action):
    """The d x (2g+r)d matrix sending generator values to the cocycle's
    value on the relator; its kernel is the cocycle space Z^1."""
    pres = action.presentation
    d = action.dim
    n = len(pres.generators)
    R = action.zeros((d, n * d))
    if action.exact:
        prefix = eye_q(d)
    else:
        prefix = np.eye(d, dtype=complex)
    for name, e in parse_word(pres.relator, pres):
        k = pres.index(name)
        if e == 1:
            coef = prefix
        else:
            coef = -np.dot(prefix, action.mat(name, -1))
        R[:, k * d : (k + 1) * d] = R[:, k * d : (k + 1) * d] + coef
        prefix = np.dot(prefix, action.mat(name, e))
    if action.exact or action.field == "complex":
        return R
    return R.real


def _nullspace(M, rtol=RANK_RTOL):
    """Orthonormal kernel basis (columns) and the spectral gap at the cut."""
    m, n = M.shape
    if n == 0:
        return np.zeros((0, 0)), np.inf
    if m == 0 or not np.any(M):
        return np.eye(n, dtype=M.dtype if M.dtype == complex else float), np.inf
    u, s, vh = np.linalg.svd(M, full_matrices=True)
    cut = rtol * s[0]
    rank = int(np.sum(s > cut))
    if rank in (0, len(s)):
        gap = np.inf
    else:
        gap = float(s[rank - 1] / s[rank]) if s[rank] > 0 else np.inf
    return vh[rank:].conj().T, gap


def _colspace(M, rtol=RANK_RTOL, floor=0.0):
    """Orthonormal basis of the column space and the spectral gap.

    floor is an absolute singular-value cutoff; pass it when the columns
    have a known unit scale and the whole matrix may be roundoff noise
    (a relative cutoff alone would then keep every noise direction)."""
    if M.shape[1] == 0 or not np.any(M):
        return M[:, :0], np.inf
    u, s, vh = np.linalg.svd(M, full_matrices=False)
    cut = max(rtol * s[0], floor)
    rank = int(np.sum(s > cut))
    if rank == 0:
        gap = np.inf if s[0] == 0 else float(cut / s[0])
    elif rank == len(s) or s[rank] == 0:
        gap = np.inf
    else:
        gap = float(s[rank - 1] / s[rank])
    return u[:, :rank], gap


def _stack_columns(vectors, n):
    """Column matrix from a list of exact vectors (possibly empty)."""
    out = np.empty((n, len(vectors)), dtype=object)
    out[...] = QI(0)
    for j, v in enumerate(vectors):
        out[:, j] = v
    return out


def _rref_columns(M):
    """Exact mode: select a maximal independent subset of columns."""
    work = M.copy()
    m, n = work.shape
    pivots = []
    row = 0
    for col in range(n):
        piv = None
        for i in range(row, m):
            if not qi(work[i, col]).is_zero():
                piv = i
                break
        if piv is None:
            continue
        work[[row, piv]] = work[[piv, row]]
        inv = QI(1) / qi(work[row, col])
        work[row] = work[row] * inv
        for i in range(m):
            if i != row and not qi(work[i, col]).is_zero():
                work[i] = work[i] - work[i, col] * work[row]
        pivots.append(col)
        row += 1
        if row == m:
            break
    return pivots


def z1_basis(action, rtol=RANK_RTOL):
    """Columns spanning the cocycle space Z^1 = ker(relator map)."""
    R = cocycle_relator_map(action)
    if action.exact:
        basis = nullspace_q(R)
        return _stack_columns(basis, R.shape[1]), np.inf
    return _nullspace(R, rtol)


def coboundary_matrix(action):
    """Map x -> ((g - 1) x)_g stacked over the generators."""
    pres = action.presentation
    d = action.dim
    cols = action.zeros((len(pres.generators) * d, d))
    eye = eye_q(d) if action.exact else np.eye(d, dtype=complex)
    for k, name in enumerate(pres.generators):
        cols[k * d : (k + 1) * d, :] = action.mat(name) - eye
    if action.exact or action.field == "complex":
        return cols
    return cols.real


def coboundary_space(action, rtol=RANK_RTOL):
    """Orthonormal basis of B^1 (exact mode: independent column subset)."""
    C = coboundary_matrix(action)
    if action.exact:
        piv = _rref_columns(C)
        return C[:, piv], np.inf
    return _colspace(C, rtol)


def h0_space(action, rtol=RANK_RTOL):
    """Invariant vectors: joint kernel of (g - 1) over the generators."""
    pres = action.presentation
    d = action.dim
    eye = eye_q(d) if action.exact else np.eye(d, dtype=complex)
    rows = []
    for name in pres.generators:
        rows.append(action.mat(name) - eye)
    stack = np.concatenate(rows, axis=0)
    if action.exact:
        return _stack_columns(nullspace_q(stack), stack.shape[1]), np.inf
    if action.field == "real":
        stack = stack.real
    return _nullspace(stack, rtol)


def parabolic_subspace(action, rtol=RANK_RTOL):
    """Basis of Z^1_P: cocycles with z(T_i) in the image of (T_i - 1).

    Implemented by adjoining one slack vector x_i per puncture and
    eliminating: the kernel of

        [ relator map | 0 ]
        [ e_i block   | -(T_i - 1) ]

    projects onto the cocycle coordinates, and the projection's column
    space is Z^1_P."""
    pres = action.presentation
    d = action.dim
    n = len(pres.generators)
    r = pres.punctures
    nz = n * d
    R = cocycle_relator_map(action)
    big = action.zeros((d + r * d, nz + r * d))
    big[:d, :nz] = R
    eye = eye_q(d) if action.exact else np.eye(d, dtype=complex)
    for i, name in enumerate(pres.puncture_names):
        k = pres.index(name)
        rows = slice(d + i * d, d + (i + 1) * d)
        big[rows, k * d : (k + 1) * d] = eye
        big[rows, nz + i * d : nz + (i + 1) * d] = -(action.mat(name) - eye)
    if action.exact:
        ker = _stack_columns(nullspace_q(big), big.shape[1])
        proj = ker[:nz, :]
        piv = _rref_columns(proj)
        return proj[:, piv], np.inf
    if action.field == "real":
        big = big.real
    ker, _ = _nullspace(big, rtol)
    proj = ker[:nz, :]
    # kernel columns are orthonormal, so genuine cocycle parts are O(1):
    # floor the cutoff to kill pure-slack kernel directions
    return _colspace(proj, rtol, floor=rtol)


class CohomologySpace:
    """Assembled output: bases for Z^1, Z^1_P, B^1 and an orthonormal
    basis of H^1_P realized as parabolic cocycles orthogonal to B^1."""

    def __init__(self, action, z1, z1p, b1, h1p, gaps):
        self.action = action
        self.z1 = z1
        self.z1p = z1p
        self.b1 = b1
        self.h1p = h1p
        self.gaps = gaps

    @property
    def dim(self):
        return self.h1p.shape[1]

    def class_coordinates(self, z):
        """Coordinates of a parabolic cocycle's class in the H^1_P basis.
        Coboundary components are annihilated because the basis columns
        are orthogonal to B^1."""
        return self.h1p.conj().T @ np.asarray(z)

    def summary(self):
        return {
            "dim_Z1": self.z1.shape[1],
            "dim_Z1P": self.z1p.shape[1],
            "dim_B1": self.b1.shape[1],
            "dim_H1P": self.dim,
            "gaps": dict(self.gaps),
        }


def h1p_basis(action, rtol=RANK_RTOL):
    """Orthonormal H^1_P basis: complement of B^1 inside Z^1_P.

    Float mode only; exact mode callers should use parabolic_subspace
    and quotient by coboundaries themselves."""
    if action.exact:
        raise ValueError("h1p_basis requires a floating-point module action")
    z1, gap_z1 = z1_basis(action, rtol)
    z1p, gap_z1p = parabolic_subspace(action, rtol)
    b1, gap_b1 = coboundary_space(action, rtol)
    if z1p.shape[1] == 0:
        h1p = z1p
        gap_h = np.inf
    elif b1.shape[1] == 0:
        h1p = z1p
        gap_h = np.inf
    else:
        # remove the coboundary component from each parabolic basis vector;
        # the residual of a unit vector is O(1) unless the class dies, so an
        # absolute floor at rtol separates surviving classes from noise
        resid = z1p - b1 @ (b1.conj().T @ z1p)
        h1p, gap_h = _colspace(resid, rtol, floor=rtol)
    gaps = {"Z1": gap_z1, "Z1P": gap_z1p, "B1": gap_b1, "H1P": gap_h}
    return CohomologySpace(action, z1, z1p, b1, h1p, gaps)


def h1p_dimension(action, rtol=RANK_RTOL):
    """dim H^1_P together with the smallest spectral gap encountered."""
    space = h1p_basis(action, rtol)
    worst = min(space.gaps.values())
    return space.dim, worst


def restriction_to_puncture(action, z, i, rtol=RANK_RTOL):
    """Image of z(T_i) in coker(T_i - 1), as coordinates in an
    orthonormal basis of the cokernel.  Zero iff z is parabolic at T_i."""
    pres = action.presentation
    name = f"T{i}"
    if name not in pres.puncture_names:
        raise ValueError(f"no puncture {i}")
    if is_exact_array(np.asarray(z)):
        z = to_complex(np.asarray(z))
    blocks = _letter_blocks(action, z)
    d = action.dim
    eye = np.eye(d, dtype=complex)
    m = action.mat(name)
    if is_exact_array(m):
        m = to_complex(m)
    m = m - eye
    if action.field == "real":
        m = m.real
    # cokernel basis: left null space of (T_i - 1)
    q, _ = _nullspace(m.conj().T, rtol)
    return q.conj().T @ blocks[name]


def adjoint_module(presentation, rep, N, mode="float", tol=1e-8, field=None):
    """Adjoint action of sl_N pulled back through the principal embedding:
    generators act by Ad(iota(mu(gamma))) in the sl_basis coordinates.

    field defaults to "real" when every generator matrix is real; pass
    "complex" to keep complex-valued cocycles over a real action."""
    exact = mode == "exact"
    basis = sl_basis(N, mode)
    gens = {}
    for name in presentation.generators:
        g = rep.gens[name]
        if exact and not is_exact_array(g):
            g = qi_matrix(g)
        elif not exact and is_exact_array(g):
            g = to_complex(g)
        G = iota_G(g, N, tol=tol)
        gens[name] = adjoint_rep_matrix(G, basis)
    if field is None:
        field = "real" if _matrices_real(rep) else "complex"
    return ModuleAction(presentation, gens, field=field, tol=tol)


def symmetric_power_module(presentation, rep, j, tol=1e-8, field=None):
    """Weight-2j symmetric power: generators act through sym_action on
    the monomial basis x^{2j-s} y^s.

    field defaults to "real" when every generator matrix is real; pass
    "complex" to keep complex-valued cocycles over a real action."""
    gens = {}
    for name in presentation.generators:
        g = rep.gens[name]
        if is_exact_array(g):
            g = to_complex(g)
        gens[name] = sym_action(g, j, tol=tol)
    if field is None:
        field = "real" if _matrices_real(rep) else "complex"
    return ModuleAction(presentation, gens, field=field, tol=tol)


def _matrices_real(rep):
    for m in rep.gens.values():
        arr = to_complex(m) if is_exact_array(m) else np.asarray(m, dtype=complex)
        if np.abs(arr.imag).max() > 1e-12:
            return False
    return True


def representation_from_json(source, mode="float", tol=1e-9):
    """Load {"g": .., "r": .., "gens": {name: matrix}} from a path,
    file object, or already-parsed dict."""
    if isinstance(source, dict):
        data = source
    elif hasattr(source, "read"):
        data = json.load(source)
    else:
        with open(source) as fh:
            data = json.load(fh)
    pres = SurfacePresentation(int(data["g"]), int(data["r"]))
    gens = {}
    for name, rows in data["gens"].items():
        m = np.array(
            [[_scalar_from_json(x, mode) for x in row] for row in rows],
            dtype=object if mode == "exact" else complex,
        )
        gens[name] = m
    return pres, GroupRepresentation(pres, gens, tol=tol)


def representation_to_json(presentation, rep):
    gens = {}
    for name, m in rep.gens.items():
        arr = to_complex(m) if is_exact_array(m) else np.asarray(m, dtype=complex)
        rows = []
        for row in arr:
            rows.append([x.real if abs(x.imag) < 1e-15 else [x.real, x.imag] for x in row])
        gens[name] = rows
    return {"g": presentation.genus, "r": presentation.punctures, "gens": gens}


def _scalar_from_json(x, mode):
    from fractions import Fraction

    if isinstance(x, (list, tuple)):
        re, im = x
    else:
        re, im = x, 0
    if mode == "exact":
        # ints and fraction strings are exact; floats keep their binary value
        return QI(Fraction(re), Fraction(im))
    def _num(v):
        return float(Fraction(v)) if isinstance(v, str) else float(v)
    return complex(_num(re), _num(im))
