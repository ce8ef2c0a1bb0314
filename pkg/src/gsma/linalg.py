"""
Dense and sparse complex linear-algebra substrate.

Factorizations wrap LAPACK (dense) and SuperLU (sparse); the dense
eigendecomposition wraps LAPACK's Hessenberg/QR driver. Matrix Market
I/O is implemented here so that parse errors can report line numbers.
"""

import os
import warnings
from collections import Counter
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (DimensionMismatch, NoConvergence, ParseError,
                     SingularMatrix, UnsupportedFormat)

DEFAULT_DENSE_LIMIT = 2000

#: Operation counters, used by tests to audit which code paths ran.
#: ``densify`` counts sparse -> dense conversions; ``dense_factor_sizes``
#: records the order of every dense LU.
COUNTERS = Counter()
DENSE_FACTOR_SIZES = []


def reset_counters():
    COUNTERS.clear()
    DENSE_FACTOR_SIZES.clear()


def dense_limit():
    """Size cap for dense eigenanalysis; ``GSMA_DENSE_LIMIT`` overrides."""
    value = os.environ.get("GSMA_DENSE_LIMIT")
    return int(value) if value else DEFAULT_DENSE_LIMIT


def issparse(M):
    return sp.issparse(M)


def as_complex(M):
    """Promote to complex128, keeping sparse inputs sparse (CSC)."""
    if sp.issparse(M):
        return sp.csc_matrix(M, dtype=np.complex128)
    return np.asarray(M, dtype=np.complex128)


def to_dense(M):
    """Complex dense copy of `M`. Sparse inputs are counted in COUNTERS."""
    if sp.issparse(M):
        COUNTERS["densify"] += 1
        return M.toarray().astype(np.complex128)
    return np.array(M, dtype=np.complex128)


def matnorm(M):
    """Frobenius norm for dense or sparse matrices."""
    if sp.issparse(M):
        return float(spla.norm(M))
    return float(np.linalg.norm(M))


def _norm_inf(M):
    if sp.issparse(M):
        return float(abs(M).sum(axis=1).max()) if M.nnz else 0.0
    return float(np.abs(M).sum(axis=1).max()) if M.size else 0.0


def _norm_one(M):
    if sp.issparse(M):
        return float(abs(M).sum(axis=0).max()) if M.nnz else 0.0
    return float(np.abs(M).sum(axis=0).max()) if M.size else 0.0


class Factorization:
    """LU factorization of a square matrix, dense or sparse.

    Use :func:`factor` to build one and :meth:`solve` (or the module
    level :func:`solve`) to apply the inverse. ``condition_estimate`` is a
    1-norm condition number estimate, computed on first access.
    """

    def __init__(self, kind, n, data, norm1):
        self.kind = kind
        self.n = n
        self._data = data
        self._norm1 = norm1

    @property
    def shape(self):
        return (self.n, self.n)

    def solve(self, B, adjoint=False):
        B = np.asarray(B)
        vector = B.ndim == 1
        if B.shape[0] != self.n:
            raise DimensionMismatch(
                f"right-hand side has {B.shape[0]} rows, expected {self.n}")
        B = B.astype(np.complex128)
        if self.kind == "dense-LU":
            X = la.lu_solve(self._data, B, trans=2 if adjoint else 0,
                            check_finite=False)
        else:
            X = self._data.solve(B, trans="H" if adjoint else "N")
        return X if not vector else X.reshape(-1)

    @cached_property
    def condition_estimate(self):
        if self.n == 0:
            return 1.0
        if self.kind == "dense-LU":
            lu, _ = self._data
            gecon, = la.get_lapack_funcs(("gecon",), (lu,))
            rcond, _ = gecon(lu, self._norm1, norm="1")
            return np.inf if rcond == 0 else float(1.0 / rcond)
        op = spla.LinearOperator(
            (self.n, self.n), dtype=np.complex128,
            matvec=lambda x: self.solve(x),
            rmatvec=lambda x: self.solve(x, adjoint=True))
        return float(self._norm1 * spla.onenormest(op))


def factor(M, drop_tol=None, ordering="natural"):
    """
    LU-factor a square matrix.

    Parameters
    ----------
    M : (n, n) array_like or sparse matrix
        Real inputs are promoted to complex.
    drop_tol : float, optional
        Pivot magnitude below which the matrix is declared singular.
        Defaults to ``1e-14 * ||M||_inf``.
    ordering : {'natural', 'mmd'}
        Column ordering for the sparse path; ``'mmd'`` applies a
        minimum-degree permutation.

    Raises
    ------
    SingularMatrix
        If a pivot falls below `drop_tol`.
    """
    if M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"matrix must be square, got {M.shape}")
    n = M.shape[0]
    norm_inf = _norm_inf(M)
    if drop_tol is None:
        drop_tol = 1e-14 * norm_inf
    if sp.issparse(M):
        A = sp.csc_matrix(M, dtype=np.complex128)
        permc = {"natural": "NATURAL", "mmd": "MMD_AT_PLUS_A"}[ordering]
        COUNTERS["sparse_factor"] += 1
        try:
            lu = spla.splu(A, permc_spec=permc, diag_pivot_thresh=1.0)
        except RuntimeError as exc:
            # exactly singular: locate the breakdown on a nudged copy
            k, row, col = _locate_sparse(A, permc, norm_inf)
            raise SingularMatrix(f"sparse LU failed: {exc}", pivot_index=k,
                                 row=row, col=col) from None
        piv = np.abs(lu.U.diagonal())
        data = lu
        rows = np.argsort(lu.perm_r)
        cols = np.argsort(lu.perm_c)
        kind = "sparse-LU"
        norm1 = _norm_one(A)
    else:
        A = np.asarray(M, dtype=np.complex128)
        if not np.all(np.isfinite(A)):
            raise ValueError("matrix has non-finite entries")
        COUNTERS["dense_factor"] += 1
        DENSE_FACTOR_SIZES.append(n)
        if n == 0:
            return Factorization("dense-LU", 0, (A, np.zeros(0, int)), 0.0)
        with warnings.catch_warnings():
            # exact zero pivots are reported below as SingularMatrix
            warnings.simplefilter("ignore", la.LinAlgWarning)
            lu, perm = la.lu_factor(A, check_finite=False)
        piv = np.abs(np.diag(lu))
        data = (lu, perm)
        rows = np.arange(n)
        for i, p in enumerate(perm):
            rows[[i, p]] = rows[[p, i]]
        cols = np.arange(n)
        kind = "dense-LU"
        norm1 = _norm_one(A)
    if n and (piv.min() <= drop_tol or not np.all(np.isfinite(piv))):
        k = int(np.argmin(piv))
        raise SingularMatrix(
            f"pivot {k} has magnitude {piv[k]:.3e} <= drop tolerance "
            f"{drop_tol:.3e}", pivot_index=k, row=int(rows[k]),
            col=int(cols[k]))
    return Factorization(kind, n, data, norm1)


def _locate_sparse(A, permc, norm_inf):
    n = A.shape[0]
    tau = 1e-10 * max(norm_inf, 1.0)
    try:
        lu = spla.splu(A + tau * sp.identity(n, format="csc"),
                       permc_spec=permc, diag_pivot_thresh=1.0)
    except RuntimeError:
        return None, None, None
    k = int(np.argmin(np.abs(lu.U.diagonal())))
    return k, int(np.argsort(lu.perm_r)[k]), int(np.argsort(lu.perm_c)[k])


def solve(F, B, adjoint=False):
    """Solve ``M X = B`` (or ``M^H X = B``) with a factorization of M."""
    return F.solve(B, adjoint=adjoint)


@dataclass(frozen=True)
class EigDecomposition:
    """Full spectrum with right and left eigenvectors.

    Right vectors have unit 2-norm. Left vectors are scaled so that
    ``left[:, i]^H right[:, i] == 1`` unless that product vanishes
    (``defective[i]`` is then set and the left vector has unit norm).
    """
    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    defective: np.ndarray


def eig_dense(M):
    """Dense eigendecomposition with biorthonormal left/right vectors."""
    M = np.asarray(M, dtype=np.complex128)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"matrix must be square, got {M.shape}")
    if M.shape[0] > dense_limit():
        raise DimensionMismatch(
            f"order {M.shape[0]} exceeds the dense limit {dense_limit()}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    n = M.shape[0]
    if n == 0:
        empty = np.zeros((0, 0), np.complex128)
        return EigDecomposition(np.zeros(0, np.complex128), empty, empty,
                                np.zeros(0, bool))
    try:
        lam, vl, vr = la.eig(M, left=True, right=True, check_finite=False)
    except la.LinAlgError as exc:
        raise NoConvergence(str(exc)) from None
    vr = vr / np.linalg.norm(vr, axis=0)
    vl = vl / np.linalg.norm(vl, axis=0)
    dots = np.einsum("ij,ij->j", vl.conj(), vr)
    defective = np.abs(dots) <= 1e-13
    scale = np.where(defective, 1.0, dots)
    vl = vl / scale.conj()
    return EigDecomposition(lam, vr, vl, defective)


# -- Matrix Market ---------------------------------------------------------

def _parse_number(tokens, field, lineno):
    try:
        if field == "complex":
            if len(tokens) != 2:
                raise ValueError
            value = complex(float(tokens[0]), float(tokens[1]))
        else:
            if len(tokens) != 1:
                raise ValueError
            value = float(tokens[0])
    except ValueError:
        raise ParseError(f"bad {field} value {' '.join(tokens)!r}",
                         lineno) from None
    if not np.isfinite(value):
        raise ParseError("non-finite value", lineno)
    return value


def mm_read(path):
    """
    Read a Matrix Market file.

    Coordinate files return a CSC sparse matrix, array files a dense
    ndarray. Only the ``general`` symmetry with real, integer or complex
    fields is supported.
    """
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty file", 1)
    header = lines[0].split()
    if len(header) != 5 or header[0] != "%%MatrixMarket":
        raise ParseError("missing %%MatrixMarket header", 1)
    obj, fmt, field, symmetry = (h.lower() for h in header[1:])
    if obj != "matrix" or fmt not in ("coordinate", "array"):
        raise UnsupportedFormat(f"unsupported object/format {obj} {fmt}")
    if field == "pattern" or symmetry != "general":
        raise UnsupportedFormat(f"unsupported variant {field} {symmetry}")
    if field not in ("real", "integer", "complex"):
        raise UnsupportedFormat(f"unsupported field {field}")
    dtype = np.complex128 if field == "complex" else np.float64

    body = [(i + 1, ln.split()) for i, ln in enumerate(lines[1:], start=1)
            if ln.strip() and not ln.lstrip().startswith("%")]
    if not body:
        raise ParseError("missing size line", len(lines))
    lineno, size = body[0]
    try:
        dims = [int(t) for t in size]
    except ValueError:
        raise ParseError("bad size line", lineno) from None
    entries = body[1:]

    if fmt == "array":
        if len(dims) != 2:
            raise ParseError("array size line needs 2 integers", lineno)
        rows, cols = dims
        if len(entries) != rows * cols:
            where = entries[-1][0] if entries else lineno
            raise ParseError(f"expected {rows * cols} entries, found "
                             f"{len(entries)}", where)
        flat = np.array([_parse_number(tok, field, ln) for ln, tok in entries],
                        dtype=dtype)
        return flat.reshape((cols, rows)).T.copy()

    if len(dims) != 3:
        raise ParseError("coordinate size line needs 3 integers", lineno)
    rows, cols, nnz = dims
    if len(entries) != nnz:
        where = entries[-1][0] if entries else lineno
        raise ParseError(f"expected {nnz} entries, found {len(entries)}",
                         where)
    I = np.empty(nnz, dtype=np.int64)
    J = np.empty(nnz, dtype=np.int64)
    V = np.empty(nnz, dtype=dtype)
    seen = set()
    for k, (ln, tok) in enumerate(entries):
        if len(tok) < 3:
            raise ParseError("entry needs row, column and value", ln)
        try:
            i, j = int(tok[0]), int(tok[1])
        except ValueError:
            raise ParseError("bad index", ln) from None
        if not (1 <= i <= rows and 1 <= j <= cols):
            raise ParseError(f"index ({i}, {j}) out of bounds", ln)
        if (i, j) in seen:
            raise ParseError(f"duplicate entry ({i}, {j})", ln)
        seen.add((i, j))
        I[k], J[k] = i - 1, j - 1
        V[k] = _parse_number(tok[2:], field, ln)
    return sp.csc_matrix((V, (I, J)), shape=(rows, cols))


def _fmt(x):
    return repr(float(x))


def mm_write(path, M, comment=None):
    """Write `M` in Matrix Market format (coordinate if sparse)."""
    is_complex = np.iscomplexobj(M.data if sp.issparse(M) else M)
    field = "complex" if is_complex else "real"

    def fmt(v):
        if is_complex:
            return f"{_fmt(v.real)} {_fmt(v.imag)}"
        return _fmt(v)

    out = []
    if sp.issparse(M):
        C = sp.coo_matrix(sp.csc_matrix(M))
        C.sum_duplicates()
        if not np.all(np.isfinite(C.data)):
            raise ValueError("matrix has non-finite entries")
        order = np.lexsort((C.row, C.col))
        out.append(f"%%MatrixMarket matrix coordinate {field} general")
        if comment:
            out.extend(f"% {c}" for c in comment.splitlines())
        out.append(f"{C.shape[0]} {C.shape[1]} {C.nnz}")
        for k in order:
            out.append(f"{C.row[k] + 1} {C.col[k] + 1} {fmt(C.data[k])}")
    else:
        A = np.atleast_2d(np.asarray(M))
        if not np.all(np.isfinite(A)):
            raise ValueError("matrix has non-finite entries")
        out.append(f"%%MatrixMarket matrix array {field} general")
        if comment:
            out.extend(f"% {c}" for c in comment.splitlines())
        out.append(f"{A.shape[0]} {A.shape[1]}")
        out.extend(fmt(v) for v in A.T.reshape(-1))
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
