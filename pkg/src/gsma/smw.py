"""
Sparse application of ``K(lam)^{-1}`` through a low-rank update.

``K(lam) = lam E - A + QA + AQ`` is a sparse matrix plus a rank ``2n``
correction, so with a sparse base ``B = lam E - A + eta phi^H``

    K = B - U V^H,    U = [eta, -A E R, -E R],    V^H = [phi^H; L^H E; L^H E A]

and ``K^{-1} = B^{-1} + B^{-1} U C^{-1} V^H B^{-1}`` with the small
capacitance matrix ``C = I - V^H B^{-1} U``. The one-sided forms (``qa``,
``aq``) keep only the matching half of U and V. ``K`` itself is never
formed.
"""

import numpy as np
import scipy.sparse as sp

from . import linalg
from .errors import (DimensionMismatch, RegularizationFailed, ShiftSingular,
                     SingularCapacitance, SingularMatrix)
from .generalized import Evaluation, _form, update_pair
from .pencil import residual, scale_left

BASE_COND_LIMIT = 1e12
REFINE_TOL = 1e-8


def _sparse(M):
    return sp.csc_matrix(M, dtype=np.complex128)


def _base(pencil, lam, eta, phi):
    B = _sparse(lam * pencil.E - pencil.A)
    if eta is not None and eta.nnz:
        B = _sparse(B + eta @ phi.conj().T)
    return B


def _try_factor(B):
    """Factorization of B, or the SingularMatrix explaining the failure."""
    try:
        F = linalg.factor(B)
    except SingularMatrix as exc:
        return None, exc
    if F.condition_estimate > BASE_COND_LIMIT:
        # nearly singular: one inverse-iteration step on each side gives
        # approximate null vectors; their largest entries locate the update
        b = np.ones(B.shape[0], dtype=np.complex128)
        x = F.solve(b)
        y = F.solve(b, adjoint=True)
        return None, SingularMatrix(
            f"condition estimate {F.condition_estimate:.2e}",
            row=int(np.argmax(np.abs(y))), col=int(np.argmax(np.abs(x))))
    return F, None


def _unit(m, i, scale=1.0):
    return _sparse(sp.coo_matrix(([scale], ([i], [0])), shape=(m, 1)))


def choose_regularizers(pencil, lam, max_attempts=5):
    """
    Sparse ``(eta, phi)`` making ``lam E - A + eta phi^H`` invertible.

    Tries ``eta = phi = 0`` first. After a failed factorization the pair
    ``(s e_p, e_q)`` is tried, where ``(p, q)`` is the original row and
    column of the pivot that broke down (or, for an ill-conditioned
    factorization, the largest entries of approximate left and right null
    vectors) and ``s = ||A||_inf``. Later
    attempts follow the most recent breakdown and grow ``s`` tenfold.

    Returns
    -------
    eta, phi : (m, 1) sparse column matrices (zero when not needed)

    Raises
    ------
    RegularizationFailed
        After `max_attempts` factorizations failed.
    """
    m = pencil.m
    zero = _sparse((m, 1))
    F, exc = _try_factor(_base(pencil, lam, None, None))
    if F is not None:
        return zero, zero
    scale = float(abs(pencil.A).sum(axis=1).max()) if pencil.is_sparse \
        else float(np.abs(pencil.A).sum(axis=1).max())
    scale = scale or 1.0
    pos = (exc.row, exc.col)
    for attempt in range(1, max_attempts):
        if pos[0] is None:
            break
        eta = _unit(m, pos[0], scale * 10.0 ** (attempt - 1))
        phi = _unit(m, pos[1])
        F, exc = _try_factor(_base(pencil, lam, eta, phi))
        if F is not None:
            return eta, phi
        if exc.row is not None:
            pos = (exc.row, exc.col)
    raise RegularizationFailed(
        f"no rank-one regularizer makes lam E - A invertible at lam = {lam:.6g}")


class SmwFactorization:
    """
    ``K(lam)^{-1}`` as a sparse base LU plus a small dense core LU.

    Attributes
    ----------
    base : Factorization
        Sparse LU of ``lam E - A + eta phi^H``.
    U, Vh : ndarray
        Update blocks, ``m x k`` and ``k x m``.
    core : Factorization
        Dense LU of the ``k x k`` capacitance matrix.
    """

    def __init__(self, base, base_matrix, U, Vh, lam):
        self.base = base
        self.base_matrix = base_matrix
        self.U = U
        self.Vh = Vh
        self.lam = lam
        self.BiU = base.solve(U)
        C = np.eye(U.shape[1]) - Vh @ self.BiU
        try:
            self.core = linalg.factor(C)
        except SingularMatrix as exc:
            raise SingularCapacitance(
                f"capacitance matrix singular at lam = {lam:.6g}") from exc
        self.BhiV = base.solve(Vh.conj().T, adjoint=True)

    @property
    def rank(self):
        return self.U.shape[1]

    def matvec(self, X):
        """``K X`` without forming K."""
        return self.base_matrix @ X - self.U @ (self.Vh @ X)

    def rmatvec(self, X):
        """``K^H X``."""
        return self.base_matrix.conj().T @ X - self.Vh.conj().T @ (
            self.U.conj().T @ X)

    def _apply(self, B):
        Y = self.base.solve(B)
        return Y + self.BiU @ self.core.solve(self.Vh @ Y)

    def _apply_h(self, B):
        Y = self.base.solve(B, adjoint=True)
        return Y + self.BhiV @ self.core.solve(self.U.conj().T @ Y,
                                               adjoint=True)


def smw_factor(pencil, pair, lam, eta=None, phi=None, form="anticommutator"):
    """
    Factor ``K(lam)`` for the given subspace pair.

    Parameters
    ----------
    pencil : ProjectionPencil
    pair : SubspacePair
        Normalized pair, ``n >= 1``.
    lam : complex
    eta, phi : (m, 1) sparse, optional
        Regularizers; chosen with :func:`choose_regularizers` when omitted.
    form : {'anticommutator', 'qa', 'aq'}

    Raises
    ------
    SingularCapacitance
        If the small core matrix is singular.
    ShiftSingular
        If the base matrix cannot be factored with the given regularizers.
    """
    form = _form(form)
    if pair.n < 1:
        raise ValueError("the subspace pair must have at least one column")
    if eta is None or phi is None:
        eta, phi = choose_regularizers(pencil, lam)
    B = _base(pencil, lam, eta, phi)
    try:
        base = linalg.factor(B)
    except SingularMatrix as exc:
        raise ShiftSingular(
            f"base matrix singular at lam = {lam:.6g}") from exc
    ER = pencil.E @ pair.right
    LEh = (pencil.E @ pair.left).conj().T
    cols = [eta.toarray()]
    rows = [phi.toarray().conj().T]
    if form in ("aq", "anticommutator"):
        cols.append(-(pencil.A @ ER))
        rows.append(LEh)
    if form in ("qa", "anticommutator"):
        cols.append(-ER)
        rows.append((pencil.A.T @ LEh.T).T)
    U = np.hstack(cols).astype(np.complex128)
    Vh = np.vstack(rows).astype(np.complex128)
    return SmwFactorization(base, B, U, Vh, lam)


def smw_apply(F, b, adjoint=False):
    """
    ``K^{-1} b`` (or ``K^{-H} b``) for vector or block right-hand sides.

    One step of iterative refinement runs when the relative residual
    exceeds 1e-8.
    """
    b = np.asarray(b, dtype=np.complex128)
    if b.shape[0] != F.base.n:
        raise DimensionMismatch(
            f"right-hand side has {b.shape[0]} rows, expected {F.base.n}")
    if not np.any(b):
        return np.zeros_like(b)
    solve = F._apply_h if adjoint else F._apply
    mul = F.rmatvec if adjoint else F.matvec
    x = solve(b)
    r = b - mul(x)
    if np.linalg.norm(r) > REFINE_TOL * np.linalg.norm(b):
        x = x + solve(r)
    return x


class SmwReduction:
    """
    Sparse counterpart of :class:`~gsma.generalized.DenseReduction`.

    Every shift costs one sparse LU of ``lam E - A`` (regularized if
    needed) and one small dense LU; no ``m x m`` dense matrix is formed.
    """

    def __init__(self, pencil, pair, form="anticommutator"):
        self.pencil = pencil
        self.pair = pair
        self.form = _form(form)
        R, L = pair.right, pair.left
        A = pencil.A
        self.ER = pencil.E @ R
        self.LEh = (pencil.E @ L).conj().T
        self.LhA = (A.T @ L.conj()).T
        self.arr = self.LhA @ R
        self.PAR = self._P(A @ R)
        self.LhAP = self.LhA - (self.LhA @ self.ER) @ self.LEh

    def _P(self, X):
        return X - self.ER @ (self.LEh @ X)

    def _Ph(self, X):
        return X - self.LEh.conj().T @ (self.ER.conj().T @ X)

    @property
    def n(self):
        return self.pair.n

    @property
    def basis(self):
        return self.pair.right

    def factor(self, lam):
        try:
            return smw_factor(self.pencil, self.pair, lam, form=self.form)
        except (RegularizationFailed, SingularCapacitance) as exc:
            raise ShiftSingular(str(exc)) from exc

    def at(self, lam):
        F = self.factor(lam)
        PX = self._P(smw_apply(F, self.PAR))
        H = self.LhA @ PX

        def recover(alpha, beta):
            z = PX @ alpha
            y = self._Ph(smw_apply(F, self.LhAP.conj().T @ beta, adjoint=True))
            return self.pair.right @ alpha + z, self.pair.left @ beta + y

        return Evaluation(self.arr, H, recover)

    def ref(self, w):
        return self.ER.conj().T @ w

    def transfer(self, basis0):
        return basis0.conj().T @ self.pair.right

    def rho(self, v, w):
        num = np.vdot(w, self.ER @ (self.LEh @ v))
        den = np.vdot(w, self.pencil.E @ v) - num
        if abs(den) <= 1e-15 * np.linalg.norm(w) * np.linalg.norm(v):
            return complex(np.inf)
        return complex(num / den)

    def coords(self, v, w):
        return self.LEh @ v, self.ER.conj().T @ w

    def residual(self, lam, v, w):
        return residual(self.pencil, lam, v, w)[0]

    def normalize(self, v, w):
        return scale_left(v, w, self.pencil.E)[:2]

    def updated(self, v, w, alpha, beta, policy):
        pair = update_pair(self.pencil, self.pair, v, w, alpha, beta, policy)
        return type(self)(self.pencil, pair, self.form)


def h_smw(pencil, pair, lam, form="anticommutator"):
    """``H(lam)`` through the sparse update path."""
    return SmwReduction(pencil, pair, form).at(lam).H
