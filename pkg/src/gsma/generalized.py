"""
Generalized selective modal analysis for projection pencils.

For a normalized subspace pair ``(R, L)`` (right and left relevant bases)
the sought eigenvalue is a fixed point of

    lam in spec(A_rr + H(lam)),    A_rr = L^H A R,
    H(lam) = L^H A P K(lam)^{-1} P A R,

with ``Q = E R L^H E``, ``P = I - Q`` and ``K(lam) = lam E - A + QA``
(or one of the equivalent corrections ``AQ`` and ``QA + AQ``).
"""

import numpy as np

from . import linalg
from .errors import ShiftSingular, SingularMatrix
from .pencil import (ModeEstimate, ProjectionPencil, SubspacePair,
                     normalize_pair, residual, scale_left)
from .report import ConvergenceReport, Monitor, SolverOptions
from .selectors import Context, Overlap, make_candidates

FORM_ALIASES = {"qa": "qa", "QA-only": "qa", "aq": "aq", "AQ-only": "aq",
                "anticommutator": "anticommutator"}


def _form(form):
    try:
        return FORM_ALIASES[form]
    except KeyError:
        raise ValueError(f"unknown form {form!r}") from None


class LowRankProjector:
    """``Q = ER @ LEh`` and ``P = I - Q`` applied without forming them."""

    def __init__(self, pencil, pair):
        self.ER = pencil.E @ pair.right
        self.LEh = (pencil.E @ pair.left).conj().T

    def Q(self, X):
        return self.ER @ (self.LEh @ X)

    def P(self, X):
        return X - self.Q(X)

    def Ph(self, X):
        """``P^H X``."""
        return X - self.LEh.conj().T @ (self.ER.conj().T @ X)

    def dense_Q(self):
        return self.ER @ self.LEh


class ShiftedOperator:
    """
    Factorized ``lam E - A + correction`` (dense).

    ``form`` is ``qa`` (default), ``aq`` or ``anticommutator``.
    """

    def __init__(self, pencil, pair, lam, form="qa", proj=None):
        self.lam = lam
        self.form = _form(form)
        proj = proj or LowRankProjector(pencil, pair)
        A = pencil.A_dense
        K = lam * pencil.E_dense - A
        if self.form in ("qa", "anticommutator"):
            K = K + proj.ER @ (proj.LEh @ A)
        if self.form in ("aq", "anticommutator"):
            K = K + (A @ proj.ER) @ proj.LEh
        self.matrix = K
        try:
            self.factorization = linalg.factor(K)
        except SingularMatrix as exc:
            raise ShiftSingular(
                f"shifted operator singular at lam = {lam:.6g}") from exc

    @property
    def condition_estimate(self):
        return self.factorization.condition_estimate

    def solve(self, B):
        return self.factorization.solve(B)

    def solve_adjoint(self, B):
        return self.factorization.solve(B, adjoint=True)


class Evaluation:
    """Reduced matrix at one shift plus the matching vector recovery."""

    def __init__(self, arr, H, recover):
        self.H = H
        self.matrix = arr + H
        self._recover = recover

    def recover(self, alpha, beta):
        return self._recover(alpha, beta)


class DenseReduction:
    """
    Dense evaluation of ``A_rr + H(lam)`` for a pencil and subspace pair.

    All algorithms of the generalized family talk to a reduction; sparse
    and composite problems provide their own implementations with the
    same interface.
    """

    def __init__(self, pencil, pair, form="qa"):
        self.pencil = pencil
        self.pair = pair
        self.form = _form(form)
        self.proj = LowRankProjector(pencil, pair)
        R, L = pair.right, pair.left
        A = pencil.A_dense
        self.LhA = L.conj().T @ A
        self.arr = self.LhA @ R
        self.PAR = self.proj.P(A @ R)
        # L^H A P
        self.LhAP = self.LhA - (self.LhA @ self.proj.ER) @ self.proj.LEh

    @property
    def n(self):
        return self.pair.n

    @property
    def basis(self):
        return self.pair.right

    def at(self, lam):
        op = ShiftedOperator(self.pencil, self.pair, lam, self.form, self.proj)
        PX = self.proj.P(op.solve(self.PAR))
        H = self.LhA @ PX

        def recover(alpha, beta):
            z = PX @ alpha
            y = self.proj.Ph(op.solve_adjoint(self.LhAP.conj().T @ beta))
            return self.pair.right @ alpha + z, self.pair.left @ beta + y

        return Evaluation(self.arr, H, recover)

    def ref(self, w):
        return self.proj.ER.conj().T @ w

    def transfer(self, basis0):
        return basis0.conj().T @ self.pair.right

    def rho(self, v, w):
        num = np.vdot(w, self.proj.Q(v))
        den = np.vdot(w, self.pencil.E @ v) - num
        if abs(den) <= 1e-15 * np.linalg.norm(w) * np.linalg.norm(v):
            return complex(np.inf)
        return complex(num / den)

    def coords(self, v, w):
        """Reduced coordinates ``(L^H E v, R^H E w)``."""
        return self.proj.LEh @ v, self.proj.ER.conj().T @ w

    def residual(self, lam, v, w):
        return residual(self.pencil, lam, v, w)[0]

    def normalize(self, v, w):
        return scale_left(v, w, self.pencil.E)[:2]

    def updated(self, v, w, alpha, beta, policy):
        pair = update_pair(self.pencil, self.pair, v, w, alpha, beta, policy)
        return type(self)(self.pencil, pair, self.form)


def update_pair(pencil, pair, v, w, alpha, beta, policy="full-eigenvector"):
    """
    New pair whose spans contain ``v`` and ``w``.

    One-column pairs are replaced outright; otherwise the column carrying
    the largest reduced coordinate is swapped for the new vector. With
    ``zeroed-static`` the static components (kernel of E) are dropped.
    """
    if policy == "none":
        return pair
    R = pair.right.copy()
    L = pair.left.copy()
    R[:, int(np.argmax(np.abs(alpha)))] = v / np.linalg.norm(v)
    L[:, int(np.argmax(np.abs(beta)))] = w / np.linalg.norm(w)
    if policy == "zeroed-static":
        R = pencil.E @ R
        L = pencil.E @ L
    elif policy != "full-eigenvector":
        raise ValueError(f"unknown update policy {policy!r}")
    return normalize_pair(R, L, pencil)


def make_reduction(problem, pair, opts=None):
    """Pick the reduction backend for a pencil or composite model."""
    opts = opts or SolverOptions()
    if isinstance(problem, ProjectionPencil):
        backend = opts.backend
        if backend == "auto":
            backend = ("smw" if problem.is_sparse
                       and problem.m > linalg.dense_limit() else "dense")
        if backend == "smw":
            from .smw import SmwReduction
            return SmwReduction(problem, pair, opts.h_form)
        return DenseReduction(problem, pair, opts.h_form)
    from .composite import CompositeModel, CompositeReduction
    if isinstance(problem, CompositeModel):
        return CompositeReduction(problem, pair)
    raise TypeError(f"cannot build a reduction for {type(problem).__name__}")


def h_general(pencil, pair, lam, form="qa"):
    """``H(lam) = L^H A P K(lam)^{-1} P A R`` (dense)."""
    return DenseReduction(pencil, pair, form).at(lam).H


def reduced_matrix(pencil, pair, lam, form="qa"):
    """``A_rr + H(lam)``."""
    return DenseReduction(pencil, pair, form).at(lam).matrix


def recover_z_y(pencil, pair, lam, alpha, beta, form="qa"):
    """
    Residual parts of the eigenvectors from reduced coordinates.

    Returns
    -------
    z, y, v, w
        ``z = P K^{-1} P A R alpha``, ``y = P^H K^{-H} P^H A^H L beta``,
        ``v = R alpha + z`` and ``w = L beta + y``.
    """
    alpha = np.asarray(alpha, dtype=np.complex128)
    beta = np.asarray(beta, dtype=np.complex128)
    v, w = DenseReduction(pencil, pair, form).at(lam).recover(alpha, beta)
    return v - pair.right @ alpha, w - pair.left @ beta, v, w


def invariance_shift(pair, pencil, L, side="right"):
    """Add ``(I - E) L`` to one of the bases; the reduced matrix is unchanged."""
    L = np.asarray(L, dtype=np.complex128)
    if L.ndim == 1:
        L = L[:, None]
    add = L - pencil.E @ L
    if side == "right":
        return SubspacePair(pair.right + add, pair.left)
    if side == "left":
        return SubspacePair(pair.right, pair.left + add)
    raise ValueError("side must be 'right' or 'left'")


# -- iterations ----------------------------------------------------------------

def _initial(red, selector, basis0):
    cands = make_candidates(linalg.eig_dense(red.arr))
    i = selector(cands, Context(0, None, None, red.transfer(basis0)))
    return cands.lams[i], cands.alphas[:, i], cands.betas[:, i]


def _iterate(name, problem, pair, selector, opts, update):
    opts = opts or SolverOptions()
    selector = selector or Overlap()
    red = make_reduction(problem, pair, opts)
    basis0 = red.basis
    rep = ConvergenceReport(name)
    mon = Monitor(opts, rep)

    lam, alpha, beta = _initial(red, selector, basis0)
    pair0 = getattr(red, "embedded", None) or red.pair
    v, w = red.normalize(pair0.right @ alpha, pair0.left @ beta)
    rep.add(0, 0, lam, np.nan)
    j = 0
    while True:
        j += 1
        try:
            ev = red.at(lam)
        except ShiftSingular:
            # a shift on an eigenvalue that the subspace does not separate
            # (e.g. a repeated one) counts as converged once confirmed
            if red.residual(lam, v, w) > opts.confirm_residual:
                raise
            rep.add(j, 0, lam, 0.0, red.residual(lam, v, w), red.rho(v, w))
            rep.status = "converged"
            rep.message = "shift hit the eigenvalue"
            break
        cands = make_candidates(linalg.eig_dense(ev.matrix))
        ref = beta if j == 1 else red.ref(w)
        i = selector(cands, Context(j, lam, ref, red.transfer(basis0)))
        new, alpha, beta = cands.lams[i], cands.alphas[:, i], cands.betas[:, i]
        v, w = red.normalize(*ev.recover(alpha, beta))
        dlam = abs(new - lam)
        lam = new
        rep.add(j, 0, lam, dlam, red.residual(lam, v, w), red.rho(v, w))
        if mon.check(j, [dlam], [lam]):
            break
        if update:
            red = red.updated(v, w, alpha, beta, opts.subspace_update)
    mon.finish()
    # final recovery at the converged shift (the loop exits before any
    # subspace update, so alpha and beta still belong to `red`)
    try:
        vf, wf = red.normalize(*red.at(lam).recover(alpha, beta))
        if red.residual(lam, vf, wf) <= red.residual(lam, v, w):
            v, w = vf, wf
    except ShiftSingular:
        pass
    a, b = red.coords(v, w)
    est = ModeEstimate(lam, a, b, v, w, red.residual(lam, v, w))
    return est, rep


def algorithm3(pencil, pair, selector=None, opts=None):
    """
    Fixed-subspace iteration ``lam_j in spec(A_rr + H(lam_{j-1}))``.

    Parameters
    ----------
    pencil : ProjectionPencil or CompositeModel
    pair : SubspacePair (list of per-subsystem pairs for composites)
    selector : callable, optional
        Defaults to :class:`~gsma.selectors.Overlap`.
    opts : SolverOptions, optional

    Returns
    -------
    ModeEstimate, ConvergenceReport

    Raises
    ------
    MaxIterations, Diverged, ShiftSingular
    """
    return _iterate("algorithm3", pencil, pair, selector, opts, update=False)


def algorithm4(pencil, pair0, selector=None, opts=None):
    """
    As :func:`algorithm3`, refreshing the subspace pair with the latest
    recovered eigenvectors after every step (``opts.subspace_update``).
    """
    return _iterate("algorithm4", pencil, pair0, selector, opts, update=True)
