"""
Classical selective modal analysis on explicitly partitioned systems.

The state vector of ``x' = A x`` is split into n relevant variables r and
the remaining ones z, so that a sought eigenvalue is a fixed point of
``lam in spec(A_rr + A_rz (lam - A_zz)^{-1} A_zr)``.
"""

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import (DimensionMismatch, IterateSingular, ShiftSingular,
                     SingularMatrix)
from .pencil import ModeEstimate, participation_ratio_classical, scale_left
from .report import ConvergenceReport, Monitor, SolverOptions
from .selectors import Context, Nearest, make_candidates, pair_modes


@dataclass(frozen=True)
class PartitionedSystem:
    A_rr: np.ndarray
    A_rz: np.ndarray
    A_zr: np.ndarray
    A_zz: np.ndarray

    def __post_init__(self):
        n, k = self.A_rz.shape
        if (self.A_rr.shape != (n, n) or self.A_zr.shape != (k, n)
                or self.A_zz.shape != (k, k)):
            raise DimensionMismatch("inconsistent partition blocks")

    @classmethod
    def from_matrix(cls, A, n):
        A = np.asarray(linalg.to_dense(A), dtype=np.complex128)
        if A.shape[0] != A.shape[1] or not 1 <= n <= A.shape[0]:
            raise DimensionMismatch("A must be square with 1 <= n <= m")
        return cls(A[:n, :n], A[:n, n:], A[n:, :n], A[n:, n:])

    @property
    def n(self):
        return self.A_rr.shape[0]

    @property
    def m(self):
        return self.n + self.A_zz.shape[0]

    @property
    def A(self):
        return np.block([[self.A_rr, self.A_rz], [self.A_zr, self.A_zz]])


def _shift_factor(sys, lam):
    k = sys.A_zz.shape[0]
    try:
        return linalg.factor(lam * np.eye(k) - sys.A_zz)
    except SingularMatrix as exc:
        raise ShiftSingular(
            f"lam = {lam:.6g} is an eigenvalue of A_zz") from exc


def h_classical(sys, lam):
    """``H(lam) = A_rz (lam I - A_zz)^{-1} A_zr``."""
    if sys.A_zz.shape[0] == 0:
        return np.zeros_like(sys.A_rr)
    F = _shift_factor(sys, lam)
    return sys.A_rz @ F.solve(sys.A_zr)


def _mode(sys, F, lam, alpha, beta, normA):
    """Assemble full right/left vectors from the relevant parts."""
    if F is None:
        vz = np.zeros(0, complex)
        wz = vz
    else:
        vz = F.solve(sys.A_zr @ alpha)
        wz = F.solve(sys.A_rz.conj().T @ beta, adjoint=True)
    v = np.concatenate([alpha, vz])
    w = np.concatenate([beta, wz])
    v, w, _ = scale_left(v, w, np.eye(sys.m))
    r = sys.A @ v - lam * v
    res = np.linalg.norm(r) / (normA + abs(lam))
    rho = participation_ratio_classical(v, w, sys.n)
    return v, w, float(res), rho


def _factor_or_none(sys, lam):
    return _shift_factor(sys, lam) if sys.A_zz.shape[0] else None


def algorithm1(sys, selector=None, opts=None):
    """
    Fixed-point iteration on a single eigenvalue.

    Parameters
    ----------
    sys : PartitionedSystem
    selector : callable, optional
        Defaults to :class:`Nearest` (smallest |lam| first, then tracking).
    opts : SolverOptions, optional

    Returns
    -------
    ModeEstimate, ConvergenceReport
    """
    opts = opts or SolverOptions()
    selector = selector or Nearest()
    rep = ConvergenceReport("algorithm1")
    mon = Monitor(opts, rep)
    normA = linalg.matnorm(sys.A)

    cands = make_candidates(linalg.eig_dense(sys.A_rr))
    i = selector(cands, Context())
    lam, alpha, beta = cands.lams[i], cands.alphas[:, i], cands.betas[:, i]
    dlam = np.nan
    j = 0
    while True:
        F = _factor_or_none(sys, lam)
        v, w, res, rho = _mode(sys, F, lam, alpha, beta, normA)
        rep.add(j, 0, lam, dlam, res, rho)
        if j > 0 and mon.check(j, [dlam], [lam]):
            break
        H = np.zeros_like(sys.A_rr) if F is None else sys.A_rz @ F.solve(sys.A_zr)
        cands = make_candidates(linalg.eig_dense(sys.A_rr + H))
        ctx = Context(j + 1, lam, w[:sys.n], np.eye(sys.n))
        i = selector(cands, ctx)
        new = cands.lams[i]
        dlam = abs(new - lam)
        lam, alpha, beta = new, cands.alphas[:, i], cands.betas[:, i]
        j += 1
    mon.finish()
    est = ModeEstimate(lam, v[:sys.n], w[:sys.n], v, w, res)
    return est, rep


def complete_fit(H_anchor, alphas, hs):
    """
    Matrix ``M`` with ``M @ alphas == hs``.

    ``alphas`` is ``n x K``. The solution is anchored at ``H_anchor``:
    ``M = H_anchor + (hs - H_anchor alphas) pinv(alphas)``, which is the
    unique solution when K = n and leaves ``M = H_anchor`` when the
    constraint already holds.
    """
    s = np.linalg.svd(alphas, compute_uv=False)
    if s.min() <= 1e-12 * s.max():
        raise IterateSingular("reduced eigenvectors are (nearly) collinear")
    R = hs - H_anchor @ alphas
    if not np.any(R):
        return H_anchor
    return H_anchor + R @ np.linalg.pinv(alphas)


def _initial_modes(cands, selectors):
    idx = [sel(cands, Context()) for sel in selectors]
    if len(set(idx)) != len(idx):
        raise ValueError("selectors picked the same initial mode twice")
    return idx


def algorithm2(sys, selectors, opts=None):
    """
    Simultaneous iteration on K eigenvalues.

    Each step fits ``M`` with ``M [alpha_1 .. alpha_K] = [H(lam_k) alpha_k]``
    (see :func:`complete_fit`), takes the spectrum of ``A_rr + M`` and
    tracks the modes with :func:`~gsma.selectors.pair_modes`.

    Returns
    -------
    list of ModeEstimate, ConvergenceReport
    """
    opts = opts or SolverOptions()
    K = len(selectors)
    if not 1 <= K <= sys.n:
        raise ValueError("need 1 <= K <= n selectors")
    rep = ConvergenceReport("algorithm2", modes=K)
    mon = Monitor(opts, rep, modes=K)
    normA = linalg.matnorm(sys.A)

    cands = make_candidates(linalg.eig_dense(sys.A_rr))
    idx = _initial_modes(cands, selectors)
    lams = [cands.lams[i] for i in idx]
    alphas = [cands.alphas[:, i] for i in idx]
    betas = [cands.betas[:, i] for i in idx]
    dlams = [np.nan] * K
    j = 0
    while True:
        Hs, modes = [], []
        for k in range(K):
            F = _factor_or_none(sys, lams[k])
            modes.append(_mode(sys, F, lams[k], alphas[k], betas[k], normA))
            rep.add(j, k, lams[k], dlams[k], modes[k][2], modes[k][3])
            Hs.append(np.zeros_like(sys.A_rr) if F is None
                      else sys.A_rz @ F.solve(sys.A_zr))
        if j > 0 and mon.check(j, dlams, lams):
            break
        Va = np.column_stack(alphas)
        hs = np.column_stack([Hs[k] @ alphas[k] for k in range(K)])
        M = complete_fit(Hs[0], Va, hs)
        cands = make_candidates(linalg.eig_dense(sys.A_rr + M))
        perm = pair_modes(alphas, cands.alphas)
        new = [cands.lams[p] for p in perm]
        dlams = [abs(a - b) for a, b in zip(new, lams)]
        lams = new
        alphas = [cands.alphas[:, p] for p in perm]
        betas = [cands.betas[:, p] for p in perm]
        j += 1
    mon.finish()
    out = [ModeEstimate(lams[k], modes[k][0][:sys.n], modes[k][1][:sys.n],
                        modes[k][0], modes[k][1], modes[k][2])
           for k in range(K)]
    return out, rep
