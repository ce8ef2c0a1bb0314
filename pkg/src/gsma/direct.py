"""
Shift-invert formulations of the selective iterations.

With ``V = (A - lam E)^{-1} E R`` and ``M = L^H E V``, the eigenvalues of
``M`` are ``1 / (lam_new - lam)`` for the candidates of the fixed-subspace
iteration, and ``N = M^{-1} + lam I`` equals ``A_rr + H(lam)``.
"""

from dataclasses import dataclass

import numpy as np

from . import linalg
from .classical import complete_fit
from .errors import (DegenerateSubspace, ShiftSingular, SingularMatrix)
from .pencil import ModeEstimate, normalize_pair, residual, scale_left
from .report import ConvergenceReport, Monitor, SolverOptions
from .selectors import (Candidates, Context, Overlap, make_candidates,
                        pair_modes, select_mode_objective)

__all__ = ["DirectIterate", "build_direct_iterate", "calN_bar",
           "algorithm5", "algorithm6", "algorithm7", "algorithm8",
           "pair_modes", "select_mode_objective"]


@dataclass(frozen=True)
class DirectIterate:
    lam_prev: complex
    V: np.ndarray           # m x n
    W: np.ndarray           # m x n, so that W^H = L^H E (A - lam E)^{-1}
    calM: np.ndarray
    calN: np.ndarray        # None when calM is singular

    @property
    def Wh(self):
        return None if self.W is None else self.W.conj().T


def _factor_shift(pencil, lam):
    try:
        return linalg.factor(pencil.shifted(lam))
    except SingularMatrix as exc:
        raise ShiftSingular(f"A - lam E singular at lam = {lam:.6g}") from exc


def build_direct_iterate(pencil, pair, lam_prev, need_W=True):
    """
    ``V``, ``W``, ``calM`` and ``calN`` at the shift `lam_prev`.

    One factorization of ``A - lam_prev E`` serves both ``V`` and ``W``.

    Raises
    ------
    ShiftSingular
        When the shift hits an eigenvalue; callers treat this as
        convergence once the residual agrees.
    """
    F = _factor_shift(pencil, lam_prev)
    ER = pencil.E @ pair.right
    EL = pencil.E @ pair.left
    V = F.solve(ER)
    W = F.solve(EL, adjoint=True) if need_W else None
    calM = EL.conj().T @ V
    s = np.linalg.svd(calM, compute_uv=False)
    calN = None
    if s.min() > 1e-14 * s.max():
        calN = np.linalg.inv(calM) + lam_prev * np.eye(pair.n)
    return DirectIterate(lam_prev, V, W, calM, calN)


def calN_bar(pencil, pair, lam):
    """
    ``(L^H E Vbar)^{-1}`` with ``Vbar = [A - lam (E - Q)]^{-1} E R``.

    Independent of the ``M``-route; used to check that both give ``N``.
    """
    ER = pencil.E @ pair.right
    LEh = (pencil.E @ pair.left).conj().T
    K = pencil.A_dense - lam * (pencil.E_dense - ER @ LEh)
    Vbar = np.linalg.solve(K, ER)
    return np.linalg.inv(LEh @ Vbar)


def _arr(pencil, pair):
    return pair.left.conj().T @ (pencil.A @ pair.right)


def _rho(pencil, pair, v, w):
    ER = pencil.E @ pair.right
    num = (w.conj() @ ER) @ (pair.left.conj().T @ (pencil.E @ v))
    den = np.vdot(w, pencil.E @ v) - num
    if abs(den) <= 1e-15 * np.linalg.norm(w) * np.linalg.norm(v):
        return complex(np.inf)
    return complex(num / den)


def _mu_candidates(dec, lam_prev):
    mu = dec.eigenvalues
    keep = np.abs(mu) > 0
    with np.errstate(divide="ignore"):
        lams = lam_prev + 1.0 / mu[keep]
    return Candidates(lams, dec.right[:, keep], dec.left[:, keep])


def _confirmed(pencil, lam, v, w, opts):
    return v is not None and residual(pencil, lam, v, w)[0] <= opts.confirm_residual


def _single(name, pencil, pair, selector, opts, update):
    opts = opts or SolverOptions()
    selector = selector or Overlap()
    basis0 = pair.right
    rep = ConvergenceReport(name)
    mon = Monitor(opts, rep)

    arr = _arr(pencil, pair)
    cands = make_candidates(linalg.eig_dense(arr))
    i = selector(cands, Context(0, None, None, basis0.conj().T @ pair.right))
    lam, alpha, beta = cands.lams[i], cands.alphas[:, i], cands.betas[:, i]
    v, w = scale_left(pair.right @ alpha, pair.left @ beta, pencil.E)[:2]
    rep.add(0, 0, lam, np.nan, residual(pencil, lam, v, w)[0],
            _rho(pencil, pair, v, w))
    ref = beta
    j = 0
    while True:
        j += 1
        try:
            D = build_direct_iterate(pencil, pair, lam)
        except ShiftSingular:
            if not _confirmed(pencil, lam, v, w, opts):
                raise
            rep.add(j, 0, lam, 0.0, residual(pencil, lam, v, w)[0],
                    _rho(pencil, pair, v, w))
            rep.status = "converged"
            rep.message = "shift hit the eigenvalue"
            break
        cands = _mu_candidates(linalg.eig_dense(D.calM), lam)
        transfer = basis0.conj().T @ pair.right
        i = selector(cands, Context(j, lam, ref, transfer))
        new, alpha, beta = cands.lams[i], cands.alphas[:, i], cands.betas[:, i]
        v, w = scale_left(D.V @ alpha, D.W @ beta, pencil.E)[:2]
        dlam = abs(new - lam)
        lam = new
        rep.add(j, 0, lam, dlam, residual(pencil, lam, v, w)[0],
                _rho(pencil, pair, v, w))
        if mon.check(j, [dlam], [lam]):
            break
        if update and opts.subspace_update != "none":
            pair = _refresh(pencil, D.V, D.W, opts.subspace_update)
        ref = (pencil.E @ pair.right).conj().T @ w
    mon.finish()
    a = (pencil.E @ pair.left).conj().T @ v
    b = (pencil.E @ pair.right).conj().T @ w
    return ModeEstimate(lam, a, b, v, w, residual(pencil, lam, v, w)[0]), rep


def _orth(X):
    Q, R = np.linalg.qr(X)
    d = np.abs(np.diag(R))
    if d.min() <= 1e-13 * d.max():
        raise DegenerateSubspace("updated basis is rank deficient")
    return Q


def _orth_leading(X, K):
    """QR of X, checking only that the first K columns are independent."""
    Q, R = np.linalg.qr(X)
    d = np.abs(np.diag(R))[:K]
    if d.min() <= 1e-13 * d.max():
        raise DegenerateSubspace("tracked eigenvectors became collinear")
    return Q


def _refresh(pencil, V, W, policy):
    R, L = _orth(V), _orth(W)
    if policy == "zeroed-static":
        R, L = pencil.E @ R, pencil.E @ L
    return normalize_pair(R, L, pencil)


def algorithm5(pencil, pair, selector=None, opts=None):
    """
    Shift-invert form of the fixed-subspace iteration.

    Each step factors ``A - lam_{j-1} E``, takes the spectrum of ``calM``
    and maps the selected eigenvalue ``mu`` to ``lam_j = lam_{j-1} + 1/mu``.
    A shift that lands on an eigenvalue ends the run as converged when the
    current residual is below ``10 tol``.
    """
    return _single("algorithm5", pencil, pair, selector, opts, update=False)


def algorithm6(pencil, pair0, selector=None, opts=None):
    """As :func:`algorithm5` with ``span(R) = span(V)`` and ``span(L) = span(W)``
    refreshed after every step."""
    return _single("algorithm6", pencil, pair0, selector, opts, update=True)


def _multi(name, pencil, pair, selectors, opts, update):
    opts = opts or SolverOptions()
    K = len(selectors)
    if not 1 <= K <= pair.n:
        raise ValueError("need 1 <= K <= n selectors")
    rep = ConvergenceReport(name, modes=K)
    mon = Monitor(opts, rep, modes=K)

    arr = _arr(pencil, pair)
    cands = make_candidates(linalg.eig_dense(arr))
    T0 = pair.right.conj().T @ pair.right
    idx = [sel(cands, Context(0, None, None, T0))
           for sel in selectors]
    if len(set(idx)) != K:
        raise ValueError("selectors picked the same initial mode twice")
    lams = [cands.lams[i] for i in idx]
    alphas = [cands.alphas[:, i] for i in idx]
    vs = [None] * K
    ws = [None] * K
    for k, i in enumerate(idx):
        vs[k], ws[k] = scale_left(pair.right @ alphas[k],
                                  pair.left @ cands.betas[:, i], pencil.E)[:2]
        rep.add(0, k, lams[k], np.nan, residual(pencil, lams[k], vs[k], ws[k])[0],
                _rho(pencil, pair, vs[k], ws[k]))
    frozen = [False] * K
    j = 0
    while True:
        j += 1
        Ds, hs, anchor = [None] * K, [], None
        for k in range(K):
            if not frozen[k]:
                try:
                    Ds[k] = build_direct_iterate(pencil, pair, lams[k],
                                                 need_W=update)
                except ShiftSingular:
                    if vs[k] is None or not _confirmed(pencil, lams[k], vs[k],
                                                       ws[k], opts):
                        raise
                    frozen[k] = True
            if frozen[k] or Ds[k].calN is None:
                # keep (lam_k, alpha_k) an eigenpair of A_rr + M
                h = lams[k] * alphas[k] - arr @ alphas[k]
            else:
                Hk = Ds[k].calN - arr
                h = Hk @ alphas[k]
                if anchor is None:
                    anchor = Hk
            hs.append(h)
        if anchor is None:
            anchor = np.zeros_like(arr)
        M = complete_fit(anchor, np.column_stack(alphas), np.column_stack(hs))
        cands = make_candidates(linalg.eig_dense(arr + M))
        perm = pair_modes(alphas, cands.alphas)
        new = [cands.lams[p] if not frozen[k] else lams[k]
               for k, p in enumerate(perm)]
        dlams = [0.0 if frozen[k] else abs(new[k] - lams[k]) for k in range(K)]
        at = [cands.alphas[:, p] for p in perm]
        bt = [cands.betas[:, p] for p in perm]
        for k in range(K):
            if frozen[k]:
                continue
            D = Ds[k]
            w_raw = D.W @ bt[k] if update else pair.left @ bt[k]
            vs[k], ws[k] = scale_left(D.V @ at[k], w_raw, pencil.E)[:2]
        lams = new
        for k in range(K):
            rep.add(j, k, lams[k], dlams[k],
                    residual(pencil, lams[k], vs[k], ws[k])[0],
                    _rho(pencil, pair, vs[k], ws[k]))
        if mon.check(j, dlams, lams):
            break
        if update and opts.subspace_update != "none":
            pair = _span_update(pencil, pair, vs, ws, opts.subspace_update)
            arr = _arr(pencil, pair)
            alphas = [np.linalg.lstsq(pair.right, v, rcond=None)[0] for v in vs]
        else:
            alphas = at
    mon.finish()
    LEh = (pencil.E @ pair.left).conj().T
    ERh = (pencil.E @ pair.right).conj().T
    out = [ModeEstimate(lams[k], LEh @ vs[k], ERh @ ws[k], vs[k], ws[k],
                        residual(pencil, lams[k], vs[k], ws[k])[0])
           for k in range(K)]
    return out, rep


def _span_update(pencil, pair, vs, ws, policy):
    n = pair.n
    K = len(vs)
    R = _orth_leading(np.column_stack(vs + [pair.right]), K)[:, :n]
    L = _orth_leading(np.column_stack(ws + [pair.left]), K)[:, :n]
    if policy == "zeroed-static":
        R, L = pencil.E @ R, pencil.E @ L
    return normalize_pair(R, L, pencil)


def algorithm7(pencil, pair, selectors, opts=None):
    """
    Simultaneous shift-invert iteration on K modes with a fixed pair.

    For each mode ``h_k = (N_k - A_rr) alpha_k``; the matrix ``M`` solving
    ``M [alpha_k] = [h_k]`` is completed as in
    :func:`gsma.classical.complete_fit` and the modes of ``A_rr + M`` are
    tracked with :func:`pair_modes`.
    """
    return _multi("algorithm7", pencil, pair, selectors, opts, update=False)


def algorithm8(pencil, pair0, selectors, opts=None):
    """
    As :func:`algorithm7`, refreshing the pair so that its spans contain the
    current ``v_k = V_k alpha_k`` and ``w_k = W_k beta_k``. The new bases
    are orthonormalized; reduced coordinates are then recovered by least
    squares.
    """
    return _multi("algorithm8", pencil, pair0, selectors, opts, update=True)
