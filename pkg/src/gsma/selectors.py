"""
Mode selectors: pick one eigenpair of a reduced matrix.

A selector is any callable ``select(cands, ctx) -> index``. ``cands`` holds
the candidate eigenvalues and reduced eigenvectors; ``ctx`` carries what
is known about the previous iterate.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Candidates:
    lams: np.ndarray        # (c,)
    alphas: np.ndarray      # (n, c) right reduced eigenvectors
    betas: np.ndarray       # (n, c) left reduced eigenvectors

    def __len__(self):
        return len(self.lams)


@dataclass(frozen=True)
class Context:
    """
    Attributes
    ----------
    iteration : int
        0 for the initial selection.
    lam_prev : complex or None
    ref : ndarray or None
        Reduced functional ``b`` such that ``b^H alpha`` is the overlap of a
        candidate with the previous left eigenvector (``basis^H E w_prev``).
    transfer : ndarray or None
        ``basis0^H basis`` for objective-pattern selection.
    """
    iteration: int = 0
    lam_prev: complex = None
    ref: np.ndarray = None
    transfer: np.ndarray = None


def _nearest(lams, target):
    d = np.abs(lams - target)
    return int(np.argmin(d))


def _overlaps(ref, alphas):
    num = np.abs(ref.conj() @ alphas)
    den = np.linalg.norm(ref) * np.linalg.norm(alphas, axis=0)
    return num / np.where(den > 0, den, 1.0)


class Nearest:
    """Closest eigenvalue to `target` first, then to the previous one."""

    def __init__(self, target=None, track=True):
        self.target = target
        self.track = track

    def __call__(self, cands, ctx):
        if ctx.lam_prev is not None and (self.track or self.target is None):
            return _nearest(cands.lams, ctx.lam_prev)
        if self.target is not None:
            return _nearest(cands.lams, self.target)
        return int(np.argmin(np.abs(cands.lams)))

    def __repr__(self):
        return f"Nearest({self.target!r})"


class Overlap:
    """
    Largest overlap with the previous left eigenvector.

    Ties (overlaps within 1e-12) go to the eigenvalue nearest the previous
    one. Without history the candidate closest to `target` is taken, or,
    failing that, the one best aligned with `initial` (first basis
    direction by default).
    """

    def __init__(self, target=None, initial=None):
        self.target = target
        self.initial = initial

    def __call__(self, cands, ctx):
        if ctx.ref is None or not np.any(ctx.ref):
            if self.target is not None:
                return _nearest(cands.lams, self.target)
            ref = self.initial
            if ref is None:
                ref = np.zeros(cands.alphas.shape[0])
                ref[0] = 1.0
            return int(np.argmax(_overlaps(np.asarray(ref), cands.alphas)))
        ov = _overlaps(ctx.ref, cands.alphas)
        best = np.flatnonzero(ov >= ov.max() - 1e-12)
        if len(best) > 1 and ctx.lam_prev is not None:
            return int(best[_nearest(cands.lams[best], ctx.lam_prev)])
        return int(best[0])

    def __repr__(self):
        return "Overlap()"


def select_mode_objective(alpha_o, basis0, basis_prev, candidates):
    """
    Index maximizing ``|alpha_o^H basis0^H basis_prev alpha_k|``.

    `candidates` is an ``n x c`` array of reduced eigenvectors (or a
    sequence of them). ``basis0^H basis_prev`` may be given directly by
    passing ``basis0=None`` and the product as `basis_prev`.
    """
    alphas = np.asarray(candidates)
    if alphas.ndim == 2 and not isinstance(candidates, np.ndarray):
        alphas = alphas.T
    if alphas.ndim == 1:
        alphas = alphas[:, None]
    T = basis_prev if basis0 is None else basis0.conj().T @ basis_prev
    p = np.abs(np.asarray(alpha_o).conj() @ (T @ alphas))
    # argmax returns the lowest index among ties
    return int(np.argmax(np.round(p, 12)))


class Objective:
    """Mode whose shape best matches an objective pattern ``alpha_o``."""

    def __init__(self, alpha_o):
        self.alpha_o = np.asarray(alpha_o)

    def __call__(self, cands, ctx):
        T = ctx.transfer
        if T is None:
            T = np.eye(cands.alphas.shape[0])
        return select_mode_objective(self.alpha_o, None, T, cands.alphas)

    def __repr__(self):
        return f"Objective({self.alpha_o.tolist()!r})"


class Index:
    """The i-th candidate in ascending (real, imag) order."""

    def __init__(self, i):
        self.i = i

    def __call__(self, cands, ctx):
        order = np.lexsort((cands.lams.imag, cands.lams.real))
        return int(order[self.i])

    def __repr__(self):
        return f"Index({self.i})"


def make_candidates(dec, finite=True):
    lams = dec.eigenvalues
    keep = np.isfinite(lams) if finite else np.ones(len(lams), bool)
    return Candidates(lams[keep], dec.right[:, keep], dec.left[:, keep])


def pair_modes(prev, new):
    """
    Greedy matching of previous reduced vectors to new candidates.

    Parameters
    ----------
    prev : sequence of ndarray
        Reduced eigenvectors of the tracked modes.
    new : sequence of (lam, alpha) or ndarray
        Candidates; an ``n x c`` array of vectors is also accepted.

    Returns
    -------
    list of int
        ``perm[k]`` is the candidate assigned to mode k. Pairs are taken in
        order of decreasing normalized overlap; equal overlaps fall back to
        the lowest mode index, then the lowest candidate index.
    """
    P = np.column_stack([np.asarray(a) for a in prev])
    if isinstance(new, np.ndarray):
        C = new
    else:
        C = np.column_stack([np.asarray(a) for _, a in new])
    if C.shape[1] < P.shape[1]:
        raise ValueError("fewer candidates than tracked modes")
    S = np.abs(P.conj().T @ C)
    S /= np.outer(np.linalg.norm(P, axis=0), np.linalg.norm(C, axis=0))
    S = np.round(S, 12)
    K, c = S.shape
    perm = [-1] * K
    used_k, used_c = set(), set()
    # stable sort: ties keep (mode, candidate) index order
    order = np.argsort(-S, axis=None, kind="stable")
    for flat in order:
        k, i = divmod(int(flat), c)
        if k in used_k or i in used_c:
            continue
        perm[k] = i
        used_k.add(k)
        used_c.add(i)
        if len(used_k) == K:
            break
    return perm
