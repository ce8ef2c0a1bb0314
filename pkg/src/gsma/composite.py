"""
Composite models: dynamic subsystems joined by a static interconnection.

Subsystem k obeys ``E_k x_Mk' = A_k x_Mk + B_k x_Ik`` and
``x_Ok = C_k x_Mk + D_k x_Ik``; the interconnection is

    [J11 J12] [x_I]   [x_O]
    [J21 J22] [x_A] = [ 0 ].

With block-diagonal relevant bases the reduced matrix ``A_r + H(lam)`` is
assembled from per-subsystem terms and one small bordered solve.
"""

import json
import os
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from . import linalg
from .errors import (DegenerateSubspace, DimensionMismatch,
                     InterconnectionSingular, InvalidPencil)
from .generalized import LowRankProjector, ShiftedOperator
from .pencil import (ProjectionPencil, SubspacePair, normalize_pair,
                     residual, scale_left, SCHEMA_VERSION)


def _arr(X):
    return np.asarray(linalg.to_dense(X), dtype=np.complex128)


@dataclass(frozen=True, eq=False)
class Subsystem:
    E: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    labels: tuple = None

    def __post_init__(self):
        for name in "EABCD":
            object.__setattr__(self, name, _arr(getattr(self, name)))
        s, p = self.B.shape
        if (self.E.shape != (s, s) or self.A.shape != (s, s)
                or self.C.shape != (p, s) or self.D.shape != (p, p)):
            raise DimensionMismatch("subsystem blocks are inconsistent")
        scale = 1 + np.linalg.norm(self.E)
        if (np.linalg.norm(self.E - self.E.conj().T) > 1e-12 * scale
                or np.linalg.norm(self.E @ self.E - self.E) > 1e-10 * scale):
            raise InvalidPencil("E_k must be a symmetric projection")

    @property
    def states(self):
        return self.A.shape[0]

    @property
    def io(self):
        return self.B.shape[1]

    def pencil(self):
        return ProjectionPencil(self.E, self.A)


@dataclass(frozen=True, eq=False)
class Interconnection:
    J11: np.ndarray
    J12: np.ndarray
    J21: np.ndarray
    J22: np.ndarray

    def __post_init__(self):
        for name in ("J11", "J12", "J21", "J22"):
            object.__setattr__(self, name, _arr(getattr(self, name)))
        P, q = self.J12.shape
        if (self.J11.shape != (P, P) or self.J21.shape != (q, P)
                or self.J22.shape != (q, q)):
            raise DimensionMismatch("interconnection blocks are inconsistent")

    @property
    def io(self):
        return self.J11.shape[0]

    @property
    def algebraic(self):
        return self.J22.shape[0]


@dataclass(frozen=True, eq=False)
class CompositeModel:
    subsystems: tuple
    interconnection: Interconnection
    labels: list = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "subsystems", tuple(self.subsystems))
        if sum(s.io for s in self.subsystems) != self.interconnection.io:
            raise DimensionMismatch("subsystem io dims must sum to dim J11")

    @property
    def l(self):
        return len(self.subsystems)

    @property
    def state_offsets(self):
        return np.concatenate([[0], np.cumsum([s.states for s in self.subsystems])])

    @property
    def io_offsets(self):
        return np.concatenate([[0], np.cumsum([s.io for s in self.subsystems])])

    @property
    def n_states(self):
        return int(self.state_offsets[-1])

    @property
    def dimension(self):
        ic = self.interconnection
        return self.n_states + 2 * ic.io + ic.algebraic

    def slices(self):
        """Index ranges of x_M, x_I, x_O, x_A in the stacked vector."""
        ns, p, q = self.n_states, self.interconnection.io, self.interconnection.algebraic
        return (slice(0, ns), slice(ns, ns + p), slice(ns + p, ns + 2 * p),
                slice(ns + 2 * p, ns + 2 * p + q))


def assemble_monolithic(model):
    """
    One pencil over ``[x_M; x_I; x_O; x_A]``.

    ``E = diag(E_1..E_l, 0, 0, 0)`` and

        A = [A_d   B_d   0    0   ]
            [C_d   D_d  -I    0   ]
            [0    -J11   I  -J12  ]
            [0    -J21   0  -J22  ]

    with ``A_d = diag(A_k)`` and so on.
    """
    subs = model.subsystems
    ic = model.interconnection
    p, q = ic.io, ic.algebraic
    Ad = sp.block_diag([s.A for s in subs], format="csc")
    Bd = sp.block_diag([s.B for s in subs], format="csc")
    Cd = sp.block_diag([s.C for s in subs], format="csc")
    Dd = sp.block_diag([s.D for s in subs], format="csc")
    Ed = sp.block_diag([s.E for s in subs], format="csc")
    ns = model.n_states
    I = sp.identity(p, format="csc")
    J11, J12, J21, J22 = (sp.csc_matrix(x) for x in
                          (ic.J11, ic.J12, ic.J21, ic.J22))

    def Z(r, c):
        return sp.csc_matrix((r, c))

    A = sp.bmat([
        [Ad, Bd, Z(ns, p), Z(ns, q)],
        [Cd, Dd, -I, Z(p, q)],
        [Z(p, ns), -J11, I, -J12],
        [Z(q, ns), -J21, Z(q, p), -J22],
    ], format="csc")
    E = sp.block_diag([Ed, Z(2 * p + q, 2 * p + q)], format="csc")
    A.eliminate_zeros()
    E.eliminate_zeros()
    return ProjectionPencil(E, A, labels=model.labels)


# -- block-structured subspace pairs -------------------------------------------

def _empty_pair(states):
    z = np.zeros((states, 0), dtype=np.complex128)
    return SubspacePair(z, z.copy())


def embed_pairs(model, pairs):
    """Block-diagonal ``(R, L)`` over the stacked variables."""
    pairs = _check_pairs(model, pairs)
    R = la.block_diag(*[pr.right for pr in pairs])
    L = la.block_diag(*[pr.left for pr in pairs])
    extra = model.dimension - model.n_states
    R = np.vstack([R, np.zeros((extra, R.shape[1]))])
    L = np.vstack([L, np.zeros((extra, L.shape[1]))])
    return SubspacePair(R.astype(np.complex128), L.astype(np.complex128))


def _check_pairs(model, pairs):
    if len(pairs) != model.l:
        raise DimensionMismatch("one pair (or None) per subsystem is required")
    out = []
    for s, pr in zip(model.subsystems, pairs):
        pr = _empty_pair(s.states) if pr is None else pr
        if pr.right.shape[0] != s.states:
            raise DimensionMismatch("pair rows must match subsystem states")
        out.append(pr)
    return out


def normalize_pairs(model, rights, lefts):
    """Normalize per-subsystem bases; None entries opt a subsystem out."""
    out = []
    for s, R, L in zip(model.subsystems, rights, lefts):
        out.append(None if R is None else normalize_pair(R, L, s.pencil()))
    return out


# -- per-subsystem terms -------------------------------------------------------

@dataclass(frozen=True)
class SubsystemHTerms:
    A_r: np.ndarray
    B_r: np.ndarray
    C_r: np.ndarray
    H_A: np.ndarray
    H_B: np.ndarray
    H_C: np.ndarray
    H_D: np.ndarray


class _SubsystemEval:
    """One shifted factorization shared by the four H-terms and recovery."""

    def __init__(self, sub, pair, lam, form):
        pen = sub.pencil()
        self.sub, self.pair = sub, pair
        self.proj = LowRankProjector(pen, pair)
        self.op = ShiftedOperator(pen, pair, lam, form, self.proj)
        P = self.proj.P
        R, L = pair.right, pair.left
        # K^{-1} P A R and K^{-1} P B, then P applied on the left
        self.XA = P(self.op.solve(P(sub.A @ R)))
        self.XB = P(self.op.solve(P(sub.B)))
        LhA = L.conj().T @ sub.A
        self.terms = SubsystemHTerms(
            A_r=LhA @ R, B_r=L.conj().T @ sub.B, C_r=sub.C @ R,
            H_A=LhA @ self.XA, H_B=LhA @ self.XB,
            H_C=sub.C @ self.XA, H_D=sub.C @ self.XB)

    def z(self, alpha, zI):
        return self.XA @ alpha + self.XB @ zI

    def y(self, beta, u):
        L = self.pair.left
        rhs = self.proj.Ph(self.sub.A.conj().T @ (L @ beta)
                           + self.sub.C.conj().T @ u)
        return self.proj.Ph(self.op.solve_adjoint(rhs))


def subsystem_h_terms(sub, pair, lam, form="qa"):
    """``A_r, B_r, C_r`` and ``H_A..H_D`` of one subsystem at shift `lam`."""
    pair = _empty_pair(sub.states) if pair is None else pair
    return _SubsystemEval(sub, pair, lam, form).terms


class CompositeEvaluation:
    def __init__(self, model, evals, lam):
        self.model = model
        self.evals = evals
        self.lam = lam
        ic = model.interconnection
        t = [e.terms for e in evals]
        self.A_r = la.block_diag(*[x.A_r for x in t])
        H_A = la.block_diag(*[x.H_A for x in t])
        Bt = la.block_diag(*[x.B_r + x.H_B for x in t])
        Ct = la.block_diag(*[x.C_r + x.H_C for x in t])
        Dt = la.block_diag(*[s.D + x.H_D for s, x in zip(model.subsystems, t)])
        p, q = ic.io, ic.algebraic
        n = self.A_r.shape[0]
        self.bordered = np.block([[ic.J11 - Dt, ic.J12], [ic.J21, ic.J22]])
        self.Bt, self.Ct = Bt, Ct
        if p + q:
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", la.LinAlgWarning)
                    self.lu = la.lu_factor(self.bordered, check_finite=True)
            except (la.LinAlgError, ValueError) as exc:
                raise InterconnectionSingular(str(exc)) from exc
            piv = np.abs(np.diag(self.lu[0]))
            if piv.min() <= 1e-14 * max(np.abs(self.bordered).max(), 1.0):
                raise InterconnectionSingular(
                    f"bordered interconnection matrix singular at lam = {lam:.6g}")
            rhs = np.vstack([Ct, np.zeros((q, n))])
            X = la.lu_solve(self.lu, rhs)
            self.H = H_A + Bt @ X[:p]
        else:
            self.lu = None
            self.H = H_A
        self.matrix = self.A_r + self.H

    def recover(self, alpha, beta):
        """Right and left eigenvectors of the monolithic pencil."""
        model = self.model
        ic = model.interconnection
        p, q = ic.io, ic.algebraic
        so, io = model.state_offsets, model.io_offsets
        na = np.concatenate([[0], np.cumsum([e.pair.n for e in self.evals])])
        if self.lu is not None:
            zIA = la.lu_solve(self.lu, np.concatenate([self.Ct @ alpha,
                                                       np.zeros(q)]))
            uA = la.lu_solve(self.lu, np.concatenate([self.Bt.conj().T @ beta,
                                                      np.zeros(q)]), trans=2)
        else:
            zIA = uA = np.zeros(0, complex)
        zI, zA = zIA[:p], zIA[p:]
        u, wA = uA[:p], uA[p:]
        vM, wM = [], []
        for k, e in enumerate(self.evals):
            a = alpha[na[k]:na[k + 1]]
            b = beta[na[k]:na[k + 1]]
            zi = zI[io[k]:io[k + 1]]
            ui = u[io[k]:io[k + 1]]
            vM.append(e.pair.right @ a + e.z(a, zi))
            wM.append(e.pair.left @ b + e.y(b, ui))
        vM = np.concatenate(vM)
        wM = np.concatenate(wM)
        Cd = la.block_diag(*[s.C for s in model.subsystems])
        Dd = la.block_diag(*[s.D for s in model.subsystems])
        vO = Cd @ vM + Dd @ zI
        v = np.concatenate([vM, zI, vO, zA])
        w = np.concatenate([wM, u, u, wA])
        return v, w


def composite_h(model, pairs, lam, form="qa"):
    """
    ``A_r + H(lam)`` assembled from subsystem terms.

    Returns the reduced matrix; use :func:`composite_evaluation` for the
    individual pieces.
    """
    return composite_evaluation(model, pairs, lam, form).matrix


def composite_evaluation(model, pairs, lam, form="qa"):
    pairs = _check_pairs(model, pairs)
    evals = [_SubsystemEval(s, pr, lam, form)
             for s, pr in zip(model.subsystems, pairs)]
    return CompositeEvaluation(model, evals, lam)


def recover_composite_eigenvector(model, pairs, lam, alpha, beta=None,
                                  form="qa"):
    """Stacked ``(v_M, v_I, v_O, v_A)`` (and the matching left vector)."""
    ev = composite_evaluation(model, pairs, lam, form)
    alpha = np.asarray(alpha, dtype=np.complex128)
    if beta is None:
        beta = np.zeros_like(alpha)
    return ev.recover(alpha, np.asarray(beta, dtype=np.complex128))


class CompositeReduction:
    """Reduction interface for the generalized iterations on composites."""

    def __init__(self, model, pairs, form="qa", pencil=None):
        self.model = model
        self.pairs = _check_pairs(model, pairs)
        self.form = form
        self.pencil = pencil or assemble_monolithic(model)
        self.embedded = embed_pairs(model, self.pairs)
        self.arr = la.block_diag(*[pr.left.conj().T @ s.A @ pr.right
                                   for s, pr in zip(model.subsystems, self.pairs)])
        self.proj = LowRankProjector(self.pencil, self.embedded)

    @property
    def n(self):
        return sum(pr.n for pr in self.pairs)

    @property
    def basis(self):
        return self.embedded.right

    def at(self, lam):
        evals = [_SubsystemEval(s, pr, lam, self.form)
                 for s, pr in zip(self.model.subsystems, self.pairs)]
        return CompositeEvaluation(self.model, evals, lam)

    def ref(self, w):
        return self.proj.ER.conj().T @ w

    def coords(self, v, w):
        return self.proj.LEh @ v, self.proj.ER.conj().T @ w

    def transfer(self, basis0):
        return basis0.conj().T @ self.embedded.right

    def rho(self, v, w):
        num = np.vdot(w, self.proj.Q(v))
        den = np.vdot(w, self.pencil.E @ v) - num
        if abs(den) <= 1e-15 * np.linalg.norm(w) * np.linalg.norm(v):
            return complex(np.inf)
        return complex(num / den)

    def residual(self, lam, v, w):
        return residual(self.pencil, lam, v, w)[0]

    def normalize(self, v, w):
        return scale_left(v, w, self.pencil.E)[:2]

    def updated(self, v, w, alpha, beta, policy):
        """Blockwise refresh; a subsystem keeps its old block if the new
        one is degenerate."""
        if policy == "none":
            return self
        so = self.model.state_offsets
        new = []
        for k, (s, pr) in enumerate(zip(self.model.subsystems, self.pairs)):
            if pr.n == 0:
                new.append(pr)
                continue
            vk, wk = v[so[k]:so[k + 1]], w[so[k]:so[k + 1]]
            R, L = pr.right.copy(), pr.left.copy()
            if not (np.any(vk) and np.any(wk)):
                new.append(pr)
                continue
            R[:, 0] = vk / np.linalg.norm(vk)
            L[:, 0] = wk / np.linalg.norm(wk)
            if policy == "zeroed-static":
                R, L = s.E @ R, s.E @ L
            try:
                new.append(normalize_pair(R, L, s.pencil()))
            except DegenerateSubspace:
                new.append(pr)
        return CompositeReduction(self.model, new, self.form, self.pencil)


# -- serialization -------------------------------------------------------------

def save_composite(directory, model, extra=None):
    """Matrix Market files per block plus ``manifest.json``."""
    os.makedirs(directory, exist_ok=True)
    subs = []
    for k, s in enumerate(model.subsystems):
        files = {}
        for name in "EABCD":
            fname = f"sub{k}_{name}.mtx"
            linalg.mm_write(os.path.join(directory, fname),
                            _real_if_possible(getattr(s, name)))
            files[name] = fname
        subs.append(files)
    ic = model.interconnection
    jfiles = {}
    for name in ("J11", "J12", "J21", "J22"):
        fname = f"{name}.mtx"
        linalg.mm_write(os.path.join(directory, fname),
                        _real_if_possible(getattr(ic, name)))
        jfiles[name] = fname
    manifest = {"schema_version": SCHEMA_VERSION, "kind": "composite",
                "subsystems": subs, "interconnection": jfiles,
                "dimension": model.dimension, "labels": model.labels}
    if extra:
        manifest.update(extra)
    path = os.path.join(directory, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return path


def _real_if_possible(M):
    return M.real if not np.any(np.imag(M)) else M


def load_composite(directory):
    with open(os.path.join(directory, "manifest.json")) as fh:
        manifest = json.load(fh)
    if manifest.get("kind") != "composite":
        raise InvalidPencil("manifest does not describe a composite model")

    def read(f):
        M = linalg.mm_read(os.path.join(directory, f))
        return linalg.to_dense(M) if sp.issparse(M) else M

    subs = [Subsystem(*(read(files[n]) for n in "EABCD"))
            for files in manifest["subsystems"]]
    j = manifest["interconnection"]
    ic = Interconnection(*(read(j[n]) for n in ("J11", "J12", "J21", "J22")))
    return CompositeModel(subs, ic, manifest.get("labels")), manifest
