"""
Projection pencils ``lam E v = A v`` and the relevant-subspace machinery.

``E`` is a symmetric projection (``E @ E == E == E.T``), possibly
singular; its kernel holds the static (algebraic) variables. A
:class:`SubspacePair` carries the right/left relevant bases, normalized so
that ``left^H E right = I``.
"""

import json
import math
import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from . import linalg
from .errors import (DegenerateSubspace, DimensionMismatch, InvalidPencil,
                     NotSolvable)

E_TOL = 1e-10
SYMMETRY_TOL = 1e-12


class ProjectionPencil:
    """
    The matrix pair ``(E, A)``.

    Both matrices may be dense arrays or scipy sparse matrices; they are
    promoted to complex. ``E`` is validated on construction.
    """

    def __init__(self, E, A, labels=None):
        if E.shape != A.shape or E.shape[0] != E.shape[1]:
            raise DimensionMismatch(
                f"E {E.shape} and A {A.shape} must be square and equal")
        self.E = linalg.as_complex(E)
        self.A = linalg.as_complex(A)
        self.m = E.shape[0]
        self.labels = list(labels) if labels is not None else None
        if self.labels is not None and len(self.labels) != self.m:
            raise DimensionMismatch("one label per variable is required")
        self._validate()

    def _validate(self):
        E = self.E
        scale = 1.0 + linalg.matnorm(E)
        sym = linalg.matnorm(E - E.conj().T)
        if sym > SYMMETRY_TOL * scale:
            raise InvalidPencil(f"E is not symmetric (||E - E^T|| = {sym:.2e})")
        idem = linalg.matnorm(E @ E - E)
        if idem > E_TOL * scale:
            raise InvalidPencil(f"E is not idempotent (||E^2 - E|| = {idem:.2e})")

    def __repr__(self):
        kind = "sparse" if self.is_sparse else "dense"
        return f"ProjectionPencil(m={self.m}, rank_E={self.rank_E}, {kind})"

    @property
    def is_sparse(self):
        return sp.issparse(self.A) or sp.issparse(self.E)

    @cached_property
    def rank_E(self):
        # trace of a projection is its rank
        return int(round(self.E.diagonal().real.sum()))

    @cached_property
    def E_dense(self):
        return linalg.to_dense(self.E)

    @cached_property
    def A_dense(self):
        return linalg.to_dense(self.A)

    @cached_property
    def norm_A(self):
        return linalg.matnorm(self.A)

    @cached_property
    def norm_E(self):
        return linalg.matnorm(self.E)

    def shifted(self, lam):
        """``A - lam E`` in the pencil's storage format."""
        if self.is_sparse:
            return sp.csc_matrix(self.A - lam * self.E)
        return self.A - lam * self.E


@dataclass(frozen=True)
class SubspacePair:
    """Right and left relevant bases, each ``m x n``."""
    right: np.ndarray
    left: np.ndarray

    @property
    def n(self):
        return self.right.shape[1]

    @property
    def m(self):
        return self.right.shape[0]


@dataclass(frozen=True)
class Projectors:
    Q: np.ndarray
    P: np.ndarray


@dataclass(frozen=True)
class ModeEstimate:
    """One eigen-estimate: eigenvalue, reduced coordinates, full vectors."""
    lam: complex
    alpha: np.ndarray
    beta: np.ndarray
    v: np.ndarray = None
    w: np.ndarray = None
    residual: float = np.nan
    flags: tuple = ()


def _as_columns(X, m):
    X = np.asarray(X, dtype=np.complex128)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != m:
        raise DimensionMismatch(f"basis has {X.shape[0]} rows, expected {m}")
    return X


def normalize_pair(right, left, pencil):
    """
    Rescale the left basis so that ``left^H E right = I_n``.

    The right basis is returned unchanged; the left basis becomes
    ``left @ inv(G)^H`` with ``G = left^H E right``.

    Raises
    ------
    DegenerateSubspace
        If a basis vector lies in the kernel of E or ``G`` is numerically
        singular.
    """
    R = _as_columns(right, pencil.m)
    L = _as_columns(left, pencil.m)
    if R.shape != L.shape:
        raise DimensionMismatch(f"right {R.shape} and left {L.shape} differ")
    if R.shape[1] == 0:
        raise DegenerateSubspace("empty subspace")
    ER = pencil.E @ R
    EL = pencil.E @ L
    for name, X, EX in (("right", R, ER), ("left", L, EL)):
        cols = np.linalg.norm(X, axis=0)
        ecols = np.linalg.norm(EX, axis=0)
        bad = np.nonzero(ecols < 1e-12 * cols)[0]
        if bad.size or np.any(cols == 0):
            raise DegenerateSubspace(
                f"{name} basis column(s) {bad.tolist()} lie in ker(E)")
    G = L.conj().T @ ER
    smin = la.svdvals(G).min()
    if smin <= 1e-12 * np.linalg.norm(ER, 2) * np.linalg.norm(EL, 2):
        raise DegenerateSubspace(
            f"left^H E right is singular (sigma_min = {smin:.2e})")
    L = L @ np.linalg.inv(G).conj().T
    return SubspacePair(R, L)


def canonical_pair(m, n):
    """``[I_n; 0]`` for both bases: the classical partition embedding."""
    B = np.zeros((m, n), dtype=np.complex128)
    B[:n, :n] = np.eye(n)
    return SubspacePair(B, B.copy())


def projectors(pair, pencil):
    """``Q = E right left^H E`` and ``P = I - Q``."""
    if pair.m != pencil.m:
        raise DimensionMismatch("pair and pencil dimensions differ")
    ER = pencil.E @ pair.right
    LE = (pencil.E @ pair.left).conj().T
    Q = ER @ LE
    return Projectors(Q, np.eye(pencil.m) - Q)


def decompose_right(v, pair, pencil):
    """Split ``v = right @ alpha + z`` with ``left^H E z = 0``."""
    v = np.asarray(v, dtype=np.complex128)
    alpha = pair.left.conj().T @ (pencil.E @ v)
    return alpha, v - pair.right @ alpha


def decompose_left(w, pair, pencil):
    """Split ``w = left @ beta + y`` with ``right^H E y = 0``."""
    w = np.asarray(w, dtype=np.complex128)
    beta = pair.right.conj().T @ (pencil.E @ w)
    return beta, w - pair.left @ beta


def scale_left(v, w, E):
    """Return ``(v/||v||, w')`` with ``w'^H E v == 1`` when possible."""
    v = v / np.linalg.norm(v)
    d = np.vdot(w, E @ v)
    if abs(d) <= 1e-14 * np.linalg.norm(w) * np.linalg.norm(E @ v):
        return v, w / np.linalg.norm(w), False
    return v, w / np.conj(d), True


@dataclass(frozen=True)
class OracleSpectrum:
    """All finite eigenvalues of a pencil with right/left eigenvectors.

    Columns of ``right`` have unit norm; ``left[:, i]^H E right[:, i] = 1``.
    ``n_infinite`` counts the infinite (static) eigenvalues.
    """
    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    n_infinite: int
    flags: np.ndarray = field(default=None)

    def __len__(self):
        return len(self.eigenvalues)

    def __iter__(self):
        for k, lam in enumerate(self.eigenvalues):
            yield lam, self.right[:, k], self.left[:, k]

    def nearest(self, lam):
        return int(np.argmin(np.abs(self.eigenvalues - lam)))


def oracle_full_spectrum(pencil):
    """
    Brute-force reference spectrum by static condensation.

    E is diagonalized as ``U diag(I_r, 0) U^T``; the static variables are
    eliminated through the static-static block of ``U^T A U`` and the
    ``r x r`` condensed matrix is eigen-analysed densely.

    Raises
    ------
    NotSolvable
        If the static-static block is singular (condition > 1e12).
    """
    m = pencil.m
    if m > linalg.dense_limit():
        raise DimensionMismatch(f"order {m} exceeds the dense limit")
    E = pencil.E_dense.real
    A = pencil.A_dense
    d, U = np.linalg.eigh(E)
    order = np.argsort(-d)
    U = U[:, order]
    r = int(np.sum(d > 0.5))
    Ud, Us = U[:, :r], U[:, r:]
    At = U.T @ A @ U
    Add, Ads = At[:r, :r], At[:r, r:]
    Asd, Ass = At[r:, :r], At[r:, r:]
    if m - r:
        if np.linalg.cond(Ass) > 1e12:
            raise NotSolvable("static block of A is singular")
        X = np.linalg.solve(Ass, Asd)                # x_s = -X x_d
        Yh = np.linalg.solve(Ass.conj().T, Ads.conj().T).conj().T
        S = Add - Ads @ X
    else:
        X = np.zeros((0, r))
        Yh = np.zeros((r, 0))
        S = Add
    dec = linalg.eig_dense(S)
    V = Ud @ dec.right - Us @ (X @ dec.right)
    # left: y_s^H = -y_d^H Ads Ass^{-1}
    W = Ud @ dec.left - Us @ (dec.left.conj().T @ Yh).conj().T
    flags = np.zeros(r, bool)
    for k in range(r):
        V[:, k], W[:, k], ok = scale_left(V[:, k], W[:, k], E)
        flags[k] = not ok
    return OracleSpectrum(dec.eigenvalues, V, W, m - r, flags)


def participation_ratio(v, w, proj, pencil):
    """
    ``rho = w^H Q v / w^H (E - Q) v``.

    ``|rho| > 1`` predicts local convergence of the linear algorithms,
    with asymptotic contraction factor ``1/|rho|``. An exactly vanishing
    denominator gives a signed infinity.
    """
    v = np.asarray(v, dtype=np.complex128)
    w = np.asarray(w, dtype=np.complex128)
    Qv = proj.Q @ v
    num = np.vdot(w, Qv)
    den = np.vdot(w, pencil.E @ v - Qv)
    if abs(den) <= 1e-15 * np.linalg.norm(w) * np.linalg.norm(v):
        return complex(math.copysign(math.inf, num.real or 1.0), 0.0)
    return complex(num / den)


def participation_ratio_classical(v, w, n):
    """``w_r^H v_r / w_z^H v_z`` for an explicit partition of the first n."""
    num = np.vdot(w[:n], v[:n])
    den = np.vdot(w[n:], v[n:])
    if abs(den) <= 1e-15 * np.linalg.norm(w) * np.linalg.norm(v):
        return complex(math.copysign(math.inf, num.real or 1.0), 0.0)
    return complex(num / den)


def residual(pencil, lam, v, w=None):
    """Relative right and left residuals of an eigen-estimate."""
    scale = pencil.norm_A + abs(lam) * pencil.norm_E
    v = np.asarray(v, dtype=np.complex128)
    r = pencil.A @ v - lam * (pencil.E @ v)
    right = np.linalg.norm(r) / (scale * np.linalg.norm(v))
    if w is None:
        return float(right), np.nan
    w = np.asarray(w, dtype=np.complex128)
    s = pencil.A.conj().T @ w - np.conj(lam) * (pencil.E @ w)
    left = np.linalg.norm(s) / (scale * np.linalg.norm(w))
    return float(right), float(left)


# -- serialization ---------------------------------------------------------

SCHEMA_VERSION = 1


def save_pencil(directory, pencil, extra=None):
    """Write ``E.mtx``, ``A.mtx`` and ``manifest.json`` into `directory`."""
    os.makedirs(directory, exist_ok=True)
    linalg.mm_write(os.path.join(directory, "E.mtx"), _storable(pencil.E))
    linalg.mm_write(os.path.join(directory, "A.mtx"), _storable(pencil.A))
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "kind": "pencil",
        "dimension": pencil.m,
        "rank_E": pencil.rank_E,
        "labels": pencil.labels,
        "E": "E.mtx",
        "A": "A.mtx",
    }
    if extra:
        manifest.update(extra)
    path = os.path.join(directory, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return path


def _storable(M):
    """Drop a vanishing imaginary part so real data is written as real."""
    data = M.data if sp.issparse(M) else M
    if np.iscomplexobj(data) and not np.any(np.imag(data)):
        return M.real
    return M


def load_pencil(directory):
    with open(os.path.join(directory, "manifest.json")) as fh:
        manifest = json.load(fh)
    if manifest.get("kind") != "pencil":
        raise InvalidPencil("manifest does not describe a pencil")
    E = linalg.mm_read(os.path.join(directory, manifest["E"]))
    A = linalg.mm_read(os.path.join(directory, manifest["A"]))
    pencil = ProjectionPencil(E, A, labels=manifest.get("labels"))
    if pencil.m != manifest["dimension"]:
        raise InvalidPencil("manifest dimension disagrees with the matrices")
    return pencil, manifest
