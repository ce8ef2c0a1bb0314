"""
Problem generators: cross-shaped plate, random pencils and synthetic
electromechanical composite models.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .composite import (CompositeModel, Interconnection, Subsystem,
                        assemble_monolithic, normalize_pairs)
from .errors import GenerationFailed, NotSolvable
from .pencil import ProjectionPencil, normalize_pair

OMEGA0 = 120 * np.pi


# -- cross-shaped plate --------------------------------------------------------

@dataclass(frozen=True)
class CrossGeometry:
    """
    A cross made of a square core (``core`` cells a side) and four arms of
    the same width; arm lengths are in cells, ``h`` is the cell size.
    Arms of length 0 are allowed (a plain square).
    """
    core: int = 6
    up: int = 10
    down: int = 6
    left: int = 8
    right: int = 5
    h: float = 0.1

    def __post_init__(self):
        if self.core < 2 or min(self.up, self.down, self.left, self.right) < 0:
            raise ValueError("core must be >= 2 and arms >= 0")
        if not self.h > 0:
            raise ValueError("spacing must be positive")
        if len(plate_layout(self)) < 4:
            raise ValueError("geometry has fewer than 4 interior points")

    @property
    def arms(self):
        return (self.up, self.down, self.left, self.right)

    def to_dict(self):
        return {"core": self.core, "up": self.up, "down": self.down,
                "left": self.left, "right": self.right, "h": self.h}



def _cells(g):
    W = g.left + g.core + g.right
    H = g.down + g.core + g.up
    cells = np.zeros((W, H), bool)
    cells[g.left:g.left + g.core, :] = True
    cells[:, g.down:g.down + g.core] = True
    return cells


def plate_layout(g):
    """Interior lattice points ``(i, j)``: all four adjacent cells inside."""
    c = _cells(g)
    inner = c[:-1, :-1] & c[1:, :-1] & c[:-1, 1:] & c[1:, 1:]
    ii, jj = np.nonzero(inner)
    # lattice point (i, j) sits at the corner shared by cells i-1..i, j-1..j
    return [(int(i) + 1, int(j) + 1) for i, j in zip(ii, jj)]


REFERENCE_CROSS = CrossGeometry()


def cross_plate(geometry=REFERENCE_CROSS):
    """
    Five-point finite-difference ``-Laplacian`` with Dirichlet boundary.

    Returns
    -------
    pencil : ProjectionPencil
        ``E = I`` and symmetric positive definite ``A`` so that
        ``lam = omega^2``.
    layout : list of (i, j)
        Lattice coordinates of the unknowns.
    """
    pts = plate_layout(geometry)
    idx = {p: k for k, p in enumerate(pts)}
    h2 = geometry.h ** 2
    rows, cols, vals = [], [], []
    for k, (i, j) in enumerate(pts):
        rows.append(k)
        cols.append(k)
        vals.append(4.0 / h2)
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            q = idx.get((i + di, j + dj))
            if q is not None:
                rows.append(k)
                cols.append(q)
                vals.append(-1.0 / h2)
    m = len(pts)
    A = sp.csc_matrix((vals, (rows, cols)), shape=(m, m))
    E = sp.identity(m, format="csc")
    labels = [f"psi[{i},{j}]" for i, j in pts]
    return ProjectionPencil(E, A, labels=labels), pts


PATTERNS = ("up-vs-down", "right-vs-left")


def cross_plate_initial_guess(geometry, pattern, layout=None):
    """
    Sign-pattern guess: one arm up, the opposite arm down.

    The profile is a sine half-wave across the arm width times a sine
    half-wave from the core midline to the arm tip, positive on the first
    named arm and negative on the other. Zero on the cross bar.
    """
    if pattern not in PATTERNS:
        raise ValueError(f"pattern must be one of {PATTERNS}")
    layout = plate_layout(geometry) if layout is None else layout
    g = geometry
    c = g.core
    mid = c / 2
    out = np.zeros(len(layout))
    for k, (i, j) in enumerate(layout):
        x, y = i - g.left, j - g.down
        if pattern == "up-vs-down":
            a1, a2 = g.up, g.down
        else:
            x, y = y, x
            a1, a2 = g.right, g.left
        if not 0 < x < c:
            continue
        s = np.sin(np.pi * x / c)
        if y > mid:
            out[k] = s * np.sin(np.pi * (y - mid) / (a1 + mid))
        elif y < mid:
            out[k] = -s * np.sin(np.pi * (mid - y) / (a2 + mid))
    return out / np.linalg.norm(out)


def square_fd_eigenvalues(N, h):
    """
    Closed-form eigenvalues of the five-point Laplacian on an N x N
    interior grid with spacing h, sorted ascending.

    With side length ``(N + 1) h = 1`` they read
    ``(4/h^2)(sin^2(p pi h/2) + sin^2(q pi h/2))``, p, q = 1..N.
    """
    p = np.arange(1, N + 1)
    s = np.sin(p * np.pi / (2 * (N + 1))) ** 2
    return np.sort((4 / h ** 2 * (s[:, None] + s[None, :])).ravel())


def grid_rows(layout, values):
    """Rows ``(i, j, Re psi, Im psi)`` for a mode shape on the lattice."""
    values = np.asarray(values)
    return [(i, j, float(v.real), float(v.imag))
            for (i, j), v in zip(layout, values)]


# -- random pencils ------------------------------------------------------------

def random_projection(rng, m, r):
    """``U diag(I_r, 0) U^T`` with random orthogonal ``U``."""
    U, _ = np.linalg.qr(rng.standard_normal((m, m)))
    return U[:, :r] @ U[:, :r].T


def random_pencil(rng, m, r, complex_=False, sparse=False, density=0.3):
    """
    Random solvable pencil with ``rank E = r``.

    With ``sparse=True`` E is a coordinate projection and A a sparse
    random matrix with a dominant diagonal, so the static block stays
    invertible.
    """
    for _ in range(20):
        if sparse:
            d = np.zeros(m)
            d[rng.permutation(m)[:r]] = 1.0
            E = sp.diags(d, format="csc")
            A = sp.random(m, m, density=density, random_state=rng,
                          format="csc", data_rvs=rng.standard_normal)
            A = A + sp.diags(rng.uniform(1.0, 2.0, m) * np.sign(
                rng.standard_normal(m)) * 2.0, format="csc")
            if complex_:
                A = A + 1j * sp.random(m, m, density=density / 3,
                                       random_state=rng, format="csc",
                                       data_rvs=rng.standard_normal)
        else:
            E = random_projection(rng, m, r)
            A = rng.standard_normal((m, m))
            if complex_:
                A = A + 1j * rng.standard_normal((m, m))
        pen = ProjectionPencil(E, A)
        if r == m or _static_ok(pen):
            return pen
    raise GenerationFailed("could not draw a solvable pencil")


def _static_ok(pen):
    Ed = pen.E_dense.real
    d, U = np.linalg.eigh(Ed)
    Us = U[:, d < 0.5]
    Ass = Us.T @ pen.A_dense @ Us
    return np.linalg.cond(Ass) < 1e8


def perturbed_pair(rng, pencil, v, w, size=0.3):
    """Normalized pair from eigenvectors plus relative noise of `size`."""
    def pert(x):
        x = np.asarray(x)
        d = rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape)
        return x + size * np.linalg.norm(x) * d / np.linalg.norm(d)
    return normalize_pair(pert(v), pert(w), pencil)


# -- synthetic composite models ------------------------------------------------

OBJECTIVE_10 = np.array([1, 1, 1, -1, -1, -1, -1, 1, -1, 1], dtype=float)


def _areas(l):
    """Area membership (+1 / -1) per generator."""
    if l == 10:
        return OBJECTIVE_10.copy()
    return np.where(np.arange(l) < (l + 1) // 2, 1.0, -1.0)


def _subsystem(rng, states, io, algebraic_state):
    """
    Swing-equation subsystem: states ``[delta, omega, x_3, ...]``.

    ``delta' = 120 pi omega`` and ``2H omega' = -P_e - D omega - ...``;
    the remaining states are stable first-order lags driven by omega.
    Channel 0 takes ``P_e`` as input and returns ``delta``.
    """
    s = states
    A = np.zeros((s, s))
    E = np.eye(s)
    H = rng.uniform(3.0, 6.0)
    Dmp = rng.uniform(0.5, 2.0)
    A[0, 1] = OMEGA0
    A[1, 1] = -Dmp / (2 * H)
    dyn = s - 1 if algebraic_state else s
    for i in range(2, dyn):
        T = rng.uniform(0.5, 5.0)
        A[i, i] = -1.0 / T
        A[i, 1] = rng.uniform(0.5, 2.0) / T
        A[1, i] = -rng.uniform(0.01, 0.05) / (2 * H)
    if algebraic_state:
        # 0 = -x_s + c x_2 (+ omega): an internal static variable
        E[s - 1, s - 1] = 0.0
        A[s - 1, s - 1] = -1.0
        A[s - 1, 2 if dyn > 2 else 1] = rng.uniform(0.5, 1.5)
        A[1, s - 1] = -rng.uniform(0.01, 0.05) / (2 * H)
    B = np.zeros((s, io))
    C = np.zeros((io, s))
    D = np.zeros((io, io))
    if io:
        B[1, 0] = -1.0 / (2 * H)
        C[0, 0] = 1.0
    for c in range(1, io):
        t = 2 + (c - 1) if 2 + (c - 1) < dyn else 1
        B[t, c] = rng.uniform(0.05, 0.2)
        C[c, t] = rng.uniform(0.05, 0.2)
        D[c, c] = rng.uniform(0.0, 0.1)
    return Subsystem(E, A, B, C, D)


def _network(rng, l, io_per, nbus):
    """
    Generators behind reactances ``x_k`` on buses joined by lines.

    ``delta_k = x_k P_e,k + theta_bus(k)`` and at every bus the injected
    power balances the line flows and a shunt load.
    """
    areas = _areas(l)
    bus = np.arange(l) % nbus
    x = rng.uniform(0.2, 0.4, l)
    Lnet = np.zeros((nbus, nbus))
    bus_area = np.array([areas[np.flatnonzero(bus == b)[0]]
                         if np.any(bus == b) else 1.0 for b in range(nbus)])
    for a in range(nbus):
        for b in range(a + 1, nbus):
            if bus_area[a] == bus_area[b]:
                y = rng.uniform(5.0, 15.0)
            else:
                y = 0.0
            Lnet[a, b] = Lnet[b, a] = -y
    # one weak tie between the areas
    east = np.flatnonzero(bus_area > 0)
    west = np.flatnonzero(bus_area < 0)
    if len(east) and len(west):
        a, b = east[-1], west[0]
        y = rng.uniform(0.3, 0.6)
        Lnet[a, b] = Lnet[b, a] = -y
    np.fill_diagonal(Lnet, 0.0)
    np.fill_diagonal(Lnet, -Lnet.sum(axis=1))
    G = np.diag(rng.uniform(0.5, 1.0, nbus))
    p = l * io_per
    J11 = np.zeros((p, p))
    J12 = np.zeros((p, nbus))
    J21 = np.zeros((nbus, p))
    for k in range(l):
        r = k * io_per
        J11[r, r] = x[k]
        J12[r, bus[k]] = 1.0
        J21[bus[k], r] = 1.0
        for c in range(1, io_per):
            J11[r + c, r + c] = 1.0
    J22 = -(Lnet + G)
    return Interconnection(J11, J12, J21, J22)


def synthetic_composite(seed=0, l=10, states_per=4, io_per=1, algebraic=None,
                        retries=10):
    """
    Reproducible electromechanical-style composite model.

    Parameters
    ----------
    seed : int
    l : int
        Number of subsystems (generators).
    states_per : int
        States per subsystem, at least 2 (``delta``, ``omega``). From 4 on
        the last state is algebraic (singular ``E_k``).
    io_per : int
        Inputs (= outputs) per subsystem; 0 gives uncoupled subsystems.
    algebraic : int, optional
        Number of network buses (algebraic variables). Defaults to `l`.

    Raises
    ------
    GenerationFailed
        If no solvable draw is found within `retries` attempts.
    """
    if l < 1 or states_per < 2 or io_per < 0:
        raise ValueError("need l >= 1, states_per >= 2, io_per >= 0")
    rng = np.random.default_rng(seed)
    nbus = l if algebraic is None else algebraic
    for _ in range(retries):
        subs = [_subsystem(rng, states_per, io_per, states_per >= 4)
                for _ in range(l)]
        if io_per and nbus:
            ic = _network(rng, l, io_per, nbus)
        else:
            p = l * io_per
            ic = Interconnection(np.eye(p), np.zeros((p, 0)),
                                 np.zeros((0, p)), np.zeros((0, 0)))
        labels = []
        for k in range(l):
            labels += [f"delta{k}", f"omega{k}"] + [
                f"x{k}_{i}" for i in range(2, states_per)]
        labels += [f"in{k}_{c}" for k in range(l) for c in range(io_per)]
        labels += [f"out{k}_{c}" for k in range(l) for c in range(io_per)]
        labels += [f"theta{b}" for b in range(ic.algebraic)]
        model = CompositeModel(subs, ic, labels)
        try:
            from .pencil import oracle_full_spectrum
            pen = assemble_monolithic(model)
            if pen.m <= 2000:
                oracle_full_spectrum(pen)
        except NotSolvable:
            continue
        return model
    raise GenerationFailed("no solvable composite model drawn")


def electromech_init(model):
    """
    Per-subsystem pairs ``R_k = [120 pi, 2 pi i, 0, ...]`` and
    ``L_k = [-2 pi i, 120 pi, 0, ...]``, normalized against ``E_k``.
    """
    rights, lefts = [], []
    for s in model.subsystems:
        R = np.zeros((s.states, 1), dtype=np.complex128)
        L = np.zeros((s.states, 1), dtype=np.complex128)
        R[0, 0], R[1, 0] = OMEGA0, 2j * np.pi
        L[0, 0], L[1, 0] = -2j * np.pi, OMEGA0
        rights.append(R)
        lefts.append(L)
    return normalize_pairs(model, rights, lefts)


def delta_components(model, v):
    """The ``delta_k`` entries (first state of each subsystem) of v."""
    return np.asarray(v)[model.state_offsets[:-1]]
