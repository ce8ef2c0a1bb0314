import numpy as np
import pytest

from gsma.composite import assemble_monolithic
from gsma.pencil import oracle_full_spectrum
from gsma.problems import (CrossGeometry, PATTERNS, REFERENCE_CROSS,
                           cross_plate, cross_plate_initial_guess,
                           electromech_init, grid_rows, perturbed_pair,
                           plate_layout, random_pencil, random_projection,
                           square_fd_eigenvalues, synthetic_composite)


# -- plate ---------------------------------------------------------------------

def test_reference_plate_spd():
    pen, layout = cross_plate()
    A = pen.A_dense.real
    assert pen.m == len(layout) == 170
    assert np.allclose(A, A.T)
    assert np.linalg.eigvalsh(A).min() > 0
    assert len(set(layout)) == len(layout)


def test_square_closed_form_small():
    pen, _ = cross_plate(CrossGeometry(4, 0, 0, 0, 0, 0.25))
    ev = np.linalg.eigvalsh(pen.A_dense.real)
    assert ev[0] == pytest.approx(18.7452, abs=1e-4)
    assert np.allclose(ev, square_fd_eigenvalues(3, 0.25), rtol=1e-13)


def test_square_closed_form_unit_side():
    N = 5
    h = 1 / (N + 1)
    ref = square_fd_eigenvalues(N, h)
    p = np.arange(1, N + 1)
    s = np.sin(p * np.pi * h / 2) ** 2
    assert np.allclose(ref, np.sort((4 / h ** 2 * (s[:, None] + s[None, :])).ravel()))


def test_equal_arms_rotation_invariant_spectrum():
    g = CrossGeometry(4, 3, 3, 3, 3, 0.1)
    pen, layout = cross_plate(g)
    A = pen.A_dense.real
    # rotate the lattice by 90 degrees about the centre
    W = g.left + g.core + g.right
    idx = {p: k for k, p in enumerate(layout)}
    perm = [idx[(j, W - i)] for i, j in layout]
    assert np.allclose(A[np.ix_(perm, perm)], A)


def test_patterns_antisymmetric_on_symmetric_cross():
    g = CrossGeometry(4, 5, 5, 5, 5, 0.1)
    layout = plate_layout(g)
    idx = {p: k for k, p in enumerate(layout)}
    H = g.down + g.core + g.up
    ud = cross_plate_initial_guess(g, "up-vs-down", layout)
    rl = cross_plate_initial_guess(g, "right-vs-left", layout)
    flip = [idx[(i, H - j)] for i, j in layout]
    assert np.allclose(ud[flip], -ud)
    assert abs(ud @ rl) <= 1e-12
    assert np.linalg.norm(ud) == pytest.approx(1.0)


def test_pattern_overlaps_target_mode():
    pen, layout = cross_plate()
    orc = oracle_full_spectrum(pen)
    order = np.argsort(orc.eigenvalues.real)
    V = orc.right[:, order[1:3]]
    for pat in PATTERNS:
        g = cross_plate_initial_guess(REFERENCE_CROSS, pat, layout)
        ov = np.abs(V.conj().T @ g) / np.linalg.norm(V, axis=0)
        assert ov.max() > 0.7


def test_bad_geometry():
    with pytest.raises(ValueError):
        CrossGeometry(1, 1, 1, 1, 1, 0.1)
    with pytest.raises(ValueError):
        CrossGeometry(4, -1, 1, 1, 1, 0.1)
    with pytest.raises(ValueError):
        cross_plate_initial_guess(REFERENCE_CROSS, "diagonal")


def test_grid_rows():
    rows = grid_rows([(1, 2), (3, 4)], np.array([1 + 2j, 3.0]))
    assert rows == [(1, 2, 1.0, 2.0), (3, 4, 3.0, 0.0)]


# -- random pencils ------------------------------------------------------------

def test_random_projection(rng):
    P = random_projection(rng, 7, 3)
    assert np.allclose(P @ P, P) and np.allclose(P, P.T)
    assert round(np.trace(P)) == 3


@pytest.mark.parametrize("sparse", [False, True])
def test_random_pencil_solvable_and_deterministic(sparse):
    a = random_pencil(np.random.default_rng(9), 12, 7, sparse=sparse)
    b = random_pencil(np.random.default_rng(9), 12, 7, sparse=sparse)
    assert a.rank_E == 7 and a.is_sparse == sparse
    assert np.array_equal(a.A_dense, b.A_dense)
    assert len(oracle_full_spectrum(a).eigenvalues) == 7


def test_perturbed_pair_distance(rng):
    pen = random_pencil(rng, 10, 10)
    orc = oracle_full_spectrum(pen)
    v = orc.right[:, 0]
    pair = perturbed_pair(rng, pen, v, orc.left[:, 0], 0.3)
    r = pair.right[:, 0]
    c = np.vdot(v, r) / np.vdot(v, v)
    assert np.linalg.norm(r - c * v) / np.linalg.norm(c * v) == pytest.approx(
        0.3, rel=0.5)


# -- composite generator -------------------------------------------------------

def test_synthetic_composite_deterministic():
    a = assemble_monolithic(synthetic_composite(seed=4, l=5))
    b = assemble_monolithic(synthetic_composite(seed=4, l=5))
    assert (a.A != b.A).nnz == 0
    assert a.rank_E < a.m


def test_electromechanical_modes_in_band():
    l = 10
    m = synthetic_composite(seed=0, l=l)
    ev = oracle_full_spectrum(assemble_monolithic(m)).eigenvalues
    f = ev.imag / (2 * np.pi)
    assert np.sum((f >= 0.2) & (f <= 3.0)) >= l - 1
    assert np.all(ev.real < 0)


def test_electromech_init_normalized():
    m = synthetic_composite(seed=0, l=3)
    for s, pr in zip(m.subsystems, electromech_init(m)):
        G = pr.left.conj().T @ s.E @ pr.right
        assert np.allclose(G, 1)
        r = pr.right[:, 0]
        assert r[1] / r[0] == pytest.approx(2j * np.pi / (120 * np.pi))


def test_composite_argument_checks():
    with pytest.raises(ValueError):
        synthetic_composite(l=0)
