import json

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from gsma.errors import DegenerateSubspace, InvalidPencil, NotSolvable
from gsma.pencil import (ProjectionPencil, SubspacePair, canonical_pair,
                         decompose_left, decompose_right, load_pencil,
                         normalize_pair, oracle_full_spectrum,
                         participation_ratio, participation_ratio_classical,
                         projectors, residual, save_pencil)
from gsma.problems import cross_plate, CrossGeometry, random_pencil

from conftest import crandn, random_pair


def col(*x):
    return np.array(x, dtype=complex)[:, None]


# -- construction --------------------------------------------------------------

def test_rejects_non_projection():
    with pytest.raises(InvalidPencil):
        ProjectionPencil(np.diag([1.0, 0.5]), np.eye(2))
    with pytest.raises(InvalidPencil):
        ProjectionPencil(np.array([[1.0, 1.0], [0.0, 0.0]]), np.eye(2))


def test_rank_and_sparse_flags():
    pen = ProjectionPencil(sp.diags([1.0, 1.0, 0.0]), sp.identity(3))
    assert pen.is_sparse and pen.rank_E == 2


# -- normalize_pair ------------------------------------------------------------

def test_normalize_already_normal():
    pen = ProjectionPencil(np.eye(2), np.eye(2))
    pair = normalize_pair(col(1, 0), col(1, 0), pen)
    assert np.allclose(pair.left, col(1, 0))


def test_normalize_scalar_scaling():
    pen = ProjectionPencil(np.eye(2), np.eye(2))
    pair = normalize_pair(col(2, 0), col(3, 0), pen)
    assert np.allclose(pair.right, col(2, 0))
    assert np.allclose(pair.left, col(0.5, 0))


def test_normalize_ignores_static_part():
    pen = ProjectionPencil(np.diag([1.0, 0.0]), np.eye(2))
    pair = normalize_pair(col(1, 5), col(1, 7), pen)
    assert np.allclose(pair.left, col(1, 7))


def test_normalize_kernel_column_rejected():
    pen = ProjectionPencil(np.diag([1.0, 0.0]), np.eye(2))
    with pytest.raises(DegenerateSubspace):
        normalize_pair(col(0, 1), col(1, 0), pen)


def test_normalize_e_orthogonal_rejected():
    pen = ProjectionPencil(np.eye(2), np.eye(2))
    with pytest.raises(DegenerateSubspace):
        normalize_pair(col(1, 0), col(0, 1), pen)


def test_normalize_contract(rng):
    pen = random_pencil(rng, 9, 6, complex_=True)
    pair = random_pair(rng, pen, 3)
    G = pair.left.conj().T @ pen.E @ pair.right
    assert np.allclose(G, np.eye(3), atol=1e-10)


# -- projectors ----------------------------------------------------------------

def test_projectors_identity_case():
    pen = ProjectionPencil(np.eye(2), np.eye(2))
    pr = projectors(normalize_pair(col(1, 0), col(1, 0), pen), pen)
    assert np.allclose(pr.Q, np.diag([1, 0]))
    assert np.allclose(pr.P, np.diag([0, 1]))


def test_projectors_singular_e():
    pen = ProjectionPencil(np.diag([1.0, 1.0, 0.0]), np.eye(3))
    pr = projectors(normalize_pair(col(1, 0, 0), col(1, 0, 0), pen), pen)
    assert np.allclose(pr.Q, np.diag([1, 0, 0]))


@settings(max_examples=20, deadline=None)
@given(st.integers(3, 12), st.data())
def test_projector_algebra(m, data):
    seed = data.draw(st.integers(0, 2**31 - 1))
    r = data.draw(st.integers(1, m))
    n = data.draw(st.integers(1, r))
    rng = np.random.default_rng(seed)
    pen = random_pencil(rng, m, r, complex_=True)
    pair = random_pair(rng, pen, n)
    pr = projectors(pair, pen)
    Q, P = pr.Q, pr.P
    E = pen.E_dense
    tol = 1e-10 * (1 + np.linalg.norm(Q))
    assert np.linalg.norm(Q @ Q - Q) <= tol
    assert np.linalg.norm(P @ P - P) <= tol
    assert np.linalg.norm(P @ Q) <= tol and np.linalg.norm(Q @ P) <= tol
    assert np.allclose(P + Q, np.eye(m), atol=1e-15)
    assert np.linalg.norm(pair.left.conj().T @ (E - Q)) <= tol
    assert np.linalg.norm((E - Q) @ pair.right) <= tol


# -- decomposition -------------------------------------------------------------

def test_decompose_in_subspace(rng):
    pen = random_pencil(rng, 6, 4, complex_=True)
    pair = random_pair(rng, pen, 2)
    c = crandn(rng, 2)
    alpha, z = decompose_right(pair.right @ c, pair, pen)
    assert np.allclose(alpha, c) and np.allclose(z, 0, atol=1e-12)


def test_decompose_complement():
    pen = ProjectionPencil(np.eye(2), np.eye(2))
    pair = normalize_pair(col(1, 0), col(1, 0), pen)
    alpha, z = decompose_right(np.array([0, 1.0]), pair, pen)
    assert np.allclose(alpha, 0) and np.allclose(z, [0, 1])


def test_decompose_reassembly(rng):
    pen = random_pencil(rng, 6, 4, complex_=True)
    pair = random_pair(rng, pen, 2)
    v = crandn(rng, 6)
    alpha, z = decompose_right(v, pair, pen)
    assert np.linalg.norm(pair.right @ alpha + z - v) <= 1e-12
    assert np.linalg.norm(pair.left.conj().T @ pen.E @ z) <= 1e-12
    beta, y = decompose_left(v, pair, pen)
    assert np.linalg.norm(pair.left @ beta + y - v) <= 1e-12
    assert np.linalg.norm(pair.right.conj().T @ pen.E @ y) <= 1e-12


# -- oracle --------------------------------------------------------------------

def test_oracle_identity_e():
    orc = oracle_full_spectrum(ProjectionPencil(np.eye(2), np.diag([1.0, 2.0])))
    assert np.allclose(np.sort(orc.eigenvalues.real), [1, 2])


def test_oracle_static_condensation():
    pen = ProjectionPencil(np.diag([1.0, 0.0]), np.array([[0.0, 1.0], [1.0, -2.0]]))
    orc = oracle_full_spectrum(pen)
    assert len(orc.eigenvalues) == 1 and orc.n_infinite == 1
    assert orc.eigenvalues[0] == pytest.approx(0.5)
    v = orc.right[:, 0]
    assert np.allclose(v / v[0], [1, 0.5])


def test_oracle_plate_matches_dense_eig():
    pen, _ = cross_plate(CrossGeometry(6, 0, 0, 0, 0, 1 / 6))
    assert pen.m == 25
    orc = oracle_full_spectrum(pen)
    ref = np.linalg.eigvalsh(pen.A_dense.real)
    assert np.allclose(np.sort(orc.eigenvalues.real), ref)


def test_oracle_completeness_and_residuals(rng):
    pen = random_pencil(rng, 15, 9, complex_=True)
    orc = oracle_full_spectrum(pen)
    assert len(orc.eigenvalues) == pen.rank_E
    for lam, v, w in orc:
        r, l = residual(pen, lam, v, w)
        assert r <= 1e-10 and l <= 1e-10


def test_oracle_not_solvable():
    E = np.diag([1.0, 0.0, 0.0])
    A = np.array([[1.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    with pytest.raises(NotSolvable):
        oracle_full_spectrum(ProjectionPencil(E, A))


# -- participation ratio -------------------------------------------------------

def test_rho_infinite_for_perfect_subspace():
    pen = ProjectionPencil(np.eye(3), np.diag([1.0, 2.0, 3.0]))
    pair = normalize_pair(col(1, 0, 0), col(1, 0, 0), pen)
    e1 = np.array([1.0, 0, 0])
    assert np.isinf(participation_ratio(e1, e1, projectors(pair, pen), pen))
    assert np.isinf(participation_ratio_classical(e1, e1, 1))


def test_rho_matches_classical(rng):
    m, n = 8, 3
    A = rng.standard_normal((m, m))
    pen = ProjectionPencil(np.eye(m), A)
    pair = canonical_pair(m, n)
    v, w = crandn(rng, m), crandn(rng, m)
    g = participation_ratio(v, w, projectors(pair, pen), pen)
    c = participation_ratio_classical(v, w, n)
    assert abs(g - c) <= 1e-12 * abs(c)


# -- residual ------------------------------------------------------------------

def test_residual_generic_and_perturbed(rng):
    pen = random_pencil(rng, 10, 10)
    orc = oracle_full_spectrum(pen)
    lam, v, w = next(iter(orc))
    assert residual(pen, lam, v)[0] <= 1e-10
    assert residual(pen, lam, crandn(rng, 10))[0] > 1e-3
    r = residual(pen, lam + 1e-6, v)[0]
    expect = 1e-6 * np.linalg.norm(v) / (pen.norm_A + abs(lam) * pen.norm_E)
    assert r == pytest.approx(expect, rel=0.05)


# -- serialization -------------------------------------------------------------

def test_save_load_round_trip(tmp_path, rng):
    pen = random_pencil(rng, 7, 4, complex_=True, sparse=True)
    save_pencil(tmp_path, pen, {"note": "x"})
    back, manifest = load_pencil(tmp_path)
    assert manifest["dimension"] == 7 and manifest["rank_E"] == 4
    assert manifest["schema_version"] == 1 and manifest["note"] == "x"
    assert abs(back.A - pen.A).max() == 0 and abs(back.E - pen.E).max() == 0
    json.dumps(manifest)


def test_subspace_pair_shapes():
    pair = canonical_pair(5, 2)
    assert isinstance(pair, SubspacePair) and pair.n == 2 and pair.m == 5
