import numpy as np
import pytest
import scipy.sparse as sp

from gsma import linalg
from gsma.errors import RegularizationFailed
from gsma.generalized import DenseReduction, ShiftedOperator, h_general
from gsma.pencil import ProjectionPencil, normalize_pair, oracle_full_spectrum
from gsma.problems import CrossGeometry, cross_plate, random_pencil
from gsma.smw import (SmwReduction, choose_regularizers, h_smw, smw_apply,
                      smw_factor)

from conftest import crandn, random_pair, rel


def sparse_case(rng, m=12, r=8, n=2):
    pen = random_pencil(rng, m, r, complex_=True, sparse=True)
    return pen, random_pair(rng, pen, n)


def test_no_regularizer_when_regular(rng):
    pen, _ = sparse_case(rng)
    eta, phi = choose_regularizers(pen, 0.3 + 0.1j)
    assert eta.nnz == 0 and phi.nnz == 0


def test_regularizer_at_exact_eigenvalue():
    A = sp.csc_matrix(np.array([[2.0, 1, 0, 0], [1, 3, 1, 0],
                                [0, 1, 4, 1], [0, 0, 1, 5]]))
    pen = ProjectionPencil(sp.identity(4, format="csc"), A)
    lam = float(np.linalg.eigvalsh(A.toarray())[1])
    eta, phi = choose_regularizers(pen, lam)
    assert eta.nnz == 1 and phi.nnz == 1
    B = lam * np.eye(4) - A.toarray() + (eta @ phi.conj().T).toarray()
    assert np.linalg.cond(B) < 1e12


def test_rank_two_deficiency_fails():
    pen = ProjectionPencil(sp.identity(4, format="csc"),
                           sp.diags([1.0, 1.0, 2.0, 3.0], format="csc"))
    with pytest.raises(RegularizationFailed):
        choose_regularizers(pen, 1.0)


@pytest.mark.parametrize("form,k", [("anticommutator", 3), ("qa", 2),
                                    ("aq", 2)])
def test_core_size(form, k):
    rng = np.random.default_rng(0)
    pen, pair = sparse_case(rng, m=4, r=4, n=1)
    F = smw_factor(pen, pair, 0.5, form=form)
    assert F.rank == k and F.core.n == k


@pytest.mark.parametrize("form", ["anticommutator", "qa", "aq"])
def test_apply_matches_dense(rng, form):
    pen, pair = sparse_case(rng, m=12, r=8, n=2)
    lam = 0.2 - 0.4j
    F = smw_factor(pen, pair, lam, form=form)
    K = ShiftedOperator(pen, pair, lam, form)
    b = crandn(rng, 12, 3)
    assert rel(smw_apply(F, b), K.solve(b)) <= 1e-10
    assert rel(smw_apply(F, b, adjoint=True), K.solve_adjoint(b)) <= 1e-10


def test_apply_zero_rhs(rng):
    pen, pair = sparse_case(rng)
    F = smw_factor(pen, pair, 1.0)
    assert not np.any(smw_apply(F, np.zeros(pen.m)))


def test_h_matches_dense(rng):
    pen, pair = sparse_case(rng, m=20, r=14, n=2)
    for lam in (0.1, 1.5 + 0.3j):
        assert rel(h_smw(pen, pair, lam), h_general(pen, pair, lam)) <= 1e-10


def test_h_invariant_to_regularizer_choice():
    # at an eigenvalue the regularizer is forced; nudging the shift off it
    # removes the need, and H must stay continuous between the two
    pen, _ = cross_plate(CrossGeometry(6, 2, 2, 2, 2, 0.1))
    orc = oracle_full_spectrum(pen)
    lam = orc.eigenvalues[np.argsort(orc.eigenvalues.real)[3]].real
    v = np.cos(np.arange(pen.m) / 3.0)
    pair = normalize_pair(v, v, pen)
    eta, _ = choose_regularizers(pen, lam)
    assert eta.nnz == 1
    H0 = h_smw(pen, pair, lam)
    H1 = h_smw(pen, pair, lam + 1e-7)
    assert rel(H0, H1) <= 1e-5
    assert rel(H0, h_general(pen, pair, lam)) <= 1e-8


def test_plate_base_stays_sparse():
    pen, _ = cross_plate(CrossGeometry(32, 0, 0, 0, 0, 1 / 32))
    assert pen.m == 961
    v = np.ones(pen.m)
    pair = normalize_pair(v, v, pen)
    F = smw_factor(pen, pair, 3.0)
    assert sp.issparse(F.base_matrix)
    assert F.base_matrix.nnz <= 5 * pen.m
    assert F.U.shape == (961, 3)


def test_reduction_never_densifies(rng):
    pen, pair = sparse_case(rng, m=40, r=30, n=2)
    linalg.reset_counters()
    red = SmwReduction(pen, pair)
    ev = red.at(0.5 + 0.5j)
    ev.recover(np.ones(2), np.ones(2))
    assert linalg.COUNTERS["densify"] == 0
    assert max(linalg.DENSE_FACTOR_SIZES, default=0) <= 2 * pair.n + 1
    dense = DenseReduction(pen, pair, "anticommutator").at(0.5 + 0.5j)
    assert rel(ev.matrix, dense.matrix) <= 1e-10
