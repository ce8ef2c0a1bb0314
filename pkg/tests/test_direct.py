import numpy as np
import pytest

from gsma.classical import PartitionedSystem, algorithm2
from gsma.direct import (algorithm5, algorithm6, algorithm7, algorithm8,
                         build_direct_iterate, calN_bar)
from gsma.errors import ShiftSingular
from gsma.generalized import algorithm3, algorithm4, reduced_matrix
from gsma.pencil import (ProjectionPencil, canonical_pair, normalize_pair,
                         oracle_full_spectrum, residual)
from gsma.problems import perturbed_pair, random_pencil
from gsma.report import SolverOptions
from gsma.selectors import (Candidates, Context, Index, Nearest, Objective,
                            Overlap, pair_modes, select_mode_objective)

from conftest import crandn, pencil_and_pair, rel


# -- calM / calN ---------------------------------------------------------------

@pytest.mark.parametrize("seed", range(4))
def test_calN_equals_reduced_matrix(seed):
    rng = np.random.default_rng(seed)
    pen, pair = pencil_and_pair(rng, m=12, r=8, n=2)
    lam = 0.4 + 0.2j
    it = build_direct_iterate(pen, pair, lam)
    assert rel(it.calN, reduced_matrix(pen, pair, lam)) <= 1e-10
    assert rel(calN_bar(pen, pair, lam), it.calN) <= 1e-10


def test_mu_maps_to_candidate_eigenvalues(rng):
    pen, pair = pencil_and_pair(rng, m=9, r=6, n=2)
    lam = -0.3
    it = build_direct_iterate(pen, pair, lam)
    mu = np.linalg.eigvals(it.calM)
    lam_new = np.sort_complex(lam + 1 / mu)
    ref = np.sort_complex(np.linalg.eigvals(reduced_matrix(pen, pair, lam)))
    assert np.allclose(lam_new, ref)


def test_w_is_adjoint_solution(rng):
    pen, pair = pencil_and_pair(rng, m=8, r=5, n=1)
    lam = 0.7j
    it = build_direct_iterate(pen, pair, lam)
    K = pen.A_dense - lam * pen.E_dense
    assert np.allclose(it.Wh @ K, pair.left.conj().T @ pen.E_dense)
    assert np.allclose(K @ it.V, pen.E_dense @ pair.right)


def test_shift_on_eigenvalue_is_reported(rng):
    pen = random_pencil(rng, 6, 6)
    lam = oracle_full_spectrum(pen).eigenvalues[0]
    with pytest.raises(ShiftSingular):
        build_direct_iterate(pen, canonical_pair(6, 1), lam.real if
                             abs(lam.imag) < 1e-14 else lam)


# -- equivalence with the fixed-subspace formulations --------------------------

def _start(rng, m=14, r=9, size=0.1):
    pen = random_pencil(rng, m, r)
    orc = oracle_full_spectrum(pen)
    i = int(np.argmin(np.abs(orc.eigenvalues)))
    return pen, perturbed_pair(rng, pen, orc.right[:, i], orc.left[:, i], size)


@pytest.mark.parametrize("pair_of", [(algorithm3, algorithm5),
                                     (algorithm4, algorithm6)])
def test_direct_sequence_matches(rng, pair_of):
    pen, pair = _start(rng)
    fixed, direct = pair_of
    e1, r1 = fixed(pen, pair, Nearest())
    e2, r2 = direct(pen, pair, Nearest())
    n = min(len(r1.lams()), len(r2.lams()))
    assert n >= 2
    # identical until the shift gets close to the eigenvalue, where the
    # direct route may stop one step early
    assert np.allclose(r1.lams()[:n], r2.lams()[:n], rtol=0, atol=1e-8)
    assert abs(e1.lam - e2.lam) <= 1e-9 * (1 + abs(e1.lam))


def test_algorithm6_fewer_steps_than_algorithm5(rng):
    pen, pair = _start(rng, m=20, r=14, size=0.3)
    opts = SolverOptions(max_iter=200)
    _, r5 = algorithm5(pen, pair, Nearest(), opts)
    _, r6 = algorithm6(pen, pair, Nearest(), opts)
    assert r6.n_iter <= r5.n_iter


def test_algorithm5_residual(rng):
    pen, pair = _start(rng)
    est, rep = algorithm5(pen, pair, Nearest())
    assert rep.status == "converged"
    r, l = residual(pen, est.lam, est.v, est.w)
    assert r <= 1e-9 and l <= 1e-9


def test_shift_hit_counts_as_converged(rng):
    pen = random_pencil(rng, 7, 7)
    orc = oracle_full_spectrum(pen)
    pair = normalize_pair(orc.right[:, 2], orc.left[:, 2], pen)
    est, rep = algorithm6(pen, pair)
    assert rep.status == "converged"
    assert abs(est.lam - orc.eigenvalues[2]) <= 1e-10 * (1 + abs(est.lam))


# -- multi-mode ----------------------------------------------------------------

def test_algorithm7_matches_algorithm2():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((7, 7)) * 0.3 + np.diag([1.0, 4.0, 9, 10, 11, 12, 13])
    e2, r2 = algorithm2(PartitionedSystem.from_matrix(A, 2), [Index(0), Index(1)])
    e7, r7 = algorithm7(ProjectionPencil(np.eye(7), A), canonical_pair(7, 2),
                        [Index(0), Index(1)])
    for a, b in zip(e2, e7):
        assert abs(a.lam - b.lam) <= 1e-9 * (1 + abs(a.lam))


def test_algorithm8_two_modes(rng):
    pen = random_pencil(rng, 16, 12)
    orc = oracle_full_spectrum(pen)
    idx = np.argsort(np.abs(orc.eigenvalues))[:2]
    R = orc.right[:, idx] + 0.05 * crandn(rng, 16, 2)
    L = orc.left[:, idx] + 0.05 * crandn(rng, 16, 2)
    pair = normalize_pair(R, L, pen)
    ests, rep = algorithm8(pen, pair, [Nearest(orc.eigenvalues[idx[0]]),
                                       Nearest(orc.eigenvalues[idx[1]])])
    assert rep.status == "converged"
    for e, i in zip(ests, idx):
        assert abs(e.lam - orc.eigenvalues[i]) <= 1e-8 * (1 + abs(e.lam))
        assert residual(pen, e.lam, e.v, e.w)[0] <= 1e-8


# -- selectors -----------------------------------------------------------------

def test_pair_modes_identity_and_swap():
    I = np.eye(3)
    assert pair_modes([I[:, 0], I[:, 1]], I) == [0, 1]
    assert pair_modes([I[:, 1], I[:, 0]], I) == [1, 0]


def test_pair_modes_greedy_tie_break():
    # mode 0 overlaps both candidates equally; mode 1 prefers candidate 0
    # strongly, so the greedy pass gives candidate 0 to mode 1 first
    prev = [np.array([1.0, 1.0]), np.array([1.0, 0.0])]
    new = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert pair_modes(prev, new) == [1, 0]


def test_pair_modes_rejects_too_few():
    with pytest.raises(ValueError):
        pair_modes([np.ones(2), np.ones(2)], np.ones((2, 1)))


def test_select_objective_examples():
    I = np.eye(2)
    assert select_mode_objective([1, 0], I, I, I) == 0
    assert select_mode_objective([0, 1], I, I, I) == 1
    # equal overlap: lowest index
    assert select_mode_objective([1, 1], I, I, I) == 0
    # a basis change is taken into account
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert select_mode_objective([1, 0], I, swap, I) == 1


def test_selectors_on_candidates():
    c = Candidates(np.array([3.0, 1.0, 2.0 + 1j]), np.eye(3), np.eye(3))
    ctx = Context(0, None, None, np.eye(3))
    assert Index(0)(c, ctx) == 1
    assert Index(2)(c, ctx) == 0
    assert Nearest(2.1 + 1j)(c, ctx) == 2
    assert Objective([0, 0, 1])(c, ctx) == 2
    assert Overlap(initial=np.array([1.0, 0, 0]))(c, ctx) == 0
