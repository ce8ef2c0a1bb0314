import numpy as np
import pytest

from gsma.composite import (CompositeModel, Interconnection, Subsystem,
                            assemble_monolithic, composite_evaluation,
                            composite_h, embed_pairs, load_composite,
                            recover_composite_eigenvector, save_composite,
                            subsystem_h_terms)
from gsma.errors import DimensionMismatch, InterconnectionSingular
from gsma.generalized import algorithm3, algorithm4, reduced_matrix
from gsma.pencil import oracle_full_spectrum, residual
from gsma.problems import (OMEGA0, delta_components, electromech_init,
                           synthetic_composite)
from gsma.selectors import Nearest

from conftest import rel


@pytest.fixture(scope="module")
def small():
    return synthetic_composite(seed=1, l=3, states_per=4, io_per=1)


def one_state(a, b=1.0, c=1.0, d=0.0):
    return Subsystem([[1.0]], [[a]], [[b]], [[c]], [[d]])


# -- assembly ------------------------------------------------------------------

def test_monolithic_layout(small):
    pen = assemble_monolithic(small)
    ns, p, q = small.n_states, small.interconnection.io, small.interconnection.algebraic
    assert pen.m == ns + 2 * p + q == small.dimension
    E = pen.E_dense
    assert np.allclose(E[ns:, :], 0) and np.allclose(E[:, ns:], 0)
    A = pen.A_dense
    sl = small.slices()
    assert np.allclose(A[sl[2], sl[2]], np.eye(p))
    assert np.allclose(A[sl[3], sl[3]], -small.interconnection.J22)


def test_two_scalar_subsystems_closed_form():
    # x1' = -x1 + u1, x2' = -2 x2 + u2, y = x, u1 = y2, u2 = y1
    subs = [one_state(-1.0), one_state(-2.0)]
    ic = Interconnection([[0, 1.0], [1.0, 0]], np.zeros((2, 0)),
                         np.zeros((0, 2)), np.zeros((0, 0)))
    orc = oracle_full_spectrum(assemble_monolithic(CompositeModel(subs, ic)))
    ref = np.linalg.eigvals(np.array([[-1.0, 1.0], [1.0, -2.0]]))
    assert np.allclose(np.sort(orc.eigenvalues.real), np.sort(ref))


def test_uncoupled_subsystems():
    m = synthetic_composite(seed=2, l=3, states_per=3, io_per=0)
    assert m.interconnection.io == 0
    orc = oracle_full_spectrum(assemble_monolithic(m))
    ref = np.concatenate([np.linalg.eigvals(s.A) for s in m.subsystems])
    assert np.allclose(np.sort_complex(orc.eigenvalues), np.sort_complex(ref))


def test_single_subsystem_spectrum():
    m = synthetic_composite(seed=3, l=1, states_per=3, io_per=1)
    s, ic = m.subsystems[0], m.interconnection
    # eliminate the network by hand: x_I = (J11 - D - J12 J22^-1 J21)^-1 C x
    S = ic.J11 - s.D - ic.J12 @ np.linalg.solve(ic.J22, ic.J21)
    Aeff = s.A + s.B @ np.linalg.solve(S, s.C)
    orc = oracle_full_spectrum(assemble_monolithic(m))
    assert np.allclose(np.sort_complex(orc.eigenvalues),
                       np.sort_complex(np.linalg.eigvals(Aeff)))


def test_dimension_checks():
    with pytest.raises(DimensionMismatch):
        Subsystem(np.eye(2), np.eye(2), np.ones((2, 1)), np.ones((2, 2)),
                  np.ones((1, 1)))
    with pytest.raises(DimensionMismatch):
        CompositeModel([one_state(-1.0)],
                       Interconnection(np.eye(2), np.zeros((2, 0)),
                                       np.zeros((0, 2)), np.zeros((0, 0))))


# -- reduced matrix two ways ---------------------------------------------------

@pytest.mark.parametrize("seed", range(3))
def test_composite_matches_monolithic(seed):
    m = synthetic_composite(seed=seed, l=4, states_per=4, io_per=2)
    pairs = electromech_init(m)
    lam = 0.3 + 5.0j
    pen = assemble_monolithic(m)
    mono = reduced_matrix(pen, embed_pairs(m, pairs), lam)
    assert rel(composite_h(m, pairs, lam), mono) <= 1e-10


def test_opting_out_subsystem(small):
    pairs = electromech_init(small)
    pairs[1] = None
    lam = 2.0j
    pen = assemble_monolithic(small)
    M = composite_h(small, pairs, lam)
    assert M.shape == (2, 2)
    assert rel(M, reduced_matrix(pen, embed_pairs(small, pairs), lam)) <= 1e-10


def test_subsystem_terms_shapes(small):
    s = small.subsystems[0]
    t = subsystem_h_terms(s, electromech_init(small)[0], 1.0j)
    assert t.H_A.shape == (1, 1) and t.H_B.shape == (1, s.io)
    assert t.H_C.shape == (s.io, 1) and t.H_D.shape == (s.io, s.io)


def test_recovered_vectors_solve_monolithic(small):
    pen = assemble_monolithic(small)
    orc = oracle_full_spectrum(pen)
    i = int(np.argmax(orc.eigenvalues.imag))
    lam = orc.eigenvalues[i]
    pairs = electromech_init(small)
    ev = composite_evaluation(small, pairs, lam)
    # at an eigenvalue, A_r + H(lam) has lam as an eigenvalue
    mu, X = np.linalg.eig(ev.matrix)
    k = int(np.argmin(np.abs(mu - lam)))
    assert abs(mu[k] - lam) <= 1e-8 * abs(lam)
    mu_l, Y = np.linalg.eig(ev.matrix.conj().T)
    kl = int(np.argmin(np.abs(mu_l - np.conj(lam))))
    v, w = recover_composite_eigenvector(small, pairs, lam, X[:, k], Y[:, kl])
    r, l = residual(pen, lam, v, w)
    assert r <= 1e-9 and l <= 1e-9


def test_swing_relation_in_recovered_mode(small):
    pen = assemble_monolithic(small)
    est, _ = algorithm4(small, electromech_init(small), Nearest(1.0j * 2 * np.pi))
    lam, v = est.lam, est.v
    so = small.state_offsets[:-1]
    # delta' = 120 pi omega  =>  lam v_delta = 120 pi v_omega
    assert np.allclose(lam * v[so], OMEGA0 * v[so + 1], rtol=1e-8,
                       atol=1e-10 * np.abs(v).max())
    assert residual(pen, lam, est.v, est.w)[0] <= 1e-9


def test_composite_iterations_agree_with_monolithic(small):
    pairs = electromech_init(small)
    pen = assemble_monolithic(small)
    e_c, r_c = algorithm3(small, pairs, Nearest(2j * np.pi))
    e_m, r_m = algorithm3(pen, embed_pairs(small, pairs), Nearest(2j * np.pi))
    n = min(len(r_c.lams()), len(r_m.lams()))
    assert np.allclose(r_c.lams()[:n], r_m.lams()[:n], atol=1e-8)
    assert abs(e_c.lam - e_m.lam) <= 1e-9 * abs(e_c.lam)


def test_delta_components(small):
    v = np.arange(small.dimension)
    assert np.array_equal(delta_components(small, v), small.state_offsets[:-1])


# -- interconnection failures and files ----------------------------------------

def test_interconnection_singular():
    # with no relevant states the bordered matrix is the scalar
    # J11 - D - C (lam - A)^-1 B = 1.5 - 1 - 1/(lam + 1), zero at lam = 1
    subs = [one_state(-1.0, d=1.0)]
    ic = Interconnection([[1.5]], np.zeros((1, 0)), np.zeros((0, 1)),
                         np.zeros((0, 0)))
    m = CompositeModel(subs, ic)
    composite_h(m, [None], 0.5)
    with pytest.raises(InterconnectionSingular):
        composite_h(m, [None], 1.0)


def test_save_load_round_trip(tmp_path, small):
    save_composite(tmp_path, small, {"seed": 1})
    back, manifest = load_composite(tmp_path)
    assert manifest["seed"] == 1 and manifest["kind"] == "composite"
    assert back.l == small.l and back.labels == small.labels
    a, b = assemble_monolithic(back), assemble_monolithic(small)
    assert abs(a.A - b.A).max() <= 1e-15 * abs(b.A).max()
    pairs = electromech_init(small)
    lam = 1.0 + 3.0j
    assert rel(composite_h(back, pairs, lam), composite_h(small, pairs, lam)) <= 1e-12
