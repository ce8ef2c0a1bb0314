"""
Cross-module identity suites on seeded random instances.

Each suite computes one quantity along two independent routes and reports
the largest relative deviation. ``fault`` perturbs one route (relative
size) to show that a suite can fail.
"""

from dataclasses import asdict, dataclass

import numpy as np

from . import linalg
from .classical import PartitionedSystem, h_classical
from .composite import assemble_monolithic, composite_h, embed_pairs
from .direct import build_direct_iterate, calN_bar
from .generalized import h_general, invariance_shift, reduced_matrix
from .pencil import ProjectionPencil, canonical_pair, normalize_pair
from .problems import electromech_init, random_pencil, synthetic_composite
from .smw import h_smw


@dataclass
class SuiteResult:
    name: str
    instances: int
    max_deviation: float
    tolerance: float
    audit: str = "ok"

    def __post_init__(self):
        self.max_deviation = float(self.max_deviation)

    @property
    def passed(self):
        return bool(self.max_deviation <= self.tolerance and self.audit == "ok")

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d


def _nudge(X, fault):
    if not fault:
        return X
    X = np.array(X, dtype=np.complex128)
    X.flat[0] += fault * max(1.0, np.linalg.norm(X))
    return X


def _shift(rng):
    return complex(rng.uniform(-2, 2), rng.uniform(-2, 2))


def _pair(rng, pencil, n):
    m = pencil.m
    R = rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
    L = rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
    return normalize_pair(R, L, pencil)


def classical_equivalence(seed=0, instances=50, fault=0.0):
    """Generalized H under the canonical embedding vs the partitioned H."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        m = int(rng.integers(2, 21))
        n = int(rng.integers(1, min(4, m - 1) + 1))
        A = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        lam = _shift(rng)
        Hc = h_classical(PartitionedSystem.from_matrix(A, n), lam)
        pen = ProjectionPencil(np.eye(m), A)
        Hg = _nudge(h_general(pen, canonical_pair(m, n), lam), fault)
        worst = max(worst, np.linalg.norm(Hg - Hc) / np.linalg.norm(A))
    return SuiteResult("classical-equivalence", instances, worst, 1e-12)


def invariance(seed=0, instances=50, fault=0.0):
    """``A_rr + H`` unchanged by adding ``(I - E) L`` to either basis."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        m = int(rng.integers(4, 21))
        r = int(rng.integers(2, m))
        n = int(rng.integers(1, min(3, r) + 1))
        pen = random_pencil(rng, m, r, complex_=True)
        pair = _pair(rng, pen, n)
        lam = _shift(rng)
        base = reduced_matrix(pen, pair, lam)
        moved = invariance_shift(pair, pen, rng.standard_normal((m, n)), "right")
        moved = invariance_shift(moved, pen, rng.standard_normal((m, n)), "left")
        other = _nudge(reduced_matrix(pen, moved, lam), fault)
        worst = max(worst, np.linalg.norm(other - base)
                    / (1 + np.linalg.norm(base)))
    return SuiteResult("invariance", instances, worst, 1e-10)


def _direct_instances(seed, instances):
    rng = np.random.default_rng(seed)
    for _ in range(instances):
        m = int(rng.integers(4, 21))
        r = int(rng.integers(2, m))
        n = int(rng.integers(1, min(3, r) + 1))
        pen = random_pencil(rng, m, r, complex_=True)
        yield rng, pen, _pair(rng, pen, n), _shift(rng)


def calN_identity(seed=0, instances=50, fault=0.0):
    """``calM^{-1} + lam I`` vs the direct inverse of ``L^H E [A - lam(E - Q)]^{-1} E R``."""
    worst = 0.0
    for _, pen, pair, lam in _direct_instances(seed, instances):
        D = build_direct_iterate(pen, pair, lam, need_W=False)
        other = _nudge(calN_bar(pen, pair, lam), fault)
        worst = max(worst, np.linalg.norm(D.calN - other)
                    / (1 + np.linalg.norm(D.calN)))
    return SuiteResult("calN-identity", instances, worst, 1e-10)


def h_calN_identity(seed=0, instances=50, fault=0.0):
    """``H(lam)`` vs ``calN - A_rr``."""
    worst = 0.0
    for _, pen, pair, lam in _direct_instances(seed + 1, instances):
        D = build_direct_iterate(pen, pair, lam, need_W=False)
        arr = pair.left.conj().T @ (pen.A @ pair.right)
        H = _nudge(h_general(pen, pair, lam), fault)
        worst = max(worst, np.linalg.norm(H - (D.calN - arr))
                    / (1 + np.linalg.norm(D.calN)))
    return SuiteResult("H-calN-identity", instances, worst, 1e-10)


def smw_path(seed=0, instances=20, fault=0.0):
    """Sparse update path vs dense H, with an audit of dense work."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    audit = "ok"
    for _ in range(instances):
        m = int(rng.integers(6, 61))
        r = int(rng.integers(2, m))
        n = int(rng.integers(1, min(4, r) + 1))
        pen = random_pencil(rng, m, r, complex_=True, sparse=True)
        pair = _pair(rng, pen, n)
        lam = _shift(rng)
        linalg.reset_counters()
        Hs = _nudge(h_smw(pen, pair, lam), fault)
        if linalg.COUNTERS["densify"] or any(
                k > 2 * n + 1 for k in linalg.DENSE_FACTOR_SIZES):
            audit = "dense work on the sparse path"
        Hd = h_general(pen, pair, lam, "anticommutator")
        worst = max(worst, np.linalg.norm(Hs - Hd) / (1 + np.linalg.norm(Hd)))
    return SuiteResult("smw-path", instances, worst, 1e-9, audit)


def composite_two_path(seed=0, instances=10, fault=0.0):
    """Composite H vs the monolithic pencil under the block embedding."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        model = synthetic_composite(
            seed=int(rng.integers(2**31)), l=int(rng.integers(3, 11)),
            states_per=int(rng.integers(2, 7)), io_per=int(rng.integers(1, 3)))
        pairs = electromech_init(model)
        lam = 2j * np.pi * rng.uniform(0.2, 3.0) + rng.uniform(-0.5, 0.5)
        Hc = _nudge(composite_h(model, pairs, lam), fault)
        Hm = reduced_matrix(assemble_monolithic(model),
                            embed_pairs(model, pairs), lam)
        worst = max(worst, np.linalg.norm(Hc - Hm) / (1 + np.linalg.norm(Hm)))
    return SuiteResult("composite-two-path", instances, worst, 1e-10)


SUITES = {
    "classical": classical_equivalence,
    "invariance": invariance,
    "calN": calN_identity,
    "H-calN": h_calN_identity,
    "smw": smw_path,
    "composite": composite_two_path,
}


def run_suites(names=None, seed=0, fault=0.0):
    names = list(SUITES) if names is None else names
    return [SUITES[name](seed=seed, fault=fault) for name in names]
