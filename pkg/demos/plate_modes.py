"""
Two vibration modes of the cross-shaped plate, found from sign-pattern
guesses with the direct iterations.

Each guess pushes one pair of opposite arms in antiphase. The single-mode
runs (algorithms 5 and 6) use one guess at a time; the multi-mode runs
(algorithms 7 and 8) carry both guesses, in either column order. The
printout compares every result with the dense eigen-decomposition.

    python3 demos/plate_modes.py
"""

import numpy as np

from gsma.direct import algorithm5, algorithm6, algorithm7, algorithm8
from gsma.pencil import normalize_pair, oracle_full_spectrum
from gsma.problems import (PATTERNS, REFERENCE_CROSS, cross_plate,
                           cross_plate_initial_guess)
from gsma.selectors import Overlap


def overlap(a, b):
    return abs(np.vdot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b))


def main():
    pen, layout = cross_plate()
    orc = oracle_full_spectrum(pen)
    lams = orc.eigenvalues.real
    print(f"plate {REFERENCE_CROSS.to_dict()}: {pen.m} unknowns")
    print("lowest eigenvalues:", np.round(np.sort(lams)[:6], 4))

    def report(name, pattern, est, rep, k=0):
        i = int(np.argmin(np.abs(orc.eigenvalues - est.lam)))
        err = np.abs(rep.lams(k) - orc.eigenvalues[i])
        print(f"  {name:10s} {pattern:14s} lam = {est.lam.real:.10f}  "
              f"steps {rep.n_iter:2d}  overlap {overlap(est.v, orc.right[:, i]):.6f}")
        print("    errors:", " ".join(f"{e:.1e}" for e in err))

    guesses = {p: cross_plate_initial_guess(REFERENCE_CROSS, p, layout)
               for p in PATTERNS}

    print("\nsingle-mode iterations")
    for p, g in guesses.items():
        pair = normalize_pair(g, g, pen)
        for alg in (algorithm5, algorithm6):
            est, rep = alg(pen, pair)
            report(alg.__name__, p, est, rep)

    print("\nmulti-mode iterations (both column orders)")
    sels = [Overlap(initial=np.eye(2)[k]) for k in range(2)]
    for order in (PATTERNS, PATTERNS[::-1]):
        R = np.column_stack([guesses[p] for p in order])
        pair = normalize_pair(R, R, pen)
        for alg in (algorithm7, algorithm8):
            ests, rep = alg(pen, pair, sels)
            for k, (p, est) in enumerate(zip(order, ests)):
                report(alg.__name__, p, est, rep, k)


if __name__ == "__main__":
    main()
