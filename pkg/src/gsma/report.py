"""
Solver options, per-iteration convergence reports and order estimation.
"""

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import Diverged, InsufficientData, MaxIterations

UPDATE_POLICIES = ("none", "full-eigenvector", "zeroed-static")

# |dlam| entries below ORDER_FLOOR * (1 + |lam|) are treated as roundoff by
# the order fit; double precision noise sits near 1e-15 relative
ORDER_FLOOR = 1e-13
H_FORMS = ("anticommutator", "qa", "aq")


@dataclass(frozen=True)
class SolverOptions:
    """
    Knobs shared by all iterations.

    Parameters
    ----------
    tol : float
        Converged when ``|dlam| <= tol * (1 + |lam|)``.
    max_iter : int
    divergence_window : int
        Number of consecutive growing ``|dlam|`` steps that count as
        divergence.
    subspace_update : str
        One of ``none``, ``full-eigenvector``, ``zeroed-static``. Only used
        by the subspace-updating algorithms.
    h_form : str
        Correction used in the shifted operator: ``qa`` (default),
        ``aq`` or ``anticommutator``.
    backend : str
        ``dense``, ``smw`` or ``auto`` (smw for sparse pencils above the
        dense limit).
    """
    tol: float = 1e-10
    max_iter: int = 50
    divergence_window: int = 5
    subspace_update: str = "full-eigenvector"
    h_form: str = "qa"
    backend: str = "auto"

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.divergence_window < 1:
            raise ValueError("divergence_window must be at least 1")
        if self.subspace_update not in UPDATE_POLICIES:
            raise ValueError(f"unknown subspace_update {self.subspace_update!r}")
        if self.h_form not in H_FORMS:
            raise ValueError(f"unknown h_form {self.h_form!r}")
        if self.backend not in ("dense", "smw", "auto"):
            raise ValueError(f"unknown backend {self.backend!r}")

    def with_(self, **kw):
        return replace(self, **kw)

    @property
    def confirm_residual(self):
        """Residual that confirms convergence when a shift turns singular."""
        return max(10 * self.tol, 1e-10)


@dataclass
class Iterate:
    iteration: int
    mode: int
    lam: complex
    dlam: float
    residual: float
    rho: complex


def _num(x):
    """JSON-safe float (non-finite values become None)."""
    x = float(x)
    return x if math.isfinite(x) else None


@dataclass
class ConvergenceReport:
    """History of one run; ``iterates`` has one row per mode and step."""
    algorithm: str
    modes: int = 1
    iterates: list = field(default_factory=list)
    status: str = "running"
    order_fit: float = None
    message: str = ""

    def add(self, iteration, mode, lam, dlam, residual=np.nan, rho=np.nan):
        self.iterates.append(Iterate(iteration, mode, complex(lam),
                                     float(dlam), float(residual),
                                     complex(rho)))

    def rows(self, mode=0):
        return [it for it in self.iterates if it.mode == mode]

    def lams(self, mode=0):
        return np.array([it.lam for it in self.rows(mode)])

    def dlams(self, mode=0):
        return np.array([it.dlam for it in self.rows(mode)])

    def errors(self, reference, mode=0):
        return np.abs(self.lams(mode) - reference)

    @property
    def n_iter(self):
        return max((it.iteration for it in self.iterates), default=0)

    def to_dict(self):
        rows = []
        for it in self.iterates:
            rows.append({
                "iter": it.iteration, "mode": it.mode,
                "re": it.lam.real, "im": it.lam.imag,
                "dlam": _num(it.dlam), "residual": _num(it.residual),
                "rho_re": _num(it.rho.real), "rho_im": _num(it.rho.imag),
            })
        return {"algorithm": self.algorithm, "modes": self.modes,
                "status": self.status, "message": self.message,
                "order_fit": None if self.order_fit is None
                else _num(self.order_fit),
                "iterates": rows}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


class Monitor:
    """Convergence and divergence bookkeeping for one or more modes."""

    def __init__(self, opts, report, modes=1):
        self.opts = opts
        self.report = report
        self.growth = [0] * modes
        self.last = [np.nan] * modes

    def converged(self, dlams, lams):
        tol = self.opts.tol
        return all(d <= tol * (1 + abs(l)) for d, l in zip(dlams, lams))

    def check(self, iteration, dlams, lams):
        """Return True when converged; raise on divergence or budget."""
        if self.converged(dlams, lams):
            self.report.status = "converged"
            return True
        for k, d in enumerate(dlams):
            if d > self.last[k]:
                self.growth[k] += 1
            else:
                self.growth[k] = 0
            self.last[k] = d
            if self.growth[k] >= self.opts.divergence_window:
                self.report.status = "diverged"
                self.report.message = (
                    f"|dlam| grew for {self.growth[k]} consecutive steps")
                raise Diverged(self.report.message, self.report)
        if iteration >= self.opts.max_iter:
            self.report.status = "max-iterations"
            self.report.message = f"no convergence in {iteration} iterations"
            raise MaxIterations(self.report.message, self.report)
        return False

    def finish(self):
        fits = []
        for k in range(self.report.modes):
            lams = self.report.lams(k)
            if not len(lams):
                continue
            try:
                floor = ORDER_FLOOR * (1 + abs(lams[-1]))
                fits.append(convergence_order_estimate(
                    self.report.dlams(k)[1:], floor=floor))
            except InsufficientData:
                pass
        self.report.order_fit = min(fits) if fits else None


def convergence_order_estimate(errors, window=4, floor=0.0):
    """
    Empirical order of convergence.

    Least-squares slope of ``log e[j+1]`` against ``log e[j]`` over the
    last `window` entries of the strictly decreasing tail of `errors`
    that stays above `floor`.

    Parameters
    ----------
    errors : array_like or ConvergenceReport
        Error magnitudes, or a report whose ``|dlam|`` column is used.
    window : int
    floor : float
        Entries at or below this level are treated as roundoff.

    Raises
    ------
    InsufficientData
        Fewer than `window` (and fewer than 4) usable entries.
    """
    if isinstance(errors, ConvergenceReport):
        lams = errors.lams()
        if floor == 0.0 and len(lams):
            floor = ORDER_FLOOR * (1 + abs(lams[-1]))
        errors = errors.dlams()[1:]
    e = np.abs(np.asarray(errors, dtype=float))
    e = e[np.isfinite(e)]
    e = e[: np.argmax(e <= floor)] if np.any(e <= floor) else e
    # strictly decreasing tail
    start = len(e) - 1
    while start > 0 and e[start - 1] > e[start]:
        start -= 1
    tail = e[start:]
    need = max(window, 4)
    if len(tail) < need:
        raise InsufficientData(
            f"need {need} decreasing error entries, have {len(tail)}")
    tail = np.log(tail[-window:])
    x, y = tail[:-1], tail[1:]
    slope = np.polyfit(x, y, 1)[0]
    return float(slope)


def report_from_dict(d):
    rep = ConvergenceReport(d["algorithm"], d.get("modes", 1),
                            status=d["status"], order_fit=d.get("order_fit"),
                            message=d.get("message", ""))
    for r in d["iterates"]:
        nan = float("nan")
        rep.add(r["iter"], r["mode"], complex(r["re"], r["im"]),
                nan if r["dlam"] is None else r["dlam"],
                nan if r["residual"] is None else r["residual"],
                complex(nan if r["rho_re"] is None else r["rho_re"],
                        nan if r["rho_im"] is None else r["rho_im"]))
    return rep
