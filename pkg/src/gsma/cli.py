"""
Command-line front end.

::

    gsma gen plate --core 6 --arms 10,6,8,5 --h 0.1 --out plate/
    gsma gen composite --seed 7 --l 10 --out comp/
    gsma solve plate --algorithm 6 --pattern up-vs-down --oracle --out run/
    gsma solve comp/ --algorithm 4 --selector objective:east-west
    gsma verify --seed 0

Exit codes: 0 success, 2 solver failure (divergence, iteration cap,
singular iterate), 3 input error, 4 identity-suite failure.
"""

import argparse
import csv
import json
import logging
import os
import sys
import time
from dataclasses import asdict, fields

import numpy as np

from . import linalg
from .classical import PartitionedSystem, algorithm1, algorithm2
from .composite import (assemble_monolithic, embed_pairs, load_composite,
                        save_composite)
from .direct import algorithm5, algorithm6, algorithm7, algorithm8
from .errors import GsmaError, ParseError, SolverError
from .generalized import algorithm3, algorithm4
from .pencil import (SCHEMA_VERSION, ProjectionPencil, canonical_pair,
                     load_pencil, normalize_pair, oracle_full_spectrum,
                     save_pencil)
from .problems import (OBJECTIVE_10, PATTERNS, CrossGeometry, cross_plate,
                       cross_plate_initial_guess, electromech_init,
                       grid_rows, random_pencil, square_fd_eigenvalues,
                       synthetic_composite)
from .report import SolverOptions
from .selectors import Index, Nearest, Objective, Overlap
from .verify import SUITES, run_suites

log = logging.getLogger("gsma")

EXIT_OK = 0
EXIT_SOLVER = 2
EXIT_INPUT = 3
EXIT_IDENTITY = 4

ALGORITHMS = {1: algorithm1, 2: algorithm2, 3: algorithm3, 4: algorithm4,
              5: algorithm5, 6: algorithm6, 7: algorithm7, 8: algorithm8}
MULTI = (2, 7, 8)
NAMED_OBJECTIVES = {"east-west": OBJECTIVE_10}


class InputError(GsmaError):
    """Bad command-line input or configuration."""


def _c(z):
    z = complex(z)
    return [z.real, z.imag]


# -- problems ------------------------------------------------------------------

class Problem:
    """What `solve` works on: a pencil or a composite model plus metadata."""

    def __init__(self, kind, params, pencil=None, model=None, geometry=None,
                 layout=None):
        self.kind = kind
        self.params = params
        self.pencil = pencil
        self.model = model
        self.geometry = geometry
        self.layout = layout

    @property
    def monolithic(self):
        if self.pencil is None:
            self.pencil = assemble_monolithic(self.model)
        return self.pencil


def _arms(text):
    try:
        arms = [int(a) for a in text.split(",")]
    except ValueError:
        raise InputError(f"--arms expects four integers, got {text!r}") from None
    if len(arms) != 4:
        raise InputError("--arms expects four integers: up,down,left,right")
    return arms


def _geometry(args):
    up, down, left, right = _arms(args.arms)
    try:
        return CrossGeometry(args.core, up, down, left, right, args.h)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _composite_params(args):
    return {"seed": args.seed, "l": args.l, "states_per": args.states,
            "io_per": args.io, "algebraic": args.buses}


def load_problem(args):
    src = args.source
    if src == "plate":
        g = _geometry(args)
        pencil, layout = cross_plate(g)
        return Problem("plate", {"geometry": g.to_dict()}, pencil,
                       geometry=g, layout=layout)
    if src == "composite":
        params = _composite_params(args)
        return Problem("composite", params,
                       model=synthetic_composite(**params))
    if src == "random":
        rng = np.random.default_rng(args.seed)
        pencil = random_pencil(rng, args.m, args.rank, complex_=args.complex,
                               sparse=args.sparse)
        return Problem("pencil", {"seed": args.seed, "m": args.m,
                                  "rank": args.rank}, pencil)
    if not os.path.isdir(src):
        raise InputError(f"{src!r} is neither a known problem nor a directory")
    path = os.path.join(src, "manifest.json")
    if not os.path.exists(path):
        raise InputError(f"no manifest.json in {src!r}")
    with open(path) as fh:
        manifest = json.load(fh)
    gen = manifest.get("generator", {})
    if manifest.get("kind") == "composite":
        model, _ = load_composite(src)
        return Problem("composite", {"files": src, "generator": gen},
                       model=model)
    pencil, _ = load_pencil(src)
    if gen.get("kind") == "plate":
        g = CrossGeometry(**gen["geometry"])
        _, layout = cross_plate(g)
        return Problem("plate", {"files": src, "generator": gen}, pencil,
                       geometry=g, layout=layout)
    return Problem("pencil", {"files": src, "generator": gen}, pencil)


# -- gen -----------------------------------------------------------------------

def cmd_gen(args):
    if args.kind == "plate":
        g = _geometry(args)
        pencil, _ = cross_plate(g)
        info = {"kind": "plate", "geometry": g.to_dict()}
        if pencil.m <= linalg.dense_limit():
            ev = np.sort(oracle_full_spectrum(pencil).eigenvalues.real)
            info["oracle_smallest"] = float(ev[0])
            if g.arms == (0, 0, 0, 0):
                N = g.core - 1
                closed = square_fd_eigenvalues(N, g.h)
                info["closed_form_smallest"] = float(closed[0])
                info["closed_form_max_deviation"] = float(
                    np.max(np.abs(ev - closed)))
        path = save_pencil(args.out, pencil, {"generator": info})
    elif args.kind == "composite":
        params = _composite_params(args)
        model = synthetic_composite(**params)
        info = {"kind": "composite", **params}
        path = save_composite(args.out, model, {"generator": info})
    else:
        rng = np.random.default_rng(args.seed)
        pencil = random_pencil(rng, args.m, args.rank, complex_=args.complex,
                               sparse=args.sparse)
        info = {"kind": "random", "seed": args.seed, "m": args.m,
                "rank": args.rank, "complex": args.complex,
                "sparse": args.sparse}
        path = save_pencil(args.out, pencil, {"generator": info})
    files = sorted(os.listdir(args.out))
    print(json.dumps({"schema_version": SCHEMA_VERSION, "manifest": path,
                      "files": files, "generator": info}, indent=2))
    return EXIT_OK


# -- solve ---------------------------------------------------------------------

def parse_selector(text):
    """``nearest[:re,im]``, ``overlap``, ``objective:<name|v1,v2,..>``, ``index:i``."""
    name, _, arg = text.partition(":")
    try:
        if name == "nearest":
            if not arg:
                return Nearest()
            re, im = (float(x) for x in arg.split(","))
            return Nearest(target=complex(re, im))
        if name == "overlap":
            return Overlap()
        if name == "objective":
            if arg in NAMED_OBJECTIVES:
                return Objective(NAMED_OBJECTIVES[arg])
            return Objective(np.array([float(x) for x in arg.split(",")]))
        if name == "index":
            return Index(int(arg))
    except ValueError:
        raise InputError(f"malformed selector {text!r}") from None
    raise InputError(f"unknown selector {text!r}")


def load_options(args):
    """SolverOptions from defaults, then the config file, then flags."""
    values = {}
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config: {exc}") from None
        version = cfg.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise InputError(f"unsupported config schema_version {version}")
        cfg = cfg.get("options", cfg)
        known = {f.name for f in fields(SolverOptions)}
        unknown = set(cfg) - known - {"schema_version"}
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        values.update({k: v for k, v in cfg.items() if k in known})
    for flag, key in (("tol", "tol"), ("max_iter", "max_iter"),
                      ("update", "subspace_update"), ("h_form", "h_form"),
                      ("backend", "backend")):
        if getattr(args, flag) is not None:
            values[key] = getattr(args, flag)
    try:
        return SolverOptions(**values)
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc)) from None


def _read_vectors(arg, m):
    paths = arg.split(",")
    if len(paths) != 2:
        raise InputError("vectors init expects RIGHT.mtx,LEFT.mtx")
    out = []
    for p in paths:
        M = linalg.mm_read(p)
        M = linalg.to_dense(M) if linalg.issparse(M) else np.asarray(M)
        M = M.reshape(m, -1)
        out.append(M)
    return out


def initial_pair(problem, args, K):
    """Initial subspace pair (or per-subsystem pairs for composites)."""
    if problem.kind == "plate":
        patterns = args.pattern or (list(PATTERNS) if K > 1 else [PATTERNS[0]])
        X = np.column_stack([cross_plate_initial_guess(
            problem.geometry, p, problem.layout) for p in patterns])
        return normalize_pair(X, X, problem.pencil)
    if problem.kind == "composite":
        return electromech_init(problem.model)
    pen = problem.pencil
    kind, _, arg = args.init.partition(":")
    if kind == "vectors":
        R, L = _read_vectors(arg, pen.m)
        return normalize_pair(R, L, pen)
    try:
        n = int(arg) if arg else max(K, 1)
    except ValueError:
        raise InputError(f"malformed --init {args.init!r}") from None
    if kind == "canonical":
        return normalize_pair(canonical_pair(pen.m, n).right,
                              canonical_pair(pen.m, n).left, pen)
    if kind == "random":
        rng = np.random.default_rng(args.seed)
        R = rng.standard_normal((pen.m, n))
        return normalize_pair(R, R.copy(), pen)
    raise InputError(f"unknown --init {args.init!r}")


def _selectors(problem, args, K):
    if args.selector:
        sels = [parse_selector(s) for s in args.selector]
        if len(sels) != K:
            raise InputError(f"{K} selectors needed, {len(sels)} given")
        return sels
    if problem.kind == "plate" and K > 1:
        return [Overlap(initial=np.eye(K)[k]) for k in range(K)]
    if K > 1:
        return [Index(k) for k in range(K)]
    return [Overlap()]


def _targets(args):
    if args.algorithm not in MULTI:
        return 1
    if args.selector:
        return len(args.selector)
    if args.pattern:
        return len(args.pattern)
    return args.targets


def run(problem, args, opts):
    """Dispatch one algorithm; returns (estimates, report, pencil)."""
    alg = args.algorithm
    K = _targets(args)
    sels = _selectors(problem, args, K)
    if alg in (1, 2):
        pen = problem.monolithic
        if args.partition is None:
            raise InputError("algorithms 1 and 2 need --partition n")
        E = linalg.to_dense(pen.E)
        if not np.allclose(E, np.eye(pen.m), atol=1e-14):
            raise InputError("algorithms 1 and 2 need E = I")
        sys_ = PartitionedSystem.from_matrix(pen.A_dense, args.partition)
        if alg == 1:
            est, rep = algorithm1(sys_, sels[0], opts)
            return [est], rep, pen
        ests, rep = algorithm2(sys_, sels, opts)
        return ests, rep, pen
    pair = initial_pair(problem, args, K)
    if problem.kind == "composite":
        if alg in (3, 4):
            est, rep = ALGORITHMS[alg](problem.model, pair, sels[0], opts)
            return [est], rep, problem.monolithic
        pair = embed_pairs(problem.model, pair)
    pen = problem.monolithic
    if alg in MULTI:
        ests, rep = ALGORITHMS[alg](pen, pair, sels, opts)
        return ests, rep, pen
    est, rep = ALGORITHMS[alg](pen, pair, sels[0], opts)
    return [est], rep, pen


def _phase(v):
    """Fix the phase so the largest entry is real positive."""
    v = np.asarray(v)
    k = int(np.argmax(np.abs(v)))
    return v * (abs(v[k]) / v[k]) if v[k] != 0 else v


def _mode_entry(problem, est, pen, oracle):
    entry = {"lam": _c(est.lam), "residual": float(est.residual)}
    if problem.kind == "composite" and est.v is not None:
        model = problem.model
        offs = model.state_offsets
        v = _phase(est.v)
        w = _phase(est.w) if est.w is not None else None
        entry["frequency_hz"] = abs(complex(est.lam).imag) / (2 * np.pi)
        entry["subsystems"] = [
            {"delta": _c(v[offs[k]]), "omega": _c(v[offs[k] + 1]),
             "left_delta": None if w is None else _c(w[offs[k]]),
             "left_omega": None if w is None else _c(w[offs[k] + 1])}
            for k in range(model.l)]
    if oracle is not None:
        i = int(np.argmin(np.abs(oracle.eigenvalues - est.lam)))
        ref = oracle.eigenvalues[i]
        vo = oracle.right[:, i]
        entry["oracle"] = {
            "lam": _c(ref), "error": float(abs(est.lam - ref)),
            "shape_overlap": None if est.v is None else float(
                abs(np.vdot(est.v, vo))
                / (np.linalg.norm(est.v) * np.linalg.norm(vo)))}
    return entry


ITER_COLUMNS = ["iter", "re_lam", "im_lam", "abs_dlam", "residual", "rho_est"]


def write_iterations(path, rows):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(ITER_COLUMNS)
        for r in rows:
            rho = complex(r.rho)
            out.writerow([r.iteration, repr(float(np.real(r.lam))),
                          repr(float(np.imag(r.lam))), repr(float(r.dlam)),
                          repr(float(r.residual)), repr(abs(rho))])


def write_grid(path, layout, v):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["i", "j", "re_psi", "im_psi"])
        for i, j, re, im in grid_rows(layout, _phase(v)):
            out.writerow([i, j, repr(re), repr(im)])


def _config_echo(args, opts):
    return {"source": args.source, "algorithm": args.algorithm,
            "selectors": args.selector, "patterns": args.pattern,
            "init": args.init, "partition": args.partition,
            "targets": _targets(args), "seed": args.seed,
            "options": asdict(opts)}


def cmd_solve(args):
    opts = load_options(args)
    problem = load_problem(args)
    start = time.perf_counter()
    try:
        ests, rep, pen = run(problem, args, opts)
    except SolverError as exc:
        if exc.report is not None and args.out:
            os.makedirs(args.out, exist_ok=True)
            with open(os.path.join(args.out, "partial_report.json"), "w") as fh:
                fh.write(exc.report.to_json(indent=2))
        raise
    elapsed = time.perf_counter() - start
    log.info("%s finished in %.3f s", rep.algorithm, elapsed)
    oracle = None
    if args.oracle:
        if pen.m > linalg.dense_limit():
            log.warning("oracle skipped: m = %d above the dense limit", pen.m)
        else:
            oracle = oracle_full_spectrum(pen)
    report = {
        "schema_version": SCHEMA_VERSION,
        "config": _config_echo(args, opts),
        "problem": {"kind": problem.kind, "dimension": pen.m,
                    "params": problem.params},
        "modes": [_mode_entry(problem, e, pen, oracle) for e in ests],
        "convergence": rep.to_dict(),
    }
    if args.timing:
        report["timing_s"] = elapsed
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "report.json"), "w") as fh:
            fh.write(text + "\n")
        for k in range(rep.modes):
            name = "iterations.csv" if rep.modes == 1 else f"iterations_mode{k}.csv"
            write_iterations(os.path.join(args.out, name),
                             [r for r in rep.iterates if r.mode == k])
        if problem.kind == "plate":
            for k, e in enumerate(ests):
                name = "mode.csv" if len(ests) == 1 else f"mode{k}.csv"
                write_grid(os.path.join(args.out, name), problem.layout, e.v)
    else:
        print(text)
    return EXIT_OK


# -- verify --------------------------------------------------------------------

def cmd_verify(args):
    names = args.suite or list(SUITES)
    for n in names:
        if n not in SUITES:
            raise InputError(f"unknown suite {n!r}; choose from {list(SUITES)}")
    seeds = range(args.seed, args.seed + args.seeds)
    results = []
    ok = True
    for seed in seeds:
        for r in run_suites(names, seed=seed, fault=args.inject_fault):
            d = r.to_dict()
            d["seed"] = seed
            results.append(d)
            ok &= r.passed
    print(json.dumps({"schema_version": SCHEMA_VERSION, "passed": ok,
                      "fault": args.inject_fault, "suites": results},
                     indent=2))
    return EXIT_OK if ok else EXIT_IDENTITY


# -- parser --------------------------------------------------------------------

def _plate_flags(p):
    g = p.add_argument_group("plate geometry")
    g.add_argument("--core", type=int, default=6, help="core side in cells")
    g.add_argument("--arms", default="10,6,8,5",
                   help="arm lengths in cells: up,down,left,right")
    g.add_argument("--h", type=float, default=0.1, help="grid spacing")


def _composite_flags(p):
    g = p.add_argument_group("synthetic composite / random pencil")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--l", type=int, default=10, help="number of subsystems")
    g.add_argument("--states", type=int, default=4, help="states per subsystem")
    g.add_argument("--io", type=int, default=1, help="inputs per subsystem")
    g.add_argument("--buses", type=int, default=None,
                   help="algebraic network variables (default l)")
    g.add_argument("--m", type=int, default=20, help="random pencil size")
    g.add_argument("--rank", type=int, default=14, help="random pencil rank E")
    g.add_argument("--complex", action="store_true")
    g.add_argument("--sparse", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gsma", description="Selective modal analysis of projection pencils.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="write a test problem to disk")
    gen.add_argument("kind", choices=["plate", "composite", "random"])
    gen.add_argument("--out", required=True)
    _plate_flags(gen)
    _composite_flags(gen)

    solve = sub.add_parser("solve", help="run one algorithm")
    solve.add_argument("source",
                       help="'plate', 'composite', 'random' or a directory "
                            "written by 'gsma gen'")
    solve.add_argument("--algorithm", "-a", type=int, default=4,
                       choices=sorted(ALGORITHMS))
    solve.add_argument("--selector", action="append",
                       help="nearest[:re,im] | overlap | objective:<east-west|"
                            "v1,v2,..> | index:i; repeat once per target")
    solve.add_argument("--pattern", action="append", choices=PATTERNS,
                       help="plate initial guess; repeat for several targets")
    solve.add_argument("--init", default="random:1",
                       help="pencil initial pair: random:n | canonical:n | "
                            "vectors:R.mtx,L.mtx")
    solve.add_argument("--partition", type=int,
                       help="relevant-variable count for algorithms 1-2")
    solve.add_argument("--targets", type=int, default=2,
                       help="modes for algorithms 2, 7, 8 without selectors")
    solve.add_argument("--config", help="JSON file overriding solver options")
    solve.add_argument("--tol", type=float)
    solve.add_argument("--max-iter", type=int, dest="max_iter")
    solve.add_argument("--update", choices=["none", "full-eigenvector",
                                            "zeroed-static"])
    solve.add_argument("--h-form", dest="h_form",
                       choices=["qa", "aq", "anticommutator"])
    solve.add_argument("--backend", choices=["dense", "smw", "auto"])
    solve.add_argument("--oracle", action="store_true",
                       help="compare with the dense oracle spectrum")
    solve.add_argument("--timing", action="store_true",
                       help="include wall time in the report")
    solve.add_argument("--out", help="directory for report.json and CSVs "
                                     "(report goes to stdout otherwise)")
    _plate_flags(solve)
    _composite_flags(solve)

    ver = sub.add_parser("verify", help="run the identity suites")
    ver.add_argument("--suite", action="append",
                     help=f"one of {list(SUITES)}; repeatable (default all)")
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--seeds", type=int, default=1,
                     help="number of consecutive seeds to sweep")
    ver.add_argument("--inject-fault", type=float, default=0.0,
                     dest="inject_fault",
                     help="relative perturbation added to one side (debug)")
    return parser


INPUT_ERRORS = (InputError, ParseError, OSError, ValueError, KeyError)


def _fail(args, exc, code):
    err = {"schema_version": SCHEMA_VERSION, "error": type(exc).__name__,
           "message": str(exc), "exit_code": code}
    text = json.dumps(err, indent=2)
    print(text, file=sys.stderr)
    out = getattr(args, "out", None)
    if out and args.command == "solve":
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "error.json"), "w") as fh:
            fh.write(text + "\n")
    return code


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    handler = {"gen": cmd_gen, "solve": cmd_solve, "verify": cmd_verify}
    try:
        return handler[args.command](args)
    except SolverError as exc:
        return _fail(args, exc, EXIT_SOLVER)
    except INPUT_ERRORS as exc:
        return _fail(args, exc, EXIT_INPUT)
    except GsmaError as exc:
        # singular shifts, degenerate subspaces and other numerical failures
        return _fail(args, exc, EXIT_SOLVER)


if __name__ == "__main__":
    sys.exit(main())
