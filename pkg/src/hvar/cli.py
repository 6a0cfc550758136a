"""``hvar`` command line: run experiments, identity checks and grid export.

Exit codes: 0 success, 2 invalid input, 3 solver failure, 4 verification failure.
"""
import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import assembly, grid as grid_mod, mountain_pass as mp, obstacle, suites
from .config import SCHEMA_VERSION, load_config
from .errors import HvarError, SolverError, UsageError
from .kernels import fractional_kernel

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_VERIFY = 0, 2, 3, 4
STATUS = {EXIT_OK: "ok", EXIT_USAGE: "validation_error", EXIT_SOLVER: "solver_failure",
          EXIT_VERIFY: "verification_failure"}


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    return obj


def _fmt(x):
    return repr(float(x))


class _DataError(UsageError):
    def __init__(self, message, details):
        super().__init__(message)
        self.details = details


class _Run:
    def __init__(self, cfg, out_dir, threads, quiet):
        self.cfg, self.out_dir, self.threads, self.quiet = cfg, out_dir, threads, quiet
        self.files = []
        self.results = {}
        self.grid = None

    def say(self, msg):
        if not self.quiet:
            print(msg)

    def path(self, name):
        return os.path.join(self.out_dir, name)

    def write_csv(self, name, header, rows):
        p = self.path(name)
        with open(p, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        self.files.append(name)

    def build(self):
        c = self.cfg
        g = grid_mod.build_grid(c.domain, c.h, c.R_trunc, ht=c.ht, collar=c.collar,
                                collar_width=c.collar_width, max_nodes=c.max_nodes)
        self.grid = g
        self.kernel = fractional_kernel(c.s, c.N, c.scale)
        return g

    def assemble(self):
        return assembly.assemble_stiffness(self.grid, self.kernel, self.cfg.delta_sing, threads=self.threads)

    def coords(self, i):
        return [_fmt(v) for v in self.grid.nodes[i]]

    def coord_header(self):
        N = self.cfg.N
        return [f"x{k}" for k in range(1, N + 1)] + [f"y{k}" for k in range(1, N + 1)] + ["t"]

    # -- pipelines -------------------------------------------------------

    def obstacle_problem(self, A):
        g = self.grid
        f = self.cfg.expression("f", 0.0)(g.nodes)
        phi = self.cfg.expression("phi", 1.0)(g.nodes)
        u0 = self.cfg.expression("u0", 0.0)(g.nodes)
        ext = g.exterior_idx
        bad = ext[u0[ext] > phi[ext]]
        if bad.size:
            raise _DataError(f"u0 exceeds phi at {bad.size} exterior nodes",
                             {"nodes": bad[:20].tolist()})
        u0 = np.where(g.interior, np.minimum(u0, phi), u0)
        return obstacle.ObstacleProblem(A, f, phi, u0)

    def solve_vi(self, P):
        s = self.cfg.solver
        return obstacle.solve_vi_psor(P, omega=s.get("omega", 1.5), tol=s.get("tol", 1e-10),
                                      max_iter=s.get("max_iter", 100_000))

    def run_obstacle(self):
        A = self.assemble()
        P = self.obstacle_problem(A)
        vi = self.solve_vi(P)
        ls = obstacle.verify_lewy_stampacchia(P, vi.u, tol=self.cfg.solver.get("ls_tol", 1e-9))
        g = self.grid
        pos = {int(i): k for k, i in enumerate(ls.nodes)}
        rows = []
        for i in range(g.n):
            if i in pos:
                k = pos[i]
                L, U = ls.lower[k], ls.upper[k]
                rows.append([i, _fmt(vi.u[i]), _fmt(P.phi[i]), _fmt(L), _fmt(U), _fmt(min(L, U - L))])
            else:
                rows.append([i, _fmt(vi.u[i]), _fmt(P.phi[i]), "", "", ""])
        self.write_csv("obstacle.csv", ["id", "u", "phi", "L", "U", "margin"], rows)
        self.results = {"psor_iterations": vi.iterations, "psor_residual": vi.residual,
                        "active_nodes": int(vi.active.size), "lewy_stampacchia": ls.as_dict()}
        self.say(f"obstacle: {vi.iterations} PSOR sweeps, {vi.active.size} active nodes, "
                 f"Lewy-Stampacchia {'pass' if ls.passed else 'FAIL'}")
        return EXIT_OK if ls.passed else EXIT_VERIFY

    def run_penalization(self):
        A = self.assemble()
        P = self.obstacle_problem(A)
        vi = self.solve_vi(P)
        tol = self.cfg.solver.get("tol", 1e-10)
        path = obstacle.penalization_path(P, self.cfg.r_schedule(), tol=tol)
        dist = path.distances(vi.u)
        rows = [[k + 1, _fmt(st.r), _fmt(st.violation), _fmt(d), st.iterations, _fmt(st.residual)]
                for k, (st, d) in enumerate(zip(path.states, dist))]
        self.write_csv("penalization_path.csv", ["k", "r", "violation", "distance_to_vi", "newton_steps",
                                                 "residual"], rows)
        last = path.states[-1]
        self.write_csv("penalization.csv", ["id", "u_vi", "u_r", "phi"],
                       [[i, _fmt(vi.u[i]), _fmt(last.u[i]), _fmt(P.phi[i])] for i in range(self.grid.n)])
        ls = obstacle.verify_lewy_stampacchia(P, vi.u, tol=self.cfg.solver.get("ls_tol", 1e-9))
        mono = path.monotone()
        self.results = {"radii": path.radii, "violations": path.violations, "violation_monotone": mono,
                        "distances_to_vi": dist, "terminal_distance": dist[-1],
                        "psor_iterations": vi.iterations, "lewy_stampacchia": ls.as_dict()}
        self.say(f"penalization: {len(dist)} radii, terminal |u_r - u_VI| = {dist[-1]:.3e}, "
                 f"violation {'monotone' if mono else 'NOT monotone'}")
        return EXIT_OK if (mono and ls.passed) else EXIT_VERIFY

    def run_mountain_pass(self):
        A = self.assemble()
        s = self.cfg.solver
        nl = mp.Nonlinearity("power", q=s.get("q", 2.5), c=self.cfg.expression("c", 1.0))
        P = mp.SemilinearProblem(A, nl)
        geo = mp.mp_geometry(P, probe_count=s.get("probe_count", 64),
                             rng=np.random.default_rng(self.cfg.seed))
        rep = mp.solve_mountain_pass(P, tol=s.get("tol", 1e-8), max_iter=s.get("max_iter", 5000),
                                     geometry=geo)
        g = self.grid
        self.write_csv("mountain_pass.csv", ["id"] + self.coord_header() + ["u"],
                       [[i] + self.coords(i) + [_fmt(rep.u_star[i])] for i in range(g.n)])
        probes_ok = geo.probe_min >= geo.alpha - 1e-12
        self.results = {**rep.as_dict(), "e_energy": geo.e_energy, "e_norm": P.norm(geo.e),
                        "probe_min_energy": geo.probe_min, "probes_ok": probes_ok, "kappa": geo.kappa,
                        "q": nl.q}
        self.say(f"mountain pass: energy {rep.energy:.6g} >= alpha {rep.alpha:.6g}, "
                 f"|grad| = {rep.grad_norm:.2e}")
        return EXIT_OK if probes_ok else EXIT_VERIFY

    def run_suites(self):
        c = self.cfg
        rng = np.random.default_rng(c.seed)
        out = []
        for name in c.suites:
            if name == "group":
                out.append(suites.group_suite(c.samples, c.N, rng))
            elif name == "commutator":
                out.append(suites.commutator_suite())
            elif name == "duality":
                out.append(suites.duality_suite(self.grid, self.kernel, rng, delta=c.delta_sing))
            elif name == "admissibility":
                out.append(suites.admissibility_suite(self.kernel, c.samples, rng))
            elif name == "form":
                out.append(suites.form_suite(self.grid, self.kernel, rng=rng, delta=c.delta_sing))
        rows = []
        for r in out:
            for k, v in r.metrics.items():
                if isinstance(v, (int, float, bool, np.floating, np.integer)) and not isinstance(v, bool):
                    rows.append([r.name, k, _fmt(v)])
            rows.append([r.name, "passed", str(r.passed).lower()])
        self.write_csv("verify.csv", ["suite", "metric", "value"], rows)
        self.results = {"suites": [r.as_dict() for r in out]}
        for r in out:
            self.say(f"{r.name}: {'pass' if r.passed else 'FAIL'}")
        return EXIT_OK if all(r.passed for r in out) else EXIT_VERIFY


def _write_report(out_dir, name, report):
    with open(os.path.join(out_dir, name), "w", encoding="utf-8") as fh:
        json.dump(_clean(report), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _execute(command, args):
    report = {"schema": SCHEMA_VERSION, "problem": None, "command": command}
    code = EXIT_OK
    run = None
    try:
        os.makedirs(args.out_dir, exist_ok=True)
    except OSError as exc:
        print(f"hvar: cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args.config)
        report["problem"] = cfg.problem
        run = _Run(cfg, args.out_dir, args.threads, args.quiet)
        g = run.build()
        report["grid"] = {"nodes": g.n, "interior": g.n_interior, "h": g.h, "ht": g.ht, "R_trunc": g.R_trunc}
        if command == "export-grid":
            grid_mod.write_grid_csv(g, run.path("grid.csv"))
            run.files.append("grid.csv")
            run.say(f"grid: {g.n} nodes ({g.n_interior} interior)")
        elif command == "verify" or cfg.problem == "verify_identities":
            code = run.run_suites()
        else:
            code = {"obstacle": run.run_obstacle, "penalization": run.run_penalization,
                    "mountain_pass": run.run_mountain_pass}[cfg.problem]()
    except SolverError as exc:
        code = EXIT_SOLVER
        report["error"] = {"message": str(exc), "details": exc.details}
    except (UsageError, MemoryError, HvarError) as exc:
        code = EXIT_USAGE
        report["error"] = {"message": str(exc), "details": getattr(exc, "details", {}) or {}}
    if run is not None:
        report["results"] = run.results
        report["files"] = sorted(run.files)
    report["exit_code"] = code
    report["status"] = STATUS[code]
    _write_report(args.out_dir, "report.json", report)
    if code != EXIT_OK and "error" in report:
        print(f"hvar: {report['error']['message']}", file=sys.stderr)
    return code


def build_parser():
    p = argparse.ArgumentParser(prog="hvar", description="Nonlocal obstacle and semilinear problems on the Heisenberg group.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "run the configured experiment"),
                        ("verify", "run the identity suites on the configured grid and kernel"),
                        ("export-grid", "write the grid as CSV")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config", help="experiment configuration (JSON)")
        sp.add_argument("--threads", type=int, default=1, help="worker threads for assembly (default 1)")
        sp.add_argument("--out-dir", default="hvar-out", help="output directory (default ./hvar-out)")
        sp.add_argument("--quiet", action="store_true", help="suppress progress output")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.threads < 1:
        print("hvar: --threads must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    return _execute(args.command, args)


if __name__ == "__main__":
    sys.exit(main())
