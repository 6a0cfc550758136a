"""Self-checks run by ``hvar verify``: group axioms, commutators, duality,
kernel admissibility and form properties.  Each returns a SuiteResult."""
from dataclasses import dataclass, field

import numpy as np

from . import assembly, hgroup
from .hgroup import GroupElement, VectorFieldStencil
from .kernels import check_admissible

__all__ = ["SuiteResult", "group_suite", "commutator_suite", "duality_suite",
           "admissibility_suite", "form_suite", "TEST_FUNCTIONS", "NOISE_FLOOR"]

NOISE_FLOOR = 1e-9


@dataclass
class SuiteResult:
    name: str
    passed: bool
    metrics: dict = field(default_factory=dict)

    def as_dict(self):
        return {"name": self.name, "passed": self.passed, "metrics": self.metrics}


def group_suite(samples=10_000, N=1, rng=None, tol=1e-12, span=10.0):
    """Group axioms and norm identities on random elements with components in [-span, span]."""
    rng = np.random.default_rng(0) if rng is None else rng
    d = 2 * N + 1
    a, b, c = (rng.uniform(-span, span, (samples, d)) for _ in range(3))
    theta = rng.uniform(0.25, 4.0, samples)
    e = np.zeros(d)
    m = {
        "associativity": float(np.max(np.abs(hgroup.mul(hgroup.mul(a, b), c) - hgroup.mul(a, hgroup.mul(b, c))))),
        "identity": float(max(np.max(np.abs(hgroup.mul(a, e) - a)), np.max(np.abs(hgroup.mul(e, a) - a)))),
        "inverse": float(max(np.max(np.abs(hgroup.mul(a, hgroup.inv(a)))), np.max(np.abs(hgroup.mul(hgroup.inv(a), a))))),
        "homogeneity": float(np.max(np.abs(
            hgroup.norm(np.stack([hgroup.dil(th, p) for th, p in zip(theta, a)])) - theta * hgroup.norm(a)))),
        "inverse_norm": float(np.max(np.abs(hgroup.norm(hgroup.inv(a)) - hgroup.norm(a)))),
    }
    return SuiteResult("group", all(v <= tol for v in m.values()), {**m, "samples": samples, "tol": tol})


def _coords(p):
    return p.as_array()


# smooth test functions on H^2 with their exact t-derivatives, (x1, x2, y1, y2, t)
TEST_FUNCTIONS = [
    (lambda a: np.sin(a[0] + 2 * a[2] + a[4]) * np.cos(a[1] - a[3]),
     lambda a: np.cos(a[0] + 2 * a[2] + a[4]) * np.cos(a[1] - a[3])),
    (lambda a: np.exp(0.3 * a[0] - 0.2 * a[3] + 0.5 * a[4]),
     lambda a: 0.5 * np.exp(0.3 * a[0] - 0.2 * a[3] + 0.5 * a[4])),
    (lambda a: a[0] ** 2 * a[2] * a[4] ** 3 + a[1] * a[3] ** 2,
     lambda a: 3 * a[0] ** 2 * a[2] * a[4] ** 2),
    (lambda a: np.cos(a[4] ** 2 + a[0] * a[3]) + a[2] ** 3,
     lambda a: -2 * a[4] * np.sin(a[4] ** 2 + a[0] * a[3])),
    (lambda a: 1.0 / (1.0 + a[0] ** 2 + a[1] ** 2 + a[2] ** 2 + a[3] ** 2 + a[4] ** 2),
     lambda a: -2 * a[4] / (1.0 + a[0] ** 2 + a[1] ** 2 + a[2] ** 2 + a[3] ** 2 + a[4] ** 2) ** 2),
]


def _brackets(N=2):
    """Pairs (U, V, c) with [U, V] = c T."""
    names = [("X", j) for j in range(1, N + 1)] + [("Y", j) for j in range(1, N + 1)] + [("T", 1)]
    out = []
    for i, (k1, j1) in enumerate(names):
        for k2, j2 in names[i + 1:]:
            c = -4.0 if (k1, k2) == ("X", "Y") and j1 == j2 else 0.0
            out.append(((k1, j1), (k2, j2), c))
    return out


def commutator_suite(hs=(1e-2, 5e-3, 2.5e-3), points=None, min_order=1.9):
    """Nested-stencil commutators against [X_j, Y_j] = -4 T and zero otherwise.

    Brackets whose error stays below NOISE_FLOOR at every h are exact up to
    round-off and have no measurable order; all others need order >= min_order.
    """
    rng = np.random.default_rng(1)
    points = [GroupElement.from_array(rng.uniform(-0.7, 0.7, 5)) for _ in range(3)] if points is None else points
    worst_order, worst_err, rows = np.inf, 0.0, []
    for fi, (f, ft) in enumerate(TEST_FUNCTIONS):
        fg = lambda p, f=f: float(f(_coords(p)))  # noqa: E731
        for (k1, j1), (k2, j2), c in _brackets():
            errs = []
            for h in hs:
                u, v = VectorFieldStencil(k1, j1, h), VectorFieldStencil(k2, j2, h)
                e = max(abs(hgroup.commutator(u, v, fg, p) - c * float(ft(_coords(p)))) for p in points)
                errs.append(e)
            errs = np.array(errs)
            if np.all(errs < NOISE_FLOOR):
                order = np.inf
            else:
                order = float(np.min(np.log(errs[:-1] / errs[1:]) / np.log(np.asarray(hs[:-1]) / np.asarray(hs[1:]))))
            worst_order = min(worst_order, order)
            worst_err = max(worst_err, float(errs[-1]))
            rows.append({"function": fi, "bracket": f"[{k1}{j1},{k2}{j2}]", "order": order,
                         "error": float(errs[-1])})
    passed = worst_order >= min_order
    return SuiteResult("commutator", bool(passed), {
        "worst_order": worst_order, "worst_final_error": worst_err, "brackets": len(rows),
        "min_order": min_order, "noise_floor": NOISE_FLOOR,
        "order_measured": [r for r in rows if np.isfinite(r["order"])]})


def duality_suite(grid, K, rng=None, trials=5, delta=None, rel_tol=1e-10):
    rng = np.random.default_rng(2) if rng is None else rng
    A = assembly.assemble_stiffness(grid, K, delta)
    worst = 0.0
    for _ in range(trials):
        u = rng.standard_normal(grid.n)
        v = np.where(grid.interior, rng.standard_normal(grid.n), 0.0)
        a = A.form(u, v)
        res = assembly.duality_residual(grid, K, u, v, A.delta, form=A)
        worst = max(worst, res / (1.0 + abs(a)))
    return SuiteResult("duality", worst <= rel_tol, {"worst_relative_residual": worst,
                                                      "trials": trials, "tol": rel_tol})


def admissibility_suite(K, samples=1000, rng=None):
    rep = check_admissible(K, sample_count=samples, rng=rng)
    return SuiteResult("admissibility", bool(rep.passed), rep.as_dict())


def form_suite(grid, K, A=None, rng=None, trials=20, delta=None):
    rng = np.random.default_rng(3) if rng is None else rng
    A = assembly.assemble_stiffness(grid, K, delta) if A is None else A
    M = A.matrix
    sym = float(abs(M - M.T).max()) if M.nnz else 0.0
    lam_min = float(np.linalg.eigvalsh(A.interior_block())[0]) if grid.n_interior else 0.0
    const = float(np.max(np.abs(assembly.apply_operator(grid, K, np.full(grid.n, 1.7), A.delta))))
    worst = -np.inf
    for _ in range(trials):
        u = np.where(grid.interior, rng.standard_normal(grid.n), 0.0)
        gag = assembly.gagliardo_seminorm(grid, u, K.s, A.delta)
        z = assembly.z0_norm(A, u)
        worst = max(worst, K.mu * gag ** 2 - z ** 2 * (1 + 1e-12))
    passed = sym == 0.0 and lam_min >= -1e-10 and const == 0.0 and worst <= 0.0
    return SuiteResult("form", bool(passed), {"asymmetry": sym, "min_eigenvalue": lam_min,
                                              "constant_image": const, "lower_bound_gap": float(worst)})
