"""Obstacle problem: projected SOR, an enumeration oracle, the penalization
scheme, and componentwise Lewy-Stampacchia verification.

All quantities are weak (volume-weighted): the load is F_i = f_i vol_i and the
discrete problem is

    minimize 1/2 u^T A u - F^T u   over u <= phi inside, u = u0 outside.

With B = A_II and b = F_I - A_IE u0_E the interior gradient is B u_I - b.
"""
from dataclasses import dataclass, field
from itertools import combinations
from typing import List, Optional

import numpy as np
from scipy import linalg

from .errors import SolverError, UsageError

__all__ = [
    "ObstacleProblem", "VISolution", "PenalizationState", "PenalizationPath", "LSReport",
    "cutoff_Dr", "penalized_rhs", "solve_penalized", "penalization_path",
    "solve_vi_psor", "solve_vi_bruteforce", "verify_lewy_stampacchia", "comparison_check",
    "default_schedule",
]

BRUTEFORCE_MAX = 15


@dataclass(frozen=True, eq=False)
class ObstacleProblem:
    form: object
    f: np.ndarray
    phi: np.ndarray
    u0: np.ndarray

    def __post_init__(self):
        n = self.form.n
        arrs = {}
        for name in ("f", "phi", "u0"):
            a = np.array(np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (n,)))
            a.flags.writeable = False
            arrs[name] = a
            object.__setattr__(self, name, a)
        if not (np.all(np.isfinite(arrs["f"])) and np.all(np.isfinite(arrs["u0"]))):
            raise UsageError("f and u0 must be finite")
        phi = arrs["phi"]
        if np.any(np.isnan(phi)) or np.any(phi == -np.inf):
            raise UsageError("phi must be finite or +inf")
        if np.any(~np.isfinite(phi[self.grid.exterior_idx])):
            raise UsageError("phi must be finite on exterior nodes")
        bad = np.flatnonzero(arrs["u0"] > phi)
        if bad.size:
            raise UsageError(f"u0 > phi at {bad.size} nodes (first: node {bad[0]})")

    @property
    def grid(self):
        return self.form.grid

    @property
    def load(self):
        F = np.zeros(self.form.n)
        I = self.grid.interior_idx
        F[I] = self.f[I] * self.grid.volumes[I]
        return F

    def reduced(self):
        """(B, b, phi_I) for the interior unknowns."""
        g = self.grid
        B = self.form.interior_block()
        b = self.load[g.interior_idx] - self.form.coupling_block() @ self.u0[g.exterior_idx]
        return B, b, self.phi[g.interior_idx]

    def embed(self, u_interior):
        u = self.u0.copy()
        u[self.grid.interior_idx] = u_interior
        return u


@dataclass
class VISolution:
    u: np.ndarray
    active: np.ndarray
    iterations: int
    residual: float
    multipliers: Optional[np.ndarray] = None


def _projected_gradient(g, u, phi):
    # at an active bound only moves downward are feasible
    return np.where(u < phi, g, np.maximum(g, 0.0))


def solve_vi_psor(problem, omega=1.5, tol=1e-10, max_iter=100_000, u_init=None):
    """Projected SOR on the interior unknowns.

    Stops when the projected gradient sup-norm drops to ``tol``; the residual
    is recomputed from scratch at every check so no drift accumulates.
    """
    if not 0.0 < omega < 2.0:
        raise UsageError("omega must lie in (0, 2)")
    B, b, phi = problem.reduced()
    n = b.size
    diag = np.diag(B).copy()
    if n and np.any(diag <= 0):
        raise UsageError("interior block needs a positive diagonal")
    u = np.minimum(np.zeros(n) if u_init is None else
                   np.asarray(u_init, dtype=float)[problem.grid.interior_idx], phi)
    r = b - B @ u
    pg = _projected_gradient(-r, u, phi)
    res = float(np.max(np.abs(pg))) if n else 0.0
    it = 0
    while res > tol:
        if it >= max_iter:
            raise SolverError("PSOR did not converge", {
                "iterations": it, "residual": res, "worst_node": int(problem.grid.interior_idx[np.argmax(np.abs(pg))])})
        for i in range(n):
            new = min(u[i] + omega * r[i] / diag[i], phi[i])
            d = new - u[i]
            if d != 0.0:
                u[i] = new
                r -= B[i] * d
        it += 1
        r = b - B @ u
        pg = _projected_gradient(-r, u, phi)
        res = float(np.max(np.abs(pg)))
    active = u >= phi
    return VISolution(problem.embed(u), problem.grid.interior_idx[active], it, res, r)


def solve_vi_bruteforce(problem, tol=1e-12):
    """Exact minimizer by enumerating active sets and screening the KKT conditions.

    B is symmetric positive definite, so the KKT point is unique; the search
    stops at the first active set passing feasibility and sign checks.
    """
    B, b, phi = problem.reduced()
    n = b.size
    if n > BRUTEFORCE_MAX:
        raise UsageError(f"brute force limited to {BRUTEFORCE_MAX} interior nodes, got {n}")
    scale = 1.0 + float(np.max(np.abs(b))) + float(np.max(np.abs(B))) * float(np.max(np.abs(np.where(np.isfinite(phi), phi, 0.0)), initial=0.0))
    candidates = np.flatnonzero(np.isfinite(phi))
    tried = 0
    for k in range(candidates.size + 1):
        for S in combinations(candidates.tolist(), k):
            tried += 1
            S = list(S)
            free = np.setdiff1d(np.arange(n), S)
            u = np.empty(n)
            u[S] = phi[S]
            if free.size:
                rhs = b[free] - B[np.ix_(free, S)] @ phi[S]
                u[free] = linalg.solve(B[np.ix_(free, free)], rhs, assume_a="pos")
            lam = b - B @ u
            if np.all(u[free] <= phi[free] + tol * scale) and np.all(lam[S] >= -tol * scale):
                return VISolution(problem.embed(u), problem.grid.interior_idx[S], tried, 0.0, lam)
    raise SolverError("no active set satisfied the KKT conditions", {"active_sets_tried": tried})


@dataclass
class LSReport:
    lower: np.ndarray
    upper: np.ndarray
    nodes: np.ndarray
    passed: bool
    worst_lower: float
    worst_upper: float
    worst_lower_node: int
    worst_upper_node: int
    tol: float

    def as_dict(self):
        return {
            "passed": self.passed,
            "tol": self.tol,
            "worst_lower_margin": self.worst_lower,
            "worst_upper_margin": self.worst_upper,
            "worst_lower_node": self.worst_lower_node,
            "worst_upper_node": self.worst_upper_node,
        }


def verify_lewy_stampacchia(problem, u, tol=1e-9):
    """Check -tol <= L_i <= U_i + tol at every interior node.

    L_i = (F - A u)_i and U_i = ((F - A phi)_i)^+ are the weak pairings of the
    two sides against the nodal basis function of node i.  Margins reported are
    min_i L_i and min_i (U_i - L_i).
    """
    u = np.asarray(u, dtype=float)
    F = problem.load
    I = problem.grid.interior_idx
    L = (F - problem.form.apply(u))[I]
    phi = problem.phi
    if np.all(np.isfinite(phi)):
        U = np.maximum((F - problem.form.apply(phi))[I], 0.0)
    else:
        U = np.full(I.size, np.inf)
    if I.size == 0:
        return LSReport(L, U, I, True, np.inf, np.inf, -1, -1, tol)
    gap = U - L
    lo, hi = int(np.argmin(L)), int(np.argmin(gap))
    passed = bool(np.all(L >= -tol) and np.all(L <= U + tol))
    return LSReport(L, U, I, passed, float(L[lo]), float(gap[hi]), int(I[lo]), int(I[hi]), tol)


def comparison_check(A, u, v):
    """a(w, w^+) for w = u - v; nonnegative whenever w^+ vanishes outside."""
    w = np.asarray(u, dtype=float) - np.asarray(v, dtype=float)
    wp = np.maximum(w, 0.0)
    E = A.grid.exterior_idx
    if E.size and np.any(wp[E] != 0.0):
        raise UsageError("(u - v)^+ must vanish on exterior nodes")
    return A.form(w, wp)


# -- penalization ---------------------------------------------------------

def cutoff_Dr(r, l):
    """0 for l <= 0, l/r on (0, r), 1 for l >= r (vectorized in l)."""
    if not 0.0 < r < 1.0:
        raise UsageError(f"r must lie in (0, 1), got {r}")
    l = np.asarray(l, dtype=float)
    out = np.clip(l / r, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def _ramp_primitive(r, d):
    """Primitive in l of 1 - D_r(phi - l), written in d = phi - l, zero for l <= phi - r."""
    d = np.asarray(d, dtype=float)
    return np.where(d >= r, 0.0, np.where(d > 0.0, (r - d) ** 2 / (2.0 * r), r / 2.0 - d))


@dataclass
class PenalizationState:
    r: float
    T: np.ndarray
    u: np.ndarray
    violation: float
    iterations: int
    residual: float
    history: List[float] = field(default_factory=list)
    problem: Optional[ObstacleProblem] = field(default=None, repr=False)

    def __post_init__(self):
        if not 0.0 < self.r < 1.0:
            raise UsageError(f"r must lie in (0, 1), got {self.r}")


def obstacle_reaction(problem):
    """T as a nodal density: ((F - A phi)_i)^+ / vol_i inside, zero outside."""
    phi = problem.phi
    if not np.all(np.isfinite(phi)):
        raise UsageError("penalization needs a finite obstacle")
    T = np.zeros(problem.form.n)
    I = problem.grid.interior_idx
    T[I] = np.maximum((problem.load - problem.form.apply(phi))[I], 0.0) / problem.grid.volumes[I]
    return T


def penalized_rhs(state, i, l):
    """w_r(node i, l) = T_i (1 - D_r(phi_i - l)) - f_i."""
    p = state.problem
    return state.T[i] * (1.0 - cutoff_Dr(state.r, p.phi[i] - l)) - p.f[i]


def solve_penalized(problem, r, tol=1e-10, u_init=None, max_iter=100):
    """Damped Newton for the penalized equation at every interior node i:

        (A u)_i + vol_i w_r(i, u_i) = 0,   u = u0 outside.

    The system is the gradient of a convex piecewise-quadratic functional,
    so Newton with Armijo backtracking on that functional converges globally;
    the Jacobian B + diag(T_i vol_i / r on the ramp) is SPD.
    """
    if not 0.0 < r < 1.0:
        raise UsageError(f"r must lie in (0, 1), got {r}")
    B, b, phi = problem.reduced()
    g = problem.grid
    I = g.interior_idx
    T = obstacle_reaction(problem)
    Tw = T[I] * g.volumes[I]
    u = phi - r if u_init is None else np.asarray(u_init, dtype=float)[I].copy()

    def energy(x):
        return 0.5 * x @ B @ x - b @ x + np.sum(Tw * _ramp_primitive(r, phi - x))

    def grad(x):
        return B @ x - b + Tw * (1.0 - np.clip((phi - x) / r, 0.0, 1.0))

    history = []
    G = grad(u)
    res = float(np.max(np.abs(G))) if G.size else 0.0
    it = 0
    while res > tol:
        if it >= max_iter:
            raise SolverError("penalized Newton did not converge",
                              {"r": r, "iterations": it, "residual": res,
                               "worst_node": int(I[np.argmax(np.abs(G))])})
        d = phi - u
        ramp = (d > 0.0) & (d < r)
        J = B + np.diag(np.where(ramp, Tw / r, 0.0))
        step = linalg.solve(J, G, assume_a="pos")
        e0, slope, t = energy(u), -float(G @ step), 1.0
        while t > 1e-12:
            cand = u - t * step
            if energy(cand) <= e0 + 1e-4 * t * slope:
                break
            t *= 0.5
        u = cand
        G = grad(u)
        res = float(np.max(np.abs(G)))
        history.append(res)
        it += 1
    full = problem.embed(u)
    viol = float(np.max(np.maximum(u - phi, 0.0), initial=0.0))
    return PenalizationState(r, T, full, viol, it, res, history, problem)


def default_schedule(k_max=10, base=0.5, k_min=1):
    return [base ** k for k in range(k_min, k_max + 1)]


@dataclass
class PenalizationPath:
    states: List[PenalizationState]

    @property
    def radii(self):
        return [s.r for s in self.states]

    @property
    def violations(self):
        return [s.violation for s in self.states]

    def monotone(self, slack=1e-12):
        v = self.violations
        return all(b <= a + slack for a, b in zip(v[:-1], v[1:]))

    def distances(self, u_ref):
        return [float(np.max(np.abs(s.u - u_ref))) for s in self.states]


def penalization_path(problem, schedule=None, tol=1e-10):
    """Solve along a decreasing r-schedule, warm-starting each solve."""
    schedule = default_schedule() if schedule is None else list(schedule)
    states, u = [], None
    for r in schedule:
        st = solve_penalized(problem, r, tol=tol, u_init=u)
        states.append(st)
        u = st.u
    return PenalizationPath(states)
