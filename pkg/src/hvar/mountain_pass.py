"""Semilinear Dirichlet problem L u = f(xi, u) in the domain, u = 0 outside.

Weak quantities throughout: with B the interior block of the form and vol the
cell volumes,

    H(u)      = 1/2 u^T B u - sum_i F(xi_i, u_i) vol_i
    grad H(u) = B u - f(xi, u) vol.

Critical points are found on the Nehari set {u != 0 : <H'(u), u> = 0}.
"""
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Union

import numpy as np
from scipy import linalg, optimize

from .assembly import critical_exponent
from .errors import SolverError, UsageError

__all__ = [
    "Nonlinearity", "power_nonlinearity", "SemilinearProblem", "GrowthReport", "MPGeometry",
    "MPReport", "PSReport", "energy", "gradient", "nehari_scale", "check_growth",
    "mp_geometry", "solve_mountain_pass", "ps_diagnostics", "node_permutation",
    "symmetrize", "HEISENBERG_REFLECTIONS",
]


@dataclass(frozen=True)
class Nonlinearity:
    """f(xi, l) = c(xi)|l|^(q-2) l by default; ``kind='custom'`` takes user callables.

    ``c`` is a positive constant or a callable on coordinate arrays.  Custom
    callables have signature g(xi, l) with xi an (m, 2N+1) array.
    """

    kind: str = "power"
    q: float = 4.0
    c: Union[float, Callable] = 1.0
    theta: Optional[float] = None
    R_thr: float = 0.0
    f_fn: Optional[Callable] = field(default=None, compare=False)
    F_fn: Optional[Callable] = field(default=None, compare=False)
    df_fn: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("power", "custom"):
            raise UsageError(f"unknown nonlinearity kind {self.kind!r}")
        if not self.q > 2.0:
            raise UsageError(f"exponent q must exceed 2, got {self.q}")
        if self.kind == "power":
            if not callable(self.c) and not float(self.c) > 0:
                raise UsageError("coefficient c must be positive")
            if self.theta is None:
                object.__setattr__(self, "theta", float(self.q))
        else:
            if self.f_fn is None or self.F_fn is None:
                raise UsageError("custom nonlinearities need f_fn and F_fn")
            if self.theta is None or not self.theta > 2.0:
                raise UsageError("custom nonlinearities need an AR constant theta > 2")
        if not self.R_thr >= 0.0:
            raise UsageError("AR threshold must be nonnegative")

    def coefficient(self, xi):
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        if callable(self.c):
            c = np.broadcast_to(np.asarray(self.c(xi), dtype=float), (xi.shape[0],)).copy()
            if np.any(c <= 0) or not np.all(np.isfinite(c)):
                raise UsageError("coefficient c must be positive and finite at every node")
            return c
        return np.full(xi.shape[0], float(self.c))

    def f(self, xi, l):
        l = np.asarray(l, dtype=float)
        if self.kind == "custom":
            return np.asarray(self.f_fn(xi, l), dtype=float)
        return self.coefficient(xi) * np.abs(l) ** (self.q - 2.0) * l

    def F(self, xi, l):
        l = np.asarray(l, dtype=float)
        if self.kind == "custom":
            return np.asarray(self.F_fn(xi, l), dtype=float)
        return self.coefficient(xi) * np.abs(l) ** self.q / self.q

    def df(self, xi, l):
        l = np.asarray(l, dtype=float)
        if self.kind == "custom":
            if self.df_fn is None:
                return None
            return np.asarray(self.df_fn(xi, l), dtype=float)
        return (self.q - 1.0) * self.coefficient(xi) * np.abs(l) ** (self.q - 2.0)

    def growth_constants(self, xi):
        """(a1, a2) with |f| <= a1 + a2 |l|^(q-1); exact for powers."""
        if self.kind == "power":
            return 0.0, float(np.max(self.coefficient(xi)))
        return None


def power_nonlinearity(q, c=1.0):
    return Nonlinearity("power", q=float(q), c=c)


@dataclass(frozen=True, eq=False)
class SemilinearProblem:
    form: object
    nonlinearity: Nonlinearity

    def __post_init__(self):
        K = getattr(self.form, "kernel", None)
        if K is not None:
            qs = critical_exponent(K.Q, K.s)
            if not self.nonlinearity.q < qs:
                raise UsageError(f"q = {self.nonlinearity.q} is not below Q* = {qs:.6g}")
        g = self.grid
        if g.n_interior == 0:
            raise UsageError("the problem has no interior nodes")
        object.__setattr__(self, "_xi", g.nodes[g.interior_idx])
        object.__setattr__(self, "_vol", g.volumes[g.interior_idx])

    @property
    def grid(self):
        return self.form.grid

    @property
    def B(self):
        return self.form.interior_block()

    def restrict(self, u):
        u = np.asarray(u, dtype=float)
        g = self.grid
        if u.shape == (g.n,):
            if g.n_exterior and np.any(u[g.exterior_idx] != 0.0):
                raise UsageError("field must vanish on exterior nodes")
            return u[g.interior_idx]
        if u.shape == (g.n_interior,):
            return u
        raise UsageError(f"field has shape {u.shape}, expected ({g.n},) or ({g.n_interior},)")

    def embed(self, u_interior):
        u = np.zeros(self.grid.n)
        u[self.grid.interior_idx] = u_interior
        return u

    def norm(self, u):
        """The Z0 norm sqrt(u^T A u)."""
        v = self.restrict(u)
        return float(np.sqrt(max(v @ self.B @ v, 0.0)))


def _energy_i(p, v):
    return 0.5 * float(v @ p.B @ v) - float(np.sum(p.nonlinearity.F(p._xi, v) * p._vol))


def _grad_i(p, v):
    return p.B @ v - p.nonlinearity.f(p._xi, v) * p._vol


def energy(problem, u):
    return _energy_i(problem, problem.restrict(u))


def gradient(problem, u):
    """Interior gradient of the energy, returned as a full field (zero outside)."""
    return problem.embed(_grad_i(problem, problem.restrict(u)))


def nehari_scale(problem, u):
    """t > 0 maximizing t -> H(t u); closed form for powers, root-finding otherwise."""
    v = problem.restrict(u)
    quad = float(v @ problem.B @ v)
    nl = problem.nonlinearity
    if quad <= 0:
        raise UsageError("direction must be nonzero")
    if nl.kind == "power":
        top = float(np.sum(nl.coefficient(problem._xi) * np.abs(v) ** nl.q * problem._vol))
        if top <= 0:
            raise UsageError("direction has no support")
        return (quad / top) ** (1.0 / (nl.q - 2.0))

    def dphi(t):
        return t * quad - float(np.sum(nl.f(problem._xi, t * v) * v * problem._vol))

    hi = 1.0
    while dphi(hi) > 0:
        hi *= 2.0
        if hi > 1e30:
            raise SolverError("energy does not decrease along the ray")
    lo = hi / 2.0
    while dphi(lo) <= 0:
        lo /= 2.0
        if lo < 1e-30:
            raise SolverError("no positive maximum of the energy along the ray")
    return optimize.brentq(dphi, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


@dataclass
class GrowthReport:
    eps: float
    delta: float
    bound_ok: bool
    small_ratio: float
    sublinear_ok: bool
    ar_ok: bool
    lower_ok: bool
    worst_ar_gap: float

    @property
    def passed(self):
        return self.bound_ok and self.sublinear_ok and self.ar_ok and self.lower_ok


def check_growth(nl, samples, eps=1e-3):
    """Growth, sublinearity at 0, AR and the power lower bound on sample (xi, l) pairs.

    The subcritical bound |f| <= 2 eps |l| + q delta |l|^(q-1) uses
    delta = a2 / q, which works for every eps > 0 when a1 = 0.
    """
    xi = np.array([np.asarray(s[0], dtype=float) for s in samples])
    l = np.array([float(s[1]) for s in samples])
    fv, Fv = nl.f(xi, l), nl.F(xi, l)
    const = nl.growth_constants(xi)
    if const is not None:
        delta = const[1] / nl.q
    else:
        big = np.abs(l) > 1.0
        delta = float(np.max(np.abs(fv[big]) / np.abs(l[big]) ** (nl.q - 1.0), initial=0.0)) / nl.q
        small = ~big & (l != 0)
        eps = max(eps, float(np.max(np.abs(fv[small]) / (2 * np.abs(l[small])), initial=0.0)))
    bound_ok = bool(np.all(np.abs(fv) <= (2 * eps * np.abs(l) + nl.q * delta * np.abs(l) ** (nl.q - 1)) * (1 + 1e-12)))
    x0 = xi[:1] if xi.size else np.zeros((1, 3))
    r_small = float(abs(nl.f(x0, np.array([1e-6]))[0]) / 1e-6)
    r_mid = float(abs(nl.f(x0, np.array([1e-3]))[0]) / 1e-3)
    sublinear_ok = r_small < r_mid
    far = np.abs(l) > nl.R_thr
    gap = l * fv - nl.theta * Fv
    ar_ok = bool(np.all(nl.theta * Fv[far] > 0) and np.all(gap[far] >= -1e-12 * np.abs(l[far] * fv[far])))
    if nl.kind == "power":
        lower_ok = bool(np.all(Fv >= nl.coefficient(xi) * np.abs(l) ** nl.q / nl.q * (1 - 1e-15)))
    else:
        lower_ok = True
    worst = float(np.min(gap[far])) if np.any(far) else 0.0
    return GrowthReport(float(eps), float(delta), bound_ok, r_small, sublinear_ok, ar_ok, lower_ok, worst)


@dataclass
class MPGeometry:
    alpha: float
    rho: float
    rho_inf: float
    kappa: float
    e: np.ndarray
    e_energy: float
    doublings: int
    probe_min: float


def _kappa(problem):
    """kappa with sum F vol <= kappa ||u||^q for powers.

    |u_i|^2 <= (B^-1)_ii ||u||^2, so sum c |u|^q vol / q
    <= (1/q) lambda_max(D; B) d_inf^((q-2)/2) ||u||^q with D = diag(c vol).
    """
    nl = problem.nonlinearity
    B = problem.B
    d_inf = float(np.max(np.diag(linalg.inv(B))))
    if nl.kind == "power":
        D = nl.coefficient(problem._xi) * problem._vol
        q = nl.q
    else:
        # use the power envelope |F| <= a2 |l|^q / q with a2 read off by sampling
        ls = np.geomspace(1e-6, 1e3, 200)
        q = nl.q
        vals = np.abs(nl.F(np.repeat(problem._xi[:1], ls.size, 0), ls)) * q / ls ** q
        D = float(np.max(vals)) * problem._vol
    lam = float(linalg.eigh(np.diag(D), B, eigvals_only=True)[-1])
    return lam * d_inf ** ((q - 2.0) / 2.0) / q, d_inf, q


def mp_geometry(problem, probe_count=64, rng=None, seed=None):
    """Radius rho, level alpha and a far point e with negative energy.

    With H(u) >= 1/2 ||u||^2 - kappa ||u||^q, rho is where the second term
    takes half the slope of the first, rho = (1 / (2 q kappa))^(1/(q-2)), and
    alpha = 1/2 rho^2 - kappa rho^q.  ``rho_inf = sqrt(d_inf) rho`` bounds the
    sup-norm of fields on that sphere.
    """
    kappa, d_inf, q = _kappa(problem)
    if not (np.isfinite(kappa) and kappa > 0):
        raise SolverError("could not bound the nonlinear term", {"kappa": kappa})
    rho = (1.0 / (2.0 * q * kappa)) ** (1.0 / (q - 2.0))
    alpha = 0.5 * rho ** 2 - kappa * rho ** q
    rng = np.random.default_rng(0) if rng is None else rng
    probe_min = np.inf
    n = problem.grid.n_interior
    for _ in range(probe_count):
        v = rng.standard_normal(n)
        v *= rho / problem.norm(v)
        probe_min = min(probe_min, _energy_i(problem, v))
    base = np.ones(n) if seed is None else problem.restrict(seed).astype(float)
    base = base * (rho / problem.norm(base))
    j, doublings = 1.0, 0
    while True:
        e = j * base
        He = _energy_i(problem, e)
        if He < 0 and j * rho > rho:
            break
        if doublings >= 60:
            raise SolverError("no point of negative energy found along the seed ray",
                              {"doublings": doublings, "energy": He})
        j *= 2.0
        doublings += 1
    return MPGeometry(float(alpha), float(rho), float(np.sqrt(d_inf) * rho), float(kappa),
                      problem.embed(e), float(He), doublings, float(probe_min))


@dataclass
class MPReport:
    alpha: float
    rho: float
    rho_inf: float
    e: np.ndarray
    u_star: np.ndarray
    grad_norm: float
    energy: float
    norm: float
    iterations: int
    newton_steps: int
    grad_history: List[float] = field(default_factory=list)
    iterates: List[np.ndarray] = field(default_factory=list, repr=False)

    def as_dict(self):
        return {
            "alpha": self.alpha, "rho": self.rho, "rho_inf": self.rho_inf,
            "energy": self.energy, "gradient_norm": self.grad_norm, "norm": self.norm,
            "iterations": self.iterations, "newton_steps": self.newton_steps,
        }


def _on_nehari(problem, v):
    return nehari_scale(problem, v) * v


def solve_mountain_pass(problem, tol=1e-8, max_iter=5000, seed=None, geometry=None,
                        keep_iterates=50):
    """Ground state by descent on the Nehari set followed by a Newton polish.

    Each step moves against the Sobolev gradient B^-1 grad H, then rescales back
    onto the Nehari set; step sizes follow Armijo backtracking on H.  Once the
    gradient is small the critical point is polished with Newton on grad H = 0
    when the derivative of f is available.
    """
    geo = mp_geometry(problem, seed=seed) if geometry is None else geometry
    B = problem.B
    cho = linalg.cho_factor(B)
    n = problem.grid.n_interior
    base = np.ones(n) if seed is None else problem.restrict(seed).astype(float)
    w = _on_nehari(problem, base)
    Hw = _energy_i(problem, w)
    g = _grad_i(problem, w)
    hist, iterates = [float(np.max(np.abs(g)))], [problem.embed(w)]
    tau, it = 1.0, 0
    switch = max(tol, 1e-6 * max(1.0, hist[0]))
    df_available = problem.nonlinearity.df(problem._xi[:1], np.zeros(1)) is not None
    while hist[-1] > (switch if df_available else tol):
        if it >= max_iter:
            raise SolverError("Nehari descent stagnated", _ps_details(problem, iterates, hist))
        p = linalg.cho_solve(cho, g)
        slope = float(g @ p)
        tau = min(1.0, 2.0 * tau)
        while True:
            cand = _on_nehari(problem, w - tau * p)
            Hc = _energy_i(problem, cand)
            if Hc <= Hw - 1e-4 * tau * slope or tau < 1e-14:
                break
            tau *= 0.5
        if tau < 1e-14:
            break
        w, Hw = cand, Hc
        g = _grad_i(problem, w)
        hist.append(float(np.max(np.abs(g))))
        iterates.append(problem.embed(w))
        if len(iterates) > keep_iterates:
            iterates.pop(0)
        it += 1

    newton = 0
    while df_available and hist[-1] > tol:
        if newton >= 50:
            raise SolverError("Newton polish did not converge", _ps_details(problem, iterates, hist))
        H = B - np.diag(problem.nonlinearity.df(problem._xi, w) * problem._vol)
        w = w - linalg.solve(H, g, assume_a="sym")
        g = _grad_i(problem, w)
        hist.append(float(np.max(np.abs(g))))
        iterates.append(problem.embed(w))
        newton += 1
    if hist[-1] > tol:
        raise SolverError("critical point not reached", _ps_details(problem, iterates, hist))
    Hw = _energy_i(problem, w)
    nrm = problem.norm(w)
    if not (Hw >= geo.alpha * (1 - 1e-6) and nrm >= geo.rho):
        raise SolverError("converged to a point below the mountain-pass level",
                          {"energy": Hw, "alpha": geo.alpha, "norm": nrm, "rho": geo.rho})
    return MPReport(geo.alpha, geo.rho, geo.rho_inf, geo.e, problem.embed(w), hist[-1], Hw, nrm,
                    it, newton, hist, iterates)


@dataclass
class PSReport:
    sup_norm: float
    ar_lhs: List[float]
    ar_rhs: List[float]
    ar_ok: bool
    c1: float
    grad_norms: List[float]
    grad_decreasing: bool

    def as_dict(self):
        return {"sup_norm": self.sup_norm, "ar_ok": self.ar_ok, "c1": self.c1,
                "final_gradient_norm": self.grad_norms[-1], "grad_decreasing": self.grad_decreasing}


def _ar_offset(problem):
    """c1 = sum_i vol_i sup_{|l| <= R} (F - l f / theta)^+; zero for powers."""
    nl = problem.nonlinearity
    if nl.kind == "power" or nl.R_thr == 0.0:
        return 0.0
    ls = np.linspace(-nl.R_thr, nl.R_thr, 401)
    worst = 0.0
    for i in range(problem._xi.shape[0]):
        xi = np.repeat(problem._xi[i:i + 1], ls.size, 0)
        gap = nl.F(xi, ls) - ls * nl.f(xi, ls) / nl.theta
        worst += problem._vol[i] * max(0.0, float(np.max(gap)))
    return worst


def ps_diagnostics(problem, iterates):
    """Boundedness diagnostics along iterates: (1/2 - 1/theta)||u||^2 <= H - <H', u>/theta + c1."""
    if len(iterates) < 2:
        raise UsageError("need at least two iterates")
    th = problem.nonlinearity.theta
    c1 = _ar_offset(problem)
    norms, lhs, rhs, gn = [], [], [], []
    for u in iterates:
        v = problem.restrict(u)
        nrm = problem.norm(v)
        gr = _grad_i(problem, v)
        norms.append(nrm)
        lhs.append((0.5 - 1.0 / th) * nrm ** 2)
        rhs.append(_energy_i(problem, v) - float(gr @ v) / th + c1)
        gn.append(float(np.max(np.abs(gr))))
    ok = all(a <= b + 1e-10 * max(1.0, abs(b)) for a, b in zip(lhs, rhs))
    dec = gn[-1] <= gn[0]
    return PSReport(max(norms), lhs, rhs, ok, c1, gn, dec)


def _ps_details(problem, iterates, hist):
    d = {"iterations": len(hist) - 1, "gradient_norm": hist[-1]}
    if len(iterates) >= 2:
        d.update(ps_diagnostics(problem, iterates).as_dict())
    return d


# -- symmetry -------------------------------------------------------------

def _flip(sx, sy, st):
    def apply(a):
        a = np.array(a, dtype=float)
        N = (a.shape[-1] - 1) // 2
        a[..., :N] *= sx
        a[..., N:2 * N] *= sy
        a[..., 2 * N] *= st
        return a
    return apply


# group automorphisms that preserve the Koranyi norm
HEISENBERG_REFLECTIONS = (_flip(-1, -1, 1), _flip(1, -1, -1), _flip(-1, 1, -1))


def node_permutation(grid, mapping, digits=9):
    """perm with nodes[perm[i]] = mapping(nodes[i]); raises if the node set is not invariant."""
    keys = {tuple(np.round(p, digits)): i for i, p in enumerate(grid.nodes)}
    img = mapping(grid.nodes)
    perm = np.empty(grid.n, dtype=int)
    for i, p in enumerate(img):
        j = keys.get(tuple(np.round(p, digits)))
        if j is None:
            raise UsageError("grid is not invariant under the mapping")
        perm[i] = j
    if not np.array_equal(grid.interior[perm], grid.interior):
        raise UsageError("the mapping does not preserve the domain")
    return perm


def symmetrize(grid, u, mappings=HEISENBERG_REFLECTIONS):
    """Average of u over the group generated by the given reflections."""
    u = np.asarray(u, dtype=float)
    perms = [np.arange(grid.n)]
    for m in mappings:
        p = node_permutation(grid, m)
        perms += [q[p] for q in perms]
    uniq = {tuple(p) for p in perms}
    return sum(u[list(p)] for p in uniq) / len(uniq)
