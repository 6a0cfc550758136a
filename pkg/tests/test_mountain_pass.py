import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hvar import assembly, grid, kernels, mountain_pass as mp
from hvar.errors import SolverError, UsageError
from tests.conftest import hand_grid


def scalar_problem(q=4.0):
    A = assembly.form_from_matrix([[2.0]], hand_grid(1))
    return mp.SemilinearProblem(A, mp.power_nonlinearity(q))


@pytest.fixture(scope="module")
def cube27():
    g = grid.build_grid(grid.box(1.5), 1.0, R_trunc=12.0, collar=2)
    assert g.n_interior == 27
    return assembly.assemble_stiffness(g, kernels.fractional_kernel(0.5))


@pytest.fixture(scope="module")
def mp27(cube27):
    P = mp.SemilinearProblem(cube27, mp.power_nonlinearity(2.5))
    return P, mp.solve_mountain_pass(P, tol=1e-8)


def test_scalar_energy_and_gradient():
    P = scalar_problem()
    for u in (-1.7, 0.0, 0.3, 2.0):
        assert mp.energy(P, [u]) == pytest.approx(u * u - u ** 4 / 4, abs=1e-14)
        assert mp.gradient(P, [u])[0] == pytest.approx(2 * u - u ** 3, abs=1e-14)
    assert mp.energy(P, [0.0]) == 0.0 and mp.gradient(P, [0.0])[0] == 0.0


def test_scalar_geometry_and_critical_point():
    P = scalar_problem()
    geo = mp.mp_geometry(P)
    assert geo.kappa == pytest.approx(1 / 16, rel=1e-14)
    assert geo.rho == pytest.approx(np.sqrt(2), rel=1e-14)  # Z0 radius, |u| = rho / sqrt(2)
    assert geo.rho_inf == pytest.approx(1.0, rel=1e-14)
    assert geo.alpha == pytest.approx(0.75, rel=1e-14)
    e = geo.e[0]
    assert e * e - e ** 4 / 4 < 0 and P.norm(geo.e) > geo.rho
    rep = mp.solve_mountain_pass(P)
    assert abs(rep.u_star[0]) == pytest.approx(np.sqrt(2), rel=1e-12)
    assert rep.energy == pytest.approx(1.0, rel=1e-12)


def test_energy_rejects_exterior_trace(cube27):
    P = mp.SemilinearProblem(cube27, mp.power_nonlinearity(2.5))
    with pytest.raises(UsageError):
        mp.energy(P, np.ones(cube27.n))


def test_evenness(cube27, rng):
    P = mp.SemilinearProblem(cube27, mp.power_nonlinearity(2.5, c=2.0))
    u = P.embed(rng.standard_normal(27))
    assert mp.energy(P, -u) == mp.energy(P, u)


def test_gradient_against_central_differences(cube27, rng):
    P = mp.SemilinearProblem(cube27, mp.power_nonlinearity(2.5, c=lambda X: 1 + 0.5 * np.cos(X[:, 0])))
    worst = 0.0
    for _ in range(100):
        u = P.embed(rng.standard_normal(27))
        v = P.embed(rng.standard_normal(27))
        eps = 1e-5
        fd = (mp.energy(P, u + eps * v) - mp.energy(P, u - eps * v)) / (2 * eps)
        an = float(mp.gradient(P, u) @ v)
        worst = max(worst, abs(fd - an) / max(abs(an), 1e-12))
    assert worst <= 1e-6


def test_nehari_scale_closed_form(cube27, rng):
    P = mp.SemilinearProblem(cube27, mp.power_nonlinearity(2.5))
    for _ in range(20):
        u = P.embed(rng.standard_normal(27))
        t = mp.nehari_scale(P, u)
        w = t * u
        assert abs(float(mp.gradient(P, w) @ u)) <= 1e-10 * max(1.0, P.norm(w) ** 2)
        for s in (0.9, 1.1):
            assert mp.energy(P, s * w) < mp.energy(P, w)


def test_custom_nonlinearity_matches_power(cube27, rng):
    q = 2.5
    cust = mp.Nonlinearity("custom", q=q, theta=q,
                           f_fn=lambda X, l: np.abs(l) ** (q - 2) * l,
                           F_fn=lambda X, l: np.abs(l) ** q / q,
                           df_fn=lambda X, l: (q - 1) * np.abs(l) ** (q - 2))
    Pc = mp.SemilinearProblem(cube27, cust)
    Pp = mp.SemilinearProblem(cube27, mp.power_nonlinearity(q))
    u = Pp.embed(rng.standard_normal(27))
    assert mp.nehari_scale(Pc, u) == pytest.approx(mp.nehari_scale(Pp, u), rel=1e-12)
    assert mp.energy(Pc, u) == pytest.approx(mp.energy(Pp, u), rel=1e-14)


def test_q_validation(cube27):
    with pytest.raises(UsageError):
        mp.power_nonlinearity(2.0)
    with pytest.raises(UsageError):
        mp.SemilinearProblem(cube27, mp.power_nonlinearity(3.0))  # Q* = 8/3
    with pytest.raises(UsageError):
        mp.Nonlinearity("custom", q=3, f_fn=lambda X, l: l, F_fn=lambda X, l: l)


def test_growth_report():
    nl = mp.power_nonlinearity(2.5, c=1.0)
    xi = np.zeros(3)
    samples = [(xi, l) for l in np.concatenate([-np.geomspace(1e-6, 1e3, 30), np.geomspace(1e-6, 1e3, 30)])]
    rep = mp.check_growth(nl, samples)
    assert rep.passed
    assert rep.small_ratio == pytest.approx(1e-3, rel=1e-9)
    assert rep.delta == pytest.approx(1 / 2.5)
    assert rep.worst_ar_gap == pytest.approx(0.0, abs=1e-9)
    l = np.linspace(-5, 5, 101)
    np.testing.assert_allclose(nl.theta * nl.F(np.zeros((101, 3)), l), l * nl.f(np.zeros((101, 3)), l), rtol=1e-14)


def test_growth_report_flags_ar_failure():
    # F = l^2 log(1 + l^2) style growth is fine; a pure quadratic violates AR with theta = 3
    nl = mp.Nonlinearity("custom", q=2.5, theta=3.0, R_thr=1.0,
                         f_fn=lambda X, l: 2 * l, F_fn=lambda X, l: l * l)
    rep = mp.check_growth(nl, [(np.zeros(3), l) for l in (2.0, 5.0, -3.0)])
    assert not rep.ar_ok


def test_geometry_probes(cube27):
    P = mp.SemilinearProblem(cube27, mp.power_nonlinearity(2.5))
    geo = mp.mp_geometry(P, probe_count=200)
    assert geo.alpha > 0
    assert geo.probe_min >= geo.alpha - 1e-12
    assert mp.energy(P, geo.e) < 0 and P.norm(geo.e) > geo.rho


def test_ground_state_on_27_nodes(mp27):
    P, rep = mp27
    assert rep.grad_norm <= 1e-8
    assert np.max(np.abs(mp.gradient(P, rep.u_star))) <= 1e-8
    assert rep.energy >= rep.alpha * (1 - 1e-6)
    assert rep.norm >= rep.rho
    assert np.all(rep.u_star[P.grid.interior_idx] > 0)  # positive seed stays positive


def test_ps_diagnostics(mp27):
    P, rep = mp27
    ps = mp.ps_diagnostics(P, rep.iterates)
    assert ps.ar_ok and ps.c1 == 0.0 and ps.grad_decreasing
    for a, b in zip(ps.ar_lhs, ps.ar_rhs):
        assert a == pytest.approx(b, rel=1e-10)  # identity for pure powers
    u = rep.u_star
    const = mp.ps_diagnostics(P, [u, u, u])
    assert const.sup_norm == pytest.approx(P.norm(u))
    with pytest.raises(UsageError):
        mp.ps_diagnostics(P, [u])


def test_symmetry_of_ground_state(mp27):
    P, rep = mp27
    g = P.grid
    sym = mp.symmetrize(g, rep.u_star)
    assert np.max(np.abs(sym - rep.u_star)) <= 1e-8 * np.max(np.abs(rep.u_star))
    for m in mp.HEISENBERG_REFLECTIONS:
        perm = mp.node_permutation(g, m)
        np.testing.assert_allclose(P.B, P.B, atol=0)
        assert np.max(np.abs(rep.u_star[perm] - rep.u_star)) <= 1e-8 * np.max(np.abs(rep.u_star))


def test_reflections_preserve_the_form(cube27):
    g = cube27.grid
    M = cube27.matrix.toarray()
    for m in mp.HEISENBERG_REFLECTIONS:
        p = mp.node_permutation(g, m)
        np.testing.assert_allclose(M[np.ix_(p, p)], M, rtol=1e-12, atol=1e-15 * np.abs(M).max())


def test_stagnation_raises_with_diagnostics(cube27):
    P = mp.SemilinearProblem(cube27, mp.power_nonlinearity(2.5))
    with pytest.raises(SolverError) as exc:
        mp.solve_mountain_pass(P, tol=1e-30, max_iter=3)
    assert "gradient_norm" in exc.value.details


@settings(max_examples=25, deadline=None)
@given(st.floats(2.05, 2.6), st.floats(0.5, 3.0))
def test_scalar_family(q, c):
    # H(u) = u^2 - c|u|^q/q; the critical point solves 2 = c|u|^(q-2)
    A = assembly.form_from_matrix([[2.0]], hand_grid(1))
    P = mp.SemilinearProblem(A, mp.power_nonlinearity(q, c))
    rep = mp.solve_mountain_pass(P)
    u = (2 / c) ** (1 / (q - 2))
    assert abs(rep.u_star[0]) == pytest.approx(u, rel=1e-9)
    assert rep.energy >= rep.alpha
