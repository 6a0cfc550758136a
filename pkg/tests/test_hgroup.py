import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hvar import hgroup
from hvar.errors import UsageError
from hvar.hgroup import GroupElement as G, VectorFieldStencil


def naive_product(a, b):
    """Written out coordinate by coordinate, independent of the vectorized code."""
    N = a.N
    t = a.t + b.t
    for j in range(N):
        t += 2.0 * (b.x[j] * a.y[j] - a.x[j] * b.y[j])
    return G([a.x[j] + b.x[j] for j in range(N)], [a.y[j] + b.y[j] for j in range(N)], t)


coord = st.floats(-10, 10, allow_nan=False)


def elements(N):
    return st.builds(lambda v: G.from_array(v), st.lists(coord, min_size=2 * N + 1, max_size=2 * N + 1))


def close(a, b, tol=1e-12):
    return np.max(np.abs(a.as_array() - b.as_array())) <= tol


def test_product_examples():
    assert hgroup.multiply(G([1], [0], 0), G([0], [1], 0)) == G([1], [1], -2)
    assert hgroup.multiply(G([1], [0], 0), G([-1], [0], 0)) == G.identity(1)
    p = G([0.3], [-2.0], 5.0)
    assert G.identity(1) * p == p and p * G.identity(1) == p


def test_inverse_and_dilation_examples():
    assert hgroup.inverse(G([1], [2], 3)) == G([-1], [-2], -3)
    assert hgroup.inverse(G.identity(1)) == G.identity(1)
    assert hgroup.dilate(2.0, G([1], [0], 1)) == G([2], [0], 4)
    p = G([0.1, 2.0], [3.0, -1.0], 0.7)
    assert hgroup.dilate(1.0, p) == p


def test_norm_examples():
    assert hgroup.knorm(G([3], [4], 0)) == 5.0
    assert hgroup.knorm(G.identity(2)) == 0.0
    assert hgroup.theta_weight(G.identity(1)) == 0.0
    assert hgroup.theta_weight(G([0.5], [0], 0)) == 0.25
    assert hgroup.theta_weight(G([0], [0], 9.0)) == 1.0


def test_errors():
    with pytest.raises(UsageError):
        hgroup.multiply(G([1], [0], 0), G([1, 2], [0, 0], 0))
    with pytest.raises(UsageError):
        hgroup.dilate(0.0, G([1], [0], 0))
    with pytest.raises(UsageError):
        G([1, 2], [0], 0)
    with pytest.raises(UsageError):
        G([np.inf], [0], 0)
    with pytest.raises(UsageError):
        VectorFieldStencil("Z")
    with pytest.raises(UsageError):
        VectorFieldStencil("X", 1, 0.0)
    with pytest.raises(UsageError):
        VectorFieldStencil("Y", 2).step(1)


def test_element_is_immutable():
    p = G([1.0], [2.0], 3.0)
    with pytest.raises(ValueError):
        p.x[0] = 5.0
    assert hash(p) == hash(G([1.0], [2.0], 3.0))


@settings(max_examples=200, deadline=None)
@given(elements(2), elements(2), elements(2))
def test_group_axioms(a, b, c):
    assert close(a * b, naive_product(a, b))
    assert close((a * b) * c, a * (b * c))
    assert close(a * hgroup.inverse(a), G.identity(2), 1e-14)
    assert hgroup.inverse(hgroup.inverse(a)) == a
    assert hgroup.knorm(hgroup.inverse(a)) == hgroup.knorm(a)


@settings(max_examples=200, deadline=None)
@given(elements(1), st.floats(0.05, 20), st.floats(0.05, 20))
def test_dilations(a, s, t):
    assert close(hgroup.dilate(s, hgroup.dilate(t, a)), hgroup.dilate(s * t, a), 1e-9 * (1 + hgroup.knorm(a) ** 2))
    assert abs(hgroup.knorm(hgroup.dilate(s, a)) - s * hgroup.knorm(a)) <= 1e-12 * (1 + s * hgroup.knorm(a))


@settings(max_examples=100, deadline=None)
@given(elements(1), elements(1), st.floats(0.1, 5))
def test_left_invariance_of_balls(xi, eta, r):
    # eta lies in xi.B_r(0) iff eta = xi.z with |z| < r
    z = hgroup.inverse(xi) * eta
    assert close(xi * z, eta, 1e-9)
    assert (hgroup.knorm(z) < r) == (hgroup.knorm(hgroup.inverse(xi) * eta) < r)


def test_dilation_is_automorphism(rng):
    a, b = rng.uniform(-3, 3, (2, 50, 5))
    lhs = hgroup.dil(1.7, hgroup.mul(a, b))
    rhs = hgroup.mul(hgroup.dil(1.7, a), hgroup.dil(1.7, b))
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_vector_field_examples():
    p = G([0.4], [-1.3], 2.0)
    f_t = lambda q: q.t  # noqa: E731
    assert apply(VectorFieldStencil("X", 1, 1e-3), f_t, p) == pytest.approx(2 * -1.3, abs=1e-10)
    assert apply(VectorFieldStencil("Y", 1, 1e-3), f_t, p) == pytest.approx(-2 * 0.4, abs=1e-10)
    assert apply(VectorFieldStencil("T", 1, 1e-3), f_t, p) == pytest.approx(1.0, abs=1e-10)
    assert apply(VectorFieldStencil("X", 1, 1e-3), lambda q: 3.0, p) == 0.0


def apply(stencil, f, p):
    return hgroup.apply_vector_field(stencil, f, p)


def test_vector_fields_match_symbolic_form(rng):
    # X_j = d/dx_j + 2 y_j d/dt, Y_j = d/dy_j - 2 x_j d/dt on f = sin(x1) y2 + t^2
    f = lambda q: np.sin(q.x[0]) * q.y[1] + q.t ** 2  # noqa: E731
    for _ in range(5):
        a = rng.uniform(-1, 1, 5)
        p = G.from_array(a)
        x, y, t = a[:2], a[2:4], a[4]
        Xf = np.cos(x[0]) * y[1] + 2 * y[0] * 2 * t
        Yf = 1.0 * np.sin(x[0]) - 2 * x[1] * 2 * t
        assert apply(VectorFieldStencil("X", 1, 1e-4), f, p) == pytest.approx(Xf, abs=1e-7)
        assert apply(VectorFieldStencil("Y", 2, 1e-4), f, p) == pytest.approx(Yf, abs=1e-7)


def test_commutator_on_t():
    p = G([0.2, -0.1], [0.5, 0.3], 1.0)
    f = lambda q: q.t  # noqa: E731
    for j in (1, 2):
        for k in (1, 2):
            got = hgroup.commutator(VectorFieldStencil("X", j, 1e-3), VectorFieldStencil("Y", k, 1e-3), f, p)
            assert got == pytest.approx(-4.0 if j == k else 0.0, abs=1e-8)


def test_commutator_sin_cos_second_order():
    # f = sin(x1) cos(t): [X1, Y1] f -> -4 df/dt with O(h^2) error
    f = lambda q: np.sin(q.x[0]) * np.cos(q.t)  # noqa: E731
    p = G([0.3, 0.1], [-0.2, 0.4], 0.6)
    exact = -4 * (-np.sin(0.3) * np.sin(0.6))
    errs = [abs(hgroup.commutator(VectorFieldStencil("X", 1, h), VectorFieldStencil("Y", 1, h), f, p) - exact)
            for h in (1e-2, 5e-3, 2.5e-3)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.9)
    for u, v in ((("X", 1), ("X", 2)), (("Y", 1), ("Y", 2)), (("X", 1), ("T", 1)), (("X", 1), ("Y", 2))):
        got = hgroup.commutator(VectorFieldStencil(*u, 1e-3), VectorFieldStencil(*v, 1e-3), f, p)
        assert abs(got) < 1e-9
