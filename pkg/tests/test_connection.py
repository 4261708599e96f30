import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pbglab import action as A
from pbglab import bundle as B
from pbglab import connection as C
from pbglab import liegroup as L
from pbglab.algebroid import Field, TrivialPBGAlgebroid

SU2 = L.su2()
TWO_TERM = [["0", "x", "0", "0", "0"], ["y", "0", "0", "0", "0"], ["0"] * 5]
ABELIAN = [["0", "x", "0", "0", "0"], ["0"] * 5, ["0"] * 5]


def _alg(action="Ad", half=1.0):
    patch = B.trivial_bundle(SU2, ("x", "y"), B.Domain.box([[-half, half], [-half, half]])).patch(0)
    act = A.adjoint(SU2) if action == "Ad" else A.trivial(SU2, SU2)
    return TrivialPBGAlgebroid(patch, act)


@pytest.fixture(scope="module")
def ad_alg():
    return _alg("Ad")


@pytest.fixture(scope="module")
def wide_trivial():
    return _alg("trivial", 3.0)


def _pt(x, y):
    return B.BundlePoint(0, np.array([x, y]), np.eye(2, dtype=complex))


def test_standard_flat(ad_alg):
    flat = C.standard_flat(ad_alg)
    rng = np.random.default_rng(0)
    x, g = ad_alg.random_points(rng, 10)
    v = rng.normal(size=(10, 5))
    assert np.all(flat.omega(x, g, v) == 0)
    assert np.all(C.curvature_tensor(flat, x, g) == 0)
    assert C.isometablic_check(flat).residual == 0


def test_apply_examples(wide_trivial):
    w = C.ConnectionForm.from_exprs(wide_trivial, ABELIAN)
    X, V = C.apply(w, B.TangentVec(_pt(2, 0), np.array([0.0, 1.0]), np.zeros(3)))
    assert np.allclose(X, [0, 1, 0, 0, 0]) and np.allclose(V, [2, 0, 0])
    zero = C.apply(w, B.TangentVec(_pt(2, 0), np.zeros(2), np.zeros(3)))
    assert np.allclose(zero[1], 0)
    a = B.TangentVec(_pt(0.5, 1), np.array([1.0, 2.0]), np.array([0.1, 0, 0]))
    b = B.TangentVec(_pt(0.5, 1), np.array([-1.0, 0.5]), np.array([0, 0.3, 0]))
    ab = B.TangentVec(_pt(0.5, 1), 2 * a.xdot + 3 * b.xdot, 2 * a.xi + 3 * b.xi)
    assert np.allclose(C.apply(w, ab)[1], 2 * C.apply(w, a)[1] + 3 * C.apply(w, b)[1])
    with pytest.raises(B.OutOfChart):
        C.apply(w, B.TangentVec(_pt(5, 0), np.zeros(2), np.zeros(3)))


def test_curvature_of_abelian_form(wide_trivial):
    w = C.ConnectionForm.from_exprs(wide_trivial, ABELIAN)
    rng = np.random.default_rng(1)
    x, g = wide_trivial.random_points(rng, 10)
    Om = C.curvature(w, np.eye(5)[0], np.eye(5)[1], x, g, cross_check=True)
    assert np.max(np.abs(Om - [-1, 0, 0])) < 1e-8


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_curvature_antisymmetric_and_routes_agree(seed):
    alg = _alg("Ad")
    w = C.ConnectionForm.from_exprs(alg, TWO_TERM, "equivariant")
    rng = np.random.default_rng(seed)
    x, g = alg.random_points(rng, 3)
    X, Y = rng.normal(size=5), rng.normal(size=5)
    a = C.curvature(w, X, Y, x, g, cross_check=True)
    b = C.curvature(w, Y, X, x, g)
    assert np.max(np.abs(a + b)) < 1e-8


def test_isometablic_positive_and_negative(ad_alg, wide_trivial):
    eq = C.ConnectionForm.from_exprs(ad_alg, TWO_TERM, "equivariant")
    lit = C.ConnectionForm.from_exprs(ad_alg, TWO_TERM, "literal")
    assert C.isometablic_check(eq, 200).residual < 1e-10
    assert C.isometablic_check(lit, 200).residual > 1e-2
    base_only = C.ConnectionForm.from_exprs(wide_trivial, ABELIAN)
    assert C.isometablic_check(base_only).residual == 0
    assert C.curvature_equivariance_check(eq, 50).passed
    assert not C.curvature_equivariance_check(lit, 50).passed


def test_back_connection(ad_alg):
    eq = C.ConnectionForm.from_exprs(ad_alg, TWO_TERM, "equivariant")
    back = C.back_connection(eq)
    rng = np.random.default_rng(2)
    x, g = ad_alg.random_points(rng, 5)
    X = rng.normal(size=(5, 5))
    V = rng.normal(size=(5, 3))
    assert np.allclose(back(x, g, X, eq.omega(x, g, X)), 0)
    assert np.allclose(back(x, g, np.zeros_like(X), V), V)
    assert back.check().residual < 1e-10


def test_adjoint_examples(ad_alg, wide_trivial):
    flat = C.standard_flat(ad_alg)
    rng = np.random.default_rng(3)
    x, g = ad_alg.random_points(rng, 6)
    const = Field.constant([0.2, -0.1, 0.4])
    assert np.allclose(C.adjoint_apply(flat, np.eye(5)[0], const, x, g), 0, atol=1e-12)
    V = Field.from_exprs(ad_alg.patch, ["x*y", "x^2", "0"])
    got = C.adjoint_apply(flat, np.eye(5)[0], V, x, g)
    want = np.stack([x[:, 1], 2 * x[:, 0], 0 * x[:, 0]], 1)
    assert np.max(np.abs(got - want)) < 1e-8
    w = C.ConnectionForm.from_exprs(wide_trivial, ABELIAN)
    E2 = Field.constant([0, 1.0, 0])
    pts = np.array([[2.0, 0.0], [-1.0, 0.5]])
    got = C.adjoint_apply(w, np.eye(5)[1], E2, pts, SU2.identity((2,)))
    assert np.allclose(got, [[0, 0, 2], [0, 0, -1]])


def test_adjoint_checks_and_bianchi(ad_alg, wide_trivial):
    eq = C.ConnectionForm.from_exprs(ad_alg, TWO_TERM, "equivariant")
    assert C.adjoint_equivariance_check(eq, 20).passed
    assert C.derivation_check(eq, 20).passed
    assert C.bianchi_check(C.standard_flat(ad_alg), 10).residual == 0
    ab = C.ConnectionForm.from_exprs(wide_trivial, ABELIAN)
    assert C.bianchi_check(ab, 20).residual < 1e-6
    assert C.bianchi_check(eq, 20).residual < 1e-4


def _principal(alg, table):
    palg = TrivialPBGAlgebroid(alg.patch, A.adjoint(SU2))
    return C.ConnectionForm.from_exprs(palg, table, "equivariant")


PRODUCT = [["0", "0", "1", "0", "0"], ["0", "0", "0", "1", "0"], ["0", "0", "0", "0", "1"]]
TWISTED = [["x", "0", "1", "0", "0"], ["0", "y", "0", "1", "0"], ["x*y", "0", "0", "0", "1"]]


def test_quotient_roundtrip(ad_alg):
    triv = _alg("trivial")
    deltas = [_principal(triv, PRODUCT), _principal(triv, TWISTED)]
    r = C.quotient_roundtrip(C.standard_flat(triv), deltas[:1])
    assert r.residual == 0
    pull = C.ConnectionForm.from_exprs(triv, [["0", "x", 0, 0, 0], ["y", "0", 0, 0, 0], ["x*y", "0", 0, 0, 0]])
    r = C.quotient_roundtrip(pull, deltas)
    assert r.details["residuals"]["roundtrip"] < 1e-6
    assert r.details["residuals"]["delta-independence"] < 1e-6
    # an Ad-equivariant form that ignores fiber directions, with delta-dependent lifts
    eq = C.ConnectionForm.from_exprs(ad_alg, TWO_TERM, "equivariant")
    assert C.quotient_roundtrip(eq, [_principal(ad_alg, PRODUCT), _principal(ad_alg, TWISTED)]).passed
    vert = C.ConnectionForm.from_exprs(triv, [["0", "0", "1", "0", "0"], ["0"] * 5, ["0"] * 5])
    with pytest.raises(C.NotVanishingOnVertical):
        C.quotient_roundtrip(vert, deltas)
    lit = C.ConnectionForm.from_exprs(ad_alg, TWO_TERM, "literal")
    with pytest.raises(C.NotIsometablic):
        C.quotient_roundtrip(lit, [_principal(ad_alg, PRODUCT)])


def test_hom_connection_examples(ad_alg):
    rng = np.random.default_rng(4)
    x, g = ad_alg.random_points(rng, 5)
    eq = C.ConnectionForm.from_exprs(ad_alg, TWO_TERM, "equivariant")
    nab = C.AdjointConnection(eq)
    ident = lambda x, g: np.broadcast_to(np.eye(3), (np.atleast_2d(x).shape[0], 3, 3))
    X = rng.normal(size=5)
    assert np.max(np.abs(C.hom_connection(ident, nab, nab, X, x, g))) < 1e-10
    const = C.dsl_tensor_field(ad_alg.patch, [["1", "2", "0"], ["0", "1", "3"], ["4", "0", "1"]])
    assert np.allclose(C.hom_connection(const, None, None, X, x, g, patch=ad_alg.patch), 0)
    poly = C.dsl_tensor_field(ad_alg.patch, [["x^2", "0", "0"], ["0", "x*y", "0"], ["0", "0", "y"]])
    got = C.hom_connection(poly, None, None, np.eye(5)[0], x, g, patch=ad_alg.patch)
    assert np.allclose(got[:, 0, 0], 2 * x[:, 0], atol=1e-8)
    assert np.allclose(got[:, 1, 1], x[:, 1], atol=1e-8)


def test_produced_connection_stays_isometablic(wide_trivial):
    # phi = Ad(k) is an automorphism commuting with the trivial action
    k = SU2.exp([0.3, -0.2, 0.5])
    w = C.ConnectionForm.from_exprs(wide_trivial, ABELIAN)
    phi = SU2.Ad_matrix(k)
    pushed = C.ConnectionForm(wide_trivial, lambda x, g: phi @ w.matrix(x, g), "phi.omega")
    assert C.isometablic_check(w).passed and C.isometablic_check(pushed).passed
