import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pbglab import action as A
from pbglab import algebroid as Al
from pbglab import bundle as B
from pbglab import liegroup as L
from pbglab.algebroid import Field

SU2 = L.su2()


@pytest.fixture(scope="module")
def alg():
    patch = B.trivial_bundle(SU2, ("x", "y"), B.Domain.box([[-1, 1], [-1, 1]])).patch(0)
    return Al.TrivialPBGAlgebroid(patch, A.adjoint(SU2))


def _sec(alg, X, V):
    return alg.section(Field.from_exprs(alg.patch, X), Field.from_exprs(alg.patch, V))


def _pts(alg, seed=0, size=20):
    return alg.random_points(np.random.default_rng(seed), size)


def test_anchor_examples(alg):
    x, g = _pts(alg)
    s = _sec(alg, ["0"] * 5, ["x", "1", "y"])
    assert np.allclose(Al.anchor(s, x, g), 0)
    t = _sec(alg, ["x", "y^2", "1", "0", "x*y"], ["0"] * 3)
    X = Al.anchor(t, x, g)
    assert np.allclose(X[:, 0], x[:, 0]) and np.allclose(X[:, 4], x[:, 0] * x[:, 1])
    assert np.allclose(Al.anchor(s + t, x, g), Al.anchor(s, x, g) + Al.anchor(t, x, g))
    with pytest.raises(B.OutOfChart):
        Al.anchor(t, np.array([[3.0, 0.0]]), g[:1])


def test_bracket_of_constant_sections_is_pointwise(alg):
    x, g = _pts(alg)
    s1, s2 = _sec(alg, ["0"] * 5, ["1", "0", "0"]), _sec(alg, ["0"] * 5, ["0", "1", "0"])
    X, V = Al.trivial_bracket(s1, s2)(x, g)
    assert np.allclose(X, 0) and np.allclose(V, [0, 0, 1])


def test_bracket_hand_differentiated_example(alg):
    # [d_x (+) 0, 0 (+) x E1] = 0 (+) E1
    x, g = _pts(alg)
    s1 = _sec(alg, ["1", "0", "0", "0", "0"], ["0"] * 3)
    s2 = _sec(alg, ["0"] * 5, ["x", "0", "0"])
    X, V = Al.trivial_bracket(s1, s2)(x, g)
    assert np.max(np.abs(X)) < 1e-8 and np.max(np.abs(V - [1, 0, 0])) < 1e-8


def test_bracket_antisymmetric(alg):
    rng = np.random.default_rng(4)
    s1, s2 = Al.random_section(alg, rng), Al.random_section(alg, rng)
    x, g = _pts(alg, 5)
    a = Al.trivial_bracket(s1, s2)(x, g)
    b = Al.trivial_bracket(s2, s1)(x, g)
    assert np.max(np.abs(a[0] + b[0])) < 1e-8 and np.max(np.abs(a[1] + b[1])) < 1e-8


def test_mismatched_algebroids(alg):
    other = Al.TrivialPBGAlgebroid(alg.patch, A.trivial(SU2, SU2))
    with pytest.raises(Al.AlgebroidMismatch):
        Al.trivial_bracket(alg.zero(), other.zero())


def test_act_on_section_examples(alg):
    x, g = _pts(alg)
    s = _sec(alg, ["x", "0", "1", "0", "0"], ["y", "1", "0"])
    X, V = Al.act_on_section(s, np.eye(2))(x, g)
    X0, V0 = s(x, g)
    assert np.allclose(X, X0) and np.allclose(V, V0)
    triv = Al.TrivialPBGAlgebroid(alg.patch, A.trivial(SU2, SU2))
    c = _sec(triv, ["1", "0", "0", "0", "0"], ["0.5", "0", "2"])
    k = SU2.random(np.random.default_rng(1))
    X, V = Al.act_on_section(c, k)(x, g)
    assert np.allclose(X, c(x, g)[0]) and np.allclose(V, c(x, g)[1])
    with pytest.raises(L.GroupMismatch):
        Al.act_on_section(s, np.eye(3))


def test_action_bracket_examples(alg):
    patch = alg.patch
    x, g = _pts(alg)
    const_v = lambda x, g: np.broadcast_to([1.0, 0, 0], (np.atleast_2d(x).shape[0], 3))
    const_w = lambda x, g: np.broadcast_to([0, 1.0, 0], (np.atleast_2d(x).shape[0], 3))
    assert np.allclose(Al.action_bracket(patch, const_v, const_w)(x, g), [0, 0, 1])
    # W = f V with f depending on the fiber: the bracket is V+(f) V
    f = lambda x, g: g[..., 0, 0].real[:, None] if np.ndim(g) == 3 else np.array([[g[0, 0].real]])
    W = lambda x, g: f(x, g) * const_v(x, g)
    got = Al.action_bracket(patch, const_v, W)(x, g)
    vf = Al.directional(patch, f, x, g, np.concatenate([np.zeros((len(x), 2)), const_v(x, g)], 1))
    assert np.max(np.abs(got - vf * const_v(x, g))) < 1e-6


def test_jacobi_and_negative_control(alg):
    consts = [_sec(alg, ["0"] * 5, list(map(str, v))) for v in np.eye(3)]
    assert Al.jacobi_check(alg, triples=3, sections=consts).residual < 1e-12
    assert Al.jacobi_check(alg, triples=4, seed=2).passed
    bad = Al.jacobi_check(alg, triples=4, seed=2, corrupt=True)
    assert bad.residual > 0.1 and not bad.passed


def test_leibniz_anchor_and_equivariance(alg):
    assert Al.leibniz_check(alg, samples=5).passed
    assert Al.anchor_morphism_check(alg, samples=5).passed
    assert Al.bracket_equivariance_check(alg, samples=4).passed


def test_action_is_by_automorphisms(alg):
    rng = np.random.default_rng(0)
    g = SU2.random(rng, 10)
    V, W = SU2.random_algebra(rng, 10), SU2.random_algebra(rng, 10)
    lhs = alg.action.right(SU2.bracket(V, W), g)
    rhs = SU2.bracket(alg.action.right(V, g), alg.action.right(W, g))
    assert np.max(np.abs(lhs - rhs)) < 1e-8


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_right_action_on_fiber_composes(seed):
    # (V . g1) . g2 = V . (g1 g2)
    rng = np.random.default_rng(seed)
    act = A.adjoint(SU2)
    V = SU2.random_algebra(rng)
    g1, g2 = SU2.random(rng), SU2.random(rng)
    assert np.allclose(act.right(act.right(V, g1), g2), act.right(V, g1 @ g2), atol=1e-12)


def test_section_json_roundtrip(alg):
    s = _sec(alg, ["x", "0", "1", "0", "y"], ["1", "x*y", "0"])
    t = Al.section_from_json(alg, s.to_json())
    x, g = _pts(alg)
    assert np.allclose(s(x, g)[0], t(x, g)[0]) and np.allclose(s(x, g)[1], t(x, g)[1])
