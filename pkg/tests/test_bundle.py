import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pbglab import bundle as B
from pbglab import liegroup as L

SU2 = L.su2()
seeds = st.integers(0, 2 ** 31)


def _point(rng):
    return B.BundlePoint(0, rng.uniform(-1, 1, 2), SU2.random(rng))


def test_right_action_examples():
    rng = np.random.default_rng(0)
    u = _point(rng)
    assert np.allclose(B.right_action(u, np.eye(2)).g, u.g)
    g = SU2.random(rng)
    back = B.right_action(B.right_action(u, g), SU2.inv(g))
    assert np.allclose(back.g, u.g) and np.allclose(back.x, u.x)
    with pytest.raises(L.GroupMismatch):
        B.right_action(u, np.eye(3))


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_right_action_associative(seed):
    rng = np.random.default_rng(seed)
    u, g1, g2 = _point(rng), SU2.random(rng), SU2.random(rng)
    a = B.right_action(B.right_action(u, g1), g2)
    b = B.right_action(u, g1 @ g2)
    assert np.allclose(a.g, b.g, atol=1e-12)


def test_tangent_right_action_vertical_example():
    rng = np.random.default_rng(1)
    u = _point(rng)
    X = B.TangentVec(u, np.zeros(2), np.array([1.0, 0, 0]))
    g = SU2.exp([0, 0, 0.4])
    Y = B.tangent_right_action(X, g, SU2)
    assert np.allclose(Y.xi, SU2.Ad(SU2.inv(g), [1, 0, 0]))
    assert np.allclose(B.tangent_right_action(X, np.eye(2), SU2).xi, X.xi)


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_tangent_right_action_composes_and_preserves_vertical(seed):
    rng = np.random.default_rng(seed)
    X = B.TangentVec(_point(rng), rng.normal(size=2), rng.normal(size=3))
    g1, g2 = SU2.random(rng), SU2.random(rng)
    a = B.tangent_right_action(B.tangent_right_action(X, g1, SU2), g2, SU2)
    b = B.tangent_right_action(X, g1 @ g2, SU2)
    assert np.allclose(a.xi, b.xi, atol=1e-12)
    v1 = B.vertical_component(B.tangent_right_action(X, g1, SU2))
    v2 = B.tangent_right_action(B.vertical_component(X), g1, SU2)
    assert np.max(np.abs(v1.frame - v2.frame)) < 1e-10


def test_vertical_component():
    rng = np.random.default_rng(2)
    u = _point(rng)
    X = B.TangentVec(u, np.zeros(2), np.array([0.3, 0.1, -0.2]))
    assert np.allclose(B.vertical_component(X).frame, X.frame)
    H = B.TangentVec(u, np.array([1.0, 2.0]), np.zeros(3))
    assert np.allclose(B.vertical_component(H).frame, 0)
    Z = B.TangentVec(u, np.array([1.0, 2.0]), np.array([0.3, 0.1, -0.2]))
    once = B.vertical_component(Z)
    assert np.allclose(B.vertical_component(once).frame, once.frame)


def test_patch_flow_and_tangent_action_agree():
    # flowing then translating equals translating then flowing along TR_g v
    patch = B.trivial_bundle(SU2, ("x", "y"), B.Domain.box([[-1, 1], [-1, 1]])).patch(0)
    rng = np.random.default_rng(3)
    x, g = patch.random_points(rng, 5)
    v = rng.normal(size=(5, 5))
    k = SU2.random(rng)
    x1, g1 = patch.flow(x, g, v, 0.1)
    x2, g2 = patch.flow(x, g @ k, patch.tangent_right_action(v, k), 0.1)
    assert np.allclose(x1, x2) and np.allclose(g1 @ k, g2, atol=1e-12)


def test_hopf_bundle_cocycle_and_sections():
    hb = B.build_hopf()
    rep = hb.cocycle_check(samples=200)
    assert rep["max_residual"] < 1e-8
    assert hb.clutching_offdiag(hb.sample_overlap(np.random.default_rng(0), 100, 0, 1)) < 1e-12
    # the section over the chart center projects to the north pole
    assert np.allclose(L.hopf_project(hb.section(0, [0.0, 0.0])), [[0, 0, 1]])
    assert np.allclose(hb.base_point(1, [0.0, 0.0]), [[0, 0, -1]])


def test_hopf_points_roundtrip_through_su2():
    hb = B.build_hopf()
    rng = np.random.default_rng(5)
    q = SU2.random(rng, 50)
    x, g = hb.from_su2(0, q)
    assert np.allclose(hb.to_su2(0, x, g), q, atol=1e-10)


def _three_chart(gij02):
    box = {"box": [[-1, 1], [-1, 1]]}
    return {
        "base_dim": 2,
        "charts": [{"name": n, "domain": box} for n in "ABC"],
        "overlaps": [
            {"i": "A", "j": "B", "gij": [[["cos(x)", "sin(x)"]]]},
            {"i": "B", "j": "C", "gij": [[["cos(y)", "sin(y)"]]]},
            {"i": "A", "j": "C", "gij": gij02},
        ],
    }


def test_bundle_from_json_cocycle():
    good = B.bundle_from_json(_three_chart([[["cos(x+y)", "sin(x+y)"]]]), L.u1())
    assert good.cocycle_check()["triple"] < 1e-12
    with pytest.raises(B.CocycleFailure):
        B.bundle_from_json(_three_chart([[["1", "0"]]]), L.u1())


def test_domains_and_out_of_chart():
    box = B.Domain.box([[0, 1], [2, 4]])
    assert np.allclose(box.mid, [0.5, 3])
    ball = B.Domain.ball([1, 1], 2.0)
    assert ball.contains(np.array([[1.0, 2.5]]))[0] and not ball.contains(np.array([[4.0, 1.0]]))[0]
    with pytest.raises(B.BundleError):
        B.domain_from_json({"box": [[0, 1]]}, 2)
