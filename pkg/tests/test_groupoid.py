import numpy as np
import pytest

from pbglab import action as A
from pbglab import bundle as B
from pbglab import groupoid as Gp
from pbglab import liegroup as L

SU2 = L.su2()
U1 = L.u1()


@pytest.fixture(scope="module")
def gpd():
    bundle = B.trivial_bundle(U1, ("x", "y"), B.Domain.box([[-1, 1], [-1, 1]]))
    return Gp.TrivialPBGGroupoid(bundle, A.conjugation(U1, SU2, A.circle_in_su2))


def _pt(x, z):
    return B.BundlePoint(0, np.array(x, float), np.array([[z]], complex))


def test_laws(gpd):
    assert Gp.groupoid_laws_check(gpd, samples=20).passed
    assert Gp.pbg_axioms_check(gpd).passed


def test_left_multiplication_is_not_a_pbg_action(gpd):
    bad = Gp.TrivialPBGGroupoid(gpd.bundle, Gp.broken_action(U1, SU2, A.circle_in_su2))
    r = Gp.pbg_axioms_check(bad)
    parts = r.details["residuals"]
    assert not r.passed and parts["product"] > 1e-3 and parts["identity"] > 1e-3
    # it is still an action, just not by automorphisms
    assert parts["action"] < 1e-12


def test_compose_and_act(gpd):
    u, v, w = _pt([0, 0], 1), _pt([0.5, 0.1], 1j), _pt([-0.2, 0.3], -1)
    h1, h2 = SU2.exp(np.array([0.1, 0.2, 0.3])), SU2.exp(np.array([-0.4, 0.0, 0.2]))
    a, b = Gp.GroupoidArrow(v, h1, u), Gp.GroupoidArrow(w, h2, v)
    ab = gpd.multiply(b, a)
    assert np.allclose(ab.label, h2 @ h1) and ab.source is u and ab.target is w
    with pytest.raises(Gp.NotComposable):
        gpd.multiply(a, a)
    g = np.array([[np.exp(0.4j)]])
    moved = gpd.act(a, g)
    assert np.allclose(moved.source.g, u.g @ g)
    assert np.allclose(gpd.multiply(gpd.act(b, g), moved).label, gpd.act(ab, g).label)


def test_gauge_iso():
    for sub in ("Z2", "U1", "trivial"):
        assert Gp.gauge_iso_check(subgroup=sub).passed, sub
    g = SU2.exp(np.array([0.3, 0.2, -0.1]))
    k, m = Gp.gauge_to_action_iso(g, g, "Z2", SU2)
    assert np.allclose(k, np.eye(2))
    assert np.allclose(Gp.coset_rep(-g, "Z2"), Gp.coset_rep(g, "Z2"))
    with pytest.raises(L.GroupMismatch):
        Gp.gauge_to_action_iso(L.element(SU2, g), L.element(L.so3(), np.eye(3)))
    with pytest.raises(Gp.GroupoidError):
        Gp.coset_rep(g, "Z3")


def test_frame_action():
    act = A.adjoint(SU2)
    assert Gp.frame_action_check(act).passed
    with pytest.raises(Gp.DimensionMismatch):
        Gp.frame_action(np.eye(2), SU2.identity(), act)


def test_hopf_local_sections():
    r = Gp.hopf_local_sections(steps=64).check(samples=6)
    assert r.residual < 1e-4, r.details
