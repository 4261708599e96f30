import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pbglab import action as A
from pbglab import bundle as B
from pbglab import holonomy as Hol
from pbglab import liegroup as L
from pbglab.algebroid import TrivialPBGAlgebroid
from pbglab.connection import ConnectionForm, standard_flat

SU2 = L.su2()
E = L.trivial_group()
ABELIAN = [["0", "x"], ["0", "0"], ["0", "0"]]
FULL = [["0", "x"], ["y", "0"], ["0", "0"]]


def _alg(group=E, action=None, half=2.0):
    patch = B.trivial_bundle(group, ("x", "y"), B.Domain.box([[-half, half], [-half, half]])).patch(0)
    return TrivialPBGAlgebroid(patch, action or A.trivial(group, SU2))


@pytest.fixture(scope="module")
def plane():
    return _alg()


@pytest.fixture(scope="module")
def abelian(plane):
    return ConnectionForm.from_exprs(plane, ABELIAN, label="abelian")


def _rect(gamma, corner, sides, steps=512):
    path = Hol.rectangle(gamma.patch, [corner], E.identity(), (0, 1), sides)
    return Hol.hat(gamma, path, steps)[0]


def test_constant_path_is_identity(abelian):
    path = Hol.segment(abelian.patch, [[0.3, -0.1]], E.identity(), np.zeros(2))
    assert np.allclose(Hol.hat(abelian, path, 8)[0], np.eye(2), atol=1e-14)


def test_flat_connection_is_trivial(plane):
    h = _rect(standard_flat(plane), [0.0, 0.0], (1.0, 1.0))
    assert np.allclose(h, np.eye(2), atol=1e-14)


def test_unit_square(abelian):
    h = _rect(abelian, [0.0, 0.0], (1.0, 1.0))
    assert np.allclose(SU2.log(h), [-1, 0, 0], atol=1e-10)
    assert np.allclose(h, SU2.exp(np.array([-1.0, 0, 0])), atol=1e-10)


@settings(max_examples=15, deadline=None)
@given(a=st.floats(0.05, 1.5), b=st.floats(0.05, 1.5))
def test_rectangle_area(abelian, a, b):
    # enclosed flux of x dy E1 is a b
    h = _rect(abelian, [0.0, 0.0], (a, b), steps=64)
    assert np.allclose(SU2.log(h), [-a * b, 0, 0], atol=1e-9)


def test_degenerate_rectangle(abelian):
    assert np.allclose(_rect(abelian, [0.2, 0.1], (0.0, 1.0)), np.eye(2), atol=1e-13)


def test_reversal_and_concatenation(plane):
    gamma = ConnectionForm.from_exprs(plane, FULL)
    rng = np.random.default_rng(3)
    c1 = Hol.random_curves(plane.patch, rng, 4)
    c2 = Hol.random_curves(plane.patch, rng, 4, start=c1.end())
    h1, h2 = Hol.hat(gamma, c1, 256), Hol.hat(gamma, c2, 256)
    assert np.allclose(Hol.hat(gamma, c1.reverse(), 256) @ h1, np.eye(2), atol=1e-9)
    assert np.allclose(Hol.hat(gamma, Hol.concat([c1, c2]), 512), h2 @ h1, atol=1e-9)


def test_lift_axioms_small():
    alg = _alg(SU2, A.adjoint(SU2), half=1.0)
    table = [["0", "x", "0", "0", "0"], ["y", "0", "0", "0", "0"], ["0"] * 5]
    gamma = ConnectionForm.from_exprs(alg, table, extension="equivariant")
    r = Hol.lift_properties_check(gamma, steps=128, size=3)
    assert r.passed, r.details


def test_rk4_order(plane):
    r = Hol.convergence_check(ConnectionForm.from_exprs(plane, FULL))
    assert r.passed and min(r.details["ratios"]) >= 8


def test_not_a_loop(abelian):
    with pytest.raises(Hol.NotALoop):
        Hol.loop_holonomy(abelian, [0.0, 0.0], E.identity(), {"kind": "param", "coords": ["t", "0"]})
    with pytest.raises(Hol.NotALoop):
        Hol.loop_holonomy(abelian, [0.0, 0.0], E.identity(), {"kind": "spiral"})
    with pytest.raises(Hol.NotALoop):
        Hol.rectangle(abelian.patch, [[0, 0]], E.identity(), (0, 0), (1, 1))


def test_param_loop_matches_rectangle(abelian):
    # unit circle around the origin of radius 1/2 encloses flux pi/4
    loop = {"kind": "param", "coords": ["0.5*cos(2*pi*t) - 0.5", "0.5*sin(2*pi*t)"]}
    h = Hol.loop_holonomy(abelian, [0.0, 0.0], E.identity(), loop, steps=1024)
    assert np.allclose(SU2.log(h), [-np.pi / 4, 0, 0], atol=1e-6)


def test_path_leaves_chart(abelian):
    with pytest.raises(Hol.PathLeavesChart):
        _rect(abelian, [1.5, 0.0], (1.0, 1.0))


@pytest.mark.parametrize("table,dim", [([["0", "0"]] * 3, 0), (ABELIAN, 1), (FULL, 3)])
def test_ambrose_singer_dims(plane, table, dim):
    r = Hol.ambrose_singer_check(ConnectionForm.from_exprs(plane, table), expected_dim=dim)
    assert r.passed and r.details["holonomy_dim"] == dim == r.details["curvature_dim"]


def test_subspace_helpers():
    a = Hol.span([[1, 0, 0], [2, 0, 0]], 3)
    b = Hol.span([[1, 0, 0], [0, 1, 0]], 3)
    assert a.dim == 1 and b.dim == 2
    assert Hol.contained(a, b) < 1e-12
    assert Hol.contained(b, a) > 0.5
    assert Hol.compare_subspaces(a, b) == float("inf")
    assert Hol.bracket_closure(b, SU2).dim == 3
