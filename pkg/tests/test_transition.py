import numpy as np
import pytest

from pbglab import action as A
from pbglab import bundle as B
from pbglab import liegroup as L
from pbglab import transition as T
from pbglab.algebroid import TrivialPBGAlgebroid
from pbglab.connection import ConnectionForm

SU2 = L.su2()


@pytest.fixture(scope="module")
def plane():
    # E x SU(2) over the square: the algebroid is just the tangent bundle of the base
    E = L.trivial_group()
    patch = B.trivial_bundle(E, ("x", "y"), B.Domain.box([[-1, 1], [-1, 1]])).patch(0)
    return TrivialPBGAlgebroid(patch, A.trivial(E, SU2))


@pytest.fixture(scope="module")
def hopf_data():
    return T.hopf_transition_data()


@pytest.fixture(scope="module")
def three():
    return T.three_chart_transition_data()


def _form(alg, table):
    return ConnectionForm.from_exprs(alg, table)


def _const_alpha(M):
    return lambda x, g: np.broadcast_to(M, (np.atleast_2d(x).shape[0], 3, 3))


def test_mc_zero_form(plane):
    chi = _form(plane, [["0", "0"]] * 3)
    assert T.maurer_cartan_check(chi).residual == 0


def test_mc_flags_curved_form(plane):
    chi = _form(plane, [["0", "x"], ["0", "0"], ["0", "0"]])
    r = T.maurer_cartan_check(chi)
    assert abs(r.residual - 1.0) < 1e-6 and not r.passed


def test_mc_pure_gauge_passes(plane):
    # chi = d f E1 is closed and abelian
    chi = _form(plane, [["y", "x"], ["0", "0"], ["0", "0"]])
    assert T.maurer_cartan_check(chi).passed


def test_darboux_constant_alpha(plane):
    zero = _form(plane, [["0", "0"]] * 3)
    R = SU2.Ad_matrix(SU2.exp(np.array([0.3, -0.2, 0.5]))).real
    assert T.darboux_check(_const_alpha(R), zero).residual < 1e-9
    curved = _form(plane, [["1", "0"], ["0", "0"], ["0", "0"]])
    assert not T.darboux_check(_const_alpha(R), curved).passed


def test_darboux_exponential_alpha(plane):
    def alpha(x, g):
        x = np.atleast_2d(x)
        f = x[:, 0] * x[:, 1]
        return SU2.Ad_matrix(SU2.exp(np.stack([f, 0 * f, 0 * f], -1))).real
    chi = _form(plane, [["y", "x"], ["0", "0"], ["0", "0"]])
    r = T.darboux_check(alpha, chi)
    assert r.passed, r.residual
    # the other side also passes here since alpha commutes with ad(E1)
    wrong = _form(plane, [["x", "y"], ["0", "0"], ["0", "0"]])
    assert not T.darboux_check(alpha, wrong).passed


def test_hopf_transition_passes(hopf_data):
    results = {r.name: r for r in T.transition_checks(hopf_data, samples=20)}
    for name, r in results.items():
        assert r.passed or r.skipped, (name, r.residual)
    assert results["cocycle"].skipped


def test_three_chart_cocycle(three):
    r = T.cocycle_check(three, samples=20)
    assert not r.skipped and r.passed, r.residual
    assert r.details["literal_order_residual"] > 1e-2
    assert len(three.triples()) == 6


def test_alpha_inverse(three, hopf_data):
    assert T.alpha_checks(three, samples=20).passed
    assert T.alpha_checks(hopf_data, samples=20).passed


def test_fiber_perturbed_chi_is_flagged(hopf_data):
    data = T.TransitionData(hopf_data.bundle, hopf_data.action, dict(hopf_data.pairs))
    p = data.pairs[(0, 1)]
    base = p.chi

    def bent(x, g, v):
        out = base.omega(x, g, v)
        out[:, 0] += np.real(np.asarray(g)[:, 0, 0]) * v[:, 0]
        return out
    chi = ConnectionForm.from_form(p.algebroid, bent, "bent")
    data.pairs[(0, 1)] = T.TransitionPair(0, 1, chi, p.alpha, p.sampler)
    assert not T.equivariance_check(data, samples=20).passed


def test_build_from_flats_same_frame(plane):
    def k(x, g):
        x = np.atleast_2d(x)
        return SU2.exp(np.stack([x[:, 0], x[:, 1] ** 2, 0 * x[:, 0]], -1))
    th = T.flat_from_frame(plane, k)
    psi = T.lab_chart_from_frame(SU2, k)
    pair = T.build_from_flats(th, th, psi, psi)
    rng = np.random.default_rng(1)
    x, g = plane.random_points(rng, 10)
    v = rng.normal(size=(10, 2))
    assert np.max(np.abs(pair.chi.omega(x, g, v))) < 1e-12
    assert np.allclose(pair.alpha(x, g), np.eye(3))


def test_build_from_flats_rejects_curved(plane):
    curved = _form(plane, [["0", "x"], ["0", "0"], ["0", "0"]])
    flat = _form(plane, [["0", "0"]] * 3)
    eye = lambda x, g: np.broadcast_to(np.eye(3), (np.atleast_2d(x).shape[0], 3, 3))
    with pytest.raises(T.NotFlat):
        T.build_from_flats(curved, flat, eye, eye)


def test_opposite_conventions_fail(three):
    p = three.pair(0, 1)
    r = T.maurer_cartan_check(p.chi, sampler=p.sampler)
    assert r.passed and r.details["opposite_sign_residual"] > 1e-2
    d = T.darboux_check(p.alpha, p.chi, sampler=p.sampler)
    assert d.passed and d.details["left_side_residual"] > 1e-2
