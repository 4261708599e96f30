import numpy as np
from hypothesis import given, settings, strategies as st

from pbglab import hopf
from pbglab import liegroup as L

SU2 = L.su2()


def test_checks_pass():
    assert hopf.fiber_invariance_check(samples=1000).residual < 1e-12
    assert hopf.su2_so3_homomorphism_check().residual < 1e-10
    r = hopf.u1_so2_kernel_check()
    assert r.passed and r.details["kernel"] == [[-1.0, 0.0], [1.0, 0.0]]


def test_projection_examples():
    assert np.allclose(L.hopf_project(np.eye(2)), [0, 0, 1])
    # t = 1 lands on the south pole
    assert np.allclose(L.hopf_project(L.su2_from_entries(0, 1)), [0, 0, -1])


@settings(max_examples=30, deadline=None)
@given(st.floats(-np.pi, np.pi), st.integers(0, 2**31))
def test_projection_is_fiberwise(theta, seed):
    q = SU2.random(np.random.default_rng(seed))
    z = np.exp(1j * theta)
    assert np.allclose(L.hopf_project(q @ L.u1_in_su2(z)), L.hopf_project(q), atol=1e-12)
    assert abs(np.linalg.norm(L.hopf_project(q)) - 1) < 1e-12


def test_so3_image_is_rotation():
    q = SU2.exp(np.array([0.0, 0.0, np.pi / 2]))
    R = L.su2_to_so3(q)
    assert np.allclose(R @ R.T, np.eye(3)) and np.isclose(np.linalg.det(R), 1)
    assert np.allclose(L.su2_to_so3(-q), R)
