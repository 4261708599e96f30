"""Numerical checks of the SU(2) -> S^2 Hopf example and its Z2 quotient."""
from __future__ import annotations

import numpy as np

from . import liegroup as lg
from .result import CheckResult, merge


def fiber_invariance_check(samples: int = 1000, seed: int = 0, tol: float = 1e-12) -> CheckResult:
    """hopf_project(q (z, 0)) = hopf_project(q) for random q in SU(2), z in U(1)."""
    rng = np.random.default_rng(seed)
    G = lg.su2()
    q = G.random(rng, samples)
    z = np.exp(1j * rng.uniform(-np.pi, np.pi, samples))
    moved = q @ lg.u1_in_su2(z)
    res = float(np.max(np.abs(lg.hopf_project(moved) - lg.hopf_project(q))))
    on_sphere = float(np.max(np.abs(np.linalg.norm(lg.hopf_project(q), axis=-1) - 1.0)))
    return merge("hopf-fiber-invariance", {"invariance": res, "on-sphere": on_sphere}, tol,
                 "p(q z) = p(q)", samples=samples)


def su2_so3_homomorphism_check(samples: int = 100, seed: int = 0, tol: float = 1e-10) -> CheckResult:
    """phi(q1 q2) = phi(q1) phi(q2), phi(q) in SO(3), phi(-q) = phi(q)."""
    rng = np.random.default_rng(seed)
    G = lg.su2()
    q1, q2 = G.random(rng, samples), G.random(rng, samples)
    A1, A2 = lg.su2_to_so3(q1), lg.su2_to_so3(q2)
    hom = float(np.max(np.abs(lg.su2_to_so3(q1 @ q2) - A1 @ A2)))
    member = lg.so3().membership_residual(A1.astype(complex))
    sign = float(np.max(np.abs(lg.su2_to_so3(-q1) - A1)))
    return merge("su2-so3-homomorphism", {"homomorphism": hom, "membership": member, "kernel-sign": sign}, tol,
                 "phi(q1 q2) = phi(q1) phi(q2)", samples=samples)


def u1_so2_kernel_check(grid: int = 720, samples: int = 1000, seed: int = 0, tol: float = 1e-12) -> CheckResult:
    """The kernel of z -> rotation by 2 arg z is exactly {1, -1}.

    A uniform angle grid containing 0 and pi is scanned for elements mapped
    to the identity; random angles check the homomorphism property.
    """
    rng = np.random.default_rng(seed)
    theta = np.linspace(-np.pi, np.pi, grid + 1)[1:]
    z = np.exp(1j * theta)
    dist = np.max(np.abs(lg.u1_to_so2(z) - np.eye(2)), axis=(-2, -1))
    kernel = sorted({complex(np.round(v.real, 9), np.round(v.imag, 9)) for v in z[dist < 1e-12]},
                    key=lambda c: c.real)
    expected = [complex(-1, 0), complex(1, 0)]
    found = len(kernel) == 2 and all(abs(a - b) < 1e-9 for a, b in zip(kernel, expected))
    a = np.exp(1j * rng.uniform(-np.pi, np.pi, samples))
    b = np.exp(1j * rng.uniform(-np.pi, np.pi, samples))
    hom = float(np.max(np.abs(lg.u1_to_so2(a * b) - lg.u1_to_so2(a) @ lg.u1_to_so2(b))))
    return merge("u1-so2-kernel", {"kernel": 0.0 if found else 1.0, "homomorphism": hom}, tol,
                 "ker(U1 -> SO2) = {+1, -1}",
                 kernel=[[k.real, k.imag] for k in kernel])
