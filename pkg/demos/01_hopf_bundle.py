"""The Hopf fibration SU(2) -> S^2 by hand.

Run with ``python3 demos/01_hopf_bundle.py``.
"""
import numpy as np

from pbglab import groupoid, liegroup as lg

rng = np.random.default_rng(0)
G = lg.su2()

# %% A point of SU(2) and its image on the sphere
q = G.random(rng)
p = lg.hopf_project(q)
print("q =\n", np.round(q, 4))
print("p(q) =", np.round(p, 6), " |p(q)| =", np.linalg.norm(p))

# %% Moving along the fiber does not move the image
for theta in (0.3, 1.7, np.pi):
    z = np.exp(1j * theta)
    print(f"theta {theta:.2f}: drift {np.max(np.abs(lg.hopf_project(q @ lg.u1_in_su2(z)) - p)):.1e}")

# %% SU(2) covers SO(3) twice
R = lg.su2_to_so3(q)
print("R R^T = I:", np.allclose(R @ R.T, np.eye(3)), " phi(-q) = phi(q):", np.allclose(lg.su2_to_so3(-q), R))

# %% and U(1) covers SO(2) twice: the kernel is {+1, -1}
for z in (1, -1, 1j):
    print(z, "->", (np.round(lg.u1_to_so2(np.array([z]))[0], 3) + 0.0).tolist())

# %% Gauge classes <g1, g2> against the action groupoid of SU(2) on SU(2)/{+-1}
g1, g2 = G.random(rng), G.random(rng)
k, m = groupoid.gauge_to_action_iso(g1, g2, "Z2", G)
k2, m2 = groupoid.gauge_to_action_iso(-g1, -g2, "Z2", G)
print("same image for <g1, g2> and <-g1, -g2>:", np.allclose(k, k2) and np.allclose(m, m2))
