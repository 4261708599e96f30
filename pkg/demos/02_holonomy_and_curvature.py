"""Holonomy of small loops recovers the curvature.

For omega = x dy E1 on the plane the curvature is constant, so every
rectangle of area A has holonomy exp(-A E1).  A non-abelian form fills the
whole of su(2).
"""
import numpy as np

from pbglab import action, bundle, holonomy as hol, liegroup as lg
from pbglab.algebroid import TrivialPBGAlgebroid
from pbglab.connection import ConnectionForm, curvature_tensor

E, SU2 = lg.trivial_group(), lg.su2()
patch = bundle.trivial_bundle(E, ("x", "y"), bundle.Domain.box([[-2, 2], [-2, 2]])).patch(0)
alg = TrivialPBGAlgebroid(patch, action.trivial(E, SU2))

abelian = ConnectionForm.from_exprs(alg, [["0", "x"], ["0", "0"], ["0", "0"]], label="abelian")
full = ConnectionForm.from_exprs(alg, [["0", "x"], ["y", "0"], ["0", "0"]], label="full")

# %% Curvature at the origin
x0, g0 = np.zeros((1, 2)), E.identity((1,))
x1 = np.array([[0.5, -0.3]])
print("Omega(dx, dy) abelian:", curvature_tensor(abelian, x1, g0)[0, 0, 1] + 0.0)
print("Omega(dx, dy) full:   ", curvature_tensor(full, x1, g0)[0, 0, 1] + 0.0)

# %% Rectangles [0, a] x [0, b]
for a, b in [(1, 1), (0.5, 1.8), (1.5, 0.2)]:
    h = hol.loop_holonomy(abelian, [0, 0], E.identity(),
                          {"kind": "rectangle", "plane": [0, 1], "sides": [a, b]}, steps=256)
    print(f"area {a * b:.2f}: log hol = {np.round(SU2.log(h), 10) + 0.0}")

# %% Error of RK4 against step count
path = hol.rectangle(patch, [[0.1, -0.2]], E.identity(), (0, 1), (1.0, 0.7))
ref = hol.hat(full, path, 4096)[0]
for n in (8, 16, 32, 64):
    print(f"{n:>3} steps: error {np.max(np.abs(hol.hat(full, path, n)[0] - ref)):.2e}")

# %% Ambrose-Singer: holonomy algebra against curvature span
for gamma in (abelian, full):
    r = hol.ambrose_singer_check(gamma)
    print(gamma.label, "holonomy dim", r.details["holonomy_dim"], "curvature dim", r.details["curvature_dim"])
