"""Transition data on the Hopf bundle from two flat frames.

Each chart carries an SU(2)-valued frame; the pair (chi, alpha) between
the charts must solve the Maurer-Cartan equation and the Darboux equation.
Reversing either sign convention breaks both.
"""
from pbglab import io, transition as tr
from pbglab.cli import shipped_spec

data = tr.hopf_transition_data()
p = data.pair(0, 1)

mc = tr.maurer_cartan_check(p.chi, sampler=p.sampler)
print(f"d chi - [chi, chi]: {mc.residual:.2e}   with the other sign: {mc.details['opposite_sign_residual']:.2f}")

db = tr.darboux_check(p.alpha, p.chi, sampler=p.sampler)
print(f"right Darboux: {db.residual:.2e}   left: {db.details['left_side_residual']:.2f}")

eq = tr.equivariance_check(data)
print(f"chi and alpha under the U(1) action: {eq.residual:.2e}")

# %% Three charts give genuine triple overlaps
three = tr.three_chart_transition_data()
cc = tr.cocycle_check(three)
print(f"cocycle on {cc.details['triples']} ordered triples: {cc.residual:.2e}")

# %% The same checks through an experiment file
report = io.run_spec(io.load_spec(shipped_spec("transition-pipeline.json")))
for line in io.summary_lines(report):
    print(line)
