"""
Backward bifurcation in the convex in-host model.

Below the transcritical value B_S = D the uninfected state is stable, yet for
A = 0.8 a second stable infected state already exists: which one the system
settles on depends on where it starts.
"""

from epibif import all_equilibria, find_transcritical, make_params, stability, turning_point
from epibif.odesim import bistability_probe

p = make_params("INHOST_CONVEX", A=0.8, B=0.036, C=0.823, D=0.057)

print("Transcritical point:", find_transcritical(p).param_value)
tp = turning_point(p)
print(f"Fold of the infected branch: B_T = {tp.param_value:.4f}, Y_T = {tp.state[1]:.4f}")
print("The fold sits at negative B, so the two infected states already coexist below B_S.\n")

print(f"Equilibria at B = {p.B}:")
for eq in all_equilibria(p):
    st = stability(p, eq.state)
    print(f"  {eq.branch:15s} X = {eq.state[0]:10.6f}  Y = {eq.state[1]:.7f}  {st.kind}")

print("\nTwo runs, one from a nearly uninfected state and one near the upper state:")
res = bistability_probe(p, [[17.5, 0.001], [2.233, 0.873]])
eqs = all_equilibria(p)
for ic, v in res.verdicts:
    print(f"  start {ic} -> {eqs[v.equilibrium_index].branch}")
print("Bistable:", res.bistable)
