"""
The reduced autoimmune model: transcritical point, fold and Hopf point in the
antigen-presenting-cell activation rate lambda_E, followed by a recurrent run
past the Hopf point.

The 3-D system has no planar normal form here, so the direction of the Hopf
bifurcation is decided by simulation: amplitudes on the unstable side are
compared at two distances from the Hopf point.
"""

from epibif import find_hopf, find_transcritical, simulate_and_classify, simulation_probe, turning_point
from epibif.report import table_params

p = table_params("AUTO", 1)
print(f"Transcritical point: lambda_E = {find_transcritical(p).param_value:.4f}")
tp = turning_point(p)
print(f"Fold: lambda_E = {tp.param_value:.4f} with A = {tp.state[0]:.4f} (negative branch)")
hopf = next(b for b in find_hopf(p) if b.kind == "hopf")
print(f"Hopf: lambda_E = {hopf.param_value:.4f}, A = {hopf.state[0]:.4f}, omega = {hopf.omega_c:.4f}")

probe = simulation_probe(p, hopf)
print(f"Simulation probe: {probe.criticality} (amplitude exponent {probe.exponent:.3f})")

q = p.replace(lambda_E=hopf.param_value + 1000)
_, v = simulate_and_classify(q, [1.0, 1.0, 1.0])
print(f"lambda_E = {q.lambda_E:.1f}: {v.kind} with {v.episodes} bursts")
