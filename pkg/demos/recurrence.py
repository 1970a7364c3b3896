"""
Recurrent infection: long quiet stretches close to the uninfected state,
broken by short bursts.

Case 2 of the in-host model at B = 0.0572 sits between the transcritical
value and the Hopf point, where the upper state is an unstable focus. The
trajectory is written to CSV and the burst statistics are printed.
"""

import os
import tempfile

from epibif import IntegratorConfig, emit_trajectory, make_params, recurrence_metrics, simulate_and_classify

p = make_params("INHOST_CONVEX", A=0.71, B=0.0572, C=0.823, D=0.057)
traj, verdict = simulate_and_classify(p, [2.4, 0.5], IntegratorConfig(t_end=12000))
episodes, quiet = recurrence_metrics(traj)

print(f"Verdict: {verdict.kind}")
print(f"Bursts in the second half of the run: {episodes}")
print(f"Fraction of that time spent near the uninfected state: {quiet:.3f}")

out = os.path.join(tempfile.gettempdir(), "recurrence_case2.csv")
n = emit_trajectory(traj, out, every=10)
print(f"Wrote {n} samples to {out}")
