"""
Hopf points along the in-host branch and their normal-form classification.

For each value of A the scan walks the infected branch, finds where the
trace of the Jacobian vanishes and separates genuine Hopf points from
neutral saddles. At every Hopf point the crossing speed d and the cubic
coefficient a fix the direction of the bifurcation.
"""

from epibif import find_hopf, hopf_data, make_params

print(f"{'A':>5} {'B_H':>9} {'Y_H':>8} {'d':>10} {'a':>12}  class  cycle")
for A in (0.8, 0.71, 0.6, 0.07, 0.06, 0.05, 0.04, 0.03):
    p = make_params("INHOST_CONVEX", A=A, B=0.036, C=0.823, D=0.057)
    points = find_hopf(p)
    if not points:
        print(f"{A:5.2f}  no Hopf points; the upper state stays stable")
    for b in points:
        if b.kind != "hopf":
            print(f"{A:5.2f} {b.param_value:9.6f} {b.state[1]:8.5f}  neutral saddle (real eigenvalues of opposite sign)")
            continue
        h = hopf_data(p, b)
        print(f"{A:5.2f} {h.param_value:9.6f} {b.state[1]:8.5f} {h.d:10.5f} {h.a:12.4e}  {h.hopf_class:5s}  {h.cycle_stability}")
