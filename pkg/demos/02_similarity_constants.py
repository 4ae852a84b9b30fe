"""Similarity constants for three small operators.

A normal operator against a Jordan block first: the resolvent-growth
constant C1 separates them.  Then eigenvalues crowding the real axis, which
the Carleson quantities flag.
"""
from dissim import ZGrid, carleson_sup, compute_report, sparse_constant
from dissim.families import cluster_points, cluster_spec, one_atom, two_atom

for name, spec in [("one atom", one_atom()), ("two atoms (Jordan)", two_atom())]:
    rep = compute_report(spec, ZGrid.for_spec(spec, 24, 24))
    print(f"{name:20s} C1 = {rep.C1:10.4g}  C2 = {rep.C2_trace:.4f}  C3 = {rep.C3:.4f}  "
          f"verdict = {rep.verdict_2_5.status}")

# Eigenvalues i / n^2: the Carleson sup grows without bound as points are added.
print("\ncluster i/n^2")
for N in (10, 40, 160):
    p = cluster_points(N)
    print(f"  N = {N:4d}: Carleson sup = {carleson_sup(p):8.3f}, pairwise sparsity = {sparse_constant(p):.3g}")

rep = compute_report(cluster_spec(30))
print(f"\ncluster_spec(30) verdict: {rep.verdict_2_6.status}")
for reason in rep.verdict_2_6.reasons:
    print("  ", reason)
