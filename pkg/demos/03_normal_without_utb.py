"""A normal operator whose trace defect is not uniformly bounded.

Atoms at masses 1/n^2 with one-dimensional kernels in orthogonal directions
give a normal operator (orthonormal eigenbasis, condition number 1), yet the
uniform bound on tr(I - S^*S) fails: it grows with the number of atoms.
"""
from dissim import ZGrid, compute_report, example_3_11, normal_similarity_check

for N in (5, 10, 20, 40):
    spec = example_3_11(N)
    chk = normal_similarity_check(spec)
    rep = compute_report(spec, ZGrid.for_spec(spec, 16, 16), analyses=["utb"])
    print(f"N = {N:3d}: normal = {chk.normal}, eigenbasis cond = {chk.condition:.6f}, "
          f"sup tr(I - S^*S) = {rep.C2_trace:8.3f}")
