"""Deciding the density condition for continuous and atomic parts.

The continuous part is bounded when its density is, and the bin-halving
ladder detects a density that blows up.  For atoms the windowed sums of
k-mass over Carleson boxes play the same role.
"""
from dissim import nu_c_density, nu_dh_sup, verdict
from dissim.families import cluster_spec, lebesgue_spec, one_atom

for name, spec in [("alpha = x", lebesgue_spec()), ("alpha = x^2", lebesgue_spec(alpha=lambda x: x * x))]:
    res = nu_c_density(spec)
    v25, v26 = verdict(spec)
    print(f"{name:12s} nu_c sup = {res.sup:8.3f} ({res.status}, growth {res.growth:.3g}); verdict {v26.status}")

val, x0, h = nu_dh_sup(one_atom(k=1.0), return_argmax=True)
print(f"\nsingle atom  nu_dh sup = {val:.3f} at window centre {x0}, height {h}")
for N in (10, 40, 160):
    print(f"cluster N = {N:3d}: nu_dh sup = {nu_dh_sup(cluster_spec(N)):8.3f}")
