"""The characteristic function of a dissipative integral operator.

Start from a single atom, where everything is a Blaschke factor, then add a
continuous part and watch the determinant pick up an outer factor.
"""
import numpy as np

from dissim import char_fn, det_char_fn, direct_char_fn, factorize
from dissim.families import lebesgue_spec, one_atom

# One atom of mass 1 with k = 2: the operator is multiplication by i, and
# S(z) = (z - i) / (z + i) vanishes exactly at the eigenvalue.
spec = one_atom()
for z in (2j, 1 + 1j, 1j):
    s = char_fn(spec, z)
    print(f"one atom      z = {z:>6}: S = {s.S[0, 0]:.6f}, tr(I - S^*S) = {s.trace_defect:.6f}")

# Lebesgue measure on [0, 1] with alpha(x) = x and c = 1.  There are no
# eigenvalues, so det S has no zeros; its modulus at z = i is exp(-pi / 4).
spec = lebesgue_spec()
d = det_char_fn(spec, 1j)
print(f"\nLebesgue      det S(i) = {d:.10f}, |det| = {abs(d):.10f}, exp(-pi/4) = {np.exp(-np.pi / 4):.10f}")
print(f"              sweep  S(i) = {char_fn(spec, 1j).S[0, 0]:.10f}")

# Adding an atom multiplies the determinant by its Blaschke factor.
mixed = lebesgue_spec(atoms=[(0.5, 0.8)])
z = 0.3 + 0.6j
print(f"\nmixed         det S(z) = {det_char_fn(mixed, z):.10f}")
print(f"              sweep      = {np.linalg.det(char_fn(mixed, z).S):.10f}")

# The sweep splits S at any atom into (before) x (atom factor) x (after).
Sm, B, Sp = factorize(mixed, 0.5, z)
print(f"              S_- B S_+  = {(Sm @ B @ Sp)[0, 0]:.10f}")

# For purely atomic data the dense matrix model gives an independent check.
atomic = one_atom(k=3.0)
print(f"\ndense check   |sweep - dense| = {abs(char_fn(atomic, 0.2 + 0.7j).S - direct_char_fn(atomic, 0.2 + 0.7j)).max():.2e}")
