"""Characteristic function, its determinant, factorizations and kernels.

``S_A(z) = G(0, z)``, so everything here is read off Cauchy-problem sweeps.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cauchy import DEFAULT_TOL, _K_batch, _node_eig, solve_G, sweep_chunks
from .errors import InputError, SingularityError, UnsupportedFormError
from .operator_model import OperatorSpec, atom_eigenvalues, point_spectrum

__all__ = [
    "CharSample",
    "char_fn",
    "char_fn_batch",
    "blaschke_factor",
    "det_char_fn",
    "factorize",
    "chain_factorize",
    "atom_factor",
    "kernel_at",
    "cluster_points",
    "CLUSTER_TOL",
    "KERNEL_SV_TOL",
]

CLUSTER_TOL = 1e-9
KERNEL_SV_TOL = 1e-7


@dataclass(frozen=True)
class CharSample:
    """``S_A(z)`` with its determinant and trace defect ``tr(I - S^* S)``."""

    z: complex
    S: np.ndarray
    det: complex
    trace_defect: float


def _sample(z, S):
    return CharSample(complex(z), S, complex(np.linalg.det(S)),
                      float(S.shape[0] - np.sum(np.abs(S) ** 2)))


def char_fn(spec: OperatorSpec, z: complex, tol: float = DEFAULT_TOL, method: str = "auto") -> CharSample:
    """Characteristic function at ``z`` as the value ``G(0, z)``."""
    return _sample(z, solve_G(spec, z, tol, method).G0)


def char_fn_batch(spec: OperatorSpec, zs, tol: float = DEFAULT_TOL, method: str = "auto") -> np.ndarray:
    """``S_A(z)`` for an array of ``z``, shape (len(zs), r, r)."""
    zs = np.atleast_1d(np.asarray(zs, complex))
    out = np.empty((len(zs), spec.r, spec.r), complex)
    for idx, pb in sweep_chunks(spec, zs, tol, method):
        out[idx] = pb.values[:, 0]
    return out


def blaschke_factor(z, w):
    """Elementary factor ``(w - z) / (w - conj z)`` vanishing at ``z``."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if np.any(z.imag <= 0):
        raise InputError("the zero of a Blaschke factor must lie in the upper half-plane")
    out = (w - z) / (w - z.conj())
    return complex(out) if out.ndim == 0 else out


def det_char_fn(spec: OperatorSpec, z: complex, normalized: bool = False) -> complex:
    """Determinant of ``S_A(z)`` from the spectral data.

    ``exp(i int tr[c^* (alpha - z)^{-1} c] dmu_c)`` times the Blaschke product
    over the atom eigenvalues ``z_j(x)``.  The product here is finite, so no
    convergence factors are needed and by default none are applied: the
    result then equals ``det S_A(z)`` exactly.  With ``normalized=True`` each
    factor is multiplied by ``exp(i phase_j)``, which makes it positive at
    ``z = i`` (the form that converges for infinite products); the two
    differ by a unimodular constant.

    Raises
    ------
    UnsupportedFormError
        If the measure has atoms and ``k(x, x)`` does not commute with
        ``alpha(x)``.
    """
    z = complex(z)
    if z.imag <= 0:
        raise InputError("z must lie in the upper half-plane")
    m = spec.measure
    if m.has_atoms and not spec.commutativity:
        raise UnsupportedFormError("the product form needs k(x,x) to commute with alpha(x)")
    out = 1.0 + 0j
    if m.has_continuous:
        lam, B = _node_eig(spec)
        idx = m.cont_nodes
        d = 1.0 / (lam[idx] - z)
        tr = np.einsum("xja,xj,xja->x", B[idx].conj(), d, B[idx])
        out *= np.exp(1j * np.sum(tr * m.nodes_w))
    sd = atom_eigenvalues(spec)
    if len(sd):
        b = blaschke_factor(sd.z, z)
        if normalized:
            b = b * np.exp(1j * sd.phase)
        out *= np.prod(b)
    return complex(out)


def atom_factor(spec: OperatorSpec, x: float, z: complex) -> np.ndarray:
    """``B_x(z) = [I + (i/2) mu_x K][I - (i/2) mu_x K]^{-1}`` with ``K = c^*(alpha - z)^{-1} c``."""
    i = spec.atom_index(x)
    lam, B = _node_eig(spec)
    K = _K_batch(lam[i], B[i], np.array([complex(z)]))[0]
    mu = spec.measure.masses[i]
    eye = np.eye(spec.r)
    return (eye + 0.5j * mu * K) @ np.linalg.inv(eye - 0.5j * mu * K)


def _atom_slot(spec, x):
    i = spec.atom_index(x)
    return int(np.nonzero(spec.measure.atom_nodes == i)[0][0])


def _inv_at(path, k):
    Y = path.inverse_values[k]
    if not np.all(np.isfinite(Y)):
        raise SingularityError(f"G(t, z) is singular at t={path.t[k]:.6g}", t=float(path.t[k]), z=path.z)
    return Y


def factorize(spec: OperatorSpec, x: float, z: complex, tol: float = DEFAULT_TOL):
    """Split ``S_A(z) = S_{x-} B_x S_{x+}`` at the atom ``x``.

    ``S_{x+} = G(phi(x+0))``, ``S_{x-} = G(0) G(phi(x-0))^{-1}`` and ``B_x`` is
    the closed-form atom factor.
    """
    path = solve_G(spec, z, tol)
    i0, _, i1 = path.atom_t[_atom_slot(spec, x)]
    return path.G0 @ _inv_at(path, i0), atom_factor(spec, x, z), path.values[i1]


def chain_factorize(spec: OperatorSpec, xs, z: complex, tol: float = DEFAULT_TOL) -> list:
    """Factors ``S_{x1-}, B_{x1}, S_{x1,x2}, B_{x2}, ..., B_{xn}, S_{xn+}`` (2n+1 matrices).

    ``S_{a,b} = G(phi(a+0)) G(phi(b-0))^{-1}``; their ordered product is ``S_A(z)``.
    """
    xs = [float(x) for x in xs]
    if not xs:
        raise InputError("at least one atom is required")
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise InputError("atoms must be given in increasing order")
    slots = [_atom_slot(spec, x) for x in xs]
    path = solve_G(spec, z, tol)
    at = path.atom_t
    out = [path.G0 @ _inv_at(path, at[slots[0]][0])]
    for k, x in enumerate(xs):
        out.append(atom_factor(spec, x, z))
        if k + 1 < len(xs):
            out.append(path.values[at[slots[k]][2]] @ _inv_at(path, at[slots[k + 1]][0]))
    out.append(path.values[at[slots[-1]][2]])
    return out


def cluster_points(z, tol: float = CLUSTER_TOL):
    """Group points within ``tol`` of each other; returns (centres, counts)."""
    z = np.asarray(z, dtype=complex)
    used = np.zeros(len(z), bool)
    centres, counts = [], []
    for i in np.argsort(z.real + 1e-3 * z.imag, kind="stable"):
        if used[i]:
            continue
        members = (~used) & (np.abs(z - z[i]) <= tol)
        # grow transitively so chains of near-equal points form one cluster
        while True:
            grown = (~used) & (np.min(np.abs(z[:, None] - z[members][None, :]), axis=1) <= tol)
            if grown.sum() == members.sum():
                break
            members = grown
        used |= members
        centres.append(complex(np.mean(z[members])))
        counts.append(int(members.sum()))
    return np.array(centres, complex), np.array(counts, int)


def _eigen_points(spec):
    if spec.commutativity:
        return atom_eigenvalues(spec).z
    return point_spectrum(spec)


def kernel_at(spec: OperatorSpec, lam: complex, tol: float = DEFAULT_TOL):
    """``(dim ker S_A(lam), multiplicity of lam, root_vector_free)``.

    The kernel dimension counts singular values of ``S_A(lam)`` below
    ``1e-7``; since ``S_A`` is a contraction this is relative to its norm
    bound 1.  The multiplicity is the number of eigenvalues within the
    clustering tolerance of ``lam``.
    """
    lam = complex(lam)
    pts = _eigen_points(spec)
    if len(pts) == 0:
        raise InputError("the operator has no eigenvalues in the upper half-plane")
    centres, counts = cluster_points(pts)
    j = int(np.argmin(np.abs(centres - lam)))
    if abs(centres[j] - lam) > CLUSTER_TOL:
        raise InputError(f"{lam} is not an eigenvalue")
    S = solve_G(spec, centres[j], tol).G0
    sv = np.linalg.svd(S, compute_uv=False)
    dim = int(np.sum(sv < KERNEL_SV_TOL))
    return dim, int(counts[j]), dim == int(counts[j])
