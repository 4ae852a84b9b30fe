"""Dense finite-matrix ground truth for purely atomic measures.

On an atomic measure the operator is exactly the block matrix of
:func:`~dissim.operator_model.assemble`.  Working in the orthonormal
coordinates ``W^{1/2} f`` turns the weighted adjoint into the conjugate
transpose, so characteristic function, resolvent and Jordan structure are
plain dense linear algebra.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, SingularityError
from .measure import Measure
from .operator_model import OperatorSpec, assemble

__all__ = [
    "OracleResult",
    "direct_char_fn",
    "direct_resolvent",
    "direct_det",
    "normal_similarity_check",
    "oracle_eigenvalues",
    "example_3_11",
]

NORMAL_RTOL = 1e-10
EIG_CLUSTER_TOL = 1e-9
NULL_RTOL = 1e-8


def _normalized(spec: OperatorSpec):
    A = assemble(spec)
    s = np.sqrt(A.w)
    Ah = A.normalized()
    C = spec.c.reshape(-1, spec.r) * s[:, None]
    return Ah, C


def direct_char_fn(spec: OperatorSpec, z: complex) -> np.ndarray:
    """``I + i c^* (A^* - z)^{-1} c`` by a dense solve (r x r)."""
    z = complex(z)
    Ah, C = _normalized(spec)
    M = Ah.conj().T - z * np.eye(Ah.shape[0])
    if np.linalg.cond(M) > 1e12:
        raise SingularityError(f"A^* - z is singular at z={z}", z=z)
    return np.eye(spec.r) + 1j * C.conj().T @ np.linalg.solve(M, C)


def direct_det(spec: OperatorSpec, z: complex) -> complex:
    return complex(np.linalg.det(direct_char_fn(spec, z)))


def direct_resolvent(spec: OperatorSpec, z: complex, h) -> np.ndarray:
    """``(A^* - z)^{-1} h`` for node-sampled ``h`` of shape (N, n)."""
    z = complex(z)
    N, n = spec.measure.n_nodes, spec.n
    h = np.asarray(h, dtype=complex).reshape(N, n)
    A = assemble(spec).adjoint()
    M = A.matrix - z * np.eye(A.dim)
    if np.linalg.cond(M) > 1e12:
        raise SingularityError(f"A^* - z is singular at z={z}", z=z)
    return np.linalg.solve(M, h.ravel()).reshape(N, n)


@dataclass(frozen=True)
class OracleResult:
    """Eigen-structure of the matrix model.

    ``eigenvalues`` are cluster centres with algebraic and geometric
    multiplicities; ``condition`` is the condition number of an eigenvector
    basis (orthonormal inside each eigenspace), infinite when the matrix is
    not diagonalizable.
    """

    eigenvalues: np.ndarray
    algebraic: np.ndarray
    geometric: np.ndarray
    diagonalizable: bool
    condition: float
    normal: bool
    normality_defect: float


def oracle_eigenvalues(spec: OperatorSpec) -> np.ndarray:
    """Eigenvalues of the block-triangular matrix, read from its diagonal blocks."""
    m = spec.measure
    out = []
    for i in range(m.n_nodes):
        D = spec.alpha[i] + 0.5j * m.masses[i] * (spec.c[i] @ spec.c[i].conj().T)
        out.extend(np.linalg.eigvals(D))
    return np.array(out, complex)


def _clusters(ev, tol):
    order = np.argsort(ev.real, kind="stable")
    groups = []
    for i in order:
        for g in groups:
            if np.min(np.abs(ev[g] - ev[i])) <= tol:
                g.append(i)
                break
        else:
            groups.append([i])
    return groups


def normal_similarity_check(spec: OperatorSpec) -> OracleResult:
    """Diagonalizability, eigenbasis conditioning and normality of the model."""
    Ah, _ = _normalized(spec)
    dim = Ah.shape[0]
    nrm = np.linalg.norm(Ah, 2) if dim else 0.0
    defect = float(np.linalg.norm(Ah @ Ah.conj().T - Ah.conj().T @ Ah, 2)) if dim else 0.0
    normal = defect <= NORMAL_RTOL * max(nrm, 1e-300) ** 2 or defect == 0.0
    ev = oracle_eigenvalues(spec)
    scale = max(1.0, nrm)
    groups = _clusters(ev, EIG_CLUSTER_TOL * scale)
    centres, alg, geo, basis = [], [], [], []
    for g in groups:
        lam = complex(np.mean(ev[g]))
        _, s, Vh = np.linalg.svd(Ah - lam * np.eye(dim))
        null = s <= NULL_RTOL * scale
        centres.append(lam)
        alg.append(len(g))
        geo.append(int(null.sum()))
        basis.append(Vh[null].conj().T)
    alg, geo = np.array(alg, int), np.array(geo, int)
    diag = bool(np.all(geo >= alg))
    cond = np.inf
    if diag:
        V = np.concatenate(basis, axis=1) if basis else np.zeros((0, 0))
        cond = float(np.linalg.cond(V)) if V.size else 1.0
    return OracleResult(np.array(centres, complex), alg, np.minimum(geo, alg), diag, cond,
                        bool(normal), defect)


def example_3_11(n_points: int, masses=None, weights=2.0, alphas=0.0, positions=None) -> OperatorSpec:
    """Normal operator with a diagonal kernel ``k(x_n, x_m) = w_n delta_{nm}``.

    Scalar ``H``; the auxiliary space has dimension ``n_points`` and
    ``c(x_m) = sqrt(w_m) e_m``.  The matrix model is diagonal with entries
    ``alpha_n + (i/2) w_n mu_n``.  The defaults ``mu_n = 1/n^2``, ``w_n = 2``,
    ``alpha_n = 0`` give eigenvalues ``i / n^2`` clustering at 0.

    Parameters
    ----------
    masses, weights, alphas : scalar or array_like of length ``n_points``
    positions : array_like, optional
        Atom positions; equally spaced in (0, 1) by default.
    """
    N = int(n_points)
    if N < 1:
        raise InputError("n_points must be positive")
    n = np.arange(1, N + 1)
    mu = 1.0 / n**2 if masses is None else np.broadcast_to(np.asarray(masses, float), (N,))
    w = np.broadcast_to(np.asarray(weights, float), (N,))
    a = np.broadcast_to(np.asarray(alphas, float), (N,))
    if np.any(mu <= 0):
        raise InputError("masses must be positive")
    if np.any(w < 0):
        raise InputError("weights must be nonnegative")
    x = np.arange(1, N + 1) / (N + 1) if positions is None else np.asarray(positions, float)
    m = Measure.atomic(x, mu)
    c = np.zeros((N, 1, N), complex)
    c[np.arange(N), 0, np.arange(N)] = np.sqrt(w)
    return OperatorSpec.from_arrays(m, a.reshape(N, 1, 1), c)
